#pragma once

#include <Eigen/Dense>

#include "lscp/common.hpp"
#include "lscp/optim.hpp"
#include "lscp/tvar.hpp"

namespace lscp {

// Conditional Gaussian log-density of X_t given its p lags under the
// segment model, -inf when sigma(t/T) <= sigma_min. t is 1-based; t > p.
double loglik_point(const SegmentParams& seg, const TimeSeries& x, long t);

// Sum of loglik_point over t = a + p + 1 .. b (the first p points of the
// range (a, b] are conditioned on).
double loglik_segment(const SegmentParams& seg, const TimeSeries& x, long a, long b);

double loglik_kink_point(const KinkParams& eta, const TimeSeries& x, long t);
double loglik_chain_point(const KinkChain& chain, const TimeSeries& x, long t);

// Sum over t = a+1 .. b with lags carried across the interior kinks
// (t <= p skipped when the range starts at the series head).
double loglik_kink_chain(const KinkChain& chain, const TimeSeries& x, long a, long b);

struct SegmentFit {
    SegmentParams params;
    double loglik = kNegInf;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    bool stable = true;  // post-hoc check of the fitted AR curves
};

// Maximum conditional Gaussian likelihood fit of a tvAR(p) segment with
// degree-q curves on the range (a, b]; u = t/T with T the full series
// length. Deterministic (least-squares start plus seeded perturbations).
SegmentFit fit_segment(const TimeSeries& x, long a, long b, int p, int q,
                       const OptimizerConfig& config = {});

struct ChainFit {
    KinkChain chain;
    double loglik = kNegInf;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
};

// Fit the reparametrized kink-chain model with the kink locations held
// fixed at layout.taus; only curve parameters are optimized.
ChainFit fit_kink_chain(const TimeSeries& x, const KinkChain& layout,
                        const OptimizerConfig& config = {});

// Internal linear-basis machinery, exposed for the derivative checks and
// the refinement stage.

// Free-parameter vector layout for a chain: anchors first (gamma_k then
// xi_k for k = 0..g-1), then per-segment coefficient blocks column-major
// (phi rows then beta) in segment order.
Eigen::VectorXd chain_pack(const KinkChain& chain);
KinkChain chain_unpack(const KinkChain& layout, const Eigen::VectorXd& theta);

// Basis rows such that phi_i(t/T) = phi_basis.row(i) . theta and
// sigma(t/T) = sigma_basis . theta.
void chain_basis(const KinkChain& layout, double u, Eigen::MatrixXd& phi_basis,
                 Eigen::VectorXd& sigma_basis);

// Likelihood of y_t | regressors with phi_t = R.row(t) . theta and
// sigma_t = D.row(t) . theta; shared by segment and chain fitting.
struct LinearGaussProblem {
    Eigen::MatrixXd R;  // n x z
    Eigen::MatrixXd D;  // n x z
    Eigen::VectorXd y;  // n

    double value(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
};

}  // namespace lscp
