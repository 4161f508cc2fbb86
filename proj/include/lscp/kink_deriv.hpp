#pragma once

#include <Eigen/Dense>

#include "lscp/common.hpp"
#include "lscp/tvar.hpp"

namespace lscp {

// Single-kink model with equal orders p, q on both sides, in the flat
// parameter ordering used for refinement and the sandwich covariance:
//   eta = (gamma_1..gamma_p, xi,
//          alpha_left (i-major, j = 1..q), beta_left,
//          alpha_right, beta_right, r)
// so r sits in the last slot and z = p + 1 + 2pq + 2q + 1.
long kink_eta_size(int p, int q);
Eigen::VectorXd pack_eta(const KinkParams& params);
KinkParams unpack_eta(const Eigen::VectorXd& eta, int p, int q);

// Log-density of X_t | lags under the eta parametrization. u = t / T with
// T passed explicitly (the series may be a window of a longer record).
double kink_loglik_point(const KinkParams& params, const TimeSeries& x, long t, long T);

// Analytic first and second derivatives of the pointwise log-likelihood
// with respect to eta. At t/T = r the hinge indicators assign the point to
// the left branch (closed left interval). Either output pointer may be
// null. Returns the log-likelihood (-inf when sigma(t/T) <= sigma_min, in
// which case the outputs are untouched).
double kink_point_derivs(const KinkParams& params, const TimeSeries& x, long t, long T,
                         Eigen::VectorXd* grad, Eigen::MatrixXd* hess);

}  // namespace lscp
