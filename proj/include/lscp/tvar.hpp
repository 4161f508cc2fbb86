#pragma once

#include <string>
#include <vector>

#include "lscp/common.hpp"
#include "lscp/poly.hpp"

namespace lscp {

enum class ChangeType { Jump, Kink };

// One segment of a piecewise tvAR process: AR order p, polynomial degree q,
// p coefficient curves phi_i(u) and one noise-level curve sigma(u).
struct SegmentParams {
    int p = 1;
    int q = 0;
    std::vector<PolyCurve> phi;  // size p, each of degree q
    PolyCurve sigma;             // degree q

    double phi_at(int i, double u) const { return phi[static_cast<size_t>(i)](u); }
    double sigma_at(double u) const { return sigma(u); }
};

// Hinge reparametrization of two segments joined continuously at relative
// location r: phi_i(u) = gamma_i + sum_j aL[i][j] (u-r)_-^j
//                                + sum_j aR[i][j] (u-r)_+^j,
// sigma(u) = xi + sum_j bL[j] (u-r)_-^j + sum_j bR[j] (u-r)_+^j.
// Coordinates above the smaller AR order carry only that side's hinge terms.
struct KinkParams {
    int p_left = 1, p_right = 1;
    int q_left = 1, q_right = 1;
    std::vector<double> gamma;                 // size min(p_left, p_right)
    double xi = 1.0;
    std::vector<std::vector<double>> alpha_left;   // p_left rows, q_left cols (j = 1..q)
    std::vector<double> beta_left;                 // q_left
    std::vector<std::vector<double>> alpha_right;  // p_right rows, q_right cols
    std::vector<double> beta_right;                // q_right
    double r = 0.5;

    int p_max() const { return p_left > p_right ? p_left : p_right; }
};

struct KinkCurveValue {
    std::vector<double> phi;  // length max(p_left, p_right)
    double sigma = 0.0;
};

KinkCurveValue eval_kink_curves(const KinkParams& params, double u);

// A run of g >= 1 consecutive kinks between two jump-type boundaries
// (series endpoints count as jumps). One AR order p is shared across the
// chain; per-segment degrees may differ. Interior segments (g >= 2 only)
// use a Lagrange basis over integer grid points derived from the kink
// locations, with the endpoint coefficients pinned to the anchor values so
// continuity is structural.
struct KinkChain {
    int g = 1;                    // number of kinks
    long tau_left = 0;            // chain span (tau_left, tau_right]
    long tau_right = 0;
    std::vector<long> taus;       // g kink locations, strictly inside the span
    long T = 0;                   // full series length (u = t / T)
    int p = 1;
    std::vector<int> q;           // g+1 per-segment degrees
    std::vector<std::vector<double>> gamma;  // g anchors, each of size p
    std::vector<double> xi;                  // g anchors
    // Free coefficient blocks per segment:
    //   segment 0:        p x q[0] hinge coeffs (j = 1..q[0])
    //   segments 1..g-1:  p x (q[k]-1) interior Lagrange coeffs (j = 1..q[k]-1)
    //   segment g:        p x q[g] hinge coeffs
    std::vector<std::vector<std::vector<double>>> alpha;
    std::vector<std::vector<double>> beta;   // same column layout, one row

    int n_free_params() const;
};

// Lagrange grid points tau^{(j)} = floor(tau_k + (tau_{k+1}-tau_k) j / q)
// for interior segment k+1. Throws if two grid points coincide.
std::vector<long> lagrange_grid(long tau_k, long tau_k1, int q);

KinkCurveValue eval_kink_chain_curves(const KinkChain& chain, double u);

// Full generative description of a piecewise tvAR process.
struct PiecewiseTvarSpec {
    long T = 0;
    std::vector<long> taus;             // m strictly increasing locations in (0, T)
    std::vector<ChangeType> types;      // m labels
    std::vector<SegmentParams> segments;  // m+1

    int m() const { return static_cast<int>(taus.size()); }
    // Index of the segment containing t (1-based t).
    int segment_of(long t) const;
    void validate() const;  // invariants incl. stability; throws on failure
};

// f(u, lambda) = sigma^2(u) / (2 pi) * |1 - sum_j phi_j(u) e^{-i lambda j}|^{-2}.
// Throws if the characteristic polynomial magnitude is below 1e-12.
double tv_spectral_density(const SegmentParams& seg, double u, double lambda);

// True iff all roots of 1 - sum_i phi_i(u) z^i lie outside radius 1+c at
// every grid point.
bool check_stability(const SegmentParams& seg, const std::vector<double>& u_grid, double c);
bool check_stability(const SegmentParams& seg, double c, int grid_points = 128);

struct SimulateOptions {
    long burn_in = 200;   // 0 selects zero initialization
};

// Simulate a realization; deterministic for a fixed seed. Burn-in samples
// use the first segment's parameters frozen at u = 1/T and are discarded;
// the recursion is carried continuously across segment boundaries.
TimeSeries simulate(const PiecewiseTvarSpec& spec, std::uint64_t seed,
                    const SimulateOptions& options = {});

// Plain-text key/value serialization; round-trips at 17 significant digits.
std::string serialize_spec(const PiecewiseTvarSpec& spec);
PiecewiseTvarSpec parse_spec(const std::string& text);

}  // namespace lscp
