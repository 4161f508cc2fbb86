#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lscp/kink_deriv.hpp"
#include "lscp/likelihood.hpp"
#include "lscp/mdl.hpp"
#include "lscp/scan.hpp"

namespace lscp {

struct RefineConfig {
    OptimizerConfig optimizer;
    long bootstrap_b = 1000;
    std::vector<double> levels = {0.80, 0.90, 0.95};
    std::uint64_t seed = 0;
    int threads = 1;
    // Use the literal full-sample outer product for the sandwich G matrix
    // instead of the per-point average (near rank-one at the maximizer).
    bool literal_outer_product = false;
};

// Largest window around change-point k containing no other change-point:
// (left, right] reaches to the neighbors shrunk by their own radii
// (h for jumps, 2 h~ for kinks, zero at the series endpoints). The final
// location is searched in [search_lo, search_hi].
struct ExtendedWindow {
    long left = 0;
    long right = 0;
    long search_lo = 0;
    long search_hi = 0;
};

ExtendedWindow extended_window(const ModelConfiguration& cfg, int k, const ScanConfig& scan);

// Coarse profile-likelihood re-centering of the scan candidates before
// model selection. The scan statistics locate breaks only up to a sizeable
// fraction of the window radius, which is enough to cost several nats at
// the selection stage; a cheap low-order split (jumps) or single-hinge
// chain (kinks) profiled over a coarse grid around each candidate pins the
// location much tighter. Candidates that end up closer than half their
// window radius are merged, keeping the larger scan statistic.
CandidateSet localize_candidates(const TimeSeries& x, const CandidateSet& cands,
                                 const OptimizerConfig& optimizer = {});

struct ChangePointCI {
    long estimate = 0;
    long lower = 0;
    long upper = 0;
    double level = 0.0;
    std::string method;  // "bootstrap" or "asymptotic-normal"
};

struct JumpRefinement {
    long tau2 = 0;  // step-2 location (search center)
    long tau3 = 0;
    SegmentFit left;   // fitted over (window.left, tau3]
    SegmentFit right;  // fitted over (tau3, window.right]
    ExtendedWindow window;
    long h = 0;                  // search radius used
    std::vector<long> skipped;   // grid points whose fits failed
};

// Final jump location: profile the two-sided conditional likelihood over
// the integer grid [tau2 - h, tau2 + h], refitting both segment models at
// every candidate split. Ties go to the smallest location.
JumpRefinement refine_jump(const TimeSeries& x, const ModelConfiguration& cfg, int k,
                           const ScanConfig& scan, const RefineConfig& config = {});

// Parametric bootstrap interval: B replicates simulated from the fitted
// pair spliced at tau3 (parameter curves evaluated at (tau3 + t) / T, 200
// burn-in samples from the left model frozen at the window start), the
// split re-estimated per replicate with the parameters held fixed, and
// the displacement percentiles reflected around tau3. One interval per
// requested level, computed in a single replicate pass.
std::vector<ChangePointCI> bootstrap_jump_ci(const JumpRefinement& jump, long T,
                                             const RefineConfig& config = {});

struct KinkRefinement {
    long tau2 = 0;
    long tau3 = 0;
    KinkParams eta;        // equal lifted orders on both sides, r = tau3-adjacent optimum
    double s_value = kNegInf;  // normalized objective at the optimum
    ExtendedWindow window;
    long span = 0;         // window.right - window.left (the S normalizer)
    bool polished = false;
};

// Final kink location: profile the chain likelihood over the integer grid
// [tau2 - 2h~, tau2 + 2h~] with curve refits per grid point, then polish
// all parameters including r jointly from the best grid point.
KinkRefinement refine_kink(const TimeSeries& x, const ModelConfiguration& cfg, int k,
                           const ScanConfig& scan, const RefineConfig& config = {});

struct SandwichCov {
    Eigen::MatrixXd G;
    Eigen::MatrixXd D;
    Eigen::MatrixXd Sigma;  // D^-1 G D^-1
    double rr = 0.0;        // entry at the r coordinate (last row/column)
};

// Plug-in covariance of the kink parameter estimate. Throws when D is
// numerically singular (reciprocal condition below 1e-12); widen the
// window or lower the degrees in that case.
SandwichCov kink_sandwich(const TimeSeries& x, const KinkRefinement& kink,
                          bool literal_outer_product = false);

// Normal interval tau3 +- z_{alpha/2} T sqrt(Sigma_rr) / sqrt(nb_hi - nb_lo)
// where the neighbors are the adjacent refined locations (0 and T at the
// ends), rounded symmetrically and clipped to [1, T].
ChangePointCI kink_ci(long tau3, double sigma_rr, double level, long nb_lo, long nb_hi,
                      long T);

}  // namespace lscp
