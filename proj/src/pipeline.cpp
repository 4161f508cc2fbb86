#include "lscp/pipeline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lscp {

namespace {

double candidate_stat(const CandidateSet& cands, long tau, ChangeType type) {
    const auto& list = type == ChangeType::Jump ? cands.jumps : cands.kinks;
    for (const auto& c : list)
        if (c.index == tau) return c.stat;
    return 0.0;
}

// Chain curves restricted to one segment are plain polynomials in u of the
// segment's degree; recover power-basis coefficients by interpolation at
// points strictly inside the segment.
SegmentParams power_basis_segment(const KinkChain& chain, long a, long b, int seg_idx) {
    const int q = chain.q[static_cast<size_t>(seg_idx)];
    const int p = chain.p;
    const int n = q + 1;
    Eigen::MatrixXd V(n, n);
    Eigen::MatrixXd phi_vals(n, p);
    Eigen::VectorXd sig_vals(n);
    for (int j = 0; j < n; ++j) {
        double t = static_cast<double>(a) +
                   static_cast<double>(b - a) * (j + 0.5) / static_cast<double>(n);
        double u = t / static_cast<double>(chain.T);
        double pw = 1.0;
        for (int c = 0; c < n; ++c) {
            V(j, c) = pw;
            pw *= u;
        }
        KinkCurveValue val = eval_kink_chain_curves(chain, u);
        for (int i = 0; i < p; ++i) phi_vals(j, i) = val.phi[static_cast<size_t>(i)];
        sig_vals(j) = val.sigma;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
    SegmentParams seg;
    seg.p = p;
    seg.q = q;
    seg.phi.resize(static_cast<size_t>(p));
    for (int i = 0; i < p; ++i) {
        Eigen::VectorXd c = lu.solve(phi_vals.col(i));
        seg.phi[static_cast<size_t>(i)].coeffs.assign(c.data(), c.data() + n);
    }
    Eigen::VectorXd c = lu.solve(sig_vals);
    seg.sigma.coeffs.assign(c.data(), c.data() + n);
    return seg;
}

}  // namespace

DetectionResult detect(const TimeSeries& x, const PipelineConfig& config) {
    const long T = x.size();
    if (T < 64) throw std::invalid_argument("detect: series too short");

    DetectionResult result;
    result.T = T;
    result.seed = config.seed;

    ScanConfig scan = config.scan;
    if (scan.h == 0 || scan.h_tilde == 0) {
        ScanConfig rule = window_radii(T, {}, config.radii_mode);
        if (scan.h == 0) scan.h = rule.h;
        if (scan.h_tilde == 0) scan.h_tilde = rule.h_tilde;
    }
    scan.validate(T);
    result.scan = scan;

    // Keep kink candidates inside the jump exclusion zones (selection
    // arbitrates the type), then re-center every candidate with a coarse
    // profile-likelihood grid; the raw scan locations are off by enough to
    // flip thin selection margins.
    CandidateSet raw = candidates_unfiltered(maximal_diffs(x, scan, config.threads), T, scan);
    OptimizerConfig loc_opt;
    loc_opt.multistart = 1;
    CandidateSet cands = localize_candidates(x, raw, loc_opt);

    FitCache cache;
    // Selection scores thousands of candidate fits; a single deterministic
    // least-squares start is enough to rank them. Refinement below keeps
    // the full multistart budget.
    cache.optimizer.multistart = 1;
    SelectionResult sel = select(cands, x, config.p_max, config.q_max, cache);
    result.selection = sel.config;
    result.score = sel.score;
    result.greedy = sel.greedy;

    const ModelConfiguration& cfg = sel.config;
    const int m = cfg.m();

    RefineConfig rc;
    rc.bootstrap_b = config.bootstrap_b;
    rc.levels = config.levels;
    rc.threads = config.threads;

    // Refine every change-point first; kink intervals need the refined
    // neighbor locations.
    std::vector<long> tau3(static_cast<size_t>(m), 0);
    std::vector<JumpRefinement> jump_ref(static_cast<size_t>(m));
    std::vector<KinkRefinement> kink_ref(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
        rc.seed = split_seed(config.seed, static_cast<std::uint64_t>(k) + 1);
        if (cfg.types[static_cast<size_t>(k)] == ChangeType::Jump) {
            jump_ref[static_cast<size_t>(k)] = refine_jump(x, cfg, k, scan, rc);
            tau3[static_cast<size_t>(k)] = jump_ref[static_cast<size_t>(k)].tau3;
        } else {
            kink_ref[static_cast<size_t>(k)] = refine_kink(x, cfg, k, scan, rc);
            tau3[static_cast<size_t>(k)] = kink_ref[static_cast<size_t>(k)].tau3;
        }
    }
    for (int k = 1; k < m; ++k)
        if (tau3[static_cast<size_t>(k)] <= tau3[static_cast<size_t>(k - 1)])
            throw std::runtime_error("detect: refined change-point locations collided");

    for (int k = 0; k < m; ++k) {
        ChangePointRecord rec;
        rec.tau = tau3[static_cast<size_t>(k)];
        rec.type = cfg.types[static_cast<size_t>(k)];
        rec.scan_stat = candidate_stat(cands, cfg.taus[static_cast<size_t>(k)], rec.type);
        rc.seed = split_seed(config.seed, static_cast<std::uint64_t>(k) + 1);
        if (rec.type == ChangeType::Jump) {
            rec.cis = bootstrap_jump_ci(jump_ref[static_cast<size_t>(k)], T, rc);
        } else {
            SandwichCov cov = kink_sandwich(x, kink_ref[static_cast<size_t>(k)],
                                            rc.literal_outer_product);
            long nb_lo = k > 0 ? tau3[static_cast<size_t>(k - 1)] : 0;
            long nb_hi = k + 1 < m ? tau3[static_cast<size_t>(k + 1)] : T;
            for (double level : config.levels)
                rec.cis.push_back(kink_ci(rec.tau, cov.rr, level, nb_lo, nb_hi, T));
        }
        result.change_points.push_back(std::move(rec));
    }

    // Refit the segments at the final boundaries; kink chains are fit
    // jointly and then converted to per-segment power-basis curves.
    std::vector<long> bounds;
    bounds.push_back(0);
    bounds.insert(bounds.end(), tau3.begin(), tau3.end());
    bounds.push_back(T);
    int seg = 0;
    while (seg <= m) {
        int last = seg;  // extend across kink-joined segments
        while (last < m && cfg.types[static_cast<size_t>(last)] == ChangeType::Kink) ++last;
        long a = bounds[static_cast<size_t>(seg)];
        long b = bounds[static_cast<size_t>(last + 1)];
        if (last == seg) {
            SegmentFit fit =
                fit_segment(x, a, b, cfg.p[static_cast<size_t>(seg)],
                            cfg.q[static_cast<size_t>(seg)]);
            SegmentRecord r;
            r.start = a;
            r.end = b;
            r.params = fit.params;
            r.loglik = fit.loglik;
            result.segments.push_back(std::move(r));
        } else {
            KinkChain layout;
            layout.g = last - seg;
            layout.tau_left = a;
            layout.tau_right = b;
            layout.taus.assign(tau3.begin() + seg, tau3.begin() + last);
            layout.T = T;
            layout.p = cfg.p[static_cast<size_t>(seg)];
            layout.q.assign(cfg.q.begin() + seg, cfg.q.begin() + last + 1);
            ChainFit fit = fit_kink_chain(x, layout);
            for (int s = seg; s <= last; ++s) {
                SegmentRecord r;
                r.start = bounds[static_cast<size_t>(s)];
                r.end = bounds[static_cast<size_t>(s + 1)];
                r.params = power_basis_segment(fit.chain, r.start, r.end, s - seg);
                r.loglik = loglik_segment(r.params, x, r.start, r.end);
                result.segments.push_back(std::move(r));
            }
        }
        seg = last + 1;
    }
    return result;
}

}  // namespace lscp
