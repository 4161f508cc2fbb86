#include "lscp/refine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>

#include "lscp/parallel.hpp"

namespace lscp {

namespace {

long boundary_radius(ChangeType type, const ScanConfig& scan) {
    return type == ChangeType::Jump ? scan.h : 2 * scan.h_tilde;
}

double point_ll(double e, double sigma) {
    if (!(sigma > kSigmaMin)) return kNegInf;
    return -0.5 * std::log(2.0 * kPi * sigma * sigma) - e * e / (2.0 * sigma * sigma);
}

}  // namespace

ExtendedWindow extended_window(const ModelConfiguration& cfg, int k, const ScanConfig& scan) {
    int m = cfg.m();
    if (k < 0 || k >= m) throw std::out_of_range("extended_window: bad change-point index");
    ExtendedWindow w;
    w.left = k > 0 ? cfg.taus[static_cast<size_t>(k - 1)] +
                         boundary_radius(cfg.types[static_cast<size_t>(k - 1)], scan)
                   : 0;
    w.right = k + 1 < m ? cfg.taus[static_cast<size_t>(k + 1)] -
                              boundary_radius(cfg.types[static_cast<size_t>(k + 1)], scan)
                        : cfg.T;
    long radius = boundary_radius(cfg.types[static_cast<size_t>(k)], scan);
    long tau2 = cfg.taus[static_cast<size_t>(k)];
    w.search_lo = std::max(tau2 - radius, w.left + 1);
    w.search_hi = std::min(tau2 + radius, w.right - 1);
    if (w.search_lo > w.search_hi)
        throw std::runtime_error("extended_window: search range collapsed; change-points too close");
    return w;
}

namespace {

// Pick the grid location with the best profile likelihood; ties and total
// failure fall back to the smaller index / the original candidate.
long grid_argmax(long center, long radius, long lo, long hi,
                 const std::function<double(long)>& score) {
    long step = std::max<long>(2, radius / 8);
    long best_tau = center;
    double best = kNegInf;
    for (long tau = center - radius; tau <= center + radius; tau += step) {
        if (tau < lo || tau > hi) continue;
        double v = score(tau);
        if (v > best) {
            best = v;
            best_tau = tau;
        }
    }
    return best_tau;
}

// Two candidates re-centered onto the same feature land within a grid
// step or two of each other; anything further apart is a distinct feature.
constexpr long kSnapGap = 25;

std::vector<Candidate> merge_close(std::vector<Candidate> list, long min_gap) {
    std::sort(list.begin(), list.end(), [](const Candidate& a, const Candidate& b) {
        return a.index < b.index;
    });
    std::vector<Candidate> out;
    for (const auto& c : list) {
        if (!out.empty() && c.index - out.back().index <= min_gap) {
            if (c.stat > out.back().stat) out.back() = c;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace

CandidateSet localize_candidates(const TimeSeries& x, const CandidateSet& cands,
                                 const OptimizerConfig& optimizer) {
    const long T = x.size();
    const long h = cands.config.h;
    const long ht = cands.config.h_tilde;
    CandidateSet out;
    out.config = cands.config;

    for (const auto& c : cands.jumps) {
        long L = std::max<long>(0, c.index - 2 * h);
        long R = std::min<long>(T, c.index + 2 * h);
        // Stay on the scan's support: migrating into the unscanned
        // boundary margin invites cheap overfits of tiny end segments.
        long tau = grid_argmax(c.index, h, std::max(L + 10, h), std::min(R - 10, T - h),
                               [&](long t) {
                                   double ll = fit_segment(x, L, t, 1, 1, optimizer).loglik +
                                               fit_segment(x, t, R, 1, 1, optimizer).loglik;
                                   return std::isfinite(ll) ? ll : kNegInf;
                               });
        out.jumps.push_back({tau, c.stat});
    }

    for (const auto& c : cands.kinks) {
        // Fit over the same span the jump branch uses: a hinge profiled on
        // a +-2h_tilde window is too shallow to pin the slope change down,
        // and a kink reading scored at the wrong index loses the later
        // type arbitration to the more forgiving two-segment jump fit.
        long w = 2 * std::max(h, ht);
        long L = std::max<long>(0, c.index - w);
        long R = std::min<long>(T, c.index + w);
        KinkChain layout;
        layout.g = 1;
        layout.tau_left = L;
        layout.tau_right = R;
        layout.T = T;
        layout.p = 1;
        layout.q = {1, 1};
        long tau = grid_argmax(c.index, ht, std::max(L + 10, 2 * ht),
                               std::min(R - 10, T - 2 * ht), [&](long t) {
                                   layout.taus = {t};
                                   double ll = fit_kink_chain(x, layout, optimizer).loglik;
                                   return std::isfinite(ll) ? ll : kNegInf;
                               });
        out.kinks.push_back({tau, c.stat});
    }

    out.jumps = merge_close(std::move(out.jumps), h / 2);
    out.kinks = merge_close(std::move(out.kinks), ht);

    // A jump and a kink candidate re-centered onto the same feature would
    // otherwise bracket a degenerate few-point segment whose refit
    // likelihood dwarfs everything else. Snapping the kink onto the jump
    // index keeps both type explanations available while making their
    // joint selection infeasible (a zero-length segment).
    for (auto& kc : out.kinks)
        for (const auto& jc : out.jumps)
            if (std::labs(kc.index - jc.index) <= kSnapGap) {
                kc.index = jc.index;
                break;
            }
    out.kinks = merge_close(std::move(out.kinks), ht);
    return out;
}

JumpRefinement refine_jump(const TimeSeries& x, const ModelConfiguration& cfg, int k,
                           const ScanConfig& scan, const RefineConfig& config) {
    if (cfg.types[static_cast<size_t>(k)] != ChangeType::Jump)
        throw std::invalid_argument("refine_jump: change-point is not a jump");
    JumpRefinement out;
    out.tau2 = cfg.taus[static_cast<size_t>(k)];
    out.h = scan.h;
    out.window = extended_window(cfg, k, scan);

    int p_l = cfg.p[static_cast<size_t>(k)], q_l = cfg.q[static_cast<size_t>(k)];
    int p_r = cfg.p[static_cast<size_t>(k + 1)], q_r = cfg.q[static_cast<size_t>(k + 1)];
    long L = out.window.left, R = out.window.right;

    double best = kNegInf;
    for (long tau = out.window.search_lo; tau <= out.window.search_hi; ++tau) {
        try {
            // Fit ranges chosen so the summed terms run over exactly
            // [max(L, p+1), tau] and [tau+1, R]; lags come from the full
            // series on both sides of the split.
            SegmentFit left = fit_segment(x, std::max<long>(L - p_l - 1, 0), tau, p_l, q_l,
                                          config.optimizer);
            SegmentFit right =
                fit_segment(x, std::max<long>(tau - p_r, 0), R, p_r, q_r, config.optimizer);
            double value = left.loglik + right.loglik;
            if (value > best) {
                best = value;
                out.tau3 = tau;
                out.left = std::move(left);
                out.right = std::move(right);
            }
        } catch (const std::invalid_argument&) {
            out.skipped.push_back(tau);
        } catch (const std::runtime_error&) {
            out.skipped.push_back(tau);
        }
    }
    if (best == kNegInf) throw std::runtime_error("refine_jump: no feasible split in the search range");
    return out;
}

std::vector<ChangePointCI> bootstrap_jump_ci(const JumpRefinement& jump, long T,
                                             const RefineConfig& config) {
    const long B = config.bootstrap_b;
    if (B < 100) throw std::invalid_argument("bootstrap_jump_ci: need at least 100 replicates");
    const long tau3 = jump.tau3;
    const long lo = jump.window.left - tau3;   // relative window [lo, hi], split at 0
    const long hi = jump.window.right - tau3;
    const long d_lo = std::max(jump.tau2 - jump.h - tau3, lo - 1);
    const long d_hi = std::min(jump.tau2 + jump.h - tau3, hi);
    const SegmentParams& ml = jump.left.params;
    const SegmentParams& mr = jump.right.params;
    const int max_p = std::max(ml.p, mr.p);
    const long burn = 200;
    const long n_buf = burn + (hi - lo + 1);
    const double u_start = static_cast<double>(tau3 + lo) / static_cast<double>(T);

    std::vector<long> d_tilde(static_cast<size_t>(B), 0);
    parallel_for(B, config.threads, [&](long rep) {
        GaussianRng rng(split_seed(config.seed, static_cast<std::uint64_t>(rep)));
        std::vector<double> buf(static_cast<size_t>(n_buf), 0.0);
        for (long j = 0; j < n_buf; ++j) {
            long t = lo - burn + j;
            const SegmentParams& m = t <= 0 ? ml : mr;
            // Burn-in samples keep the curves frozen at the window start so
            // the recursion never leaves the fitted parameter range.
            double u = t < lo ? u_start : static_cast<double>(tau3 + t) / static_cast<double>(T);
            double v = 0.0;
            for (int i = 1; i <= m.p; ++i)
                if (j - i >= 0) v += m.phi_at(i - 1, u) * buf[static_cast<size_t>(j - i)];
            double sigma = std::max(m.sigma_at(u), kSigmaMin);
            buf[static_cast<size_t>(j)] = v + sigma * rng.gaussian();
        }

        // Split objective via prefix sums of the two pointwise likelihoods.
        long n = hi - lo + 1;
        std::vector<double> pref_left(static_cast<size_t>(n + 1), 0.0);
        std::vector<double> suff_right(static_cast<size_t>(n + 1), 0.0);
        auto ll_at = [&](const SegmentParams& m, long t) {
            double u = static_cast<double>(tau3 + t) / static_cast<double>(T);
            long j = t - (lo - burn);
            double e = buf[static_cast<size_t>(j)];
            for (int i = 1; i <= m.p; ++i)
                if (j - i >= 0) e -= m.phi_at(i - 1, u) * buf[static_cast<size_t>(j - i)];
            return point_ll(e, m.sigma_at(u));
        };
        for (long ix = 0; ix < n; ++ix)
            pref_left[static_cast<size_t>(ix + 1)] =
                pref_left[static_cast<size_t>(ix)] + ll_at(ml, lo + ix);
        for (long ix = n - 1; ix >= 0; --ix)
            suff_right[static_cast<size_t>(ix)] =
                suff_right[static_cast<size_t>(ix + 1)] + ll_at(mr, lo + ix);

        double best = kNegInf;
        long best_d = d_lo;
        for (long d = d_lo; d <= d_hi; ++d) {
            long ix = d - lo + 1;  // points t <= d on the left
            double v = pref_left[static_cast<size_t>(ix)] + suff_right[static_cast<size_t>(ix)];
            if (v > best) {
                best = v;
                best_d = d;
            }
        }
        d_tilde[static_cast<size_t>(rep)] = best_d;
    });

    std::vector<long> sorted = d_tilde;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double prob) {  // type-7 on the integer sample
        double pos = prob * static_cast<double>(B - 1);
        long i = static_cast<long>(std::floor(pos));
        double frac = pos - static_cast<double>(i);
        double v = static_cast<double>(sorted[static_cast<size_t>(i)]);
        if (frac > 0.0 && i + 1 < B)
            v += frac * (static_cast<double>(sorted[static_cast<size_t>(i + 1)]) - v);
        return v;
    };

    std::vector<ChangePointCI> out;
    for (double level : config.levels) {
        double alpha = 1.0 - level;
        long l_tilde = static_cast<long>(std::floor(quantile(alpha / 2.0)));
        long u_tilde = static_cast<long>(std::ceil(quantile(1.0 - alpha / 2.0)));
        ChangePointCI ci;
        ci.estimate = tau3;
        ci.lower = tau3 - u_tilde;
        ci.upper = tau3 - l_tilde;
        ci.level = level;
        ci.method = "bootstrap";
        out.push_back(ci);
    }
    return out;
}

namespace {

KinkParams lift_chain_to_kink(const KinkChain& chain, int q_star, long tau) {
    KinkParams eta;
    int p = chain.p;
    eta.p_left = eta.p_right = p;
    eta.q_left = eta.q_right = q_star;
    eta.gamma = chain.gamma[0];
    eta.xi = chain.xi[0];
    auto lift = [&](const std::vector<std::vector<double>>& alpha,
                    const std::vector<double>& beta, std::vector<std::vector<double>>& a_out,
                    std::vector<double>& b_out) {
        a_out.assign(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(q_star), 0.0));
        for (int i = 0; i < p; ++i)
            for (size_t j = 0; j < alpha[static_cast<size_t>(i)].size(); ++j)
                a_out[static_cast<size_t>(i)][j] = alpha[static_cast<size_t>(i)][j];
        b_out.assign(static_cast<size_t>(q_star), 0.0);
        for (size_t j = 0; j < beta.size(); ++j) b_out[j] = beta[j];
    };
    lift(chain.alpha[0], chain.beta[0], eta.alpha_left, eta.beta_left);
    lift(chain.alpha[1], chain.beta[1], eta.alpha_right, eta.beta_right);
    eta.r = static_cast<double>(tau) / static_cast<double>(chain.T);
    return eta;
}

}  // namespace

KinkRefinement refine_kink(const TimeSeries& x, const ModelConfiguration& cfg, int k,
                           const ScanConfig& scan, const RefineConfig& config) {
    if (cfg.types[static_cast<size_t>(k)] != ChangeType::Kink)
        throw std::invalid_argument("refine_kink: change-point is not a kink");
    KinkRefinement out;
    out.tau2 = cfg.taus[static_cast<size_t>(k)];
    out.window = extended_window(cfg, k, scan);
    long L = out.window.left, R = out.window.right;
    long T = x.size();
    out.span = R - L;

    int p_star = std::max(cfg.p[static_cast<size_t>(k)], cfg.p[static_cast<size_t>(k + 1)]);
    int q_l = cfg.q[static_cast<size_t>(k)], q_r = cfg.q[static_cast<size_t>(k + 1)];

    double best = kNegInf;
    long best_tau = 0;
    ChainFit best_fit;
    for (long tau = out.window.search_lo; tau <= out.window.search_hi; ++tau) {
        KinkChain layout;
        layout.g = 1;
        layout.tau_left = L;
        layout.tau_right = R;
        layout.taus = {tau};
        layout.T = T;
        layout.p = p_star;
        layout.q = {q_l, q_r};
        try {
            ChainFit fit = fit_kink_chain(x, layout, config.optimizer);
            if (fit.loglik > best) {
                best = fit.loglik;
                best_tau = tau;
                best_fit = std::move(fit);
            }
        } catch (const std::invalid_argument&) {
        } catch (const std::runtime_error&) {
        }
    }
    if (best == kNegInf)
        throw std::runtime_error("refine_kink: no feasible grid point in the search range");

    int q_star = std::max(q_l, q_r);
    KinkParams eta0 = lift_chain_to_kink(best_fit.chain, q_star, best_tau);
    long t0 = std::max<long>(L, p_star) + 1;
    double span = static_cast<double>(out.span);
    double r_lo = static_cast<double>(out.window.search_lo) / static_cast<double>(T);
    double r_hi = static_cast<double>(out.window.search_hi) / static_cast<double>(T);

    auto value = [&](const Eigen::VectorXd& v) {
        KinkParams eta = unpack_eta(v, p_star, q_star);
        if (eta.r < r_lo || eta.r > r_hi) return kNegInf;
        double s = 0.0;
        for (long t = t0; t <= R; ++t) {
            double ll = kink_loglik_point(eta, x, t, T);
            if (ll == kNegInf) return kNegInf;
            s += ll;
        }
        return s / span;
    };
    auto gradient = [&](const Eigen::VectorXd& v) {
        KinkParams eta = unpack_eta(v, p_star, q_star);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(v.size());
        Eigen::VectorXd gt;
        for (long t = t0; t <= R; ++t) {
            if (kink_point_derivs(eta, x, t, T, &gt, nullptr) == kNegInf) return g;
            g += gt;
        }
        return Eigen::VectorXd(g / span);
    };

    OptimResult res = maximize(value, gradient, pack_eta(eta0), config.optimizer);
    out.eta = unpack_eta(res.x, p_star, q_star);
    out.s_value = res.value;
    out.polished = res.converged;
    long tau3 = std::llround(out.eta.r * static_cast<double>(T));
    out.tau3 = std::clamp(tau3, out.window.search_lo, out.window.search_hi);
    return out;
}

SandwichCov kink_sandwich(const TimeSeries& x, const KinkRefinement& kink,
                          bool literal_outer_product) {
    const KinkParams& eta = kink.eta;
    int p = eta.p_left, q = eta.q_left;
    long z = kink_eta_size(p, q);
    long T = x.size();
    long t0 = std::max<long>(kink.window.left, p) + 1;
    double span = static_cast<double>(kink.span);

    Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(z);
    Eigen::MatrixXd gg_sum = Eigen::MatrixXd::Zero(z, z);
    Eigen::MatrixXd h_sum = Eigen::MatrixXd::Zero(z, z);
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    for (long t = t0; t <= kink.window.right; ++t) {
        if (kink_point_derivs(eta, x, t, T, &g, &h) == kNegInf)
            throw std::runtime_error("kink_sandwich: infeasible point at the fitted parameters");
        g_sum += g;
        gg_sum += g * g.transpose();
        h_sum += h;
    }

    SandwichCov out;
    out.G = literal_outer_product ? Eigen::MatrixXd((g_sum / span) * (g_sum / span).transpose())
                                  : Eigen::MatrixXd(gg_sum / span);
    out.D = h_sum / span;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.D);
    double lo = eig.eigenvalues().cwiseAbs().minCoeff();
    double hi = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!(hi > 0.0) || lo / hi < 1e-12)
        throw std::runtime_error(
            "kink_sandwich: D nearly singular; widen the window or lower the degree");

    Eigen::LDLT<Eigen::MatrixXd> ldlt(out.D);
    Eigen::MatrixXd sigma = ldlt.solve(ldlt.solve(out.G).transpose());
    out.Sigma = 0.5 * (sigma + sigma.transpose());
    out.rr = out.Sigma(z - 1, z - 1);
    return out;
}

ChangePointCI kink_ci(long tau3, double sigma_rr, double level, long nb_lo, long nb_hi,
                      long T) {
    if (sigma_rr < 0.0) throw std::invalid_argument("kink_ci: negative variance entry");
    if (nb_hi <= nb_lo) throw std::invalid_argument("kink_ci: bad neighbor ordering");
    double alpha = 1.0 - level;
    double z = normal_quantile(1.0 - alpha / 2.0);
    double half = z * static_cast<double>(T) * std::sqrt(sigma_rr) /
                  std::sqrt(static_cast<double>(nb_hi - nb_lo));
    long half_int = std::llround(half);
    ChangePointCI ci;
    ci.estimate = tau3;
    ci.lower = std::clamp(tau3 - half_int, 1L, T);
    ci.upper = std::clamp(tau3 + half_int, 1L, T);
    ci.level = level;
    ci.method = "asymptotic-normal";
    return ci;
}

}  // namespace lscp
