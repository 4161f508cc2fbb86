#include "lscp/likelihood.hpp"

#include <cmath>

namespace lscp {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double point_ll(double e, double sigma) {
    if (!(sigma > kSigmaMin)) return kNegInf;
    return -kHalfLog2Pi - std::log(sigma) - e * e / (2.0 * sigma * sigma);
}

}  // namespace

double loglik_point(const SegmentParams& seg, const TimeSeries& x, long t) {
    if (t <= seg.p || t > x.size()) throw std::out_of_range("loglik_point: need p < t <= T");
    double u = static_cast<double>(t) / static_cast<double>(x.size());
    double e = x.at(t);
    for (int i = 1; i <= seg.p; ++i) e -= seg.phi_at(i - 1, u) * x.at(t - i);
    return point_ll(e, seg.sigma_at(u));
}

double loglik_segment(const SegmentParams& seg, const TimeSeries& x, long a, long b) {
    double acc = 0.0;
    for (long t = a + seg.p + 1; t <= b; ++t) {
        double ll = loglik_point(seg, x, t);
        if (ll == kNegInf) return kNegInf;
        acc += ll;
    }
    return acc;
}

double loglik_kink_point(const KinkParams& eta, const TimeSeries& x, long t) {
    int p = eta.p_max();
    if (t <= p || t > x.size()) throw std::out_of_range("loglik_kink_point: need p < t <= T");
    double u = static_cast<double>(t) / static_cast<double>(x.size());
    auto curves = eval_kink_curves(eta, u);
    double e = x.at(t);
    for (int i = 1; i <= p; ++i) e -= curves.phi[static_cast<size_t>(i - 1)] * x.at(t - i);
    return point_ll(e, curves.sigma);
}

double loglik_chain_point(const KinkChain& chain, const TimeSeries& x, long t) {
    if (t <= chain.p || t > x.size()) throw std::out_of_range("loglik_chain_point: need p < t <= T");
    double u = static_cast<double>(t) / static_cast<double>(chain.T);
    auto curves = eval_kink_chain_curves(chain, u);
    double e = x.at(t);
    for (int i = 1; i <= chain.p; ++i) e -= curves.phi[static_cast<size_t>(i - 1)] * x.at(t - i);
    return point_ll(e, curves.sigma);
}

double loglik_kink_chain(const KinkChain& chain, const TimeSeries& x, long a, long b) {
    double acc = 0.0;
    for (long t = std::max<long>(a, chain.p) + 1; t <= b; ++t) {
        double ll = loglik_chain_point(chain, x, t);
        if (ll == kNegInf) return kNegInf;
        acc += ll;
    }
    return acc;
}

double LinearGaussProblem::value(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd sigma = D * theta;
    if ((sigma.array() <= kSigmaMin).any()) return kNegInf;
    Eigen::VectorXd e = y - R * theta;
    return -kHalfLog2Pi * static_cast<double>(y.size()) - sigma.array().log().sum() -
           0.5 * (e.array().square() / sigma.array().square()).sum();
}

Eigen::VectorXd LinearGaussProblem::gradient(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd sigma = D * theta;
    Eigen::VectorXd e = y - R * theta;
    Eigen::ArrayXd s2 = sigma.array().square();
    Eigen::VectorXd we = (e.array() / s2).matrix();
    Eigen::VectorXd ws = ((e.array().square() / (s2 * sigma.array())) - sigma.array().inverse()).matrix();
    return R.transpose() * we + D.transpose() * ws;
}

namespace {

struct FitCore {
    LinearGaussProblem prob;
    Eigen::VectorXd theta0;            // least-squares start
    std::vector<long> sigma_level_ix;  // coordinates holding a constant sigma level
    std::vector<long> phi_ix;          // coordinates entering the AR part
};

OptimResult run_multistart(const FitCore& core, const OptimizerConfig& config, std::uint64_t seed,
                           int* iterations) {
    auto value = [&core](const Eigen::VectorXd& th) { return core.prob.value(th); };
    auto gradient = [&core](const Eigen::VectorXd& th) { return core.prob.gradient(th); };

    OptimResult best;
    best.value = kNegInf;
    int total_iter = 0;
    for (int s = 0; s < std::max(1, config.multistart); ++s) {
        Eigen::VectorXd start = core.theta0;
        if (s > 0) {
            GaussianRng rng(split_seed(seed, static_cast<std::uint64_t>(s)));
            for (long ix : core.phi_ix) start(ix) += 0.1 * rng.gaussian();
            for (long ix : core.sigma_level_ix) start(ix) *= std::exp(0.3 * rng.gaussian());
        }
        if (!std::isfinite(core.prob.value(start))) continue;
        OptimResult res = maximize(value, gradient, start, config);
        total_iter += res.iterations;
        if (res.value > best.value) best = res;
    }
    if (best.value == kNegInf) throw std::runtime_error("fit: no feasible starting point");
    *iterations = total_iter;
    return best;
}

}  // namespace

SegmentFit fit_segment(const TimeSeries& x, long a, long b, int p, int q,
                       const OptimizerConfig& config) {
    long T = x.size();
    long n = b - a - p;
    long z = static_cast<long>(p + 1) * (q + 1);
    if (n < z + 5) throw std::invalid_argument("fit_segment: range too short for the requested model");

    FitCore core;
    core.prob.R = Eigen::MatrixXd::Zero(n, z);
    core.prob.D = Eigen::MatrixXd::Zero(n, z);
    core.prob.y.resize(n);
    for (long row = 0; row < n; ++row) {
        long t = a + p + 1 + row;
        double u = static_cast<double>(t) / static_cast<double>(T);
        core.prob.y(row) = x.at(t);
        double upow = 1.0;
        for (int j = 0; j <= q; ++j) {
            for (int i = 1; i <= p; ++i)
                core.prob.R(row, static_cast<long>(i - 1) * (q + 1) + j) = upow * x.at(t - i);
            core.prob.D(row, static_cast<long>(p) * (q + 1) + j) = upow;
            upow *= u;
        }
    }

    long z_phi = static_cast<long>(p) * (q + 1);
    Eigen::VectorXd phi0 =
        core.prob.R.leftCols(z_phi).colPivHouseholderQr().solve(core.prob.y);
    Eigen::VectorXd resid = core.prob.y - core.prob.R.leftCols(z_phi) * phi0;
    double s0 = std::sqrt(resid.squaredNorm() / static_cast<double>(std::max<long>(1, n - z_phi)));
    s0 = std::max(s0, 1e-6);

    core.theta0 = Eigen::VectorXd::Zero(z);
    core.theta0.head(z_phi) = phi0;
    core.theta0(z_phi) = s0;
    for (long ix = 0; ix < z_phi; ++ix) core.phi_ix.push_back(ix);
    core.sigma_level_ix.push_back(z_phi);

    std::uint64_t seed = split_seed(0x5e67f17ULL,
                                    static_cast<std::uint64_t>(a * 1000003 + b * 7919 + p * 31 + q));
    SegmentFit fit;
    OptimResult res = run_multistart(core, config, seed, &fit.iterations);

    fit.params.p = p;
    fit.params.q = q;
    for (int i = 0; i < p; ++i) {
        std::vector<double> coeffs(static_cast<size_t>(q + 1));
        for (int j = 0; j <= q; ++j) coeffs[static_cast<size_t>(j)] = res.x(static_cast<long>(i) * (q + 1) + j);
        fit.params.phi.emplace_back(std::move(coeffs));
    }
    {
        std::vector<double> coeffs(static_cast<size_t>(q + 1));
        for (int j = 0; j <= q; ++j) coeffs[static_cast<size_t>(j)] = res.x(z_phi + j);
        fit.params.sigma = PolyCurve(std::move(coeffs));
    }
    fit.loglik = res.value;
    fit.converged = res.converged;
    fit.gradient_norm = res.gradient_norm;

    std::vector<double> grid;
    int n_grid = static_cast<int>(std::min<long>(64, b - a));
    for (int i = 0; i < n_grid; ++i)
        grid.push_back((static_cast<double>(a) + static_cast<double>(b - a) * (i + 1) / n_grid) /
                       static_cast<double>(T));
    fit.stable = check_stability(fit.params, grid, 1e-6);
    return fit;
}

namespace {

// Offset of the coefficient block for chain segment s within the packed
// vector; each free column holds p phi entries followed by one beta entry.
long chain_block_offset(const KinkChain& layout, int s) {
    long off = static_cast<long>(layout.g) * (layout.p + 1);
    for (int k = 0; k < s; ++k) {
        int cols = (k == 0 || k == layout.g) ? layout.q[static_cast<size_t>(k)]
                                             : layout.q[static_cast<size_t>(k)] - 1;
        off += static_cast<long>(layout.p + 1) * cols;
    }
    return off;
}

int chain_free_cols(const KinkChain& layout, int s) {
    return (s == 0 || s == layout.g) ? layout.q[static_cast<size_t>(s)]
                                     : layout.q[static_cast<size_t>(s)] - 1;
}

}  // namespace

Eigen::VectorXd chain_pack(const KinkChain& chain) {
    Eigen::VectorXd theta(chain.n_free_params());
    for (int k = 0; k < chain.g; ++k) {
        long base = static_cast<long>(k) * (chain.p + 1);
        for (int i = 0; i < chain.p; ++i) theta(base + i) = chain.gamma[static_cast<size_t>(k)][static_cast<size_t>(i)];
        theta(base + chain.p) = chain.xi[static_cast<size_t>(k)];
    }
    for (int s = 0; s <= chain.g; ++s) {
        long off = chain_block_offset(chain, s);
        int cols = chain_free_cols(chain, s);
        for (int c = 0; c < cols; ++c) {
            for (int i = 0; i < chain.p; ++i)
                theta(off + static_cast<long>(c) * (chain.p + 1) + i) =
                    chain.alpha[static_cast<size_t>(s)][static_cast<size_t>(i)][static_cast<size_t>(c)];
            theta(off + static_cast<long>(c) * (chain.p + 1) + chain.p) =
                chain.beta[static_cast<size_t>(s)][static_cast<size_t>(c)];
        }
    }
    return theta;
}

KinkChain chain_unpack(const KinkChain& layout, const Eigen::VectorXd& theta) {
    KinkChain chain = layout;
    chain.gamma.assign(static_cast<size_t>(chain.g), std::vector<double>(static_cast<size_t>(chain.p)));
    chain.xi.assign(static_cast<size_t>(chain.g), 0.0);
    chain.alpha.assign(static_cast<size_t>(chain.g + 1), {});
    chain.beta.assign(static_cast<size_t>(chain.g + 1), {});
    for (int k = 0; k < chain.g; ++k) {
        long base = static_cast<long>(k) * (chain.p + 1);
        for (int i = 0; i < chain.p; ++i) chain.gamma[static_cast<size_t>(k)][static_cast<size_t>(i)] = theta(base + i);
        chain.xi[static_cast<size_t>(k)] = theta(base + chain.p);
    }
    for (int s = 0; s <= chain.g; ++s) {
        long off = chain_block_offset(chain, s);
        int cols = chain_free_cols(chain, s);
        chain.alpha[static_cast<size_t>(s)].assign(static_cast<size_t>(chain.p),
                                                   std::vector<double>(static_cast<size_t>(cols)));
        chain.beta[static_cast<size_t>(s)].assign(static_cast<size_t>(cols), 0.0);
        for (int c = 0; c < cols; ++c) {
            for (int i = 0; i < chain.p; ++i)
                chain.alpha[static_cast<size_t>(s)][static_cast<size_t>(i)][static_cast<size_t>(c)] =
                    theta(off + static_cast<long>(c) * (chain.p + 1) + i);
            chain.beta[static_cast<size_t>(s)][static_cast<size_t>(c)] =
                theta(off + static_cast<long>(c) * (chain.p + 1) + chain.p);
        }
    }
    return chain;
}

void chain_basis(const KinkChain& layout, double u, Eigen::MatrixXd& phi_basis,
                 Eigen::VectorXd& sigma_basis) {
    long z = layout.n_free_params();
    phi_basis = Eigen::MatrixXd::Zero(layout.p, z);
    sigma_basis = Eigen::VectorXd::Zero(z);

    double T = static_cast<double>(layout.T);
    int s = 0;
    while (s < layout.g && u > static_cast<double>(layout.taus[static_cast<size_t>(s)]) / T) ++s;

    auto anchor_phi = [&](int k, int i) { return static_cast<long>(k) * (layout.p + 1) + i; };
    auto anchor_xi = [&](int k) { return static_cast<long>(k) * (layout.p + 1) + layout.p; };

    if (s == 0 || s == layout.g) {
        int anchor = (s == 0) ? 0 : layout.g - 1;
        double r = static_cast<double>(layout.taus[static_cast<size_t>(anchor)]) / T;
        double d = u - r;
        int qs = layout.q[static_cast<size_t>(s)];
        long off = chain_block_offset(layout, s);
        for (int i = 0; i < layout.p; ++i) phi_basis(i, anchor_phi(anchor, i)) = 1.0;
        sigma_basis(anchor_xi(anchor)) = 1.0;
        double pw = d;
        for (int c = 0; c < qs; ++c, pw *= d) {
            for (int i = 0; i < layout.p; ++i)
                phi_basis(i, off + static_cast<long>(c) * (layout.p + 1) + i) = pw;
            sigma_basis(off + static_cast<long>(c) * (layout.p + 1) + layout.p) = pw;
        }
        return;
    }

    int qs = layout.q[static_cast<size_t>(s)];
    auto grid = lagrange_grid(layout.taus[static_cast<size_t>(s - 1)], layout.taus[static_cast<size_t>(s)], qs);
    std::vector<double> L(grid.size(), 1.0);
    for (size_t j = 0; j < grid.size(); ++j)
        for (size_t l = 0; l < grid.size(); ++l)
            if (l != j)
                L[j] *= (u - static_cast<double>(grid[l]) / T) /
                        (static_cast<double>(grid[j]) / T - static_cast<double>(grid[l]) / T);

    double head_coef = 1.0 - L[0] - L[static_cast<size_t>(qs)];
    long off = chain_block_offset(layout, s);
    for (int i = 0; i < layout.p; ++i) {
        phi_basis(i, anchor_phi(0, i)) += head_coef;
        phi_basis(i, anchor_phi(s - 1, i)) += L[0];
        phi_basis(i, anchor_phi(s, i)) += L[static_cast<size_t>(qs)];
        for (int c = 1; c < qs; ++c)
            phi_basis(i, off + static_cast<long>(c - 1) * (layout.p + 1) + i) = L[static_cast<size_t>(c)];
    }
    sigma_basis(anchor_xi(0)) += head_coef;
    sigma_basis(anchor_xi(s - 1)) += L[0];
    sigma_basis(anchor_xi(s)) += L[static_cast<size_t>(qs)];
    for (int c = 1; c < qs; ++c)
        sigma_basis(off + static_cast<long>(c - 1) * (layout.p + 1) + layout.p) = L[static_cast<size_t>(c)];
}

ChainFit fit_kink_chain(const TimeSeries& x, const KinkChain& layout, const OptimizerConfig& config) {
    if (layout.g < 1 || layout.q.size() != static_cast<size_t>(layout.g) + 1 ||
        layout.taus.size() != static_cast<size_t>(layout.g))
        throw std::invalid_argument("fit_kink_chain: inconsistent chain layout");
    for (int s = 1; s < layout.g; ++s)
        if (layout.q[static_cast<size_t>(s)] < 1)
            throw std::invalid_argument(
                "fit_kink_chain: interior chain segments need degree >= 1");
    long a = layout.tau_left;
    long b = layout.tau_right;
    long t0 = std::max<long>(a, layout.p) + 1;
    long n = b - t0 + 1;
    long z = layout.n_free_params();
    if (n < z + 5) throw std::invalid_argument("fit_kink_chain: span too short for the requested model");

    FitCore core;
    core.prob.R = Eigen::MatrixXd::Zero(n, z);
    core.prob.D = Eigen::MatrixXd::Zero(n, z);
    core.prob.y.resize(n);
    Eigen::MatrixXd phi_basis;
    Eigen::VectorXd sigma_basis;
    for (long row = 0; row < n; ++row) {
        long t = t0 + row;
        double u = static_cast<double>(t) / static_cast<double>(layout.T);
        chain_basis(layout, u, phi_basis, sigma_basis);
        core.prob.y(row) = x.at(t);
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(z);
        for (int i = 1; i <= layout.p; ++i) r += x.at(t - i) * phi_basis.row(i - 1);
        core.prob.R.row(row) = r;
        core.prob.D.row(row) = sigma_basis;
    }

    Eigen::VectorXd theta_ls = core.prob.R.colPivHouseholderQr().solve(core.prob.y);
    Eigen::VectorXd resid = core.prob.y - core.prob.R * theta_ls;
    double s0 = std::max(std::sqrt(resid.squaredNorm() / static_cast<double>(std::max<long>(1, n - z))), 1e-6);

    core.theta0 = theta_ls;
    for (int k = 0; k < layout.g; ++k) {
        long xi_ix = static_cast<long>(k) * (layout.p + 1) + layout.p;
        core.theta0(xi_ix) = s0;
        core.sigma_level_ix.push_back(xi_ix);
        for (int i = 0; i < layout.p; ++i)
            core.phi_ix.push_back(static_cast<long>(k) * (layout.p + 1) + i);
    }
    // Zero the sigma-slope coordinates the rank-deficient LS start may have
    // polluted.
    for (int s = 0; s <= layout.g; ++s) {
        long off = chain_block_offset(layout, s);
        int cols = chain_free_cols(layout, s);
        for (int c = 0; c < cols; ++c)
            core.theta0(off + static_cast<long>(c) * (layout.p + 1) + layout.p) = 0.0;
    }

    std::uint64_t seed = split_seed(
        0xc4a1ffULL, static_cast<std::uint64_t>(a * 1000003 + b * 7919 + layout.p * 31 + layout.g));
    ChainFit fit;
    OptimResult res = run_multistart(core, config, seed, &fit.iterations);
    fit.chain = chain_unpack(layout, res.x);
    fit.loglik = res.value;
    fit.converged = res.converged;
    fit.gradient_norm = res.gradient_norm;
    return fit;
}

}  // namespace lscp
