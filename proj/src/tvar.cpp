#include "lscp/tvar.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace lscp {

KinkCurveValue eval_kink_curves(const KinkParams& params, double u) {
    int p_small = std::min(params.p_left, params.p_right);
    int p_big = params.p_max();
    double dm = std::min(u - params.r, 0.0);
    double dp = std::max(u - params.r, 0.0);

    KinkCurveValue out;
    out.phi.assign(static_cast<size_t>(p_big), 0.0);
    for (int i = 0; i < p_big; ++i) {
        double v = i < p_small ? params.gamma[static_cast<size_t>(i)] : 0.0;
        if (i < params.p_left) {
            double pw = dm;
            for (int j = 1; j <= params.q_left; ++j, pw *= dm)
                v += params.alpha_left[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] * pw;
        }
        if (i < params.p_right) {
            double pw = dp;
            for (int j = 1; j <= params.q_right; ++j, pw *= dp)
                v += params.alpha_right[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] * pw;
        }
        out.phi[static_cast<size_t>(i)] = v;
    }

    double s = params.xi;
    {
        double pw = dm;
        for (int j = 1; j <= params.q_left; ++j, pw *= dm) s += params.beta_left[static_cast<size_t>(j - 1)] * pw;
        pw = dp;
        for (int j = 1; j <= params.q_right; ++j, pw *= dp) s += params.beta_right[static_cast<size_t>(j - 1)] * pw;
    }
    out.sigma = s;
    return out;
}

std::vector<long> lagrange_grid(long tau_k, long tau_k1, int q) {
    std::vector<long> grid(static_cast<size_t>(q + 1));
    for (int j = 0; j <= q; ++j)
        grid[static_cast<size_t>(j)] =
            tau_k + static_cast<long>(std::floor(static_cast<double>(tau_k1 - tau_k) * j / q));
    for (size_t j = 1; j < grid.size(); ++j)
        if (grid[j] == grid[j - 1])
            throw std::invalid_argument("lagrange_grid: repeated grid points (segment too short for degree)");
    return grid;
}

int KinkChain::n_free_params() const {
    int n = g * (p + 1);  // anchors
    for (int s = 0; s <= g; ++s) {
        int cols = (s == 0 || s == g) ? q[static_cast<size_t>(s)]
                                      : q[static_cast<size_t>(s)] - 1;
        n += (p + 1) * cols;
    }
    return n;
}

namespace {

// Lagrange basis values L_j(u), j = 0..q, over relative grid points u_j.
void lagrange_basis(const std::vector<double>& u_grid, double u, std::vector<double>& L) {
    size_t n = u_grid.size();
    L.assign(n, 1.0);
    for (size_t j = 0; j < n; ++j)
        for (size_t l = 0; l < n; ++l)
            if (l != j) L[j] *= (u - u_grid[l]) / (u_grid[j] - u_grid[l]);
}

}  // namespace

KinkCurveValue eval_kink_chain_curves(const KinkChain& chain, double u) {
    if (chain.g == 1) {
        KinkParams single;
        single.p_left = single.p_right = chain.p;
        single.q_left = chain.q[0];
        single.q_right = chain.q[1];
        single.gamma = chain.gamma[0];
        single.xi = chain.xi[0];
        single.r = static_cast<double>(chain.taus[0]) / static_cast<double>(chain.T);
        single.alpha_left.assign(static_cast<size_t>(chain.p), {});
        single.alpha_right.assign(static_cast<size_t>(chain.p), {});
        for (int i = 0; i < chain.p; ++i) {
            single.alpha_left[static_cast<size_t>(i)] = chain.alpha[0][static_cast<size_t>(i)];
            single.alpha_right[static_cast<size_t>(i)] = chain.alpha[1][static_cast<size_t>(i)];
        }
        single.beta_left = chain.beta[0];
        single.beta_right = chain.beta[1];
        return eval_kink_curves(single, u);
    }

    double T = static_cast<double>(chain.T);
    // Locate the chain segment containing u; boundary u = r_s belongs to
    // segment s (closed on the right, matching the left-branch convention).
    int s = 0;
    while (s < chain.g && u > static_cast<double>(chain.taus[static_cast<size_t>(s)]) / T) ++s;

    KinkCurveValue out;
    out.phi.assign(static_cast<size_t>(chain.p), 0.0);

    if (s == 0 || s == chain.g) {
        // End segments: hinge form around the adjacent kink.
        int anchor = (s == 0) ? 0 : chain.g - 1;
        double r = static_cast<double>(chain.taus[static_cast<size_t>(anchor)]) / T;
        double d = u - r;  // <= 0 for s == 0, >= 0 for s == g
        int qs = chain.q[static_cast<size_t>(s)];
        for (int i = 0; i < chain.p; ++i) {
            double v = chain.gamma[static_cast<size_t>(anchor)][static_cast<size_t>(i)];
            double pw = d;
            for (int j = 1; j <= qs; ++j, pw *= d)
                v += chain.alpha[static_cast<size_t>(s)][static_cast<size_t>(i)][static_cast<size_t>(j - 1)] * pw;
            out.phi[static_cast<size_t>(i)] = v;
        }
        double sv = chain.xi[static_cast<size_t>(anchor)];
        double pw = d;
        for (int j = 1; j <= qs; ++j, pw *= d)
            sv += chain.beta[static_cast<size_t>(s)][static_cast<size_t>(j - 1)] * pw;
        out.sigma = sv;
        return out;
    }

    // Interior segment: Lagrange basis over the integer grid, endpoint
    // coefficients pinned to the neighboring anchors relative to the head.
    int qs = chain.q[static_cast<size_t>(s)];
    auto grid = lagrange_grid(chain.taus[static_cast<size_t>(s - 1)], chain.taus[static_cast<size_t>(s)], qs);
    std::vector<double> u_grid(grid.size());
    for (size_t j = 0; j < grid.size(); ++j) u_grid[j] = static_cast<double>(grid[j]) / T;
    std::vector<double> L;
    lagrange_basis(u_grid, u, L);

    const auto& head_g = chain.gamma[0];
    const auto& lo_g = chain.gamma[static_cast<size_t>(s - 1)];
    const auto& hi_g = chain.gamma[static_cast<size_t>(s)];
    for (int i = 0; i < chain.p; ++i) {
        double v = head_g[static_cast<size_t>(i)] +
                   (lo_g[static_cast<size_t>(i)] - head_g[static_cast<size_t>(i)]) * L[0] +
                   (hi_g[static_cast<size_t>(i)] - head_g[static_cast<size_t>(i)]) * L[static_cast<size_t>(qs)];
        for (int j = 1; j < qs; ++j)
            v += chain.alpha[static_cast<size_t>(s)][static_cast<size_t>(i)][static_cast<size_t>(j - 1)] * L[static_cast<size_t>(j)];
        out.phi[static_cast<size_t>(i)] = v;
    }
    double sv = chain.xi[0] + (chain.xi[static_cast<size_t>(s - 1)] - chain.xi[0]) * L[0] +
                (chain.xi[static_cast<size_t>(s)] - chain.xi[0]) * L[static_cast<size_t>(qs)];
    for (int j = 1; j < qs; ++j)
        sv += chain.beta[static_cast<size_t>(s)][static_cast<size_t>(j - 1)] * L[static_cast<size_t>(j)];
    out.sigma = sv;
    return out;
}

int PiecewiseTvarSpec::segment_of(long t) const {
    int k = 0;
    while (k < m() && t > taus[static_cast<size_t>(k)]) ++k;
    return k;
}

double tv_spectral_density(const SegmentParams& seg, double u, double lambda) {
    std::complex<double> poly(1.0, 0.0);
    for (int j = 1; j <= seg.p; ++j)
        poly -= seg.phi_at(j - 1, u) * std::exp(std::complex<double>(0.0, -lambda * j));
    double mag2 = std::norm(poly);
    if (mag2 < 1e-24) throw std::runtime_error("tv_spectral_density: near-unit root");
    double s = seg.sigma_at(u);
    return s * s / (2.0 * kPi) / mag2;
}

namespace {

bool stable_at(const SegmentParams& seg, double u, double c) {
    int p = seg.p;
    // Trim trailing (near-)zero leading AR coefficients so the companion
    // matrix is well posed.
    std::vector<double> phi(static_cast<size_t>(p));
    for (int i = 0; i < p; ++i) phi[static_cast<size_t>(i)] = seg.phi_at(i, u);
    while (!phi.empty() && std::abs(phi.back()) < 1e-14) phi.pop_back();
    if (phi.empty()) return true;
    int d = static_cast<int>(phi.size());
    // Roots of 1 - sum phi_i z^i: companion matrix of z^d - (phi_1/phi_d)... easier
    // to check the reciprocal polynomial sum phi_i w^{d-i} - w^d = 0 whose roots are
    // 1/z; stability (|z| > 1+c) means all reciprocal roots satisfy |w| < 1/(1+c).
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(d, d);
    // w^d = phi_1 w^{d-1} + phi_2 w^{d-2} + ... + phi_d
    for (int i = 0; i < d; ++i) comp(0, i) = phi[static_cast<size_t>(i)];
    for (int i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
    Eigen::VectorXcd ev = comp.eigenvalues();
    double bound = 1.0 / (1.0 + c);
    for (int i = 0; i < d; ++i)
        if (std::abs(ev(i)) >= bound) return false;
    return true;
}

}  // namespace

bool check_stability(const SegmentParams& seg, const std::vector<double>& u_grid, double c) {
    for (double u : u_grid)
        if (!stable_at(seg, u, c)) return false;
    return true;
}

bool check_stability(const SegmentParams& seg, double c, int grid_points) {
    std::vector<double> grid(static_cast<size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i)
        grid[static_cast<size_t>(i)] = grid_points == 1 ? 0.0 : static_cast<double>(i) / (grid_points - 1);
    return check_stability(seg, grid, c);
}

void PiecewiseTvarSpec::validate() const {
    if (T < 1) throw std::invalid_argument("spec: T must be positive");
    if (types.size() != taus.size()) throw std::invalid_argument("spec: types/taus size mismatch");
    if (segments.size() != taus.size() + 1) throw std::invalid_argument("spec: need m+1 segments");
    for (size_t k = 0; k < taus.size(); ++k) {
        if (taus[k] <= 0 || taus[k] >= T) throw std::invalid_argument("spec: change location out of range");
        if (k > 0 && taus[k] <= taus[k - 1]) throw std::invalid_argument("spec: change locations must increase");
    }
    for (size_t k = 0; k < segments.size(); ++k) {
        const auto& seg = segments[k];
        if (seg.p < 1) throw std::invalid_argument("spec: AR order must be >= 1");
        if (static_cast<int>(seg.phi.size()) != seg.p) throw std::invalid_argument("spec: phi count != p");
        long lo = k == 0 ? 0 : taus[k - 1];
        long hi = k == taus.size() ? T : taus[k];
        if (hi - lo <= static_cast<long>(seg.p) * (seg.q + 1))
            throw std::invalid_argument("spec: segment too short for its order/degree");
        for (long t = lo + 1; t <= hi; ++t) {
            double s = seg.sigma_at(static_cast<double>(t) / static_cast<double>(T));
            if (!(s > 0.0)) throw std::invalid_argument("spec: sigma must be positive on the sample grid");
        }
        // Stability is required only on the segment's own u-interval.
        std::vector<double> grid;
        int n_grid = static_cast<int>(std::min<long>(128, hi - lo));
        for (int i = 0; i < n_grid; ++i)
            grid.push_back((static_cast<double>(lo) +
                            static_cast<double>(hi - lo) * (i + 1) / n_grid) /
                           static_cast<double>(T));
        if (!check_stability(seg, grid, kStabilityMargin))
            throw std::invalid_argument("spec: unstable segment");
    }
    // Boundary behavior must match the declared change type.
    for (size_t k = 0; k < taus.size(); ++k) {
        double u = static_cast<double>(taus[k]) / static_cast<double>(T);
        const auto& left = segments[k];
        const auto& right = segments[k + 1];
        double gap = std::abs(left.sigma_at(u) - right.sigma_at(u));
        int p_big = std::max(left.p, right.p);
        for (int i = 0; i < p_big; ++i) {
            double lv = i < left.p ? left.phi_at(i, u) : 0.0;
            double rv = i < right.p ? right.phi_at(i, u) : 0.0;
            gap = std::max(gap, std::abs(lv - rv));
        }
        if (types[k] == ChangeType::Kink && gap > 1e-9)
            throw std::invalid_argument("spec: declared kink has a level discontinuity");
        if (types[k] == ChangeType::Jump && gap <= 1e-12)
            throw std::invalid_argument("spec: declared jump has no level discontinuity");
    }
}

TimeSeries simulate(const PiecewiseTvarSpec& spec, std::uint64_t seed, const SimulateOptions& options) {
    long T = spec.T;
    int p_max = 0;
    for (const auto& seg : spec.segments) p_max = std::max(p_max, seg.p);

    GaussianRng rng(seed);
    std::vector<double> lags(static_cast<size_t>(p_max), 0.0);  // lags[0] = X_{t-1}

    auto step = [&](const SegmentParams& seg, double u) {
        double mean = 0.0;
        for (int i = 0; i < seg.p; ++i) mean += seg.phi_at(i, u) * lags[static_cast<size_t>(i)];
        double s = seg.sigma_at(u);
        if (!(s > 0.0)) throw std::runtime_error("simulate: non-positive sigma at a sample point");
        double x = mean + s * rng.gaussian();
        for (int i = p_max - 1; i > 0; --i) lags[static_cast<size_t>(i)] = lags[static_cast<size_t>(i - 1)];
        if (p_max > 0) lags[0] = x;
        return x;
    };

    double u0 = 1.0 / static_cast<double>(T);
    for (long b = 0; b < options.burn_in; ++b) step(spec.segments[0], u0);

    TimeSeries out;
    out.values.resize(static_cast<size_t>(T));
    for (long t = 1; t <= T; ++t) {
        const auto& seg = spec.segments[static_cast<size_t>(spec.segment_of(t))];
        out.at(t) = step(seg, static_cast<double>(t) / static_cast<double>(T));
    }
    return out;
}

namespace {

void write_row(std::ostringstream& os, const char* key, const std::vector<double>& vals) {
    os << key;
    os.precision(17);
    for (double v : vals) os << ' ' << v;
    os << '\n';
}

}  // namespace

std::string serialize_spec(const PiecewiseTvarSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    os << "T " << spec.T << '\n';
    os << "m " << spec.m() << '\n';
    for (int k = 0; k < spec.m(); ++k)
        os << "change " << spec.taus[static_cast<size_t>(k)] << ' '
           << (spec.types[static_cast<size_t>(k)] == ChangeType::Jump ? "jump" : "kink") << '\n';
    for (const auto& seg : spec.segments) {
        os << "segment " << seg.p << ' ' << seg.q << '\n';
        for (const auto& c : seg.phi) write_row(os, "phi", c.coeffs);
        write_row(os, "sigma", seg.sigma.coeffs);
    }
    return os.str();
}

PiecewiseTvarSpec parse_spec(const std::string& text) {
    std::istringstream is(text);
    PiecewiseTvarSpec spec;
    std::string key;
    int m = -1;
    while (is >> key) {
        if (key == "T") {
            if (!(is >> spec.T)) throw std::invalid_argument("spec parse: bad T");
        } else if (key == "m") {
            if (!(is >> m)) throw std::invalid_argument("spec parse: bad m");
        } else if (key == "change") {
            long tau;
            std::string type;
            if (!(is >> tau >> type)) throw std::invalid_argument("spec parse: bad change line");
            spec.taus.push_back(tau);
            if (type == "jump")
                spec.types.push_back(ChangeType::Jump);
            else if (type == "kink")
                spec.types.push_back(ChangeType::Kink);
            else
                throw std::invalid_argument("spec parse: unknown change type '" + type + "'");
        } else if (key == "segment") {
            SegmentParams seg;
            if (!(is >> seg.p >> seg.q)) throw std::invalid_argument("spec parse: bad segment header");
            auto read_curve = [&](const char* want) {
                std::string k2;
                if (!(is >> k2) || k2 != want)
                    throw std::invalid_argument(std::string("spec parse: expected ") + want + " row");
                std::vector<double> c(static_cast<size_t>(seg.q + 1));
                for (auto& v : c)
                    if (!(is >> v)) throw std::invalid_argument("spec parse: bad coefficient");
                return PolyCurve(std::move(c));
            };
            for (int i = 0; i < seg.p; ++i) seg.phi.push_back(read_curve("phi"));
            seg.sigma = read_curve("sigma");
            spec.segments.push_back(std::move(seg));
        } else {
            throw std::invalid_argument("spec parse: unknown key '" + key + "'");
        }
    }
    if (m >= 0 && m != spec.m()) throw std::invalid_argument("spec parse: m does not match change lines");
    if (spec.segments.size() != spec.taus.size() + 1)
        throw std::invalid_argument("spec parse: segment count must be m+1");
    return spec;
}

}  // namespace lscp
