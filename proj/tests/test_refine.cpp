#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lscp/kink_deriv.hpp"
#include "lscp/likelihood.hpp"
#include "lscp/refine.hpp"

using namespace lscp;

namespace {

PiecewiseTvarSpec jump_spec(long T, long tau, double phi_l, double phi_r) {
    PiecewiseTvarSpec spec;
    spec.T = T;
    spec.taus = {tau};
    spec.types = {ChangeType::Jump};
    for (double phi : {phi_l, phi_r}) {
        SegmentParams seg;
        seg.p = 1;
        seg.q = 0;
        seg.phi.push_back(PolyCurve({phi}));
        seg.sigma = PolyCurve({1.0});
        spec.segments.push_back(seg);
    }
    spec.validate();
    return spec;
}

// Continuous AR(1) coefficient with slopes +s then -s meeting at tau / T.
PiecewiseTvarSpec kink_spec(long T, long tau, double level, double slope) {
    double r = static_cast<double>(tau) / static_cast<double>(T);
    PiecewiseTvarSpec spec;
    spec.T = T;
    spec.taus = {tau};
    spec.types = {ChangeType::Kink};
    for (double s : {slope, -slope}) {
        SegmentParams seg;
        seg.p = 1;
        seg.q = 1;
        seg.phi.push_back(PolyCurve({level - s * r, s}));
        seg.sigma = PolyCurve({1.0, 0.0});
        spec.segments.push_back(seg);
    }
    spec.validate();
    return spec;
}

TimeSeries gaussian_series(long T, std::uint64_t seed) {
    GaussianRng rng(seed);
    TimeSeries x;
    x.values.resize(static_cast<size_t>(T));
    for (auto& v : x.values) v = rng.gaussian();
    return x;
}

KinkParams random_eta(int p, int q, GaussianRng& rng) {
    KinkParams eta;
    eta.p_left = eta.p_right = p;
    eta.q_left = eta.q_right = q;
    eta.gamma.resize(static_cast<size_t>(p));
    for (auto& v : eta.gamma) v = 0.3 * rng.gaussian();
    eta.xi = 1.0 + 0.3 * std::abs(rng.gaussian());
    auto block = [&](std::vector<std::vector<double>>& alpha, std::vector<double>& beta) {
        alpha.assign(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(q)));
        for (auto& row : alpha)
            for (auto& v : row) v = 0.5 * rng.gaussian();
        beta.resize(static_cast<size_t>(q));
        for (auto& v : beta) v = 0.2 * rng.gaussian();
    };
    block(eta.alpha_left, eta.beta_left);
    block(eta.alpha_right, eta.beta_right);
    eta.r = 0.3 + 0.4 * rng.uniform();
    return eta;
}

}  // namespace

TEST_CASE("eta pack/unpack round-trip and ordering") {
    GaussianRng rng(5);
    for (auto [p, q] : {std::pair{1, 1}, {2, 2}, {3, 1}, {1, 3}}) {
        auto eta = random_eta(p, q, rng);
        auto v = pack_eta(eta);
        CHECK(v.size() == kink_eta_size(p, q));
        CHECK(v(v.size() - 1) == eta.r);  // r occupies the last slot
        auto back = unpack_eta(v, p, q);
        CHECK((pack_eta(back) - v).norm() == 0.0);
        CHECK(back.gamma == eta.gamma);
        CHECK(back.alpha_right == eta.alpha_right);
    }
    // Every eta coordinate lives in exactly one slot.
    auto eta = random_eta(2, 2, rng);
    long z = kink_eta_size(2, 2);
    CHECK(z == 2 + 1 + 2 * 2 * 2 + 2 * 2 + 1);
    for (long i = 0; i < z; ++i) {
        auto v = pack_eta(eta);
        v(i) += 1.0;
        auto mod = unpack_eta(v, 2, 2);
        CHECK((pack_eta(mod) - v).norm() == 0.0);
    }
}

TEST_CASE("kink point likelihood agrees across parametrizations") {
    GaussianRng rng(6);
    auto x = gaussian_series(500, 31);
    for (int rep = 0; rep < 10; ++rep) {
        auto eta = random_eta(2, 2, rng);
        for (long t : {10L, 123L, 456L}) {
            double a = kink_loglik_point(eta, x, t, 500);
            double b = loglik_kink_point(eta, x, t);
            if (a == kNegInf || b == kNegInf)
                CHECK(a == b);
            else
                CHECK(a == doctest::Approx(b).epsilon(1e-13));
        }
    }
}

TEST_CASE("analytic gradient and Hessian match finite differences") {
    GaussianRng rng(7);
    long T = 400;
    auto x = gaussian_series(T, 77);

    int checked = 0;
    for (int rep = 0; rep < 60 && checked < 40; ++rep) {
        int p = 1 + static_cast<int>(rng.uniform() * 3.0);
        int q = 1 + static_cast<int>(rng.uniform() * 3.0);
        auto eta = random_eta(p, q, rng);
        long t = p + 1 + static_cast<long>(rng.uniform() * static_cast<double>(T - p - 2));
        if (std::abs(static_cast<double>(t) / static_cast<double>(T) - eta.r) < 5e-3) continue;
        if (kink_loglik_point(eta, x, t, T) == kNegInf) continue;

        Eigen::VectorXd grad;
        Eigen::MatrixXd hess;
        double ll = kink_point_derivs(eta, x, t, T, &grad, &hess);
        CHECK(ll == doctest::Approx(kink_loglik_point(eta, x, t, T)).epsilon(1e-13));

        long z = kink_eta_size(p, q);
        auto value_at = [&](const Eigen::VectorXd& v) {
            return kink_loglik_point(unpack_eta(v, p, q), x, t, T);
        };
        Eigen::VectorXd eta0 = pack_eta(eta);
        const double step = 1e-6;
        bool feasible = true;
        Eigen::VectorXd fd_grad(z);
        for (long i = 0; i < z && feasible; ++i) {
            Eigen::VectorXd up = eta0, dn = eta0;
            up(i) += step;
            dn(i) -= step;
            double fu = value_at(up), fd = value_at(dn);
            if (fu == kNegInf || fd == kNegInf) feasible = false;
            fd_grad(i) = (fu - fd) / (2.0 * step);
        }
        if (!feasible) continue;
        double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
        CHECK((grad - fd_grad).lpNorm<Eigen::Infinity>() / scale < 1e-5);

        // Hessian vs finite differences of the analytic gradient.
        const double hstep = 1e-6;
        Eigen::MatrixXd fd_hess(z, z);
        for (long i = 0; i < z && feasible; ++i) {
            Eigen::VectorXd up = eta0, dn = eta0;
            up(i) += hstep;
            dn(i) -= hstep;
            Eigen::VectorXd gu, gd;
            if (kink_point_derivs(unpack_eta(up, p, q), x, t, T, &gu, nullptr) == kNegInf ||
                kink_point_derivs(unpack_eta(dn, p, q), x, t, T, &gd, nullptr) == kNegInf) {
                feasible = false;
                break;
            }
            fd_hess.col(i) = (gu - gd) / (2.0 * hstep);
        }
        if (!feasible) continue;
        double hscale = std::max(1.0, hess.lpNorm<Eigen::Infinity>());
        CHECK((hess - fd_hess).lpNorm<Eigen::Infinity>() / hscale < 1e-4);
        CHECK((hess - hess.transpose()).lpNorm<Eigen::Infinity>() / hscale < 1e-12);
        ++checked;
    }
    CHECK(checked >= 40);
}

TEST_CASE("extended window arithmetic") {
    ScanConfig scan{100, 40};
    ModelConfiguration cfg{2000,
                           {500, 1000, 1600},
                           {ChangeType::Jump, ChangeType::Kink, ChangeType::Jump},
                           {1, 1, 1, 1},
                           {0, 1, 1, 0}};
    auto w0 = extended_window(cfg, 0, scan);
    CHECK(w0.left == 0);
    CHECK(w0.right == 1000 - 2 * 40);
    CHECK(w0.search_lo == 400);
    CHECK(w0.search_hi == 600);
    auto w1 = extended_window(cfg, 1, scan);
    CHECK(w1.left == 500 + 100);
    CHECK(w1.right == 1600 - 100);
    CHECK(w1.search_lo == 1000 - 80);
    CHECK(w1.search_hi == 1000 + 80);
    auto w2 = extended_window(cfg, 2, scan);
    CHECK(w2.left == 1000 + 80);
    CHECK(w2.right == 2000);
    CHECK(w2.search_lo == 1500);
    CHECK(w2.search_hi == 1700);
    CHECK(w1.left < w1.search_lo);
    CHECK(w1.search_hi < w1.right);
    CHECK_THROWS(extended_window(cfg, 3, scan));
}

TEST_CASE("jump refinement recovers a level shift in the AR coefficient") {
    long T = 600, tau0 = 300;
    auto spec = jump_spec(T, tau0, 0.9, -0.7);
    ScanConfig scan{60, 20};
    ModelConfiguration cfg{T, {296}, {ChangeType::Jump}, {1, 1}, {0, 0}};

    int hits = 0;
    for (int rep = 0; rep < 10; ++rep) {
        auto x = simulate(spec, 400 + static_cast<std::uint64_t>(rep));
        auto jump = refine_jump(x, cfg, 0, scan);
        CHECK(jump.tau3 >= jump.window.search_lo);
        CHECK(jump.tau3 <= jump.window.search_hi);
        if (std::abs(jump.tau3 - tau0) <= 5) ++hits;
    }
    CHECK(hits >= 8);
}

TEST_CASE("bootstrap interval is tight and deterministic under a strong jump") {
    // An AR sign flip alone leaves the split statistic with appreciable
    // spread (direct simulation at the true parameters gives a 95%
    // displacement range of about +-5); adding a 6x noise-level jump makes
    // misplacing even one point overwhelmingly costly.
    long T = 600, tau0 = 300;
    auto spec = jump_spec(T, tau0, 0.9, -0.9);
    spec.segments[1].sigma = PolyCurve({6.0});
    auto x = simulate(spec, 21);
    ScanConfig scan{60, 20};
    ModelConfiguration cfg{T, {302}, {ChangeType::Jump}, {1, 1}, {0, 0}};
    auto jump = refine_jump(x, cfg, 0, scan);

    RefineConfig rc;
    rc.bootstrap_b = 200;
    rc.seed = 99;
    auto cis = bootstrap_jump_ci(jump, T, rc);
    REQUIRE(cis.size() == 3);
    for (const auto& ci : cis) {
        CHECK(ci.lower <= ci.upper);
        CHECK(ci.method == "bootstrap");
    }
    CHECK(cis[0].level == 0.80);
    // Nested levels widen the interval.
    CHECK(cis[2].upper - cis[2].lower >= cis[0].upper - cis[0].lower);
    // Direct simulation at the true parameters puts the 95% displacement
    // range at [-1, 2] for this signal, so the interval stays very tight
    // without collapsing to a point.
    CHECK(cis[2].upper - cis[2].lower <= 4);
    CHECK(cis[0].upper - cis[0].lower <= 2);

    auto again = bootstrap_jump_ci(jump, T, rc);
    for (size_t i = 0; i < cis.size(); ++i) {
        CHECK(cis[i].lower == again[i].lower);
        CHECK(cis[i].upper == again[i].upper);
    }
    // Thread count must not change the result.
    RefineConfig rc4 = rc;
    rc4.threads = 4;
    auto threaded = bootstrap_jump_ci(jump, T, rc4);
    for (size_t i = 0; i < cis.size(); ++i) {
        CHECK(cis[i].lower == threaded[i].lower);
        CHECK(cis[i].upper == threaded[i].upper);
    }
}

TEST_CASE("kink refinement locates the slope break") {
    long T = 1200, tau0 = 600;
    auto spec = kink_spec(T, tau0, 0.75, 3.0);
    ScanConfig scan{100, 50};
    ModelConfiguration cfg{T, {590}, {ChangeType::Kink}, {1, 1}, {1, 1}};

    int hits = 0;
    for (int rep = 0; rep < 6; ++rep) {
        auto x = simulate(spec, 700 + static_cast<std::uint64_t>(rep));
        auto kink = refine_kink(x, cfg, 0, scan);
        CHECK(kink.tau3 >= kink.window.search_lo);
        CHECK(kink.tau3 <= kink.window.search_hi);
        CHECK(kink.s_value > kNegInf);
        if (std::abs(kink.tau3 - tau0) <= static_cast<long>(0.05 * static_cast<double>(T)))
            ++hits;
    }
    CHECK(hits >= 5);
}

TEST_CASE("sandwich covariance is symmetric PSD with positive r variance") {
    long T = 1200, tau0 = 600;
    auto spec = kink_spec(T, tau0, 0.75, 3.0);
    auto x = simulate(spec, 909);
    ScanConfig scan{100, 50};
    ModelConfiguration cfg{T, {595}, {ChangeType::Kink}, {1, 1}, {1, 1}};
    auto kink = refine_kink(x, cfg, 0, scan);

    auto cov = kink_sandwich(x, kink);
    long z = cov.Sigma.rows();
    CHECK(z == kink_eta_size(1, 1));
    CHECK((cov.Sigma - cov.Sigma.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.Sigma);
    CHECK(eig.eigenvalues().minCoeff() >=
          -1e-8 * cov.Sigma.lpNorm<Eigen::Infinity>());
    CHECK(cov.rr > 0.0);
    CHECK(cov.rr == cov.Sigma(z - 1, z - 1));

    // The literal full-sample outer product is rank one.
    auto lit = kink_sandwich(x, kink, true);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lit.G);
    CHECK(svd.singularValues()(1) <= 1e-10 * svd.singularValues()(0) + 1e-300);
}

TEST_CASE("kink interval formula") {
    // Zero variance collapses the interval.
    auto ci0 = kink_ci(1000, 0.0, 0.95, 0, 2000, 2000);
    CHECK(ci0.lower == 1000);
    CHECK(ci0.upper == 1000);
    CHECK(ci0.method == "asymptotic-normal");

    double srr = 4.0e-4;
    auto ci = kink_ci(1000, srr, 0.95, 0, 2000, 2000);
    long half = std::llround(1.959964 * 2000.0 * std::sqrt(srr) / std::sqrt(2000.0));
    CHECK(ci.lower == 1000 - half);
    CHECK(ci.upper == 1000 + half);

    // Quartering the variance halves the width (up to rounding).
    auto ci_q = kink_ci(1000, srr / 4.0, 0.95, 0, 2000, 2000);
    CHECK(std::abs((ci_q.upper - ci_q.lower) * 2 - (ci.upper - ci.lower)) <= 2);

    // Clipping to the sample range.
    auto ci_edge = kink_ci(10, 1.0, 0.95, 0, 2000, 2000);
    CHECK(ci_edge.lower == 1);
    CHECK(ci_edge.upper <= 2000);
}

TEST_CASE("zero slopes give zero r-sensitivity") {
    GaussianRng rng(9);
    auto x = gaussian_series(300, 15);
    KinkParams eta = random_eta(2, 2, rng);
    for (auto& row : eta.alpha_left)
        for (auto& v : row) v = 0.0;
    for (auto& row : eta.alpha_right)
        for (auto& v : row) v = 0.0;
    eta.beta_left.assign(2, 0.0);
    eta.beta_right.assign(2, 0.0);
    for (long t : {20L, 150L, 280L}) {
        Eigen::VectorXd grad;
        kink_point_derivs(eta, x, t, 300, &grad, nullptr);
        CHECK(grad(grad.size() - 1) == 0.0);
    }
}

TEST_CASE("candidate localization re-centers, merges, snaps and clamps") {
    long T = 768, tau0 = 384;
    auto spec = jump_spec(T, tau0, 0.9, -0.7);
    auto x = simulate(spec, 77);

    CandidateSet cands;
    cands.config = ScanConfig{64, 32};
    cands.jumps.push_back({tau0 - 30, 1.0});  // off-center scan hit
    cands.jumps.push_back({tau0 - 14, 0.8});  // shadow of the same break
    cands.jumps.push_back({70, 0.2});         // near the unscanned margin
    cands.kinks.push_back({tau0 + 20, 0.5});  // kink reading of the jump

    CandidateSet out = localize_candidates(x, cands);
    REQUIRE(out.jumps.size() == 2);
    CHECK(std::abs(out.jumps[1].index - tau0) <= 10);
    CHECK(out.jumps[1].stat == doctest::Approx(1.0));  // larger stat survives the merge
    for (const auto& c : out.jumps) {
        CHECK(c.index >= cands.config.h);
        CHECK(c.index <= T - cands.config.h);
    }
    // a kink that lands next to a jump either snaps onto the jump's exact
    // index or stays clear of it; nothing may remain in the snap gap
    REQUIRE(out.kinks.size() == 1);
    for (const auto& kc : out.kinks)
        for (const auto& jc : out.jumps) {
            long d = std::abs(kc.index - jc.index);
            CHECK((d == 0 || d > 25));
        }

    CandidateSet again = localize_candidates(x, cands);
    REQUIRE(again.jumps.size() == out.jumps.size());
    for (size_t i = 0; i < out.jumps.size(); ++i)
        CHECK(again.jumps[i].index == out.jumps[i].index);
}
