#include "lscp/kink_deriv.hpp"

#include <cmath>

namespace lscp {

long kink_eta_size(int p, int q) { return p + 1 + 2 * static_cast<long>(p) * q + 2 * q + 1; }

Eigen::VectorXd pack_eta(const KinkParams& params) {
    int p = params.p_left;
    int q = params.q_left;
    if (params.p_right != p || params.q_right != q)
        throw std::invalid_argument("pack_eta: equal orders required on both sides");
    Eigen::VectorXd eta(kink_eta_size(p, q));
    long ix = 0;
    for (int i = 0; i < p; ++i) eta(ix++) = params.gamma[static_cast<size_t>(i)];
    eta(ix++) = params.xi;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < q; ++j) eta(ix++) = params.alpha_left[static_cast<size_t>(i)][static_cast<size_t>(j)];
    for (int j = 0; j < q; ++j) eta(ix++) = params.beta_left[static_cast<size_t>(j)];
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < q; ++j) eta(ix++) = params.alpha_right[static_cast<size_t>(i)][static_cast<size_t>(j)];
    for (int j = 0; j < q; ++j) eta(ix++) = params.beta_right[static_cast<size_t>(j)];
    eta(ix++) = params.r;
    return eta;
}

KinkParams unpack_eta(const Eigen::VectorXd& eta, int p, int q) {
    if (eta.size() != kink_eta_size(p, q)) throw std::invalid_argument("unpack_eta: size mismatch");
    KinkParams params;
    params.p_left = params.p_right = p;
    params.q_left = params.q_right = q;
    long ix = 0;
    params.gamma.resize(static_cast<size_t>(p));
    for (int i = 0; i < p; ++i) params.gamma[static_cast<size_t>(i)] = eta(ix++);
    params.xi = eta(ix++);
    auto read_block = [&](std::vector<std::vector<double>>& alpha, std::vector<double>& beta) {
        alpha.assign(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(q)));
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < q; ++j) alpha[static_cast<size_t>(i)][static_cast<size_t>(j)] = eta(ix++);
        beta.resize(static_cast<size_t>(q));
        for (int j = 0; j < q; ++j) beta[static_cast<size_t>(j)] = eta(ix++);
    };
    read_block(params.alpha_left, params.beta_left);
    read_block(params.alpha_right, params.beta_right);
    params.r = eta(ix++);
    return params;
}

double kink_loglik_point(const KinkParams& params, const TimeSeries& x, long t, long T) {
    int p = params.p_max();
    if (t <= p || t > x.size()) throw std::out_of_range("kink_loglik_point: need p < t <= T");
    double u = static_cast<double>(t) / static_cast<double>(T);
    auto curves = eval_kink_curves(params, u);
    if (!(curves.sigma > kSigmaMin)) return kNegInf;
    double e = x.at(t);
    for (int i = 1; i <= p; ++i) e -= curves.phi[static_cast<size_t>(i - 1)] * x.at(t - i);
    return -0.5 * std::log(2.0 * kPi * curves.sigma * curves.sigma) -
           e * e / (2.0 * curves.sigma * curves.sigma);
}

double kink_point_derivs(const KinkParams& params, const TimeSeries& x, long t, long T,
                         Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
    int p = params.p_left;
    int q = params.q_left;
    if (params.p_right != p || params.q_right != q)
        throw std::invalid_argument("kink_point_derivs: equal orders required");
    if (t <= p || t > x.size()) throw std::out_of_range("kink_point_derivs: need p < t <= T");

    const long z = kink_eta_size(p, q);
    const double u = static_cast<double>(t) / static_cast<double>(T);
    const double r = params.r;
    const bool left = u <= r;  // closed left interval
    const double dm = std::min(u - r, 0.0);
    const double dp = std::max(u - r, 0.0);

    auto curves = eval_kink_curves(params, u);
    const double sigma = curves.sigma;
    if (!(sigma > kSigmaMin)) return kNegInf;
    double e = x.at(t);
    for (int i = 1; i <= p; ++i) e -= curves.phi[static_cast<size_t>(i - 1)] * x.at(t - i);
    const double ll = -0.5 * std::log(2.0 * kPi * sigma * sigma) - e * e / (2.0 * sigma * sigma);
    if (grad == nullptr && hess == nullptr) return ll;

    // Hinge power basis Lambda and its r-derivative Lambda1 for the active
    // side (the inactive side's entries are all zero except the j = 1
    // indicator slot, handled by `left`).
    Eigen::VectorXd lam_m = Eigen::VectorXd::Zero(q), lam_p = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd lam1_m = Eigen::VectorXd::Zero(q), lam1_p = Eigen::VectorXd::Zero(q);
    {
        double pw = dm;
        for (int j = 1; j <= q; ++j, pw *= dm) lam_m(j - 1) = pw;
        pw = dp;
        for (int j = 1; j <= q; ++j, pw *= dp) lam_p(j - 1) = pw;
        if (left) {
            lam1_m(0) = -1.0;
            for (int j = 2; j <= q; ++j) lam1_m(j - 1) = -static_cast<double>(j) * lam_m(j - 2);
        } else {
            lam1_p(0) = -1.0;
            for (int j = 2; j <= q; ++j) lam1_p(j - 1) = -static_cast<double>(j) * lam_p(j - 2);
        }
    }

    // d sigma / d r and d phi^i / d r for the active side.
    const auto& a_act = left ? params.alpha_left : params.alpha_right;
    const auto& b_act = left ? params.beta_left : params.beta_right;
    const Eigen::VectorXd& lam1_act = left ? lam1_m : lam1_p;
    double dsig_dr = 0.0;
    for (int j = 1; j <= q; ++j) dsig_dr += b_act[static_cast<size_t>(j - 1)] * lam1_act(j - 1);
    std::vector<double> dphi_dr(static_cast<size_t>(p), 0.0);
    for (int i = 0; i < p; ++i)
        for (int j = 1; j <= q; ++j)
            dphi_dr[static_cast<size_t>(i)] += a_act[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] * lam1_act(j - 1);

    // Second derivatives in r.
    double d2sig = 0.0;
    std::vector<double> d2phi(static_cast<size_t>(p), 0.0);
    {
        if (q >= 2) {
            d2sig += 2.0 * b_act[1];
            for (int i = 0; i < p; ++i) d2phi[static_cast<size_t>(i)] += 2.0 * a_act[static_cast<size_t>(i)][1];
        }
        double d = left ? dm : dp;
        double pw = d;  // d^(j-2) starting at j = 3
        for (int j = 3; j <= q; ++j, pw *= d) {
            double f = static_cast<double>(j) * (j - 1) * pw;
            d2sig += b_act[static_cast<size_t>(j - 1)] * f;
            for (int i = 0; i < p; ++i)
                d2phi[static_cast<size_t>(i)] += a_act[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] * f;
        }
    }

    // Parameter-space gradients of sigma and phi^i.
    const long off_al = p + 1;
    const long off_bl = off_al + static_cast<long>(p) * q;
    const long off_ar = off_bl + q;
    const long off_br = off_ar + static_cast<long>(p) * q;
    const long ix_r = z - 1;

    Eigen::VectorXd v_sig = Eigen::VectorXd::Zero(z);
    v_sig(p) = 1.0;
    v_sig.segment(off_bl, q) = lam_m;
    v_sig.segment(off_br, q) = lam_p;
    v_sig(ix_r) = dsig_dr;

    std::vector<Eigen::VectorXd> v_phi(static_cast<size_t>(p));
    for (int i = 0; i < p; ++i) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(z);
        v(i) = 1.0;
        v.segment(off_al + static_cast<long>(i) * q, q) = lam_m;
        v.segment(off_ar + static_cast<long>(i) * q, q) = lam_p;
        v(ix_r) = dphi_dr[static_cast<size_t>(i)];
        v_phi[static_cast<size_t>(i)] = std::move(v);
    }

    const double s2 = sigma * sigma;
    const double dl_dsig = -1.0 / sigma + e * e / (s2 * sigma);
    std::vector<double> dl_dphi(static_cast<size_t>(p));
    for (int i = 1; i <= p; ++i) dl_dphi[static_cast<size_t>(i - 1)] = e / s2 * x.at(t - i);

    if (grad != nullptr) {
        Eigen::VectorXd g = dl_dsig * v_sig;
        for (int i = 0; i < p; ++i) g += dl_dphi[static_cast<size_t>(i)] * v_phi[static_cast<size_t>(i)];
        *grad = std::move(g);
    }

    if (hess != nullptr) {
        const double d2l_dsig2 = 1.0 / s2 - 3.0 * e * e / (s2 * s2);
        Eigen::MatrixXd H = d2l_dsig2 * (v_sig * v_sig.transpose());
        for (int i = 1; i <= p; ++i) {
            double cross = -2.0 * e * x.at(t - i) / (s2 * sigma);
            const Eigen::VectorXd& vp = v_phi[static_cast<size_t>(i - 1)];
            H += cross * (v_sig * vp.transpose() + vp * v_sig.transpose());
        }
        for (int i = 1; i <= p; ++i)
            for (int j = 1; j <= p; ++j)
                H += (-x.at(t - i) * x.at(t - j) / s2) *
                     (v_phi[static_cast<size_t>(i - 1)] * v_phi[static_cast<size_t>(j - 1)].transpose());

        // Curvature of sigma and phi^i themselves (bordered blocks: the
        // only nonzero second derivatives involve r).
        Eigen::VectorXd dgrad_sig = Eigen::VectorXd::Zero(z);
        dgrad_sig.segment(off_bl, q) = lam1_m;
        dgrad_sig.segment(off_br, q) = lam1_p;
        H.col(ix_r) += dl_dsig * dgrad_sig;
        H.row(ix_r) += dl_dsig * dgrad_sig.transpose();
        H(ix_r, ix_r) += dl_dsig * d2sig;

        for (int i = 0; i < p; ++i) {
            Eigen::VectorXd dgrad_phi = Eigen::VectorXd::Zero(z);
            dgrad_phi.segment(off_al + static_cast<long>(i) * q, q) = lam1_m;
            dgrad_phi.segment(off_ar + static_cast<long>(i) * q, q) = lam1_p;
            H.col(ix_r) += dl_dphi[static_cast<size_t>(i)] * dgrad_phi;
            H.row(ix_r) += dl_dphi[static_cast<size_t>(i)] * dgrad_phi.transpose();
            H(ix_r, ix_r) += dl_dphi[static_cast<size_t>(i)] * d2phi[static_cast<size_t>(i)];
        }
        *hess = std::move(H);
    }
    return ll;
}

}  // namespace lscp
