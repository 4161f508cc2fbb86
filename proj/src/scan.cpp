#include "lscp/scan.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <sstream>

#include "lscp/parallel.hpp"

namespace lscp {

void ScanConfig::validate(long T) const {
    if (h < 8 || h_tilde < 8) throw std::invalid_argument("scan config: window radii must be >= 8");
    if (h % 2 != 0 || h_tilde % 2 != 0) throw std::invalid_argument("scan config: window radii must be even");
    if (4 * h >= T) throw std::invalid_argument("scan config: h must be below T/4");
    if (8 * h_tilde >= T) throw std::invalid_argument("scan config: h_tilde must be below T/8");
}

ScanConfig window_radii(long T, const RuleOfThumb& constants, RadiiMode mode) {
    if (T < 64) throw std::invalid_argument("window_radii: T must be at least 64");
    ScanConfig cfg;
    cfg.h = round_even(constants.C * std::pow(static_cast<double>(T), constants.delta));
    cfg.h_tilde = round_even(constants.C_tilde *
                             std::pow(static_cast<double>(T), 2.0 / 3.0 + constants.delta_tilde));
    if (mode == RadiiMode::Table) {
        if (T == 1000) cfg.h = 100;
        if (T == 2000) cfg.h = 150;
        if (T == 2000) cfg.h_tilde = 150;
        if (T == 4000) cfg.h_tilde = 250;
    }
    if (cfg.h < 8 || 4 * cfg.h >= T)
        throw std::invalid_argument("window_radii: h out of the admissible range [8, T/4)");
    if (cfg.h_tilde < 8 || 8 * cfg.h_tilde >= T)
        throw std::invalid_argument("window_radii: h_tilde out of the admissible range [8, T/8)");
    return cfg;
}

double local_periodogram(const TimeSeries& x, long t, long h, double lambda) {
    if (t < h || t > x.size()) throw std::out_of_range("local_periodogram: need h <= t <= T");
    std::complex<double> acc(0.0, 0.0);
    for (long k = t - h + 1; k <= t; ++k)
        acc += x.at(k) * std::exp(std::complex<double>(0.0, -lambda * static_cast<double>(k)));
    return std::norm(acc) / (2.0 * kPi * static_cast<double>(h));
}

double jump_scan(const TimeSeries& x, long t, long w, long h) {
    if (t < h || t > x.size() - h) throw std::out_of_range("jump_scan: need h <= t <= T-h");
    if (w < 0 || 2 * w > h) throw std::out_of_range("jump_scan: need 0 <= w <= h/2");
    double acc = 0.0;
    for (long k = -w; k <= w; ++k) {
        double lambda = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(h);
        acc += local_periodogram(x, t + h, h, lambda) - local_periodogram(x, t, h, lambda);
    }
    return acc / static_cast<double>(h);
}

double kink_scan(const TimeSeries& x, long t, long w, long h_tilde) {
    long T = x.size();
    if (t < 2 * h_tilde || t > T - 2 * h_tilde)
        throw std::out_of_range("kink_scan: need 2h~ <= t <= T-2h~");
    return static_cast<double>(T) / static_cast<double>(h_tilde) *
           (jump_scan(x, t + h_tilde, w, h_tilde) - jump_scan(x, t - h_tilde, w, h_tilde));
}

namespace {

// Periodogram values I_h(t, 2 pi k / h) for k = 0..h/2, rows indexed by t
// (only rows t in [h, T] are filled). The window covers a full residue
// cycle mod h, so the absolute-index phases reduce to an ordinary window
// DFT up to a unit-modulus factor that the squared magnitude discards.
Eigen::MatrixXd periodogram_table(const TimeSeries& x, long h, int threads) {
    long T = x.size();
    long nf = h / 2 + 1;
    Eigen::MatrixXd cosw(h, nf), sinw(h, nf);
    for (long l = 0; l < h; ++l)
        for (long k = 0; k < nf; ++k) {
            double ang = 2.0 * kPi * static_cast<double>(k) * static_cast<double>(l) / static_cast<double>(h);
            cosw(l, k) = std::cos(ang);
            sinw(l, k) = std::sin(ang);
        }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(T + 1, nf);
    const double scale = 1.0 / (2.0 * kPi * static_cast<double>(h));
    parallel_for(T - h + 1, threads, [&](long idx) {
        long t = h + idx;
        Eigen::Map<const Eigen::VectorXd> win(x.values.data() + (t - h), h);
        Eigen::RowVectorXd cr = win.transpose() * cosw;
        Eigen::RowVectorXd sr = win.transpose() * sinw;
        out.row(t) = (cr.array().square() + sr.array().square()) * scale;
    });
    return out;
}

// sup over w of |(1/h) (d_0 + 2 sum_{k=1}^w d_k)| given per-frequency
// differences d_k.
double sup_cumulative(const Eigen::RowVectorXd& d, long h) {
    double cum = d(0);
    double best = std::abs(cum);
    for (long k = 1; k < d.size(); ++k) {
        cum += 2.0 * d(k);
        best = std::max(best, std::abs(cum));
    }
    return best / static_cast<double>(h);
}

}  // namespace

MaximalDiffs maximal_diffs(const TimeSeries& x, const ScanConfig& config, int threads) {
    long T = x.size();
    config.validate(T);
    MaximalDiffs out;
    out.D.assign(static_cast<size_t>(T), 0.0);
    out.D1.assign(static_cast<size_t>(T), 0.0);

    {
        long h = config.h;
        Eigen::MatrixXd per = periodogram_table(x, h, threads);
        parallel_for(T - 2 * h + 1, threads, [&](long idx) {
            long t = h + idx;
            Eigen::RowVectorXd d = per.row(t + h) - per.row(t);
            out.D[static_cast<size_t>(t - 1)] = sup_cumulative(d, h);
        });
    }
    {
        long ht = config.h_tilde;
        Eigen::MatrixXd per = periodogram_table(x, ht, threads);
        double scale = static_cast<double>(T) / static_cast<double>(ht);
        parallel_for(T - 4 * ht + 1, threads, [&](long idx) {
            long t = 2 * ht + idx;
            Eigen::RowVectorXd d =
                (per.row(t + 2 * ht) - per.row(t + ht)) - (per.row(t) - per.row(t - ht));
            out.D1[static_cast<size_t>(t - 1)] = scale * sup_cumulative(d, ht);
        });
    }
    return out;
}

namespace {

// Local maxima of the map over sliding windows [j-back+1, j+fwd], smallest
// index winning ties, zero plateaus excluded.
std::vector<Candidate> window_maxima(const std::vector<double>& map, long T, long back, long fwd) {
    std::vector<Candidate> out;
    for (long j = 1; j <= T; ++j) {
        double v = map[static_cast<size_t>(j - 1)];
        if (!(v > 0.0)) continue;
        long lo = std::max<long>(1, j - back + 1);
        long hi = std::min<long>(T, j + fwd);
        bool is_max = true;
        for (long i = lo; i <= hi && is_max; ++i) {
            double vi = map[static_cast<size_t>(i - 1)];
            if (vi > v || (vi == v && i < j)) is_max = false;
        }
        if (is_max) out.push_back({j, v});
    }
    return out;
}

}  // namespace

CandidateSet candidates_unfiltered(const MaximalDiffs& diffs, long T, const ScanConfig& config) {
    CandidateSet set;
    set.config = config;
    set.jumps = window_maxima(diffs.D, T, config.h, config.h);
    set.kinks = window_maxima(diffs.D1, T, 2 * config.h_tilde, 2 * config.h_tilde);
    return set;
}

CandidateSet candidates_from_diffs(const MaximalDiffs& diffs, long T, const ScanConfig& config) {
    CandidateSet set = candidates_unfiltered(diffs, T, config);
    auto kinks = std::move(set.kinks);
    set.kinks.clear();
    for (const auto& cand : kinks) {
        bool excluded = false;
        for (const auto& jump : set.jumps)
            if (cand.index >= jump.index - config.h + 1 && cand.index <= jump.index + config.h) {
                excluded = true;
                break;
            }
        if (!excluded) set.kinks.push_back(cand);
    }
    return set;
}

CandidateSet candidates(const TimeSeries& x, const ScanConfig& config, int threads) {
    return candidates_from_diffs(maximal_diffs(x, config, threads), x.size(), config);
}

std::string dump_scan_tsv(const MaximalDiffs& diffs) {
    std::ostringstream os;
    os.precision(17);
    os << "t\tD\tD1\n";
    for (size_t i = 0; i < diffs.D.size(); ++i)
        os << (i + 1) << '\t' << diffs.D[i] << '\t' << diffs.D1[i] << '\n';
    return os.str();
}

}  // namespace lscp
