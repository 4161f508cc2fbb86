#include "lscp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lscp/parallel.hpp"

namespace lscp {

namespace {

SegmentParams ar1(std::initializer_list<double> phi, std::initializer_list<double> sigma) {
    SegmentParams seg;
    seg.p = 1;
    seg.phi = {PolyCurve(phi)};
    seg.sigma = PolyCurve(sigma);
    int deg = std::max(seg.phi[0].degree(), seg.sigma.degree());
    seg.q = deg;
    return seg;
}

SimulationModel tvar_model(int id, long T, std::vector<long> taus,
                           std::vector<ChangeType> types, std::vector<SegmentParams> segs) {
    SimulationModel m;
    m.id = id;
    m.T = T;
    m.taus = taus;
    m.types = types;
    m.tvar_representable = true;
    m.spec.T = T;
    m.spec.taus = std::move(taus);
    m.spec.types = std::move(types);
    m.spec.segments = std::move(segs);
    m.spec.validate();
    PiecewiseTvarSpec spec = m.spec;
    m.simulate = [spec](std::uint64_t seed) { return simulate(spec, seed); };
    return m;
}

// AR(1) + optional MA(1) recursion with per-sample coefficient callbacks;
// burn-in matches the library simulator (200 samples frozen at t = 1).
template <class Phi, class Sigma, class Ma>
TimeSeries simulate_custom(long T, std::uint64_t seed, Phi phi, Sigma sigma, Ma ma) {
    GaussianRng rng(seed);
    double x_prev = 0.0, e_prev = 0.0;
    auto step = [&](long t) {
        double e = sigma(t) * rng.gaussian();
        double x = phi(t) * x_prev + e + ma(t) * e_prev;
        x_prev = x;
        e_prev = e;
        return x;
    };
    for (long b = 0; b < 200; ++b) step(1);
    TimeSeries out;
    out.values.resize(static_cast<size_t>(T));
    for (long t = 1; t <= T; ++t) out.at(t) = step(t);
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

SimulationModel make_model(int id, long T) {
    auto fixed_length = [&](long canonical) {
        if (T != 0 && T != canonical)
            throw std::invalid_argument("make_model: model " + std::to_string(id) +
                                        " has fixed length " + std::to_string(canonical));
        return canonical;
    };
    switch (id) {
        case 1: {
            long len = T == 0 ? 1000 : T;
            if (len < 256) throw std::invalid_argument("make_model: T too small");
            return tvar_model(1, len, {len / 2}, {ChangeType::Jump},
                              {ar1({0.9, -0.4}, {2.0, -1.0}), ar1({-0.7, 0.2}, {1.0, 1.0})});
        }
        case 2: {
            long len = T == 0 ? 2000 : T;
            if (len < 256) throw std::invalid_argument("make_model: T too small");
            return tvar_model(2, len, {len / 2}, {ChangeType::Kink},
                              {ar1({-0.75, 3.0}, {1.0}), ar1({2.25, -3.0}, {1.0})});
        }
        case 3: {
            long len = fixed_length(2048);
            return tvar_model(3, len, {}, {}, {ar1({0.99, -1.98}, {1.0})});
        }
        case 4: {
            long len = fixed_length(2048);
            SimulationModel m;
            m.id = 4;
            m.T = len;
            // Noise SD 10|t/2048 - 0.5| touches zero at the midpoint; the
            // single degenerate sample is clamped at sigma_min.
            m.simulate = [len](std::uint64_t seed) {
                return simulate_custom(
                    len, seed, [](long) { return 0.5; },
                    [len](long t) {
                        double s = 10.0 * std::fabs(static_cast<double>(t) /
                                                        static_cast<double>(len) -
                                                    0.5);
                        return std::max(s, kSigmaMin);
                    },
                    [](long) { return 0.0; });
            };
            return m;
        }
        case 5: {
            long len = fixed_length(2048);
            SimulationModel m;
            m.id = 5;
            m.T = len;
            m.taus = {1024};
            m.types = {ChangeType::Jump};
            m.simulate = [len](std::uint64_t seed) {
                return simulate_custom(
                    len, seed,
                    [len](long t) {
                        double u = static_cast<double>(t) / static_cast<double>(len);
                        if (t <= 1024) return 25.6 * u * u - 12.8 * u + 0.8;
                        return -1.6 * std::cos(kPi * u) - 0.8;
                    },
                    [](long) { return 1.0; }, [](long) { return 0.0; });
            };
            return m;
        }
        case 6: {
            long len = fixed_length(2048);
            return tvar_model(6, len, {1024, 1536}, {ChangeType::Jump, ChangeType::Jump},
                              {ar1({-0.75, 3.0}, {1.0}), ar1({-3.75, 6.0}, {1.0}),
                               ar1({-5.25, 6.0}, {1.0})});
        }
        case 7: {
            long len = fixed_length(3072);
            return tvar_model(7, len, {1024, 2048}, {ChangeType::Kink, ChangeType::Kink},
                              {ar1({-0.75, 4.5}, {1.0}), ar1({2.25, -4.5}, {1.0}),
                               ar1({-3.75, 4.5}, {1.0})});
        }
        case 8: {
            long len = fixed_length(2048);
            return tvar_model(8, len, {840, 1644}, {ChangeType::Jump, ChangeType::Jump},
                              {ar1({0.75}, {1.0}), ar1({-0.75}, {1.0}), ar1({0.75}, {1.0})});
        }
        case 9: {
            long len = fixed_length(2048);
            SimulationModel m;
            m.id = 9;
            m.T = len;
            m.taus = {1150};
            m.types = {ChangeType::Jump};
            m.simulate = [len](std::uint64_t seed) {
                return simulate_custom(
                    len, seed, [](long t) { return t <= 1150 ? 0.75 : 0.0; },
                    [](long) { return 1.0; }, [](long) { return 0.75; });
            };
            return m;
        }
        default:
            throw std::invalid_argument("make_model: unknown model id " + std::to_string(id));
    }
}

std::map<int, SimulationModel> model_catalog() {
    std::map<int, SimulationModel> out;
    for (int id = 1; id <= 9; ++id) out.emplace(id, make_model(id));
    return out;
}

double ace(const std::map<double, double>& coverages) {
    double s = 0.0;
    for (double alpha : {0.80, 0.90, 0.95}) {
        auto it = coverages.find(alpha);
        if (it == coverages.end())
            throw std::invalid_argument("ace: missing coverage for one of 0.80/0.90/0.95");
        s += std::fabs(it->second - alpha);
    }
    return s / 3.0;
}

double ae(double p_correct) {
    if (p_correct < 0.0 || p_correct > 1.0)
        throw std::invalid_argument("ae: proportion outside [0,1]");
    return std::fabs(p_correct - 1.0);
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    if (spec.replications < 1)
        throw std::invalid_argument("run_experiment: replications must be >= 1");
    auto t_start = std::chrono::steady_clock::now();

    SimulationModel model = make_model(spec.model, spec.T);

    ExperimentReport report;
    report.spec = spec;
    report.spec.T = model.T;
    report.m0 = model.m0();

    ScanConfig scan = spec.scan;
    if (scan.h == 0 || scan.h_tilde == 0) {
        ScanConfig rule = window_radii(model.T, {}, spec.radii_mode);
        if (scan.h == 0) scan.h = rule.h;
        if (scan.h_tilde == 0) scan.h_tilde = rule.h_tilde;
    }
    scan.validate(model.T);
    report.spec.scan = scan;

    const int n = spec.replications;
    report.replications.resize(static_cast<size_t>(n));
    parallel_for(n, spec.threads, [&](long rep) {
        ReplicationRecord& rec = report.replications[static_cast<size_t>(rep)];
        rec.seed = split_seed(spec.seed, static_cast<std::uint64_t>(rep));
        try {
            TimeSeries x = model.simulate(rec.seed);
            PipelineConfig pc;
            pc.scan = scan;
            pc.p_max = spec.p_max;
            pc.q_max = spec.q_max;
            pc.bootstrap_b = spec.bootstrap_b;
            pc.levels = spec.levels;
            pc.seed = rec.seed;
            pc.threads = 1;  // replications are the parallel axis
            DetectionResult res = detect(x, pc);
            rec.m_hat = static_cast<int>(res.change_points.size());
            for (const auto& cp : res.change_points) {
                rec.taus.push_back(cp.tau);
                rec.types.push_back(cp.type);
                rec.cis.push_back(cp.cis);
            }
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
        }
    });

    std::vector<double> m_values;
    long correct = 0, ok = 0;
    for (const auto& rec : report.replications) {
        if (rec.failed) {
            ++report.failures;
            continue;
        }
        ++ok;
        m_values.push_back(static_cast<double>(rec.m_hat));
        if (rec.m_hat == report.m0) ++correct;
    }
    report.mean_m = mean_of(m_values);
    report.median_m = median_of(m_values);
    report.sd_m = sd_of(m_values);
    report.p_correct = ok > 0 ? static_cast<double>(correct) / static_cast<double>(ok) : 0.0;
    report.ae_value = ae(report.p_correct);

    // Nearest-neighbor matching capped at half the minimal spacing
    // (endpoints included), applied within correct-count replications.
    if (report.m0 > 0) {
        std::vector<long> fences;
        fences.push_back(0);
        fences.insert(fences.end(), model.taus.begin(), model.taus.end());
        fences.push_back(model.T);
        long min_gap = model.T;
        for (size_t i = 1; i < fences.size(); ++i)
            min_gap = std::min(min_gap, fences[i] - fences[i - 1]);
        double cap = static_cast<double>(min_gap) / 2.0;

        std::vector<std::vector<double>> matched(static_cast<size_t>(report.m0));
        std::vector<std::map<double, std::pair<long, long>>> cover(
            static_cast<size_t>(report.m0));  // level -> (hits, total)
        for (const auto& rec : report.replications) {
            if (rec.failed || rec.m_hat != report.m0) continue;
            struct Link {
                double d;
                int i, j;
            };
            std::vector<Link> links;
            for (int i = 0; i < report.m0; ++i)
                for (int j = 0; j < rec.m_hat; ++j) {
                    double d = std::fabs(static_cast<double>(
                        rec.taus[static_cast<size_t>(j)] - model.taus[static_cast<size_t>(i)]));
                    if (d <= cap) links.push_back({d, i, j});
                }
            std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
                return a.d != b.d ? a.d < b.d : (a.i != b.i ? a.i < b.i : a.j < b.j);
            });
            std::vector<bool> used_i(static_cast<size_t>(report.m0), false);
            std::vector<bool> used_j(static_cast<size_t>(rec.m_hat), false);
            for (const auto& l : links) {
                if (used_i[static_cast<size_t>(l.i)] || used_j[static_cast<size_t>(l.j)])
                    continue;
                used_i[static_cast<size_t>(l.i)] = true;
                used_j[static_cast<size_t>(l.j)] = true;
                long est = rec.taus[static_cast<size_t>(l.j)];
                matched[static_cast<size_t>(l.i)].push_back(static_cast<double>(est));
                for (const auto& ci : rec.cis[static_cast<size_t>(l.j)]) {
                    auto& cell = cover[static_cast<size_t>(l.i)][ci.level];
                    ++cell.second;
                    long truth = model.taus[static_cast<size_t>(l.i)];
                    if (ci.lower <= truth && truth <= ci.upper) ++cell.first;
                }
            }
        }
        for (int i = 0; i < report.m0; ++i) {
            LocationStats st;
            st.true_tau = model.taus[static_cast<size_t>(i)];
            st.type = model.types[static_cast<size_t>(i)];
            const auto& vals = matched[static_cast<size_t>(i)];
            st.n = static_cast<long>(vals.size());
            st.mean = mean_of(vals);
            st.median = median_of(vals);
            st.sd = sd_of(vals);
            for (const auto& [level, cell] : cover[static_cast<size_t>(i)])
                st.coverage[level] =
                    cell.second > 0 ? static_cast<double>(cell.first) /
                                          static_cast<double>(cell.second)
                                    : 0.0;
            bool full = true;
            for (double alpha : {0.80, 0.90, 0.95})
                if (st.coverage.find(alpha) == st.coverage.end()) full = false;
            st.ace_value = full && st.n > 0 ? ace(st.coverage)
                                            : std::numeric_limits<double>::quiet_NaN();
            report.locations.push_back(std::move(st));
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

std::string report_to_json(const ExperimentReport& report) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["model"] = report.spec.model;
    j["t"] = report.spec.T;
    j["replications"] = report.spec.replications;
    j["seed"] = report.spec.seed;
    j["scan"] = {{"h", report.spec.scan.h}, {"h_tilde", report.spec.scan.h_tilde}};
    j["bootstrap_b"] = report.spec.bootstrap_b;
    j["levels"] = report.spec.levels;
    j["m0"] = report.m0;
    j["failures"] = report.failures;
    j["m_hat"] = {{"mean", report.mean_m},
                  {"median", report.median_m},
                  {"sd", report.sd_m},
                  {"p_correct", report.p_correct},
                  {"ae", report.ae_value}};
    ordered_json locs = ordered_json::array();
    for (const auto& st : report.locations) {
        ordered_json e;
        e["true_tau"] = st.true_tau;
        e["type"] = st.type == ChangeType::Jump ? "jump" : "kink";
        e["n"] = st.n;
        e["mean"] = st.mean;
        e["median"] = st.median;
        e["sd"] = st.sd;
        ordered_json cov = ordered_json::object();
        char key[16];
        for (const auto& [level, rate] : st.coverage) {
            std::snprintf(key, sizeof(key), "%.2f", level);
            cov[key] = rate;
        }
        e["coverage"] = std::move(cov);
        if (std::isnan(st.ace_value))
            e["ace"] = nullptr;
        else
            e["ace"] = st.ace_value;
        locs.push_back(std::move(e));
    }
    j["locations"] = std::move(locs);
    ordered_json reps = ordered_json::array();
    for (const auto& rec : report.replications) {
        ordered_json e;
        e["seed"] = rec.seed;
        if (rec.failed) {
            e["error"] = rec.error;
        } else {
            e["m_hat"] = rec.m_hat;
            ordered_json taus = ordered_json::array();
            ordered_json types = ordered_json::array();
            for (size_t k = 0; k < rec.taus.size(); ++k) {
                taus.push_back(rec.taus[k]);
                types.push_back(rec.types[k] == ChangeType::Jump ? "jump" : "kink");
            }
            e["taus"] = std::move(taus);
            e["types"] = std::move(types);
        }
        reps.push_back(std::move(e));
    }
    j["replication_records"] = std::move(reps);
    return j.dump(2) + "\n";
}

std::string report_to_text(const ExperimentReport& report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line),
                  "model %d  T=%ld  reps=%d  seed=%llu  h=%ld  h_tilde=%ld  m0=%d\n",
                  report.spec.model, report.spec.T, report.spec.replications,
                  static_cast<unsigned long long>(report.spec.seed), report.spec.scan.h,
                  report.spec.scan.h_tilde, report.m0);
    os << line;
    std::snprintf(line, sizeof(line),
                  "m_hat   mean %.3f  median %.1f  sd %.3f  p_correct %.3f  ae %.3f\n",
                  report.mean_m, report.median_m, report.sd_m, report.p_correct,
                  report.ae_value);
    os << line;
    if (!report.locations.empty()) {
        os << "location  type  n     mean      median    sd       ce80    ce90    ce95    "
              "ace\n";
        for (const auto& st : report.locations) {
            auto ce = [&](double alpha) {
                auto it = st.coverage.find(alpha);
                return it == st.coverage.end()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : std::fabs(it->second - alpha);
            };
            std::snprintf(line, sizeof(line),
                          "%-9ld %-5s %-5ld %-9.1f %-9.1f %-8.2f %-7.3f %-7.3f %-7.3f "
                          "%-7.3f\n",
                          st.true_tau, st.type == ChangeType::Jump ? "jump" : "kink", st.n,
                          st.mean, st.median, st.sd, ce(0.80), ce(0.90), ce(0.95),
                          st.ace_value);
            os << line;
        }
    }
    std::snprintf(line, sizeof(line), "failures %d of %d\n", report.failures,
                  report.spec.replications);
    os << line;
    return os.str();
}

}  // namespace lscp
