#include "lscp/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lscp {

namespace {

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::string trimmed(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
        line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    return start == std::string::npos ? std::string() : line.substr(start);
}

// 17 significant digits: enough to reproduce any double exactly.
double num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    return back;
}

nlohmann::ordered_json curve_json(const PolyCurve& c) {
    auto arr = nlohmann::ordered_json::array();
    for (double v : c.coeffs) arr.push_back(num(v));
    return arr;
}

}  // namespace

TimeSeries read_series_csv(std::istream& in, const std::string& origin) {
    TimeSeries x;
    std::string line;
    long line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trimmed(line);
        if (s.empty()) continue;
        double v = 0.0;
        if (!parse_double(s, v)) {
            if (first_content) {  // header line
                first_content = false;
                continue;
            }
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": expected a numeric value, got \"" + s + "\"");
        }
        first_content = false;
        x.values.push_back(v);
    }
    if (x.values.empty()) throw ParseError(origin + ": no numeric data found");
    return x;
}

TimeSeries read_series_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open for reading");
    return read_series_csv(in, path);
}

std::string series_to_csv(const TimeSeries& x) {
    std::ostringstream out;
    out << "x\n";
    char buf[40];
    for (double v : x.values) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << "\n";
    }
    return out.str();
}

std::string detection_result_to_json(const DetectionResult& result) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["version"] = result.version;
    j["seed"] = result.seed;
    j["t"] = result.T;
    j["scan"] = {{"h", result.scan.h}, {"h_tilde", result.scan.h_tilde}};
    j["greedy_selection"] = result.greedy;
    j["mdl"] = {{"total", num(result.score.total)},
                {"structure_cost", num(result.score.structure_cost)},
                {"likelihood_term", num(result.score.likelihood_term)}};
    j["m_hat"] = static_cast<long>(result.change_points.size());

    ordered_json cps = ordered_json::array();
    for (const auto& cp : result.change_points) {
        ordered_json e;
        e["tau"] = cp.tau;
        e["type"] = cp.type == ChangeType::Jump ? "jump" : "kink";
        e["scan_stat"] = num(cp.scan_stat);
        ordered_json cis = ordered_json::array();
        for (const auto& ci : cp.cis) {
            cis.push_back({{"level", num(ci.level)},
                           {"lower", ci.lower},
                           {"upper", ci.upper},
                           {"method", ci.method}});
        }
        e["confidence_intervals"] = std::move(cis);
        cps.push_back(std::move(e));
    }
    j["change_points"] = std::move(cps);

    ordered_json segs = ordered_json::array();
    for (const auto& seg : result.segments) {
        ordered_json e;
        e["start"] = seg.start;
        e["end"] = seg.end;
        e["p"] = seg.params.p;
        e["q"] = seg.params.q;
        ordered_json phi = ordered_json::array();
        for (const auto& c : seg.params.phi) phi.push_back(curve_json(c));
        e["phi"] = std::move(phi);
        e["sigma"] = curve_json(seg.params.sigma);
        e["loglik"] = num(seg.loglik);
        segs.push_back(std::move(e));
    }
    j["segments"] = std::move(segs);
    return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << content;
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace lscp
