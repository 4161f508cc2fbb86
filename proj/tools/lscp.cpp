#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lscp/harness.hpp"
#include "lscp/io.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lscp::ParseError(path + ": cannot open for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void emit(const std::string& content, const std::string& output_path) {
    if (output_path.empty()) {
        std::cout << content;
    } else {
        lscp::write_text_file(output_path, content);
    }
}

int default_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

struct DetectOptions {
    std::string input;
    std::string output;
    std::string dump_scan;
    lscp::PipelineConfig config;
    std::string radii_mode = "formula";
};

void run_detect(const DetectOptions& opt) {
    lscp::TimeSeries x = opt.input == "-" ? lscp::read_series_csv(std::cin, "<stdin>")
                                          : lscp::read_series_csv_file(opt.input);
    lscp::PipelineConfig config = opt.config;
    config.radii_mode =
        opt.radii_mode == "table" ? lscp::RadiiMode::Table : lscp::RadiiMode::Formula;

    std::fprintf(stderr, "lscp: read %ld observations from %s\n", x.size(), opt.input.c_str());
    lscp::DetectionResult result = lscp::detect(x, config);
    std::fprintf(stderr, "lscp: scan radii h=%ld h_tilde=%ld; m_hat=%zu\n", result.scan.h,
                 result.scan.h_tilde, result.change_points.size());
    for (const auto& cp : result.change_points)
        std::fprintf(stderr, "lscp:   tau=%ld (%s)\n", cp.tau,
                     cp.type == lscp::ChangeType::Jump ? "jump" : "kink");

    if (!opt.dump_scan.empty()) {
        lscp::MaximalDiffs diffs = lscp::maximal_diffs(x, result.scan, config.threads);
        lscp::write_text_file(opt.dump_scan, lscp::dump_scan_tsv(diffs));
    }
    emit(lscp::detection_result_to_json(result), opt.output);
}

struct SimulateOptions {
    int model = 0;
    std::string spec_path;
    long T = 0;
    std::uint64_t seed = 0;
    std::string output;
};

void run_simulate(const SimulateOptions& opt) {
    lscp::TimeSeries x;
    if (!opt.spec_path.empty()) {
        lscp::PiecewiseTvarSpec spec = lscp::parse_spec(read_file(opt.spec_path));
        spec.validate();
        if (opt.T != 0 && opt.T != spec.T)
            throw std::invalid_argument("--t conflicts with the spec file length");
        x = lscp::simulate(spec, opt.seed);
    } else if (opt.model != 0) {
        x = lscp::make_model(opt.model, opt.T).simulate(opt.seed);
    } else {
        throw std::invalid_argument("simulate: pass --model N or --spec FILE");
    }
    std::fprintf(stderr, "lscp: simulated %ld observations (seed %llu)\n", x.size(),
                 static_cast<unsigned long long>(opt.seed));
    emit(lscp::series_to_csv(x), opt.output);
}

struct ExperimentOptions {
    lscp::ExperimentSpec spec;
    std::string radii_mode = "formula";
    std::string output;
};

void run_experiment(const ExperimentOptions& opt) {
    lscp::ExperimentSpec spec = opt.spec;
    spec.radii_mode =
        opt.radii_mode == "table" ? lscp::RadiiMode::Table : lscp::RadiiMode::Formula;
    lscp::make_model(spec.model, spec.T);  // validate before the long run

    std::fprintf(stderr, "lscp: model %d, %d replications\n", spec.model, spec.replications);
    lscp::ExperimentReport report = lscp::run_experiment(spec);
    std::fprintf(stderr, "lscp: done in %.1f s, %d failures\n", report.wall_seconds,
                 report.failures);

    std::string text = lscp::report_to_text(report);
    if (opt.output.empty()) {
        std::fputs(text.c_str(), stderr);
        std::cout << lscp::report_to_json(report);
    } else {
        lscp::write_text_file(opt.output + ".json", lscp::report_to_json(report));
        lscp::write_text_file(opt.output + ".txt", text);
        std::fputs(text.c_str(), stderr);
    }
}

void add_level_option(CLI::App* cmd, std::vector<double>& levels) {
    cmd->add_option("--alpha", levels, "Confidence levels (repeatable)")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Change-point detection for piecewise locally stationary time series"};
    app.set_help_flag("--help", "Print help and exit");  // frees -h for the scan radius
    app.set_version_flag("--version", lscp::kVersion);
    app.set_config("--config", "", "Read options from a key=value file");
    app.require_subcommand(1);

    int threads = default_threads();
    app.add_option("--threads", threads, "Worker thread count")
        ->envname("LSCP_THREADS")
        ->check(CLI::PositiveNumber);

    DetectOptions det;
    CLI::App* detect = app.add_subcommand("detect", "Detect change-points in a CSV series");
    detect->set_help_flag("--help", "Print help and exit");
    detect->add_option("input", det.input, "Input CSV (one column, - for stdin)")->required();
    detect->add_option("--h", det.config.scan.h, "Jump scan radius (0 = rule of thumb)");
    detect->add_option("--htilde", det.config.scan.h_tilde, "Kink scan radius (0 = rule of thumb)");
    detect->add_option("--pmax", det.config.p_max, "Largest AR order")->capture_default_str();
    detect->add_option("--qmax", det.config.q_max, "Largest polynomial degree")
        ->capture_default_str();
    add_level_option(detect, det.config.levels);
    detect->add_option("--bootstrap-b", det.config.bootstrap_b, "Bootstrap replicates")
        ->capture_default_str();
    detect->add_option("--seed", det.config.seed, "Random seed");
    detect->add_option("--output", det.output, "Write the JSON result here instead of stdout");
    detect->add_option("--dump-scan", det.dump_scan, "Write the scan statistics as TSV");
    detect->add_option("--radii-mode", det.radii_mode, "Rule-of-thumb flavor")
        ->check(CLI::IsMember({"formula", "table"}));

    SimulateOptions sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Simulate a model realization");
    simulate->set_help_flag("--help", "Print help and exit");
    simulate->add_option("--model", sim.model, "Built-in model id (1-9)");
    simulate->add_option("--spec", sim.spec_path, "Custom piecewise tvAR spec file");
    simulate->add_option("--t", sim.T, "Series length (0 = model default)");
    simulate->add_option("--seed", sim.seed, "Random seed");
    simulate->add_option("--output", sim.output, "Write the CSV here instead of stdout");

    ExperimentOptions exp;
    CLI::App* experiment = app.add_subcommand("experiment", "Run a simulation study");
    experiment->set_help_flag("--help", "Print help and exit");
    experiment->add_option("--model", exp.spec.model, "Built-in model id (1-9)")->required();
    experiment->add_option("--t", exp.spec.T, "Series length (0 = model default)");
    experiment->add_option("--reps", exp.spec.replications, "Replications")
        ->capture_default_str();
    experiment->add_option("--seed", exp.spec.seed, "Random seed");
    experiment->add_option("--h", exp.spec.scan.h, "Jump scan radius (0 = rule of thumb)");
    experiment->add_option("--htilde", exp.spec.scan.h_tilde,
                           "Kink scan radius (0 = rule of thumb)");
    experiment->add_option("--pmax", exp.spec.p_max, "Largest AR order")->capture_default_str();
    experiment->add_option("--qmax", exp.spec.q_max, "Largest polynomial degree")
        ->capture_default_str();
    add_level_option(experiment, exp.spec.levels);
    experiment->add_option("--bootstrap-b", exp.spec.bootstrap_b, "Bootstrap replicates")
        ->capture_default_str();
    experiment->add_option("--radii-mode", exp.radii_mode, "Rule-of-thumb flavor")
        ->check(CLI::IsMember({"formula", "table"}));
    experiment->add_option("--output", exp.output,
                           "Report basename (writes BASE.json and BASE.txt)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*detect) {
            det.config.threads = threads;
            run_detect(det);
        } else if (*simulate) {
            run_simulate(sim);
        } else if (*experiment) {
            exp.spec.threads = threads;
            run_experiment(exp);
        }
    } catch (const lscp::ParseError& e) {
        std::fprintf(stderr, "lscp: %s\n", e.what());
        return kExitParse;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "lscp: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "lscp: %s\n", e.what());
        return kExitNumerical;
    }
    return 0;
}
