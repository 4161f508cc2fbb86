#pragma once

#include <string>
#include <vector>

#include "lscp/mdl.hpp"
#include "lscp/refine.hpp"
#include "lscp/scan.hpp"

namespace lscp {

inline constexpr const char* kVersion = "0.1.0";

struct PipelineConfig {
    ScanConfig scan;  // h == 0 requests the rule-of-thumb radii
    RadiiMode radii_mode = RadiiMode::Formula;
    int p_max = 4;
    int q_max = 2;
    long bootstrap_b = 1000;
    std::vector<double> levels = {0.80, 0.90, 0.95};
    std::uint64_t seed = 0;
    int threads = 1;
};

struct ChangePointRecord {
    long tau = 0;  // final (step-3) location
    ChangeType type = ChangeType::Jump;
    double scan_stat = 0.0;
    std::vector<ChangePointCI> cis;
};

struct SegmentRecord {
    long start = 0;  // segment covers (start, end]
    long end = 0;
    SegmentParams params;  // power-basis curves (chains converted per segment)
    double loglik = 0.0;
};

struct DetectionResult {
    long T = 0;
    ScanConfig scan;
    ModelConfiguration selection;  // step-2 configuration
    MdlScore score;
    bool greedy = false;
    std::vector<ChangePointRecord> change_points;  // refined, sorted
    std::vector<SegmentRecord> segments;           // refit at final boundaries
    std::uint64_t seed = 0;
    std::string version = kVersion;
};

// Full three-step detection: scan for candidates, select the subset and
// per-segment orders by description length, refine each change-point in
// its extended window and attach confidence intervals (bootstrap for
// jumps, asymptotic-normal for kinks).
DetectionResult detect(const TimeSeries& x, const PipelineConfig& config = {});

}  // namespace lscp
