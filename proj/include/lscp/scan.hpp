#pragma once

#include <string>
#include <vector>

#include "lscp/common.hpp"

namespace lscp {

enum class RadiiMode { Formula, Table };

struct RuleOfThumb {
    double C = 1.76;
    double delta = 0.58;
    double C_tilde = 0.55;
    double delta_tilde = 0.07;  // exponent is 2/3 + delta_tilde
};

struct ScanConfig {
    long h = 0;        // jump window radius, even, >= 8, < T/4
    long h_tilde = 0;  // kink window radius, even, >= 8, < T/8

    void validate(long T) const;  // throws on violation
};

// Rule-of-thumb radii h = C*T^delta, h~ = C~*T^(2/3+delta~), rounded to the
// nearest even integer. Table mode substitutes the calibration anchors
// (T=1000 -> h=100, T=2000 -> h=150; T=2000 -> h~=150, T=4000 -> h~=250).
ScanConfig window_radii(long T, const RuleOfThumb& constants = {},
                        RadiiMode mode = RadiiMode::Formula);

// I_h(t, lambda) = |sum_{k=t-h+1}^t X_k e^{-ik lambda}|^2 / (2 pi h).
double local_periodogram(const TimeSeries& x, long t, long h, double lambda);

// D_h(t, w) = (1/h) sum_{k=-w}^{w} [I_h(t+h, 2 pi k/h) - I_h(t, 2 pi k/h)].
double jump_scan(const TimeSeries& x, long t, long w, long h);

// D1_h~(t, w) = (T/h~) [D_h~(t+h~, w) - D_h~(t-h~, w)].
double kink_scan(const TimeSeries& x, long t, long w, long h_tilde);

struct MaximalDiffs {
    std::vector<double> D;   // index t-1; zero outside [h, T-h]
    std::vector<double> D1;  // index t-1; zero outside [2h~, T-2h~]
};

// sup over w in {0..h/2} of |D_h(t,w)| and over {0..h~/2} of |D1(t,w)|.
MaximalDiffs maximal_diffs(const TimeSeries& x, const ScanConfig& config, int threads = 1);

struct Candidate {
    long index = 0;
    double stat = 0.0;
};

struct CandidateSet {
    std::vector<Candidate> jumps;  // sorted by index, pairwise gaps > h
    std::vector<Candidate> kinks;  // sorted, gaps > 2h~, outside jump zones
    ScanConfig config;
};

CandidateSet candidates(const TimeSeries& x, const ScanConfig& config, int threads = 1);
CandidateSet candidates_from_diffs(const MaximalDiffs& diffs, long T, const ScanConfig& config);

// Same extraction but keeping kink candidates that fall inside the jump
// exclusion zones. With broad jump windows the zones around the (many)
// local maxima of D can blanket the whole series and empty the kink list
// even when kinks are clearly present; downstream model selection is a
// better arbiter of type than proximity to a jump candidate.
CandidateSet candidates_unfiltered(const MaximalDiffs& diffs, long T, const ScanConfig& config);

// Tab-separated (t, D(t), D1(t)) rows with a header line, 1-based t.
std::string dump_scan_tsv(const MaximalDiffs& diffs);

}  // namespace lscp
