#pragma once

#include <map>
#include <vector>

#include "lscp/likelihood.hpp"
#include "lscp/scan.hpp"

namespace lscp {

// A concrete change-point configuration to be scored: selected locations
// with their type labels plus per-segment AR orders and curve degrees.
// Segments between consecutive kinks form chains; every segment of a chain
// must carry the same AR order (the chain likelihood is fit jointly), and
// interior chain segments need q >= 1.
struct ModelConfiguration {
    long T = 0;
    std::vector<long> taus;         // sorted, strictly inside (0, T)
    std::vector<ChangeType> types;  // parallel to taus
    std::vector<int> p;             // per segment, size m+1
    std::vector<int> q;

    int m() const { return static_cast<int>(taus.size()); }
};

struct MdlScore {
    double total = 0.0;           // structure_cost - likelihood_term
    double structure_cost = 0.0;  // log m + order/degree code lengths
    double likelihood_term = 0.0;
};

// Memoized fits shared across configuration scoring. Keys are segment
// boundaries plus orders; chain keys additionally carry the kink layout.
struct FitCache {
    OptimizerConfig optimizer;
    std::map<std::vector<long>, SegmentFit> segments;
    std::map<std::vector<long>, ChainFit> chains;

    const SegmentFit& segment(const TimeSeries& x, long a, long b, int p, int q);
    const ChainFit& chain(const TimeSeries& x, const KinkChain& layout);
};

// Description-length score of one configuration. Natural logarithm
// throughout; conventions: the log m term is dropped when m = 0, and the
// order code length uses log(p * max(q, 1)) so constant curves stay
// finite. Series endpoints count as jump-type boundaries, so every
// segment is either jump-bounded or part of a kink chain. Returns total
// = +inf for infeasible configurations (segments too short for the
// requested orders, or degenerate chain layouts).
MdlScore mdl_score(const ModelConfiguration& cfg, const TimeSeries& x, FitCache& cache);

struct SelectionResult {
    ModelConfiguration config;
    MdlScore score;
    bool greedy = false;  // true when the subset cap forced greedy search
    // Ranked (score, configuration) list when top_n > 0 and the search was
    // exhaustive; best first.
    std::vector<std::pair<double, ModelConfiguration>> top;
};

// Exhaustive enumeration limit: scores decompose across jump boundaries,
// so subsets share memoized block fits, but past this many candidates the
// subset lattice is searched greedily instead.
inline constexpr int kSubsetCap = 18;

// Minimize the description length over all subsets of the candidate set
// and all per-segment orders p in {1..p_max}, degrees q in {0..q_max}
// (interior chain segments start at 1). Deterministic: ties go to the
// smaller subset encoding and the lexicographically first order choice.
SelectionResult select(const CandidateSet& candidates, const TimeSeries& x, int p_max,
                       int q_max, FitCache& cache, int top_n = 0);

// Ranked table of configurations ("rank score m taus types" columns).
std::string dump_selection_tsv(const SelectionResult& result);

}  // namespace lscp
