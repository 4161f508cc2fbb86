#include "lscp/mdl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace lscp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Code length for one segment of length len: log(p max(q,1)) for the
// orders plus log(len) per encoded real, (p+1)(q + indicator)/2 + 1
// of them. indicator = 1 for jump-bounded segments and chain heads.
double segment_structure(long len, int p, int q, bool indicator) {
    double reals = 0.5 * (p + 1) * (q + (indicator ? 1 : 0)) + 1.0;
    return std::log(static_cast<double>(p) * std::max(q, 1)) +
           std::log(static_cast<double>(len)) * reals;
}

KinkChain chain_layout(long a, long b, const std::vector<long>& kinks, long T, int p,
                       const std::vector<int>& q) {
    KinkChain layout;
    layout.g = static_cast<int>(kinks.size());
    layout.tau_left = a;
    layout.tau_right = b;
    layout.taus = kinks;
    layout.T = T;
    layout.p = p;
    layout.q = q;
    return layout;
}

// A maximal run of segments between consecutive jump-type boundaries
// (series endpoints included), holding zero or more interior kinks.
struct Block {
    long a = 0, b = 0;
    std::vector<long> kinks;
    int first_segment = 0;  // index into the configuration's segment arrays
};

std::vector<Block> split_blocks(const ModelConfiguration& cfg) {
    std::vector<Block> blocks;
    Block cur;
    cur.a = 0;
    cur.first_segment = 0;
    for (int k = 0; k < cfg.m(); ++k) {
        if (cfg.types[static_cast<size_t>(k)] == ChangeType::Jump) {
            cur.b = cfg.taus[static_cast<size_t>(k)];
            blocks.push_back(cur);
            cur = Block{};
            cur.a = cfg.taus[static_cast<size_t>(k)];
            cur.first_segment = k + 1;
        } else {
            cur.kinks.push_back(cfg.taus[static_cast<size_t>(k)]);
        }
    }
    cur.b = cfg.T;
    blocks.push_back(cur);
    return blocks;
}

// Structure cost minus likelihood for one block with the given orders.
// +inf when the block is infeasible for those orders.
double block_value(const Block& blk, const std::vector<int>& p, const std::vector<int>& q,
                  const TimeSeries& x, FitCache& cache, double* structure, double* loglik) {
    int n_seg = static_cast<int>(blk.kinks.size()) + 1;
    std::vector<long> bounds;
    bounds.push_back(blk.a);
    for (long k : blk.kinks) bounds.push_back(k);
    bounds.push_back(blk.b);

    double structure_sum = 0.0;
    for (int s = 0; s < n_seg; ++s) {
        long len = bounds[static_cast<size_t>(s + 1)] - bounds[static_cast<size_t>(s)];
        if (len <= 0) return kInf;
        bool indicator = (s == 0);  // jump-bounded segment or chain head
        structure_sum += segment_structure(len, p[static_cast<size_t>(s)],
                                           q[static_cast<size_t>(s)], indicator);
    }

    for (int s = 1; s < n_seg; ++s)
        if (p[static_cast<size_t>(s)] != p[0])
            throw std::invalid_argument("mdl: chain segments must share the AR order");
    for (int s = 1; s + 1 < n_seg; ++s)
        if (q[static_cast<size_t>(s)] < 1) return kInf;

    double ll;
    try {
        if (blk.kinks.empty()) {
            ll = cache.segment(x, blk.a, blk.b, p[0], q[0]).loglik;
        } else {
            ll = cache.chain(x, chain_layout(blk.a, blk.b, blk.kinks, x.size(), p[0], q)).loglik;
        }
    } catch (const std::invalid_argument&) {
        return kInf;  // segment too short or degenerate kink grid
    } catch (const std::runtime_error&) {
        return kInf;  // no feasible optimizer start
    }
    if (!(ll > kNegInf)) return kInf;

    if (structure != nullptr) *structure = structure_sum;
    if (loglik != nullptr) *loglik = ll;
    return structure_sum - ll;
}

struct BlockChoice {
    double value = kInf;
    std::vector<int> p, q;
};

// Minimize block_value over a common AR order and per-segment degrees.
// Deterministic: p ascending, degree vectors in ascending odometer order,
// first strict improvement wins.
BlockChoice best_block(const Block& blk, const TimeSeries& x, int p_max, int q_max,
                       FitCache& cache) {
    int n_seg = static_cast<int>(blk.kinks.size()) + 1;
    BlockChoice best;
    std::vector<int> q(static_cast<size_t>(n_seg), 0);
    for (int p = 1; p <= p_max; ++p) {
        std::vector<int> pv(static_cast<size_t>(n_seg), p);
        // Odometer over degree vectors; interior chain segments start at 1.
        auto lo = [&](int s) { return (n_seg > 1 && s > 0 && s + 1 < n_seg) ? 1 : 0; };
        for (int s = 0; s < n_seg; ++s) q[static_cast<size_t>(s)] = lo(s);
        for (;;) {
            double v = block_value(blk, pv, q, x, cache, nullptr, nullptr);
            if (v < best.value) {
                best.value = v;
                best.p = pv;
                best.q = q;
            }
            int s = n_seg - 1;
            while (s >= 0 && q[static_cast<size_t>(s)] == q_max) {
                q[static_cast<size_t>(s)] = lo(s);
                --s;
            }
            if (s < 0) break;
            ++q[static_cast<size_t>(s)];
        }
    }
    return best;
}

std::vector<long> block_key(const Block& blk, int p_max, int q_max) {
    std::vector<long> key{blk.a, blk.b, p_max, q_max};
    key.insert(key.end(), blk.kinks.begin(), blk.kinks.end());
    return key;
}

struct CandidateEntry {
    long index = 0;
    ChangeType type = ChangeType::Jump;
};

std::vector<CandidateEntry> merged_candidates(const CandidateSet& cands) {
    std::vector<CandidateEntry> all;
    for (const auto& c : cands.jumps) all.push_back({c.index, ChangeType::Jump});
    for (const auto& c : cands.kinks) all.push_back({c.index, ChangeType::Kink});
    std::sort(all.begin(), all.end(),
              [](const CandidateEntry& a, const CandidateEntry& b) { return a.index < b.index; });
    return all;
}

}  // namespace

const SegmentFit& FitCache::segment(const TimeSeries& x, long a, long b, int p, int q) {
    std::vector<long> key{a, b, p, q};
    auto it = segments.find(key);
    if (it == segments.end())
        it = segments.emplace(std::move(key), fit_segment(x, a, b, p, q, optimizer)).first;
    return it->second;
}

const ChainFit& FitCache::chain(const TimeSeries& x, const KinkChain& layout) {
    std::vector<long> key{layout.tau_left, layout.tau_right, layout.p};
    key.insert(key.end(), layout.taus.begin(), layout.taus.end());
    for (int qs : layout.q) key.push_back(qs);
    auto it = chains.find(key);
    if (it == chains.end())
        it = chains.emplace(std::move(key), fit_kink_chain(x, layout, optimizer)).first;
    return it->second;
}

MdlScore mdl_score(const ModelConfiguration& cfg, const TimeSeries& x, FitCache& cache) {
    if (cfg.T != x.size()) throw std::invalid_argument("mdl_score: length mismatch");
    if (cfg.p.size() != static_cast<size_t>(cfg.m() + 1) || cfg.q.size() != cfg.p.size())
        throw std::invalid_argument("mdl_score: need one (p, q) per segment");

    MdlScore score;
    if (cfg.m() > 0) score.structure_cost = std::log(static_cast<double>(cfg.m()));

    for (const Block& blk : split_blocks(cfg)) {
        int n_seg = static_cast<int>(blk.kinks.size()) + 1;
        std::vector<int> p(cfg.p.begin() + blk.first_segment,
                           cfg.p.begin() + blk.first_segment + n_seg);
        std::vector<int> q(cfg.q.begin() + blk.first_segment,
                           cfg.q.begin() + blk.first_segment + n_seg);
        double structure = 0.0, loglik = 0.0;
        if (block_value(blk, p, q, x, cache, &structure, &loglik) == kInf) {
            score.total = kInf;
            return score;
        }
        score.structure_cost += structure;
        score.likelihood_term += loglik;
    }
    score.total = score.structure_cost - score.likelihood_term;
    return score;
}

namespace {

// Score one subset of the merged candidate list, reusing memoized block
// choices; fills the winning configuration.
double subset_score(const std::vector<char>& sel, const std::vector<CandidateEntry>& all,
                    long T, long h, const TimeSeries& x, int p_max, int q_max, FitCache& cache,
                    std::map<std::vector<long>, BlockChoice>& block_cache,
                    ModelConfiguration* out) {
    ModelConfiguration cfg;
    cfg.T = T;
    for (size_t i = 0; i < all.size(); ++i) {
        if (sel[i]) {
            cfg.taus.push_back(all[i].index);
            cfg.types.push_back(all[i].type);
        }
    }
    // A kink inside a selected jump's window is the same break counted
    // twice; such configurations are infeasible (this is the jump-zone
    // exclusion, applied jointly instead of by pruning the candidate list).
    for (size_t i = 0; i < cfg.taus.size(); ++i) {
        if (cfg.types[i] != ChangeType::Kink) continue;
        for (size_t j = 0; j < cfg.taus.size(); ++j)
            if (cfg.types[j] == ChangeType::Jump && cfg.taus[i] > cfg.taus[j] - h &&
                cfg.taus[i] <= cfg.taus[j] + h)
                return kInf;
    }
    double total = cfg.m() > 0 ? std::log(static_cast<double>(cfg.m())) : 0.0;
    std::vector<int> p_all, q_all;
    for (const Block& blk : split_blocks(cfg)) {
        auto key = block_key(blk, p_max, q_max);
        auto it = block_cache.find(key);
        if (it == block_cache.end())
            it = block_cache.emplace(std::move(key), best_block(blk, x, p_max, q_max, cache)).first;
        const BlockChoice& choice = it->second;
        if (choice.value == kInf) return kInf;
        total += choice.value;
        p_all.insert(p_all.end(), choice.p.begin(), choice.p.end());
        q_all.insert(q_all.end(), choice.q.begin(), choice.q.end());
    }
    if (out != nullptr) {
        cfg.p = std::move(p_all);
        cfg.q = std::move(q_all);
        *out = std::move(cfg);
    }
    return total;
}

}  // namespace

SelectionResult select(const CandidateSet& candidates, const TimeSeries& x, int p_max,
                       int q_max, FitCache& cache, int top_n) {
    if (p_max < 1 || q_max < 0) throw std::invalid_argument("select: bad order limits");
    auto all = merged_candidates(candidates);
    long T = x.size();
    std::map<std::vector<long>, BlockChoice> block_cache;

    SelectionResult result;
    auto finish = [&](const std::vector<char>& sel) {
        ModelConfiguration cfg;
        subset_score(sel, all, T, candidates.config.h, x, p_max, q_max, cache, block_cache, &cfg);
        result.config = cfg;
        result.score = mdl_score(cfg, x, cache);
    };

    if (static_cast<int>(all.size()) <= kSubsetCap) {
        std::uint32_t n_masks = 1u << all.size();
        std::vector<char> sel(all.size(), 0), best_sel(all.size(), 0);
        double best = kInf;
        std::vector<std::pair<double, std::vector<char>>> scored;
        for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
            for (size_t i = 0; i < all.size(); ++i) sel[i] = static_cast<char>((mask >> i) & 1u);
            double v = subset_score(sel, all, T, candidates.config.h, x, p_max, q_max, cache, block_cache, nullptr);
            if (top_n > 0 && v < kInf) scored.emplace_back(v, sel);
            if (v < best) {
                best = v;
                best_sel = sel;
            }
        }
        if (best == kInf) throw std::runtime_error("select: no feasible configuration");
        finish(best_sel);
        if (top_n > 0) {
            std::stable_sort(scored.begin(), scored.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (size_t i = 0; i < scored.size() && static_cast<int>(i) < top_n; ++i) {
                ModelConfiguration cfg;
                subset_score(scored[i].second, all, T, candidates.config.h, x, p_max, q_max, cache, block_cache, &cfg);
                result.top.emplace_back(scored[i].first, std::move(cfg));
            }
        }
        return result;
    }

    // Candidate set past the enumeration cap: greedy forward selection then
    // backward elimination over single-candidate toggles.
    result.greedy = true;
    std::vector<char> sel(all.size(), 0);
    double cur = subset_score(sel, all, T, candidates.config.h, x, p_max, q_max, cache, block_cache, nullptr);
    for (int pass = 0; pass < 2; ++pass) {
        bool improved = true;
        while (improved) {
            improved = false;
            size_t best_ix = all.size();
            double best = cur;
            for (size_t i = 0; i < all.size(); ++i) {
                // Pass 0 tries additions, pass 1 removals.
                if ((sel[i] != 0) != (pass == 1)) continue;
                std::vector<char> trial = sel;
                trial[i] = static_cast<char>(pass == 0);
                double v = subset_score(trial, all, T, candidates.config.h, x, p_max, q_max, cache, block_cache, nullptr);
                if (v < best) {
                    best = v;
                    best_ix = i;
                }
            }
            if (best_ix < all.size()) {
                sel[best_ix] = static_cast<char>(pass == 0);
                cur = best;
                improved = true;
            }
        }
    }
    if (cur == kInf) throw std::runtime_error("select: no feasible configuration");
    finish(sel);
    return result;
}

std::string dump_selection_tsv(const SelectionResult& result) {
    std::ostringstream out;
    out << "rank\tscore\tm\ttaus\ttypes\n";
    auto row = [&](int rank, double score, const ModelConfiguration& cfg) {
        out << rank << '\t' << score << '\t' << cfg.m() << '\t';
        for (int k = 0; k < cfg.m(); ++k) {
            if (k > 0) out << ',';
            out << cfg.taus[static_cast<size_t>(k)];
        }
        out << '\t';
        for (int k = 0; k < cfg.m(); ++k) {
            if (k > 0) out << ',';
            out << (cfg.types[static_cast<size_t>(k)] == ChangeType::Jump ? "jump" : "kink");
        }
        out << '\n';
    };
    if (result.top.empty()) {
        row(1, result.score.total, result.config);
    } else {
        int rank = 1;
        for (const auto& [score, cfg] : result.top) row(rank++, score, cfg);
    }
    return out.str();
}

}  // namespace lscp
