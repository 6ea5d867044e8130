#include "mbrd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "mbrd/errors.hpp"

namespace mbrd {

TopTokens dump_next_token_dist(const ToyAutoregressiveModel& model, const std::string& source_key,
                               const TokenSequence& prefix, int top_n) {
    if (top_n < 0) {
        throw ValidationError("top_n must be >= 0");
    }
    const NextTokenDistribution dist = model.next_token_dist(source_key, prefix);
    std::vector<int> ids(dist.probs.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double pa = dist.probs[static_cast<size_t>(a)];
        const double pb = dist.probs[static_cast<size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    });

    TopTokens out;
    for (size_t rank = 0; rank < ids.size(); ++rank) {
        const int id = ids[rank];
        const double p = dist.probs[static_cast<size_t>(id)];
        if (rank < static_cast<size_t>(top_n)) {
            out.top.emplace_back(id, p);
        } else {
            out.tail_mass += p;
        }
    }
    return out;
}

MassCurve cumulative_mass_curve(const CandidatePool& pool, const ToyAutoregressiveModel& model,
                                const std::string& source_key) {
    if (pool.draw_order.empty()) {
        throw ValidationError("mass curve requires a pool with draw order");
    }
    // mass of a distinct sequence = exp(sequence logprob); unterminated
    // samples are prefixes, not sequences, and carry no mass
    std::vector<double> entry_mass(pool.entries.size(), 0.0);
    for (size_t i = 0; i < pool.entries.size(); ++i) {
        const PoolEntry& entry = pool.entries[i];
        if (entry.seq.terminated) {
            entry_mass[i] = std::exp(model.sequence_logprob(source_key, entry.seq));
        }
    }

    std::vector<int> points;
    for (int m = 1; m <= pool.n; m *= 2) {
        points.push_back(m);
        if (m > pool.n / 2) {
            break;
        }
    }
    if (points.back() != pool.n) {
        points.push_back(pool.n);
    }

    MassCurve curve;
    std::vector<bool> seen(pool.entries.size(), false);
    double mass = 0.0;
    size_t next_point = 0;
    for (int m = 1; m <= pool.n; ++m) {
        const int entry = pool.draw_order[static_cast<size_t>(m - 1)];
        if (!seen[static_cast<size_t>(entry)]) {
            seen[static_cast<size_t>(entry)] = true;
            mass += entry_mass[static_cast<size_t>(entry)];
        }
        if (next_point < points.size() && m == points[next_point]) {
            curve.points.emplace_back(m, mass);
            ++next_point;
        }
    }
    return curve;
}

namespace {

bool is_power_of_two(int x) {
    return x > 0 && (x & (x - 1)) == 0;
}

// Restricted pool + matrix over a subset of draw slots (ascending draw
// index), entries in first-draw order of the subset.
struct SubPool {
    CandidatePool pool;
    UtilityMatrix matrix;
};

SubPool restrict_to_draws(const CandidatePool& pool, const UtilityMatrix& matrix,
                          const std::vector<int>& draw_indices) {
    SubPool out;
    out.pool.source_key = pool.source_key;
    out.pool.policy = pool.policy;
    out.pool.seed = pool.seed;
    out.pool.max_len = pool.max_len;
    out.pool.n = static_cast<int>(draw_indices.size());

    std::vector<int> entry_map(pool.entries.size(), -1);
    std::vector<int> kept_entries;
    for (int draw : draw_indices) {
        const int orig = pool.draw_order[static_cast<size_t>(draw)];
        int& mapped = entry_map[static_cast<size_t>(orig)];
        if (mapped < 0) {
            mapped = static_cast<int>(out.pool.entries.size());
            kept_entries.push_back(orig);
            PoolEntry entry = pool.entries[static_cast<size_t>(orig)];
            entry.count = 0;
            out.pool.entries.push_back(std::move(entry));
        }
        out.pool.entries[static_cast<size_t>(mapped)].count += 1;
        out.pool.draw_order.push_back(mapped);
    }

    out.matrix.dim = static_cast<int>(kept_entries.size());
    out.matrix.metric_id = matrix.metric_id;
    out.matrix.values.resize(static_cast<size_t>(out.matrix.dim) * out.matrix.dim);
    for (int i = 0; i < out.matrix.dim; ++i) {
        for (int j = 0; j < out.matrix.dim; ++j) {
            out.matrix.at(i, j) = matrix.at(kept_entries[static_cast<size_t>(i)],
                                            kept_entries[static_cast<size_t>(j)]);
        }
    }
    return out;
}

}  // namespace

SweepCurve candidate_size_sweep(const CandidatePool& pool, const UtilityMatrix& matrix,
                                const std::vector<int>& sizes, int repeats, Rng& rng,
                                const UtilityMetric& eval_metric, const std::string& reference,
                                const Detokenizer& detok) {
    if (pool.draw_order.empty()) {
        throw ValidationError("candidate-size sweep requires a pool with draw order");
    }
    if (repeats < 1) {
        throw ValidationError("repeats must be >= 1");
    }
    SweepCurve curve;
    curve.policy = pool.policy;

    for (size_t point = 0; point < sizes.size(); ++point) {
        const int size = sizes[point];
        if (size < 1 || size > pool.n) {
            throw ValidationError("sweep size " + std::to_string(size) +
                                  " outside [1, n=" + std::to_string(pool.n) + "]");
        }
        if (!is_power_of_two(size) && size != pool.n) {
            throw ValidationError("sweep sizes must be powers of two or the full pool size; got " +
                                  std::to_string(size));
        }

        std::vector<double> scores;
        if (size == pool.n) {
            const MbrResult full = mbr_decode(pool, matrix);
            scores.push_back(eval_metric.score(detok(full.chosen), reference));
        } else {
            Rng point_rng = rng.substream(static_cast<uint64_t>(size), 0x5377eeb);
            std::vector<int> all(static_cast<size_t>(pool.n));
            std::iota(all.begin(), all.end(), 0);
            for (int rep = 0; rep < repeats; ++rep) {
                // partial Fisher-Yates: first `size` slots become the subset
                for (int i = 0; i < size; ++i) {
                    const int j = i + static_cast<int>(point_rng.next_below(
                                          static_cast<uint64_t>(pool.n - i)));
                    std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]);
                }
                std::vector<int> subset(all.begin(), all.begin() + size);
                std::sort(subset.begin(), subset.end());
                const SubPool sub = restrict_to_draws(pool, matrix, subset);
                const MbrResult choice = mbr_decode(sub.pool, sub.matrix);
                scores.push_back(eval_metric.score(detok(choice.chosen), reference));
            }
        }

        SweepPoint sp;
        sp.candidate_size = size;
        const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) /
                            static_cast<double>(scores.size());
        sp.mean_utility = mean;
        if (scores.size() > 1) {
            double ss = 0.0;
            for (double s : scores) {
                ss += (s - mean) * (s - mean);
            }
            sp.std_error = std::sqrt(ss / static_cast<double>(scores.size() - 1)) /
                           std::sqrt(static_cast<double>(scores.size()));
        }
        curve.points.push_back(sp);
    }
    return curve;
}

TokenAnnotation annotate_token_probs(const ToyAutoregressiveModel& model,
                                     const std::string& source_key, const TokenSequence& seq,
                                     double threshold) {
    validate_sequence(model.vocab(), seq);
    TokenAnnotation out;
    out.threshold = threshold;
    TokenSequence prefix;
    for (size_t t = 0; t < seq.ids.size(); ++t) {
        const NextTokenDistribution dist = model.next_token_dist(source_key, prefix);
        const int id = seq.ids[t];
        TokenAnnotationEntry entry;
        entry.position = static_cast<int>(t);
        entry.token_id = id;
        entry.prob = dist.probs[static_cast<size_t>(id)];
        entry.flagged = entry.prob < threshold;
        out.tokens.push_back(entry);
        prefix.ids.push_back(id);
    }
    return out;
}

double permutation_test(std::span<const double> scores_a, std::span<const double> scores_b,
                        int iterations, Rng& rng) {
    if (scores_a.size() != scores_b.size()) {
        throw ValidationError("permutation test requires equal-length score lists");
    }
    if (scores_a.empty()) {
        throw ValidationError("permutation test requires at least one segment");
    }
    if (iterations < 1) {
        throw ValidationError("iterations must be >= 1");
    }
    const size_t n = scores_a.size();
    std::vector<double> diffs(n);
    double observed_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        diffs[i] = scores_a[i] - scores_b[i];
        observed_sum += diffs[i];
    }
    const double observed = std::abs(observed_sum / static_cast<double>(n));

    int at_least = 0;
    for (int it = 0; it < iterations; ++it) {
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const bool flip = (rng.next_u64() >> 63) != 0;
            sum += flip ? -diffs[i] : diffs[i];
        }
        if (std::abs(sum / static_cast<double>(n)) >= observed) {
            ++at_least;
        }
    }
    return static_cast<double>(at_least + 1) / static_cast<double>(iterations + 1);
}

}  // namespace mbrd
