#pragma once

#include <span>
#include <string>
#include <vector>

#include "mbrd/mbr.hpp"
#include "mbrd/model.hpp"
#include "mbrd/pool.hpp"
#include "mbrd/rng.hpp"

namespace mbrd {

struct TopTokens {
    std::vector<std::pair<int, double>> top;  // (token id, prob), prob descending
    double tail_mass = 0.0;                   // aggregate mass of everything below top_n
};

// Sorted next-token probabilities (ties by lower id) with the tail mass of
// the cut-off remainder.
TopTokens dump_next_token_dist(const ToyAutoregressiveModel& model, const std::string& source_key,
                               const TokenSequence& prefix, int top_n);

struct MassCurve {
    std::vector<std::pair<int, double>> points;  // (num_samples m, cumulative mass)
};

// Cumulative model mass of the distinct sequences seen among the first m
// draws, at m in {1, 2, 4, ...} plus n. Requires pool draw order.
// Unterminated samples carry no sequence probability and contribute 0.
MassCurve cumulative_mass_curve(const CandidatePool& pool, const ToyAutoregressiveModel& model,
                                const std::string& source_key);

struct SweepPoint {
    int candidate_size = 0;
    double mean_utility = 0.0;
    double std_error = 0.0;
};

struct SweepCurve {
    SamplingPolicy policy;
    std::vector<SweepPoint> points;
};

// MBR quality as a function of candidate-list size: for each size s, draw
// `repeats` random sub-multisets of s samples (without replacement from
// the n draws), decode each with the cached utility matrix and score the
// choice against `reference` with eval_metric. Size n short-circuits to
// the full-pool decode. Sizes must be powers of two or n itself.
SweepCurve candidate_size_sweep(const CandidatePool& pool, const UtilityMatrix& matrix,
                                const std::vector<int>& sizes, int repeats, Rng& rng,
                                const UtilityMetric& eval_metric, const std::string& reference,
                                const Detokenizer& detok);

struct TokenAnnotationEntry {
    int position = 0;
    int token_id = -1;
    double prob = 0.0;
    bool flagged = false;  // prob < threshold
};

struct TokenAnnotation {
    double threshold = 0.02;
    std::vector<TokenAnnotationEntry> tokens;
};

// Raw per-step probabilities of a sequence under the model, flagging
// tokens below the threshold.
TokenAnnotation annotate_token_probs(const ToyAutoregressiveModel& model,
                                     const std::string& source_key, const TokenSequence& seq,
                                     double threshold = 0.02);

// Paired two-sided permutation test over per-segment scores: each
// segment's (a, b) assignment is flipped with probability 1/2 and the
// permuted |mean difference| compared with the observed one;
// p = (#{permuted >= observed} + 1) / (iterations + 1).
double permutation_test(std::span<const double> scores_a, std::span<const double> scores_b,
                        int iterations, Rng& rng);

}  // namespace mbrd
