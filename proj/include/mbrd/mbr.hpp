#pragma once

#include <string>
#include <vector>

#include "mbrd/metrics.hpp"
#include "mbrd/model.hpp"
#include "mbrd/pool.hpp"

namespace mbrd {

// Token sequences become metric inputs through a detokenizer; the default
// is a whitespace join with EOS dropped.
struct Detokenizer {
    const Vocabulary* vocab = nullptr;
    std::string separator = " ";

    std::string operator()(const TokenSequence& seq) const {
        return detokenize(*vocab, seq, separator);
    }
};

// Pairwise utility u(entry_i as hypothesis, entry_j as pseudo-reference)
// over the pool's distinct entries. Not assumed symmetric.
struct UtilityMatrix {
    int dim = 0;
    std::string metric_id;
    std::vector<double> values;  // row-major dim x dim

    double at(int i, int j) const { return values[static_cast<size_t>(i) * dim + j]; }
    double& at(int i, int j) { return values[static_cast<size_t>(i) * dim + j]; }
};

// One metric call per distinct ordered pair (i, j), i = j included;
// multiplicity weighting happens in mbr_decode.
UtilityMatrix compute_utility_matrix(const CandidatePool& pool, const UtilityMetric& metric,
                                     const Detokenizer& detok);

struct MbrResult {
    TokenSequence chosen;
    int chosen_index = 0;                    // into pool.entries
    std::vector<double> expected_utilities;  // per distinct entry
    std::vector<int> ranking;                // entry indices, best first
};

// Monte-Carlo MBR over the sample multiset: expected utility of entry i is
// (1/n) sum_j count_j * u(i, j), self term included since candidates and
// pseudo-references are the same pool. Argmax ties break toward higher
// sequence logprob, then lower entry index.
MbrResult mbr_decode(const CandidatePool& pool, const UtilityMatrix& matrix);

struct EnumeratedSequence {
    TokenSequence seq;
    double prob = 0.0;
    double logprob = 0.0;
};

struct Enumeration {
    std::vector<EnumeratedSequence> sequences;  // lexicographic id order
    double unterminated_mass = 0.0;             // mass stranded at the length cap
};

// All terminated sequences of length <= max_len (EOS included) with
// positive probability. Guarded: refuses when |V|^max_len exceeds budget.
Enumeration enumerate_terminated(const ToyAutoregressiveModel& model, const std::string& source_key,
                                 int max_len, double budget = 1e6);

struct ExactUtility {
    double value = 0.0;
    double unterminated_mass = 0.0;
};

// Exact expected utility of hypothesis h under the model: the utility sum
// over every enumerable terminated sequence, weighted by its model
// probability. Ground truth that Monte-Carlo MBR converges to.
ExactUtility exact_expected_utility(const ToyAutoregressiveModel& model,
                                    const std::string& source_key, const TokenSequence& hypothesis,
                                    const UtilityMetric& metric, int max_len, double budget = 1e6);

struct OracleResult {
    TokenSequence chosen;
    double expected_utility = 0.0;
    bool tie = false;  // another sequence reached exactly the same utility
    double unterminated_mass = 0.0;
};

// Argmax of exact_expected_utility over all enumerable terminated
// sequences; ties go to the lexicographically smaller sequence and are
// flagged.
OracleResult exact_mbr_oracle(const ToyAutoregressiveModel& model, const std::string& source_key,
                              const UtilityMetric& metric, int max_len, double budget = 1e6);

// Versioned binary cache for utility matrices, keyed by (pool hash,
// metric id). try_load returns false on miss or any mismatch.
std::string matrix_cache_filename(uint64_t pool_hash, const std::string& metric_id);
bool try_load_matrix(const std::string& path, uint64_t pool_hash, const std::string& metric_id,
                     UtilityMatrix* out);
void save_matrix(const std::string& path, uint64_t pool_hash, const UtilityMatrix& matrix);

}  // namespace mbrd
