#pragma once

#include <compare>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mbrd/vocab.hpp"

namespace mbrd {

// Probability vector over the vocabulary at one decoding step.
struct NextTokenDistribution {
    std::vector<double> probs;
};

// Throws ValidationError unless probs has the right length, entries are in
// [0,1] and the sum is within `tol` of 1.
void validate_distribution(const NextTokenDistribution& dist, int vocab_size, double tol = 1e-9);

// Token-id sequence; `terminated` means the last id is EOS.
struct TokenSequence {
    std::vector<int> ids;
    bool terminated = false;

    bool operator==(const TokenSequence& other) const = default;
    // Lexicographic id order; used for deterministic tie-breaking.
    auto operator<=>(const TokenSequence& other) const {
        return std::tie(ids, terminated) <=> std::tie(other.ids, other.terminated);
    }
};

// EOS at most once and only in final position; all ids in range.
void validate_sequence(const Vocabulary& vocab, const TokenSequence& seq);

// Space-joined token strings, EOS dropped.
std::string detokenize(const Vocabulary& vocab, const TokenSequence& seq,
                       const std::string& separator = " ");

// Whitespace-split text to an id sequence (no EOS appended).
// Throws ValidationError on unknown tokens.
TokenSequence tokenize(const Vocabulary& vocab, const std::string& text);

struct ModelTableEntry {
    std::string source_key;
    std::vector<int> context;  // trailing target tokens, length <= order
    NextTokenDistribution dist;
};

// Deterministic table-based conditional model P(y_t | source, y_{1:t-1}).
//
// The conditioning context is the last min(order, t-1) target tokens. A
// (source, context) pair absent from the table falls back to the uniform
// distribution over the vocabulary, which keeps the model a proper
// probability distribution over sequences without exhaustive tables.
class ToyAutoregressiveModel {
public:
    ToyAutoregressiveModel(Vocabulary vocab, int order,
                           std::map<std::string, std::string> sources,
                           std::vector<ModelTableEntry> entries);

    const Vocabulary& vocab() const { return vocab_; }
    int order() const { return order_; }
    const std::map<std::string, std::string>& sources() const { return sources_; }
    bool has_source(const std::string& key) const { return sources_.count(key) > 0; }
    const std::vector<ModelTableEntry>& entries() const { return entries_; }

    // Throws ValidationError on unknown source keys or terminated prefixes.
    NextTokenDistribution next_token_dist(const std::string& source_key,
                                          const TokenSequence& prefix) const;

    // Natural-log probability of a terminated sequence; -inf if any step
    // has probability 0. Throws ValidationError if seq is not terminated.
    double sequence_logprob(const std::string& source_key, const TokenSequence& seq) const;

private:
    Vocabulary vocab_;
    int order_;
    std::map<std::string, std::string> sources_;
    std::vector<ModelTableEntry> entries_;
    std::unordered_map<std::string, size_t> lookup_;  // "src\x1fid,id" -> entry index
};

// JSON model file I/O. Distributions within 1e-6 of summing to 1 are
// renormalized on load; anything further off is rejected.
ToyAutoregressiveModel load_model(const std::string& path);
void save_model(const ToyAutoregressiveModel& model, const std::string& path);

}  // namespace mbrd
