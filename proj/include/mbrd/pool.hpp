#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbrd/model.hpp"
#include "mbrd/policy.hpp"

namespace mbrd {

struct PoolEntry {
    TokenSequence seq;
    int count = 0;       // multiplicity among the n draws
    double logprob = 0;  // raw model log-probability of seq
};

// Multiset of independently drawn sequences. Distinct sequences are stored
// once with their multiplicity, in first-draw order; draw_order maps draw
// index -> entry index so the original sample stream can be replayed.
struct CandidatePool {
    std::string source_key;
    SamplingPolicy policy;
    uint64_t seed = 0;
    int n = 0;
    int max_len = 0;
    std::vector<PoolEntry> entries;
    std::vector<int> draw_order;  // empty for pools without draw provenance
};

// Pairwise-distinct entries, positive counts summing to n, consistent
// draw_order when present.
void validate_pool(const CandidatePool& pool, const Vocabulary& vocab);

// Content hash over entries and n; keys the utility-matrix cache.
uint64_t pool_hash(const CandidatePool& pool);

// JSON-lines pool file: a header record followed by one record per
// distinct sequence (tokens, count, logprob, terminated). -inf logprobs
// are stored as the string "-inf".
void save_pool(const CandidatePool& pool, const Vocabulary& vocab, const std::string& path);
CandidatePool load_pool(const std::string& path, const Vocabulary& vocab);

}  // namespace mbrd
