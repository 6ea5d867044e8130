#pragma once

#include "mbrd/model.hpp"
#include "mbrd/policy.hpp"
#include "mbrd/pool.hpp"
#include "mbrd/rng.hpp"

namespace mbrd {

// Support of a truncated next-token distribution plus the renormalized
// tempered probabilities over it.
//
// Truncation criteria are evaluated on RAW (untempered) probabilities;
// the exponent 1/tau applies only to the survivors. Support holds token
// ids in ascending order, probs aligned with it.
struct TruncatedDistribution {
    std::vector<int> support;
    std::vector<double> probs;
    double raw_support_mass = 0.0;
};

// Strategy semantics:
//   ancestral: keep every token with raw probability > 0.
//   top-k:     keep the min(k, #positive) highest raw-probability tokens;
//              boundary ties go to the lower token id.
//   nucleus:   sort by raw probability descending (ties by lower id); keep
//              the shortest prefix whose cumulative raw mass reaches p,
//              including the token that crosses the boundary.
//   epsilon:   keep tokens with raw probability >= epsilon; if that prunes
//              everything (epsilon above the max), keep the argmax token.
// Zero-probability tokens are never part of the support: their sampling
// weight is 0 under every strategy.
TruncatedDistribution truncate(const NextTokenDistribution& dist, const SamplingPolicy& policy);

// Inverse-CDF draw from the truncated distribution.
int sample_token(const TruncatedDistribution& tdist, Rng& rng);

struct SampledSequence {
    TokenSequence seq;
    double logprob = 0.0;  // raw model log-probability, not the truncated one
};

// Autoregressive truncate + draw until EOS or max_len tokens (EOS counts
// toward the cap). Sequences hitting the cap without EOS come back
// unterminated.
SampledSequence sample_sequence(const ToyAutoregressiveModel& model, const std::string& source_key,
                                const SamplingPolicy& policy, Rng& rng, int max_len);

// n independent samples; draw i always uses rng.substream(i), so the pool
// is a pure function of (model, source, policy, seed, n, max_len) no
// matter how the work is scheduled. Duplicates are kept as multiplicities.
CandidatePool sample_pool(const ToyAutoregressiveModel& model, const std::string& source_key,
                          const SamplingPolicy& policy, const Rng& rng, int n, int max_len);

}  // namespace mbrd
