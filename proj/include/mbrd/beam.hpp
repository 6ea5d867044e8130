#pragma once

#include <string>

#include "mbrd/model.hpp"

namespace mbrd {

struct BeamConfig {
    int beam_size = 4;
    double alpha = 0.5;
    int max_len = 128;
};

struct BeamHypothesis {
    TokenSequence seq;
    double logprob = 0.0;
    double penalized_score = 0.0;  // logprob / length_penalty(|seq|, alpha)
};

// ((5 + length) / 6)^alpha.
double length_penalty(int length, double alpha);

// Deterministic beam search over raw log-probabilities, no coverage
// penalty. Finished hypotheses (EOS reached) are ranked by
// logprob / length_penalty; sequence length counts EOS. If nothing
// finishes within max_len, the best unterminated hypothesis is returned,
// flagged through seq.terminated = false.
BeamHypothesis beam_search(const ToyAutoregressiveModel& model, const std::string& source_key,
                           const BeamConfig& config);

}  // namespace mbrd
