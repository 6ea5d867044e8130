#include "mbrd/beam.hpp"

#include <algorithm>
#include <cmath>

#include "mbrd/errors.hpp"

namespace mbrd {

double length_penalty(int length, double alpha) {
    if (length < 0) {
        throw ValidationError("length_penalty needs length >= 0");
    }
    return std::pow((5.0 + length) / 6.0, alpha);
}

namespace {

struct ActiveBeam {
    std::vector<int> ids;  // no EOS
    double logprob = 0.0;
    int last_token = -1;
};

// finished ranking: penalized desc, then lexicographically smaller ids
bool better_finished(const BeamHypothesis& a, const BeamHypothesis& b) {
    if (a.penalized_score != b.penalized_score) {
        return a.penalized_score > b.penalized_score;
    }
    return a.seq.ids < b.seq.ids;
}

}  // namespace

BeamHypothesis beam_search(const ToyAutoregressiveModel& model, const std::string& source_key,
                           const BeamConfig& config) {
    if (config.beam_size < 1) {
        throw ValidationError("beam_size must be >= 1");
    }
    if (config.max_len < 1) {
        throw ValidationError("max_len must be >= 1");
    }
    if (config.alpha < 0.0) {
        throw ValidationError("alpha must be >= 0");
    }
    const int eos = model.vocab().eos_id();

    std::vector<ActiveBeam> active{ActiveBeam{}};
    std::vector<BeamHypothesis> finished;
    BeamHypothesis best_unterminated;
    bool have_unterminated = false;

    const double lp_cap = length_penalty(config.max_len, config.alpha);

    while (!active.empty()) {
        std::vector<ActiveBeam> candidates;
        for (const ActiveBeam& beam : active) {
            TokenSequence prefix;
            prefix.ids = beam.ids;
            const NextTokenDistribution dist = model.next_token_dist(source_key, prefix);
            for (int id = 0; id < model.vocab().size(); ++id) {
                const double p = dist.probs[static_cast<size_t>(id)];
                if (p <= 0.0) {
                    continue;
                }
                const double logprob = beam.logprob + std::log(p);
                if (id == eos) {
                    BeamHypothesis hyp;
                    hyp.seq.ids = beam.ids;
                    hyp.seq.ids.push_back(eos);
                    hyp.seq.terminated = true;
                    hyp.logprob = logprob;
                    hyp.penalized_score =
                        logprob / length_penalty(static_cast<int>(hyp.seq.ids.size()), config.alpha);
                    finished.push_back(std::move(hyp));
                } else if (static_cast<int>(beam.ids.size()) + 1 < config.max_len) {
                    ActiveBeam next;
                    next.ids = beam.ids;
                    next.ids.push_back(id);
                    next.logprob = logprob;
                    next.last_token = id;
                    candidates.push_back(std::move(next));
                } else {
                    // length cap hit with no room left for EOS
                    BeamHypothesis hyp;
                    hyp.seq.ids = beam.ids;
                    hyp.seq.ids.push_back(id);
                    hyp.seq.terminated = false;
                    hyp.logprob = logprob;
                    hyp.penalized_score =
                        logprob / length_penalty(static_cast<int>(hyp.seq.ids.size()), config.alpha);
                    if (!have_unterminated || better_finished(hyp, best_unterminated)) {
                        best_unterminated = std::move(hyp);
                        have_unterminated = true;
                    }
                }
            }
        }

        // prune to beam_size by raw logprob; ties to the lower last-token id
        std::sort(candidates.begin(), candidates.end(), [](const ActiveBeam& a, const ActiveBeam& b) {
            if (a.logprob != b.logprob) return a.logprob > b.logprob;
            return a.last_token < b.last_token;
        });
        if (static_cast<int>(candidates.size()) > config.beam_size) {
            candidates.resize(static_cast<size_t>(config.beam_size));
        }
        active = std::move(candidates);

        // A live beam's score can only shrink; dividing by the cap-length
        // penalty bounds anything it may still finish as. Stop once even
        // that bound cannot beat the worst of the top beam_size finished.
        if (!active.empty() && static_cast<int>(finished.size()) >= config.beam_size) {
            std::sort(finished.begin(), finished.end(), better_finished);
            finished.resize(static_cast<size_t>(config.beam_size));
            const double reference = finished.back().penalized_score;
            const double optimistic = active.front().logprob / lp_cap;
            if (optimistic < reference) {
                break;
            }
        }
    }

    if (!finished.empty()) {
        std::sort(finished.begin(), finished.end(), better_finished);
        return finished.front();
    }
    if (have_unterminated) {
        return best_unterminated;
    }
    throw ValidationError("beam search produced no hypothesis");
}

}  // namespace mbrd
