#include "mbrd/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "mbrd/errors.hpp"
#include "mbrd/parallel.hpp"

namespace mbrd {

std::string strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::kAncestral: return "ancestral";
        case Strategy::kTopK: return "topk";
        case Strategy::kNucleus: return "nucleus";
        case Strategy::kEpsilon: return "epsilon";
    }
    throw ValidationError("invalid strategy tag");
}

Strategy parse_strategy(const std::string& name) {
    if (name == "ancestral") return Strategy::kAncestral;
    if (name == "topk") return Strategy::kTopK;
    if (name == "nucleus") return Strategy::kNucleus;
    if (name == "epsilon") return Strategy::kEpsilon;
    throw ValidationError("unknown sampling strategy '" + name +
                          "' (expected ancestral, topk, nucleus or epsilon)");
}

SamplingPolicy ancestral_policy(double tau) {
    SamplingPolicy policy;
    policy.strategy = Strategy::kAncestral;
    policy.tau = tau;
    validate_policy(policy);
    return policy;
}

SamplingPolicy top_k_policy(int k, double tau) {
    SamplingPolicy policy;
    policy.strategy = Strategy::kTopK;
    policy.tau = tau;
    policy.k = k;
    validate_policy(policy);
    return policy;
}

SamplingPolicy nucleus_policy(double p, double tau) {
    SamplingPolicy policy;
    policy.strategy = Strategy::kNucleus;
    policy.tau = tau;
    policy.p = p;
    validate_policy(policy);
    return policy;
}

SamplingPolicy epsilon_policy(double epsilon, double tau) {
    SamplingPolicy policy;
    policy.strategy = Strategy::kEpsilon;
    policy.tau = tau;
    policy.epsilon = epsilon;
    validate_policy(policy);
    return policy;
}

void validate_policy(const SamplingPolicy& policy) {
    if (!(policy.tau > 0.0)) {
        throw ValidationError("temperature must be > 0");
    }
    const bool has_k = policy.k.has_value();
    const bool has_p = policy.p.has_value();
    const bool has_eps = policy.epsilon.has_value();
    switch (policy.strategy) {
        case Strategy::kAncestral:
            if (has_k || has_p || has_eps) {
                throw ValidationError("ancestral sampling takes no k/p/epsilon parameters");
            }
            break;
        case Strategy::kTopK:
            if (!has_k || has_p || has_eps) {
                throw ValidationError("top-k sampling requires k and only k");
            }
            if (*policy.k < 1) {
                throw ValidationError("k must be >= 1");
            }
            break;
        case Strategy::kNucleus:
            if (has_k || !has_p || has_eps) {
                throw ValidationError("nucleus sampling requires p and only p");
            }
            if (!(*policy.p > 0.0 && *policy.p <= 1.0)) {
                throw ValidationError("p must be in (0, 1]");
            }
            break;
        case Strategy::kEpsilon:
            if (has_k || has_p || !has_eps) {
                throw ValidationError("epsilon sampling requires epsilon and only epsilon");
            }
            if (!(*policy.epsilon >= 0.0 && *policy.epsilon < 1.0)) {
                throw ValidationError("epsilon must be in [0, 1)");
            }
            break;
    }
}

std::string policy_description(const SamplingPolicy& policy) {
    std::string out = strategy_name(policy.strategy);
    out += " tau=" + std::to_string(policy.tau);
    if (policy.k) out += " k=" + std::to_string(*policy.k);
    if (policy.p) out += " p=" + std::to_string(*policy.p);
    if (policy.epsilon) out += " epsilon=" + std::to_string(*policy.epsilon);
    return out;
}

void to_json(nlohmann::json& j, const SamplingPolicy& policy) {
    j = nlohmann::json{{"strategy", strategy_name(policy.strategy)}, {"tau", policy.tau}};
    if (policy.k) j["k"] = *policy.k;
    if (policy.p) j["p"] = *policy.p;
    if (policy.epsilon) j["epsilon"] = *policy.epsilon;
}

void from_json(const nlohmann::json& j, SamplingPolicy& policy) {
    policy = SamplingPolicy{};
    policy.strategy = parse_strategy(j.at("strategy").get<std::string>());
    policy.tau = j.at("tau").get<double>();
    if (j.contains("k")) policy.k = j.at("k").get<int>();
    if (j.contains("p")) policy.p = j.at("p").get<double>();
    if (j.contains("epsilon")) policy.epsilon = j.at("epsilon").get<double>();
    validate_policy(policy);
}

namespace {

// ids of positive-probability tokens sorted by (raw prob desc, id asc)
std::vector<int> positive_by_prob(const std::vector<double>& probs) {
    std::vector<int> ids;
    ids.reserve(probs.size());
    for (int id = 0; id < static_cast<int>(probs.size()); ++id) {
        if (probs[static_cast<size_t>(id)] > 0.0) {
            ids.push_back(id);
        }
    }
    std::sort(ids.begin(), ids.end(), [&](int a, int b) {
        const double pa = probs[static_cast<size_t>(a)];
        const double pb = probs[static_cast<size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    });
    return ids;
}

}  // namespace

TruncatedDistribution truncate(const NextTokenDistribution& dist, const SamplingPolicy& policy) {
    validate_policy(policy);
    const std::vector<double>& raw = dist.probs;

    std::vector<int> ranked = positive_by_prob(raw);
    if (ranked.empty()) {
        throw ValidationError("distribution has no positive-probability token");
    }

    std::vector<int> support;
    switch (policy.strategy) {
        case Strategy::kAncestral:
            support = ranked;
            break;
        case Strategy::kTopK: {
            const size_t keep = std::min<size_t>(static_cast<size_t>(*policy.k), ranked.size());
            support.assign(ranked.begin(), ranked.begin() + static_cast<ptrdiff_t>(keep));
            break;
        }
        case Strategy::kNucleus: {
            double cumulative = 0.0;
            for (int id : ranked) {
                support.push_back(id);
                cumulative += raw[static_cast<size_t>(id)];
                if (cumulative >= *policy.p) {
                    break;
                }
            }
            // cumulative mass can fall short of p only through rounding or
            // an untabulated remainder; the full positive set is the
            // smallest covering set then
            break;
        }
        case Strategy::kEpsilon: {
            for (int id : ranked) {
                if (raw[static_cast<size_t>(id)] >= *policy.epsilon) {
                    support.push_back(id);
                }
            }
            if (support.empty()) {
                support.push_back(ranked.front());  // argmax fallback, ties already id-broken
            }
            break;
        }
    }

    std::sort(support.begin(), support.end());

    TruncatedDistribution out;
    out.support = std::move(support);
    out.probs.resize(out.support.size());

    double raw_mass = 0.0;
    double raw_max = 0.0;
    for (int id : out.support) {
        const double p = raw[static_cast<size_t>(id)];
        raw_mass += p;
        raw_max = std::max(raw_max, p);
    }
    out.raw_support_mass = raw_mass;

    // Temper survivors: p^(1/tau), renormalized. Scaling by the max keeps
    // the pow well-conditioned for extreme temperatures.
    double total = 0.0;
    for (size_t i = 0; i < out.support.size(); ++i) {
        const double p = raw[static_cast<size_t>(out.support[i])];
        const double w = (policy.tau == 1.0) ? p : std::pow(p / raw_max, 1.0 / policy.tau);
        out.probs[i] = w;
        total += w;
    }
    for (double& w : out.probs) {
        w /= total;
    }
    return out;
}

int sample_token(const TruncatedDistribution& tdist, Rng& rng) {
    if (tdist.support.empty()) {
        throw ValidationError("cannot sample from an empty support");
    }
    const double r = rng.next_double();
    double cumulative = 0.0;
    for (size_t i = 0; i < tdist.support.size(); ++i) {
        cumulative += tdist.probs[i];
        if (r < cumulative) {
            return tdist.support[i];
        }
    }
    return tdist.support.back();  // rounding left r at/above the final cumsum
}

SampledSequence sample_sequence(const ToyAutoregressiveModel& model, const std::string& source_key,
                                const SamplingPolicy& policy, Rng& rng, int max_len) {
    if (max_len < 1) {
        throw ValidationError("max_len must be >= 1");
    }
    SampledSequence out;
    while (static_cast<int>(out.seq.ids.size()) < max_len) {
        const NextTokenDistribution dist = model.next_token_dist(source_key, out.seq);
        const TruncatedDistribution tdist = truncate(dist, policy);
        const int token = sample_token(tdist, rng);
        out.logprob += std::log(dist.probs[static_cast<size_t>(token)]);
        out.seq.ids.push_back(token);
        if (token == model.vocab().eos_id()) {
            out.seq.terminated = true;
            break;
        }
    }
    return out;
}

CandidatePool sample_pool(const ToyAutoregressiveModel& model, const std::string& source_key,
                          const SamplingPolicy& policy, const Rng& rng, int n, int max_len) {
    if (n < 1) {
        throw ValidationError("pool size must be >= 1");
    }
    std::vector<SampledSequence> samples(static_cast<size_t>(n));
    parallel_for(static_cast<size_t>(n), [&](size_t i) {
        Rng stream = rng.substream(static_cast<uint64_t>(i));
        samples[i] = sample_sequence(model, source_key, policy, stream, max_len);
    });

    CandidatePool pool;
    pool.source_key = source_key;
    pool.policy = policy;
    pool.seed = rng.seed();
    pool.n = n;
    pool.max_len = max_len;
    pool.draw_order.reserve(samples.size());

    std::unordered_map<std::string, int> seen;  // serialized ids -> entry index
    for (const SampledSequence& sample : samples) {
        std::string key;
        key.reserve(sample.seq.ids.size() * 4);
        for (int id : sample.seq.ids) {
            key += std::to_string(id);
            key += ',';
        }
        key += sample.seq.terminated ? 'T' : 'U';
        auto [it, inserted] = seen.emplace(std::move(key), static_cast<int>(pool.entries.size()));
        if (inserted) {
            pool.entries.push_back(PoolEntry{sample.seq, 1, sample.logprob});
        } else {
            pool.entries[static_cast<size_t>(it->second)].count += 1;
        }
        pool.draw_order.push_back(it->second);
    }
    return pool;
}

}  // namespace mbrd
