#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace mbrd {

enum class Strategy {
    kAncestral,
    kTopK,
    kNucleus,
    kEpsilon,
};

// CLI spellings: ancestral, topk, nucleus, epsilon.
std::string strategy_name(Strategy strategy);
Strategy parse_strategy(const std::string& name);

// Strategy tag plus exactly the hyperparameters that strategy uses.
struct SamplingPolicy {
    Strategy strategy = Strategy::kAncestral;
    double tau = 1.0;              // temperature, > 0
    std::optional<int> k;          // top-k only, >= 1
    std::optional<double> p;       // nucleus only, (0, 1]
    std::optional<double> epsilon; // epsilon only, [0, 1)
};

SamplingPolicy ancestral_policy(double tau = 1.0);
SamplingPolicy top_k_policy(int k, double tau = 1.0);
SamplingPolicy nucleus_policy(double p, double tau = 1.0);
SamplingPolicy epsilon_policy(double epsilon, double tau = 1.0);

// Throws ValidationError unless ranges hold and exactly the relevant
// parameters are set.
void validate_policy(const SamplingPolicy& policy);

std::string policy_description(const SamplingPolicy& policy);

void to_json(nlohmann::json& j, const SamplingPolicy& policy);
void from_json(const nlohmann::json& j, SamplingPolicy& policy);

}  // namespace mbrd
