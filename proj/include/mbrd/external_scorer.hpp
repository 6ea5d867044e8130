#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "mbrd/metrics.hpp"

namespace mbrd {

// Adapter seat for learned metrics served out-of-process. The scorer is a
// spawned subprocess speaking line-delimited JSON on stdin/stdout:
//   request:  {"id": "...", "hyp": "...", "ref": "..."}
//   response: {"id": "...", "score": <number>}
// Responses may arrive in any order; matching is by id.
struct ExternalScorerConfig {
    std::vector<std::string> command;  // argv, command[0] is the executable
    int batch_size = 64;
    int timeout_ms = 10000;
    std::string id = "external";
    std::pair<double, double> range{0.0, 1.0};
};

// JSON config: {"command": [...], "batch_size": int, "timeout_ms": int,
//               "id": str, "range": [lo, hi]} — all but command optional.
ExternalScorerConfig load_scorer_config(const std::string& path);

class ExternalScorer : public UtilityMetric {
public:
    explicit ExternalScorer(ExternalScorerConfig config);
    ~ExternalScorer() override;

    ExternalScorer(const ExternalScorer&) = delete;
    ExternalScorer& operator=(const ExternalScorer&) = delete;

    std::string id() const override { return config_.id; }
    std::pair<double, double> range() const override { return config_.range; }

    double score(const std::string& hyp, const std::string& ref) const override;
    std::vector<double> score_batch(
        const std::vector<std::pair<std::string, std::string>>& pairs) const override;

    // Caller-supplied ids; result is aligned with the input order. Throws
    // ScorerError on timeout, malformed responses, unknown/missing ids and
    // out-of-range scores.
    std::vector<std::pair<std::string, double>> score_batch_ids(
        const std::vector<std::tuple<std::string, std::string, std::string>>& pairs) const;

    const ExternalScorerConfig& config() const { return config_; }

private:
    struct Process;

    void ensure_started() const;

    ExternalScorerConfig config_;
    mutable std::mutex channel_mutex_;  // one sequential channel per instance
    mutable std::unique_ptr<Process> process_;
};

}  // namespace mbrd
