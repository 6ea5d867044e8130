#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mbrd/policy.hpp"

namespace mbrd {

// Everything needed to reproduce a command's outputs bit-for-bit. The
// created_at stamp is informational only and excluded from any
// reproducibility comparison.
struct RunManifest {
    std::string tool_version;
    std::vector<std::string> command;  // argv as invoked
    uint64_t seed = 0;
    std::string model_path;
    std::string model_hash;
    std::optional<SamplingPolicy> policy;
    std::optional<int> n;
    std::optional<int> max_len;
    std::vector<std::string> metric_ids;
    std::string created_at;
};

void write_manifest(const RunManifest& manifest, const std::string& path);
RunManifest read_manifest(const std::string& path);

// FNV-1a 64 over the file bytes, hex-encoded.
std::string file_hash_hex(const std::string& path);

}  // namespace mbrd
