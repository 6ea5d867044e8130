#include "mbrd/manifest.hpp"

#include <ctime>
#include <fstream>

#include <json.hpp>

#include "mbrd/errors.hpp"

namespace mbrd {

using nlohmann::json;

void write_manifest(const RunManifest& manifest, const std::string& path) {
    json doc;
    doc["tool_version"] = manifest.tool_version;
    doc["command"] = manifest.command;
    doc["seed"] = manifest.seed;
    if (!manifest.model_path.empty()) {
        doc["model_path"] = manifest.model_path;
        doc["model_hash"] = manifest.model_hash;
    }
    if (manifest.policy) {
        doc["policy"] = *manifest.policy;
    }
    if (manifest.n) {
        doc["n"] = *manifest.n;
    }
    if (manifest.max_len) {
        doc["max_len"] = *manifest.max_len;
    }
    if (!manifest.metric_ids.empty()) {
        doc["metric_ids"] = manifest.metric_ids;
    }
    doc["created_at"] = manifest.created_at;
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write manifest: " + path);
    }
    out << doc.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest: " + path);
    }
    try {
        json doc;
        in >> doc;
        RunManifest manifest;
        manifest.tool_version = doc.at("tool_version").get<std::string>();
        manifest.command = doc.at("command").get<std::vector<std::string>>();
        manifest.seed = doc.at("seed").get<uint64_t>();
        if (doc.contains("model_path")) {
            manifest.model_path = doc.at("model_path").get<std::string>();
            manifest.model_hash = doc.at("model_hash").get<std::string>();
        }
        if (doc.contains("policy")) {
            manifest.policy = doc.at("policy").get<SamplingPolicy>();
        }
        if (doc.contains("n")) {
            manifest.n = doc.at("n").get<int>();
        }
        if (doc.contains("max_len")) {
            manifest.max_len = doc.at("max_len").get<int>();
        }
        if (doc.contains("metric_ids")) {
            manifest.metric_ids = doc.at("metric_ids").get<std::vector<std::string>>();
        }
        manifest.created_at = doc.value("created_at", "");
        return manifest;
    } catch (const json::exception& e) {
        throw ValidationError("malformed manifest " + path + ": " + e.what());
    }
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file for hashing: " + path);
    }
    uint64_t h = 0xCBF29CE484222325ull;
    char buf[8192];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ull;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) {
            break;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

}  // namespace mbrd
