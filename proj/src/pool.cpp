#include "mbrd/pool.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "mbrd/errors.hpp"

namespace mbrd {

using nlohmann::json;

namespace {

json logprob_to_json(double logprob) {
    if (std::isinf(logprob) && logprob < 0) {
        return json("-inf");
    }
    return json(logprob);
}

double logprob_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
        throw ValidationError("bad logprob value '" + j.get<std::string>() + "'");
    }
    return j.get<double>();
}

}  // namespace

void validate_pool(const CandidatePool& pool, const Vocabulary& vocab) {
    if (pool.entries.empty()) {
        throw ValidationError("pool has no entries");
    }
    std::set<std::vector<int>> distinct;
    long long total = 0;
    for (const PoolEntry& entry : pool.entries) {
        validate_sequence(vocab, entry.seq);
        if (entry.count < 1) {
            throw ValidationError("pool entry with non-positive count");
        }
        if (!distinct.insert(entry.seq.ids).second) {
            throw ValidationError("duplicate sequence in pool entries");
        }
        total += entry.count;
    }
    if (total != pool.n) {
        throw ValidationError("pool counts sum to " + std::to_string(total) +
                              " but n = " + std::to_string(pool.n));
    }
    if (!pool.draw_order.empty()) {
        if (static_cast<int>(pool.draw_order.size()) != pool.n) {
            throw ValidationError("draw_order length does not match n");
        }
        std::vector<int> counts(pool.entries.size(), 0);
        for (int idx : pool.draw_order) {
            if (idx < 0 || idx >= static_cast<int>(pool.entries.size())) {
                throw ValidationError("draw_order references a missing entry");
            }
            counts[static_cast<size_t>(idx)] += 1;
        }
        for (size_t i = 0; i < counts.size(); ++i) {
            if (counts[i] != pool.entries[i].count) {
                throw ValidationError("draw_order multiplicities disagree with entry counts");
            }
        }
    }
}

uint64_t pool_hash(const CandidatePool& pool) {
    uint64_t h = 0xCBF29CE484222325ull;
    auto feed = [&h](const void* data, size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 0x100000001B3ull;
        }
    };
    feed(&pool.n, sizeof(pool.n));
    for (const PoolEntry& entry : pool.entries) {
        for (int id : entry.seq.ids) {
            feed(&id, sizeof(id));
        }
        const unsigned char sep = entry.seq.terminated ? 0xFE : 0xFD;
        feed(&sep, 1);
        feed(&entry.count, sizeof(entry.count));
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(entry.logprob));
        std::memcpy(&bits, &entry.logprob, sizeof(bits));
        feed(&bits, sizeof(bits));
    }
    return h;
}

void save_pool(const CandidatePool& pool, const Vocabulary& vocab, const std::string& path) {
    validate_pool(pool, vocab);
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write pool file: " + path);
    }
    json header;
    header["source_key"] = pool.source_key;
    header["policy"] = pool.policy;
    header["seed"] = pool.seed;
    header["n"] = pool.n;
    header["max_len"] = pool.max_len;
    if (!pool.draw_order.empty()) {
        header["draws"] = pool.draw_order;
    }
    out << header.dump() << '\n';
    for (const PoolEntry& entry : pool.entries) {
        json record;
        record["tokens"] = json::array();
        for (int id : entry.seq.ids) {
            record["tokens"].push_back(vocab.token(id));
        }
        record["count"] = entry.count;
        record["logprob"] = logprob_to_json(entry.logprob);
        record["terminated"] = entry.seq.terminated;
        out << record.dump() << '\n';
    }
}

CandidatePool load_pool(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open pool file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("pool file is empty: " + path);
    }
    CandidatePool pool;
    try {
        json header = json::parse(line);
        pool.source_key = header.at("source_key").get<std::string>();
        pool.policy = header.at("policy").get<SamplingPolicy>();
        pool.seed = header.at("seed").get<uint64_t>();
        pool.n = header.at("n").get<int>();
        if (header.contains("max_len")) {
            pool.max_len = header.at("max_len").get<int>();
        }
        if (header.contains("draws")) {
            pool.draw_order = header.at("draws").get<std::vector<int>>();
        }
        while (std::getline(in, line)) {
            if (line.empty()) {
                continue;
            }
            json record = json::parse(line);
            PoolEntry entry;
            for (const auto& tok : record.at("tokens")) {
                entry.seq.ids.push_back(vocab.id_of(tok.get<std::string>()));
            }
            entry.seq.terminated = record.at("terminated").get<bool>();
            entry.count = record.at("count").get<int>();
            entry.logprob = logprob_from_json(record.at("logprob"));
            pool.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw ValidationError("malformed pool file " + path + ": " + e.what());
    }
    validate_pool(pool, vocab);
    return pool;
}

}  // namespace mbrd
