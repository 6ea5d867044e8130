#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mbrd {

struct CorpusRecord {
    std::string key;
    std::string source;
    std::optional<std::string> reference;
};

// Test-set records: unique keys, non-empty sources, optional references.
struct Corpus {
    std::vector<CorpusRecord> records;

    const CorpusRecord* find(const std::string& key) const;
};

// JSON lines: {"key": ..., "src": ..., "ref": ...} with ref optional.
Corpus load_corpus(const std::string& path);

}  // namespace mbrd
