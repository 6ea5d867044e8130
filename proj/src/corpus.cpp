#include "mbrd/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "mbrd/errors.hpp"

namespace mbrd {

using nlohmann::json;

const CorpusRecord* Corpus::find(const std::string& key) const {
    for (const CorpusRecord& record : records) {
        if (record.key == key) {
            return &record;
        }
    }
    return nullptr;
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open corpus file: " + path);
    }
    Corpus corpus;
    std::unordered_set<std::string> keys;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            json record = json::parse(line);
            CorpusRecord out;
            out.key = record.at("key").get<std::string>();
            out.source = record.at("src").get<std::string>();
            if (record.contains("ref")) {
                out.reference = record.at("ref").get<std::string>();
            }
            if (out.source.empty()) {
                throw ValidationError("corpus record '" + out.key + "' has an empty source");
            }
            if (!keys.insert(out.key).second) {
                throw ValidationError("duplicate corpus key '" + out.key + "'");
            }
            corpus.records.push_back(std::move(out));
        } catch (const json::exception& e) {
            throw ValidationError("malformed corpus line " + std::to_string(line_no) + " in " +
                                  path + ": " + e.what());
        }
    }
    return corpus;
}

}  // namespace mbrd
