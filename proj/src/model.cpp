#include "mbrd/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mbrd/errors.hpp"

namespace mbrd {

using nlohmann::json;

void validate_distribution(const NextTokenDistribution& dist, int vocab_size, double tol) {
    if (static_cast<int>(dist.probs.size()) != vocab_size) {
        throw ValidationError("distribution length " + std::to_string(dist.probs.size()) +
                              " does not match vocabulary size " + std::to_string(vocab_size));
    }
    double sum = 0.0;
    for (double p : dist.probs) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError("distribution entry out of [0,1]: " + std::to_string(p));
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol) {
        throw ValidationError("unnormalized distribution: sums to " + std::to_string(sum));
    }
}

void validate_sequence(const Vocabulary& vocab, const TokenSequence& seq) {
    for (size_t i = 0; i < seq.ids.size(); ++i) {
        int id = seq.ids[i];
        if (id < 0 || id >= vocab.size()) {
            throw ValidationError("sequence id out of range: " + std::to_string(id));
        }
        if (id == vocab.eos_id() && i + 1 != seq.ids.size()) {
            throw ValidationError("EOS appears before the final position");
        }
    }
    const bool ends_with_eos = !seq.ids.empty() && seq.ids.back() == vocab.eos_id();
    if (seq.terminated != ends_with_eos) {
        throw ValidationError("terminated flag does not match trailing EOS");
    }
}

std::string detokenize(const Vocabulary& vocab, const TokenSequence& seq,
                       const std::string& separator) {
    std::string out;
    bool first = true;
    for (int id : seq.ids) {
        if (id == vocab.eos_id()) {
            continue;
        }
        if (!first) {
            out += separator;
        }
        out += vocab.token(id);
        first = false;
    }
    return out;
}

TokenSequence tokenize(const Vocabulary& vocab, const std::string& text) {
    TokenSequence seq;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        seq.ids.push_back(vocab.id_of(tok));
    }
    seq.terminated = !seq.ids.empty() && seq.ids.back() == vocab.eos_id();
    return seq;
}

namespace {

std::string context_key(const std::string& source_key, const int* ctx, size_t len) {
    std::string key = source_key;
    key += '\x1f';
    for (size_t i = 0; i < len; ++i) {
        key += std::to_string(ctx[i]);
        key += ',';
    }
    return key;
}

}  // namespace

ToyAutoregressiveModel::ToyAutoregressiveModel(Vocabulary vocab, int order,
                                               std::map<std::string, std::string> sources,
                                               std::vector<ModelTableEntry> entries)
    : vocab_(std::move(vocab)),
      order_(order),
      sources_(std::move(sources)),
      entries_(std::move(entries)) {
    if (order_ < 0) {
        throw ValidationError("model order must be >= 0");
    }
    for (const auto& [key, text] : sources_) {
        if (key.empty()) {
            throw ValidationError("empty source key");
        }
        (void)text;
    }
    lookup_.reserve(entries_.size());
    for (size_t i = 0; i < entries_.size(); ++i) {
        const ModelTableEntry& e = entries_[i];
        if (!has_source(e.source_key)) {
            throw ValidationError("table entry references unknown source key '" + e.source_key + "'");
        }
        if (static_cast<int>(e.context.size()) > order_) {
            throw ValidationError("context longer than order in entry for source '" + e.source_key + "'");
        }
        for (int id : e.context) {
            if (id < 0 || id >= vocab_.size()) {
                throw ValidationError("context token id out of range: " + std::to_string(id));
            }
        }
        validate_distribution(e.dist, vocab_.size());
        std::string key = context_key(e.source_key, e.context.data(), e.context.size());
        if (!lookup_.emplace(std::move(key), i).second) {
            throw ValidationError("duplicate context entry for source '" + e.source_key + "'");
        }
    }
}

NextTokenDistribution ToyAutoregressiveModel::next_token_dist(const std::string& source_key,
                                                              const TokenSequence& prefix) const {
    if (!has_source(source_key)) {
        throw ValidationError("unknown source key '" + source_key + "'");
    }
    if (prefix.terminated) {
        throw ValidationError("cannot extend a terminated prefix");
    }
    const size_t ctx_len = std::min<size_t>(static_cast<size_t>(order_), prefix.ids.size());
    const int* ctx = prefix.ids.data() + (prefix.ids.size() - ctx_len);
    auto it = lookup_.find(context_key(source_key, ctx, ctx_len));
    if (it == lookup_.end()) {
        NextTokenDistribution uniform;
        uniform.probs.assign(static_cast<size_t>(vocab_.size()), 1.0 / vocab_.size());
        return uniform;
    }
    return entries_[it->second].dist;
}

double ToyAutoregressiveModel::sequence_logprob(const std::string& source_key,
                                                const TokenSequence& seq) const {
    if (!seq.terminated) {
        throw ValidationError("sequence_logprob requires a terminated sequence");
    }
    double logprob = 0.0;
    TokenSequence prefix;
    prefix.ids.reserve(seq.ids.size());
    for (int id : seq.ids) {
        const NextTokenDistribution dist = next_token_dist(source_key, prefix);
        const double p = dist.probs[static_cast<size_t>(id)];
        if (p <= 0.0) {
            return -std::numeric_limits<double>::infinity();
        }
        logprob += std::log(p);
        prefix.ids.push_back(id);
    }
    return logprob;
}

ToyAutoregressiveModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open model file: " + path);
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ValidationError("malformed model file " + path + ": " + e.what());
    }
    try {
        if (!doc.is_object()) {
            throw ValidationError("model file root must be an object");
        }
        Vocabulary vocab(doc.at("vocab").get<std::vector<std::string>>());
        const int order = doc.at("order").get<int>();
        std::map<std::string, std::string> sources;
        for (const auto& [key, value] : doc.at("sources").items()) {
            sources[key] = value.get<std::string>();
        }
        std::vector<ModelTableEntry> entries;
        for (const auto& row : doc.at("table")) {
            ModelTableEntry e;
            e.source_key = row.at("source").get<std::string>();
            for (const auto& tok : row.at("context")) {
                e.context.push_back(vocab.id_of(tok.get<std::string>()));
            }
            e.dist.probs = row.at("probs").get<std::vector<double>>();
            if (e.dist.probs.size() != static_cast<size_t>(vocab.size())) {
                throw ValidationError("probs length does not match vocabulary size");
            }
            double sum = 0.0;
            for (double p : e.dist.probs) {
                if (!(p >= 0.0)) {
                    throw ValidationError("negative probability in model table");
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-6) {
                throw ValidationError("unnormalized distribution (sums to " + std::to_string(sum) +
                                      ") for source '" + e.source_key + "'");
            }
            // renormalize only when the deviation is beyond rounding noise,
            // so save/load reaches a byte-stable fixed point
            if (std::abs(sum - 1.0) > 1e-12) {
                for (double& p : e.dist.probs) {
                    p /= sum;
                }
            }
            entries.push_back(std::move(e));
        }
        return ToyAutoregressiveModel(std::move(vocab), order, std::move(sources), std::move(entries));
    } catch (const json::exception& e) {
        throw ValidationError("malformed model file " + path + ": " + e.what());
    }
}

void save_model(const ToyAutoregressiveModel& model, const std::string& path) {
    json doc;
    doc["vocab"] = model.vocab().tokens();
    doc["order"] = model.order();
    doc["sources"] = json::object();
    for (const auto& [key, text] : model.sources()) {
        doc["sources"][key] = text;
    }
    // Sorted for a stable on-disk representation.
    std::vector<const ModelTableEntry*> sorted;
    sorted.reserve(model.entries().size());
    for (const auto& e : model.entries()) {
        sorted.push_back(&e);
    }
    std::sort(sorted.begin(), sorted.end(), [](const ModelTableEntry* a, const ModelTableEntry* b) {
        return std::tie(a->source_key, a->context) < std::tie(b->source_key, b->context);
    });
    doc["table"] = json::array();
    for (const ModelTableEntry* e : sorted) {
        json row;
        row["source"] = e->source_key;
        row["context"] = json::array();
        for (int id : e->context) {
            row["context"].push_back(model.vocab().token(id));
        }
        row["probs"] = e->dist.probs;
        doc["table"].push_back(std::move(row));
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write model file: " + path);
    }
    out << doc.dump(2) << '\n';
}

}  // namespace mbrd
