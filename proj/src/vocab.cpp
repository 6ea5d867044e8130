#include "mbrd/vocab.hpp"

#include "mbrd/errors.hpp"

namespace mbrd {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty()) {
        throw ValidationError("vocabulary is empty");
    }
    index_.reserve(tokens_.size());
    for (int id = 0; id < static_cast<int>(tokens_.size()); ++id) {
        const std::string& tok = tokens_[id];
        if (tok.empty()) {
            throw ValidationError("vocabulary contains an empty token at id " + std::to_string(id));
        }
        if (!index_.emplace(tok, id).second) {
            throw ValidationError("duplicate vocabulary token: '" + tok + "'");
        }
        if (tok == kEosToken) {
            eos_id_ = id;
        }
    }
    if (eos_id_ < 0) {
        throw ValidationError(std::string("vocabulary is missing the end-of-sequence token ") + kEosToken);
    }
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) {
        throw ValidationError("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
    return index_.count(token) > 0;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) {
        throw ValidationError("unknown token: '" + token + "'");
    }
    return it->second;
}

}  // namespace mbrd
