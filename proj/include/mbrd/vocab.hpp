#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace mbrd {

inline constexpr const char* kEosToken = "</s>";

// Ordered token set with dense 0-based ids and a single reserved
// end-of-sequence token.
class Vocabulary {
public:
    // Throws ValidationError on duplicates, empty tokens, or missing "</s>".
    explicit Vocabulary(std::vector<std::string> tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    int eos_id() const { return eos_id_; }

    const std::string& token(int id) const;
    bool contains(const std::string& token) const;
    // Throws ValidationError for unknown tokens.
    int id_of(const std::string& token) const;

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    int eos_id_ = -1;
};

}  // namespace mbrd
