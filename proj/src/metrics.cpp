#include "mbrd/metrics.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "mbrd/errors.hpp"
#include "mbrd/external_scorer.hpp"
#include "mbrd/parallel.hpp"

namespace mbrd {

std::vector<double> UtilityMetric::score_batch(
    const std::vector<std::pair<std::string, std::string>>& pairs) const {
    std::vector<double> scores(pairs.size());
    parallel_for(pairs.size(), [&](size_t i) {
        scores[i] = score(pairs[i].first, pairs[i].second);
    });
    return scores;
}

namespace {

std::string strip_spaces(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            out += c;
        }
    }
    return out;
}

// counts of length-n substrings (byte n-grams)
std::unordered_map<std::string, int> char_ngrams(const std::string& text, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(text.size()) >= n) {
        for (size_t i = 0; i + static_cast<size_t>(n) <= text.size(); ++i) {
            counts[text.substr(i, static_cast<size_t>(n))] += 1;
        }
    }
    return counts;
}

int clipped_matches(const std::unordered_map<std::string, int>& hyp,
                    const std::unordered_map<std::string, int>& ref) {
    int matches = 0;
    for (const auto& [gram, count] : hyp) {
        auto it = ref.find(gram);
        if (it != ref.end()) {
            matches += std::min(count, it->second);
        }
    }
    return matches;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        tokens.push_back(tok);
    }
    return tokens;
}

std::unordered_map<std::string, int> word_ngrams(const std::vector<std::string>& tokens, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) >= n) {
        for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
            std::string gram = tokens[i];
            for (size_t j = 1; j < static_cast<size_t>(n); ++j) {
                gram += ' ';
                gram += tokens[i + j];
            }
            counts[std::move(gram)] += 1;
        }
    }
    return counts;
}

}  // namespace

double chrf(const std::string& hyp, const std::string& ref, int max_order, double beta,
            bool strip_whitespace) {
    if (max_order < 1) {
        throw ValidationError("chrf max_order must be >= 1");
    }
    const std::string h = strip_whitespace ? strip_spaces(hyp) : hyp;
    const std::string r = strip_whitespace ? strip_spaces(ref) : ref;

    double precision_sum = 0.0;
    double recall_sum = 0.0;
    int counted_orders = 0;
    for (int n = 1; n <= max_order; ++n) {
        const int hyp_total = std::max(0, static_cast<int>(h.size()) - n + 1);
        const int ref_total = std::max(0, static_cast<int>(r.size()) - n + 1);
        if (hyp_total == 0 && ref_total == 0) {
            continue;
        }
        const auto hyp_counts = char_ngrams(h, n);
        const auto ref_counts = char_ngrams(r, n);
        const int matches = clipped_matches(hyp_counts, ref_counts);
        precision_sum += hyp_total > 0 ? static_cast<double>(matches) / hyp_total : 0.0;
        recall_sum += ref_total > 0 ? static_cast<double>(matches) / ref_total : 0.0;
        counted_orders += 1;
    }
    if (counted_orders == 0) {
        return h == r ? 1.0 : 0.0;
    }
    const double precision = precision_sum / counted_orders;
    const double recall = recall_sum / counted_orders;
    const double beta2 = beta * beta;
    const double denom = beta2 * precision + recall;
    if (denom == 0.0) {
        return 0.0;
    }
    return (1.0 + beta2) * precision * recall / denom;
}

double sentence_bleu(const std::string& hyp, const std::string& ref, int max_order) {
    if (max_order < 1) {
        throw ValidationError("bleu max_order must be >= 1");
    }
    const std::vector<std::string> hyp_tokens = whitespace_tokens(hyp);
    const std::vector<std::string> ref_tokens = whitespace_tokens(ref);
    if (hyp_tokens.empty()) {
        return ref_tokens.empty() ? 1.0 : 0.0;
    }

    double log_precision = 0.0;
    for (int n = 1; n <= max_order; ++n) {
        const int hyp_total = std::max(0, static_cast<int>(hyp_tokens.size()) - n + 1);
        const auto hyp_counts = word_ngrams(hyp_tokens, n);
        const auto ref_counts = word_ngrams(ref_tokens, n);
        const int matches = clipped_matches(hyp_counts, ref_counts);
        if (n == 1) {
            if (matches == 0) {
                return 0.0;  // unsmoothed order 1
            }
            log_precision += std::log(static_cast<double>(matches) / hyp_total);
        } else {
            log_precision += std::log(static_cast<double>(matches + 1) / (hyp_total + 1));
        }
    }

    double brevity = 1.0;
    if (hyp_tokens.size() < ref_tokens.size()) {
        brevity = std::exp(1.0 - static_cast<double>(ref_tokens.size()) / hyp_tokens.size());
    }
    return brevity * std::exp(log_precision / max_order);
}

double exact_match(const std::string& hyp, const std::string& ref) {
    return hyp == ref ? 1.0 : 0.0;
}

std::string ChrfMetric::id() const {
    std::string out = "chrf";
    if (max_order_ != 6 || beta_ != 2.0 || !strip_whitespace_) {
        out += "-o" + std::to_string(max_order_);
        std::ostringstream b;
        b << beta_;
        out += "-b" + b.str();
        if (!strip_whitespace_) {
            out += "-ws";
        }
    }
    return out;
}

std::string BleuMetric::id() const {
    if (max_order_ == 4) {
        return "bleu";
    }
    return "bleu-o" + std::to_string(max_order_);
}

std::unique_ptr<UtilityMetric> make_metric(const std::string& spec) {
    if (spec == "chrf") {
        return std::make_unique<ChrfMetric>();
    }
    if (spec == "bleu") {
        return std::make_unique<BleuMetric>();
    }
    if (spec == "exact") {
        return std::make_unique<ExactMatchMetric>();
    }
    if (spec.rfind("external:", 0) == 0) {
        return std::make_unique<ExternalScorer>(load_scorer_config(spec.substr(9)));
    }
    throw ValidationError("unknown metric '" + spec +
                          "' (expected chrf, bleu, exact or external:<config>)");
}

}  // namespace mbrd
