#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mbrd {

// A utility metric scores a hypothesis string against a reference string.
// Metrics are deterministic; directionality is not assumed away (u(h,r)
// and u(r,h) may differ).
class UtilityMetric {
public:
    virtual ~UtilityMetric() = default;

    virtual std::string id() const = 0;
    virtual std::pair<double, double> range() const { return {0.0, 1.0}; }
    virtual double score(const std::string& hyp, const std::string& ref) const = 0;

    // Scores pairs[i] into result[i]. The default runs independent cells in
    // parallel; stateful scorers override with their own channel handling.
    virtual std::vector<double> score_batch(
        const std::vector<std::pair<std::string, std::string>>& pairs) const;
};

// Character n-gram F-beta score in [0, 1]. Per order: clipped-match
// precision and recall over character n-grams; precisions and recalls are
// averaged across orders, then combined as (1+b^2)PR / (b^2 P + R).
// Whitespace is stripped before n-gram extraction (strip_whitespace=false
// keeps it). Orders where neither side has n-grams are skipped; if no
// order counts at all, identical residue scores 1 and anything else 0.
double chrf(const std::string& hyp, const std::string& ref, int max_order = 6, double beta = 2.0,
            bool strip_whitespace = true);

// Sentence BLEU in [0, 1] over whitespace tokens: brevity penalty times
// the geometric mean of clipped n-gram precisions, add-one smoothed on
// orders >= 2. Zero unigram overlap scores 0.
double sentence_bleu(const std::string& hyp, const std::string& ref, int max_order = 4);

// 1 iff byte-identical.
double exact_match(const std::string& hyp, const std::string& ref);

class ChrfMetric : public UtilityMetric {
public:
    explicit ChrfMetric(int max_order = 6, double beta = 2.0, bool strip_whitespace = true)
        : max_order_(max_order), beta_(beta), strip_whitespace_(strip_whitespace) {}
    std::string id() const override;
    double score(const std::string& hyp, const std::string& ref) const override {
        return chrf(hyp, ref, max_order_, beta_, strip_whitespace_);
    }

private:
    int max_order_;
    double beta_;
    bool strip_whitespace_;
};

class BleuMetric : public UtilityMetric {
public:
    explicit BleuMetric(int max_order = 4) : max_order_(max_order) {}
    std::string id() const override;
    double score(const std::string& hyp, const std::string& ref) const override {
        return sentence_bleu(hyp, ref, max_order_);
    }

private:
    int max_order_;
};

class ExactMatchMetric : public UtilityMetric {
public:
    std::string id() const override { return "exact"; }
    double score(const std::string& hyp, const std::string& ref) const override {
        return exact_match(hyp, ref);
    }
};

// Metric spec strings: "chrf", "bleu", "exact", "external:<config path>".
std::unique_ptr<UtilityMetric> make_metric(const std::string& spec);

}  // namespace mbrd
