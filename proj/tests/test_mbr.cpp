#include <doctest.h>

#include <atomic>
#include <cmath>

#include "mbrd/errors.hpp"
#include "mbrd/mbr.hpp"
#include "mbrd/sampling.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mbrd;
using testsupport::make_model;

namespace {

// metric wrapper that counts score calls (cache behavior checks)
class CountingMetric : public UtilityMetric {
public:
    explicit CountingMetric(std::unique_ptr<UtilityMetric> base) : base_(std::move(base)) {}
    std::string id() const override { return base_->id(); }
    double score(const std::string& h, const std::string& r) const override {
        ++calls_;
        return base_->score(h, r);
    }
    std::vector<double> score_batch(
        const std::vector<std::pair<std::string, std::string>>& pairs) const override {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (const auto& [h, r] : pairs) {
            out.push_back(score(h, r));
        }
        return out;
    }
    int calls() const { return calls_; }

private:
    std::unique_ptr<UtilityMetric> base_;
    mutable std::atomic<int> calls_{0};
};

// hand-built pool over a tiny vocab; text of entry i is its token string
CandidatePool pool_of(const Vocabulary& vocab, const std::vector<std::string>& texts,
                      const std::vector<int>& counts, const std::vector<double>& logprobs) {
    CandidatePool pool;
    pool.source_key = "src";
    pool.n = 0;
    for (size_t i = 0; i < texts.size(); ++i) {
        PoolEntry entry;
        entry.seq = tokenize(vocab, texts[i]);
        entry.seq.ids.push_back(vocab.eos_id());
        entry.seq.terminated = true;
        entry.count = counts[i];
        entry.logprob = logprobs[i];
        pool.entries.push_back(std::move(entry));
        pool.n += counts[i];
    }
    for (size_t i = 0; i < texts.size(); ++i) {
        for (int c = 0; c < counts[i]; ++c) {
            pool.draw_order.push_back(static_cast<int>(i));
        }
    }
    return pool;
}

}  // namespace

TEST_SUITE_BEGIN("mbr");

TEST_CASE("utility matrix of a single entry is its self-utility") {
    Vocabulary vocab({"x", "</s>"});
    const CandidatePool pool = pool_of(vocab, {"x"}, {3}, {-0.5});
    const ChrfMetric metric;
    const UtilityMatrix matrix = compute_utility_matrix(pool, metric, Detokenizer{&vocab});
    REQUIRE(matrix.dim == 1);
    CHECK(matrix.at(0, 0) == doctest::Approx(1.0));  // chrF self-similarity
}

TEST_CASE("utility matrix cells equal standalone metric calls") {
    Vocabulary vocab({"aa", "ab", "bb", "</s>"});
    const CandidatePool pool = pool_of(vocab, {"aa", "ab", "bb"}, {1, 1, 1}, {-1, -2, -3});
    const ChrfMetric metric;
    const Detokenizer detok{&vocab};
    const UtilityMatrix matrix = compute_utility_matrix(pool, metric, detok);
    REQUIRE(matrix.dim == 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double standalone =
                metric.score(detok(pool.entries[i].seq), detok(pool.entries[j].seq));
            CHECK(matrix.at(i, j) == standalone);
        }
    }
}

TEST_CASE("exact-match matrix on two distinct entries is the identity") {
    Vocabulary vocab({"x", "y", "</s>"});
    const CandidatePool pool = pool_of(vocab, {"x", "y"}, {1, 1}, {-1, -1});
    const UtilityMatrix matrix =
        compute_utility_matrix(pool, ExactMatchMetric{}, Detokenizer{&vocab});
    CHECK(matrix.at(0, 0) == 1.0);
    CHECK(matrix.at(0, 1) == 0.0);
    CHECK(matrix.at(1, 0) == 0.0);
    CHECK(matrix.at(1, 1) == 1.0);
}

TEST_CASE("mbr_decode weights utilities by multiplicity") {
    Vocabulary vocab({"x", "y", "</s>"});
    const CandidatePool pool = pool_of(vocab, {"x", "y"}, {2, 1}, {-0.4, -1.1});
    const UtilityMatrix matrix =
        compute_utility_matrix(pool, ExactMatchMetric{}, Detokenizer{&vocab});
    const MbrResult result = mbr_decode(pool, matrix);
    CHECK(result.expected_utilities[0] == doctest::Approx(2.0 / 3.0));
    CHECK(result.expected_utilities[1] == doctest::Approx(1.0 / 3.0));
    CHECK(detokenize(vocab, result.chosen) == "x");
    CHECK(result.ranking == std::vector<int>{0, 1});
}

TEST_CASE("single distinct sequence chooses itself") {
    Vocabulary vocab({"x", "</s>"});
    const CandidatePool pool = pool_of(vocab, {"x"}, {5}, {-0.2});
    const UtilityMatrix matrix =
        compute_utility_matrix(pool, ChrfMetric{}, Detokenizer{&vocab});
    const MbrResult result = mbr_decode(pool, matrix);
    CHECK(detokenize(vocab, result.chosen) == "x");
    CHECK(result.expected_utilities[0] == doctest::Approx(1.0));
}

TEST_CASE("positive affine transforms of the matrix keep the ranking") {
    Rng rng(23);
    const auto model = testsupport::random_toy_model(rng, 4, 1);
    const CandidatePool pool = sample_pool(model, "src", ancestral_policy(1.0), Rng(5), 50, 8);
    const Detokenizer detok{&model.vocab()};
    UtilityMatrix matrix = compute_utility_matrix(pool, ChrfMetric{}, detok);
    const MbrResult base = mbr_decode(pool, matrix);

    UtilityMatrix scaled = matrix;
    for (double& v : scaled.values) {
        v = 3.5 * v + 0.25;
    }
    const MbrResult transformed = mbr_decode(pool, scaled);
    CHECK(transformed.ranking == base.ranking);
    CHECK(transformed.chosen == base.chosen);
}

TEST_CASE("expected utilities stay within the matrix value range") {
    Rng rng(24);
    const auto model = testsupport::random_toy_model(rng, 4, 1);
    const CandidatePool pool = sample_pool(model, "src", ancestral_policy(1.0), Rng(6), 64, 8);
    const UtilityMatrix matrix =
        compute_utility_matrix(pool, ChrfMetric{}, Detokenizer{&model.vocab()});
    const MbrResult result = mbr_decode(pool, matrix);
    const auto [lo, hi] = std::minmax_element(matrix.values.begin(), matrix.values.end());
    for (double u : result.expected_utilities) {
        CHECK(u >= *lo - 1e-12);
        CHECK(u <= *hi + 1e-12);
    }
}

TEST_CASE("ties break by higher logprob, then lower index") {
    Vocabulary vocab({"x", "y", "z", "</s>"});
    // exact-match EU = count/n; equal counts force the logprob tie-break
    const CandidatePool pool = pool_of(vocab, {"x", "y"}, {1, 1}, {-2.0, -1.0});
    const UtilityMatrix matrix =
        compute_utility_matrix(pool, ExactMatchMetric{}, Detokenizer{&vocab});
    const MbrResult result = mbr_decode(pool, matrix);
    CHECK(detokenize(vocab, result.chosen) == "y");  // higher logprob wins

    const CandidatePool even = pool_of(vocab, {"x", "y"}, {1, 1}, {-1.0, -1.0});
    const MbrResult by_index = mbr_decode(even, matrix);
    CHECK(detokenize(vocab, by_index.chosen) == "x");  // lower index wins
}

TEST_CASE("dimension mismatch is rejected") {
    Vocabulary vocab({"x", "</s>"});
    const CandidatePool pool = pool_of(vocab, {"x"}, {1}, {-0.1});
    UtilityMatrix wrong;
    wrong.dim = 2;
    wrong.values.assign(4, 0.0);
    CHECK_THROWS_AS(mbr_decode(pool, wrong), ValidationError);
}

TEST_CASE("weighted MBR equals the naive n x n computation") {
    Rng rng(25);
    for (int trial = 0; trial < 60; ++trial) {
        const auto model = testsupport::random_toy_model(rng, 4, 1);
        const int n = 2 + static_cast<int>(rng.next_below(19));
        const CandidatePool pool =
            sample_pool(model, "src", ancestral_policy(1.0), Rng(1000 + trial), n, 6);
        const Detokenizer detok{&model.vocab()};
        for (const UtilityMetric* metric :
             std::initializer_list<const UtilityMetric*>{new ChrfMetric{}, new ExactMatchMetric{}}) {
            const UtilityMatrix matrix = compute_utility_matrix(pool, *metric, detok);
            const MbrResult weighted = mbr_decode(pool, matrix);
            const TokenSequence naive =
                testsupport::naive_mbr_choice(pool, *metric, model.vocab());
            CHECK(weighted.chosen == naive);
            delete metric;
        }
    }
}

TEST_CASE("exact expected utility: two-sequence model") {
    // P(a)=0.6 -> EOS, P(b)=0.4 -> EOS
    const auto model = make_model({"a", "b", "</s>"}, 1,
                                  {{"src", {}, {0.6, 0.4, 0.0}},
                                   {"src", {"a"}, {0.0, 0.0, 1.0}},
                                   {"src", {"b"}, {0.0, 0.0, 1.0}}});
    TokenSequence h = tokenize(model.vocab(), "a");
    h.ids.push_back(model.vocab().eos_id());
    h.terminated = true;

    const ExactUtility utility = exact_expected_utility(model, "src", h, ExactMatchMetric{}, 4);
    CHECK(utility.value == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(utility.unterminated_mass == doctest::Approx(0.0));
}

TEST_CASE("constant metric integrates to the terminated mass") {
    class ConstantMetric : public UtilityMetric {
    public:
        std::string id() const override { return "const1"; }
        double score(const std::string&, const std::string&) const override { return 1.0; }
    };
    Rng rng(26);
    const auto model = testsupport::random_toy_model(rng, 4, 1);
    TokenSequence h;
    h.ids = {model.vocab().eos_id()};
    h.terminated = true;
    const ExactUtility utility = exact_expected_utility(model, "src", h, ConstantMetric{}, 6);
    CHECK(utility.value + utility.unterminated_mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("zero metric integrates to zero") {
    class ZeroMetric : public UtilityMetric {
    public:
        std::string id() const override { return "zero"; }
        double score(const std::string&, const std::string&) const override { return 0.0; }
    };
    Rng rng(27);
    const auto model = testsupport::random_toy_model(rng, 3, 0);
    TokenSequence h;
    h.ids = {model.vocab().eos_id()};
    h.terminated = true;
    CHECK(exact_expected_utility(model, "src", h, ZeroMetric{}, 5).value == 0.0);
}

TEST_CASE("enumeration guard rejects oversized spaces") {
    Rng rng(28);
    const auto model = testsupport::random_toy_model(rng, 4, 0);
    CHECK_THROWS_WITH_AS(enumerate_terminated(model, "src", 30),
                         doctest::Contains("enumeration budget"), ValidationError);
}

TEST_CASE("oracle picks the mode under exact match") {
    const auto model = make_model({"a", "b", "</s>"}, 1,
                                  {{"src", {}, {0.6, 0.4, 0.0}},
                                   {"src", {"a"}, {0.0, 0.0, 1.0}},
                                   {"src", {"b"}, {0.0, 0.0, 1.0}}});
    const OracleResult oracle = exact_mbr_oracle(model, "src", ExactMatchMetric{}, 4);
    CHECK(detokenize(model.vocab(), oracle.chosen) == "a");
    CHECK_FALSE(oracle.tie);
    CHECK(oracle.expected_utility == doctest::Approx(0.6));
}

TEST_CASE("oracle flags symmetric ties and returns the lower sequence") {
    const auto model = make_model({"a", "b", "</s>"}, 1,
                                  {{"src", {}, {0.5, 0.5, 0.0}},
                                   {"src", {"a"}, {0.0, 0.0, 1.0}},
                                   {"src", {"b"}, {0.0, 0.0, 1.0}}});
    const OracleResult oracle = exact_mbr_oracle(model, "src", ExactMatchMetric{}, 4);
    CHECK(oracle.tie);
    CHECK(detokenize(model.vocab(), oracle.chosen) == "a");  // lexicographically first
}

TEST_CASE("oracle matches a hand-computed chrF table") {
    // three sequences: "aa" (0.5), "ab" (0.3), "bb" (0.2), each then EOS
    const auto model = make_model({"aa", "ab", "bb", "</s>"}, 1,
                                  {{"src", {}, {0.5, 0.3, 0.2, 0.0}},
                                   {"src", {"aa"}, {0.0, 0.0, 0.0, 1.0}},
                                   {"src", {"ab"}, {0.0, 0.0, 0.0, 1.0}},
                                   {"src", {"bb"}, {0.0, 0.0, 0.0, 1.0}}});
    const ChrfMetric metric;
    // exact expected utility per hypothesis, from standalone metric calls
    const char* texts[] = {"aa", "ab", "bb"};
    const double probs[] = {0.5, 0.3, 0.2};
    double best = -1.0;
    int best_idx = -1;
    for (int h = 0; h < 3; ++h) {
        double eu = 0.0;
        for (int y = 0; y < 3; ++y) {
            eu += metric.score(texts[h], texts[y]) * probs[y];
        }
        if (eu > best) {
            best = eu;
            best_idx = h;
        }
    }
    const OracleResult oracle = exact_mbr_oracle(model, "src", metric, 4);
    CHECK(detokenize(model.vocab(), oracle.chosen) == texts[best_idx]);
    CHECK(oracle.expected_utility == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("monte-carlo MBR converges to the exact oracle") {
    // smoke-scale version of the convergence acceptance criterion
    const auto model = make_model({"a", "b", "</s>"}, 1,
                                  {{"src", {}, {0.55, 0.25, 0.2}},
                                   {"src", {"a"}, {0.1, 0.1, 0.8}},
                                   {"src", {"b"}, {0.2, 0.2, 0.6}}});
    const OracleResult oracle = exact_mbr_oracle(model, "src", ExactMatchMetric{}, 4);
    REQUIRE_FALSE(oracle.tie);

    int agree = 0;
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
        const CandidatePool pool =
            sample_pool(model, "src", ancestral_policy(1.0), Rng(seed), 2048, 4);
        const UtilityMatrix matrix =
            compute_utility_matrix(pool, ExactMatchMetric{}, Detokenizer{&model.vocab()});
        if (mbr_decode(pool, matrix).chosen == oracle.chosen) {
            ++agree;
        }
    }
    CHECK(agree >= seeds - 1);
}

TEST_CASE("matrix cache round-trips and skips recomputation") {
    Rng rng(29);
    const auto model = testsupport::random_toy_model(rng, 4, 1);
    const CandidatePool pool = sample_pool(model, "src", ancestral_policy(1.0), Rng(77), 40, 6);
    const Detokenizer detok{&model.vocab()};
    CountingMetric metric(std::make_unique<ChrfMetric>());

    const UtilityMatrix matrix = compute_utility_matrix(pool, metric, detok);
    const int cold_calls = metric.calls();
    CHECK(cold_calls == matrix.dim * matrix.dim);

    testsupport::TempDir tmp("matrix-cache");
    const uint64_t hash = pool_hash(pool);
    const std::string path = tmp.file(matrix_cache_filename(hash, metric.id()));
    save_matrix(path, hash, matrix);

    UtilityMatrix cached;
    REQUIRE(try_load_matrix(path, hash, metric.id(), &cached));
    CHECK(metric.calls() == cold_calls);  // warm load made no metric calls
    CHECK(cached.dim == matrix.dim);
    CHECK(cached.values == matrix.values);  // bitwise

    UtilityMatrix miss;
    CHECK_FALSE(try_load_matrix(path, hash ^ 1, metric.id(), &miss));
    CHECK_FALSE(try_load_matrix(path, hash, "other-metric", &miss));
    CHECK_FALSE(try_load_matrix(tmp.file("absent.umtx"), hash, metric.id(), &miss));
}

TEST_SUITE_END();
