#include <doctest.h>

#include <cmath>

#include "mbrd/errors.hpp"
#include "mbrd/model.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mbrd;
using testsupport::make_model;
using testsupport::TempDir;

TEST_SUITE_BEGIN("model");

TEST_CASE("vocabulary invariants") {
    Vocabulary vocab({"a", "b", "</s>"});
    CHECK(vocab.size() == 3);
    CHECK(vocab.eos_id() == 2);
    CHECK(vocab.id_of("a") == 0);
    CHECK(vocab.token(1) == "b");

    CHECK_THROWS_AS(Vocabulary({"a", "a", "</s>"}), ValidationError);
    CHECK_THROWS_AS(Vocabulary({"a", "", "</s>"}), ValidationError);
    CHECK_THROWS_AS(Vocabulary({"a", "b"}), ValidationError);  // no EOS
    CHECK_THROWS_AS(vocab.id_of("nope"), ValidationError);
}

TEST_CASE("sequence validation") {
    Vocabulary vocab({"a", "b", "</s>"});
    TokenSequence ok{{0, 1, 2}, true};
    CHECK_NOTHROW(validate_sequence(vocab, ok));

    TokenSequence mid_eos{{0, 2, 1}, false};
    CHECK_THROWS_AS(validate_sequence(vocab, mid_eos), ValidationError);

    TokenSequence wrong_flag{{0, 1}, true};
    CHECK_THROWS_AS(validate_sequence(vocab, wrong_flag), ValidationError);

    TokenSequence bad_id{{0, 9}, false};
    CHECK_THROWS_AS(validate_sequence(vocab, bad_id), ValidationError);
}

TEST_CASE("detokenize drops EOS, tokenize round-trips") {
    Vocabulary vocab({"the", "dog", "</s>"});
    TokenSequence seq{{0, 1, 2}, true};
    CHECK(detokenize(vocab, seq) == "the dog");
    CHECK(detokenize(vocab, TokenSequence{{2}, true}) == "");

    TokenSequence parsed = tokenize(vocab, "the dog");
    CHECK(parsed.ids == std::vector<int>{0, 1});
    CHECK_FALSE(parsed.terminated);
    CHECK_THROWS_AS(tokenize(vocab, "the cat"), ValidationError);
}

TEST_CASE("minimal model file loads") {
    TempDir tmp("model-load");
    testsupport::write_file(tmp.file("m.json"), R"({
      "vocab": ["a", "b", "</s>"],
      "order": 0,
      "sources": {"s1": "src text"},
      "table": [{"source": "s1", "context": [], "probs": [0.6, 0.3, 0.1]}]
    })");
    const ToyAutoregressiveModel model = load_model(tmp.file("m.json"));
    CHECK(model.order() == 0);
    CHECK(model.has_source("s1"));
    const NextTokenDistribution dist = model.next_token_dist("s1", TokenSequence{});
    CHECK(dist.probs[0] == doctest::Approx(0.6));
    CHECK(dist.probs[2] == doctest::Approx(0.1));
}

TEST_CASE("load rejects unnormalized distributions") {
    TempDir tmp("model-bad-sum");
    testsupport::write_file(tmp.file("m.json"), R"({
      "vocab": ["a", "b", "</s>"],
      "order": 0,
      "sources": {"s1": "x"},
      "table": [{"source": "s1", "context": [], "probs": [0.3, 0.1, 0.1]}]
    })");
    CHECK_THROWS_WITH_AS(load_model(tmp.file("m.json")),
                         doctest::Contains("unnormalized distribution"), ValidationError);
}

TEST_CASE("load rejects context longer than order") {
    TempDir tmp("model-bad-ctx");
    testsupport::write_file(tmp.file("m.json"), R"({
      "vocab": ["a", "b", "</s>"],
      "order": 1,
      "sources": {"s1": "x"},
      "table": [{"source": "s1", "context": ["a", "b"], "probs": [0.5, 0.3, 0.2]}]
    })");
    CHECK_THROWS_WITH_AS(load_model(tmp.file("m.json")),
                         doctest::Contains("context longer than order"), ValidationError);
}

TEST_CASE("load rejects unknown tokens and duplicate contexts") {
    TempDir tmp("model-bad-misc");
    testsupport::write_file(tmp.file("unk.json"), R"({
      "vocab": ["a", "</s>"],
      "order": 1,
      "sources": {"s1": "x"},
      "table": [{"source": "s1", "context": ["zzz"], "probs": [0.5, 0.5]}]
    })");
    CHECK_THROWS_AS(load_model(tmp.file("unk.json")), ValidationError);

    testsupport::write_file(tmp.file("dup.json"), R"({
      "vocab": ["a", "</s>"],
      "order": 0,
      "sources": {"s1": "x"},
      "table": [
        {"source": "s1", "context": [], "probs": [0.5, 0.5]},
        {"source": "s1", "context": [], "probs": [0.4, 0.6]}
      ]
    })");
    CHECK_THROWS_WITH_AS(load_model(tmp.file("dup.json")),
                         doctest::Contains("duplicate context"), ValidationError);

    CHECK_THROWS_AS(load_model(tmp.file("missing.json")), IoError);
    testsupport::write_file(tmp.file("garbage.json"), "not json at all {{{");
    CHECK_THROWS_AS(load_model(tmp.file("garbage.json")), ValidationError);
}

TEST_CASE("near-1 sums are renormalized on load") {
    TempDir tmp("model-renorm");
    testsupport::write_file(tmp.file("m.json"), R"({
      "vocab": ["a", "</s>"],
      "order": 0,
      "sources": {"s1": "x"},
      "table": [{"source": "s1", "context": [], "probs": [0.5000003, 0.5000004]}]
    })");
    const ToyAutoregressiveModel model = load_model(tmp.file("m.json"));
    const NextTokenDistribution dist = model.next_token_dist("s1", TokenSequence{});
    double sum = 0.0;
    for (double p : dist.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("next_token_dist falls back to uniform and uses the last order tokens") {
    const auto model = make_model({"a", "b", "</s>"}, 1,
                                  {{"src", {}, {0.6, 0.3, 0.1}},
                                   {"src", {"a"}, {0.1, 0.2, 0.7}}});

    const NextTokenDistribution at_start = model.next_token_dist("src", TokenSequence{});
    CHECK(at_start.probs[0] == doctest::Approx(0.6));

    // prefix [b, a]: order-1 lookup uses only the trailing "a"
    const NextTokenDistribution after_a = model.next_token_dist("src", TokenSequence{{1, 0}, false});
    CHECK(after_a.probs[2] == doctest::Approx(0.7));

    // prefix [b] has no table entry: documented uniform fallback
    const NextTokenDistribution missing = model.next_token_dist("src", TokenSequence{{1}, false});
    for (double p : missing.probs) {
        CHECK(p == doctest::Approx(1.0 / 3.0));
    }

    CHECK_THROWS_AS(model.next_token_dist("nope", TokenSequence{}), ValidationError);
    CHECK_THROWS_AS(model.next_token_dist("src", TokenSequence{{2}, true}), ValidationError);
}

TEST_CASE("sequence_logprob sums step logs") {
    // P(a)=0.5 at step 1, then after a: P(</s>)=0.5
    const auto model = make_model({"a", "</s>"}, 1,
                                  {{"src", {}, {0.5, 0.5}},
                                   {"src", {"a"}, {0.5, 0.5}}});
    const double lp = model.sequence_logprob("src", TokenSequence{{0, 1}, true});
    CHECK(lp == doctest::Approx(std::log(0.25)).epsilon(1e-12));  // ln 0.25 = -1.386294

    CHECK_THROWS_AS(model.sequence_logprob("src", TokenSequence{{0}, false}), ValidationError);
}

TEST_CASE("sequence_logprob of certain EOS is zero, zero-prob step is -inf") {
    const auto certain = make_model({"a", "</s>"}, 0, {{"src", {}, {0.0, 1.0}}});
    CHECK(certain.sequence_logprob("src", TokenSequence{{1}, true}) == 0.0);
    CHECK(std::isinf(certain.sequence_logprob("src", TokenSequence{{0, 1}, true})));
    CHECK(certain.sequence_logprob("src", TokenSequence{{0, 1}, true}) < 0);
}

TEST_CASE("save/load round-trips the logical model") {
    TempDir tmp("model-roundtrip");
    const auto model = make_model({"a", "b", "</s>"}, 1,
                                  {{"src", {}, {0.6, 0.3, 0.1}},
                                   {"src", {"b"}, {0.25, 0.25, 0.5}}});
    save_model(model, tmp.file("m.json"));
    const ToyAutoregressiveModel reloaded = load_model(tmp.file("m.json"));
    CHECK(reloaded.order() == model.order());
    CHECK(reloaded.vocab().tokens() == model.vocab().tokens());
    CHECK(reloaded.sources() == model.sources());
    for (const TokenSequence prefix : {TokenSequence{}, TokenSequence{{1}, false}}) {
        const auto a = model.next_token_dist("src", prefix);
        const auto b = reloaded.next_token_dist("src", prefix);
        REQUIRE(a.probs.size() == b.probs.size());
        for (size_t i = 0; i < a.probs.size(); ++i) {
            CHECK(a.probs[i] == doctest::Approx(b.probs[i]).epsilon(1e-15));
        }
    }

    // save/load is a byte-stable fixed point
    save_model(reloaded, tmp.file("m2.json"));
    CHECK(testsupport::read_file(tmp.file("m.json")) == testsupport::read_file(tmp.file("m2.json")));
}

TEST_CASE("terminated mass within a length cap never exceeds 1") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto model = testsupport::random_toy_model(rng, 4, 1);
        double mass = 0.0;
        for (const auto& seq : testsupport::all_terminated(model, "src", 5)) {
            mass += std::exp(seq.logprob);
        }
        CHECK(mass <= 1.0 + 1e-6);
        CHECK(mass > 0.0);
        // every reachable distribution satisfies the invariants
        const NextTokenDistribution dist = model.next_token_dist("src", TokenSequence{});
        CHECK_NOTHROW(validate_distribution(dist, model.vocab().size()));
    }
}

TEST_SUITE_END();
