#pragma once

// Shared builders for tiny models, random distributions and scratch
// directories.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "mbrd/model.hpp"
#include "mbrd/rng.hpp"

namespace testsupport {

using ModelRow = std::tuple<std::string, std::vector<std::string>, std::vector<double>>;

// Rows are (source key, context token strings, probs in vocab order).
inline mbrd::ToyAutoregressiveModel make_model(
    std::vector<std::string> vocab_tokens, int order, const std::vector<ModelRow>& rows,
    std::map<std::string, std::string> sources = {{"src", "source text"}}) {
    mbrd::Vocabulary vocab(vocab_tokens);
    std::vector<mbrd::ModelTableEntry> entries;
    for (const auto& [source, context, probs] : rows) {
        mbrd::ModelTableEntry entry;
        entry.source_key = source;
        for (const std::string& tok : context) {
            entry.context.push_back(vocab.id_of(tok));
        }
        entry.dist.probs = probs;
        entries.push_back(std::move(entry));
    }
    return mbrd::ToyAutoregressiveModel(std::move(vocab), order, std::move(sources),
                                        std::move(entries));
}

// Random distribution over `size` tokens; zero_fraction of the entries are
// zeroed (at least one stays positive).
inline std::vector<double> random_distribution(mbrd::Rng& rng, int size,
                                               double zero_fraction = 0.0) {
    std::vector<double> probs(static_cast<size_t>(size));
    double sum = 0.0;
    for (double& p : probs) {
        p = rng.next_double();
        if (zero_fraction > 0.0 && rng.next_double() < zero_fraction) {
            p = 0.0;
        }
        sum += p;
    }
    if (sum == 0.0) {
        probs[rng.next_below(static_cast<uint64_t>(size))] = 1.0;
        sum = 1.0;
    }
    for (double& p : probs) {
        p /= sum;
    }
    return probs;
}

// Complete random model: vocabulary {t0..t(v-2), </s>}, one source "src",
// table rows for every context up to `order` over non-EOS tokens. The EOS
// entry gets eos_weight times a uniform draw so sequences terminate.
inline mbrd::ToyAutoregressiveModel random_toy_model(mbrd::Rng& rng, int vocab_size, int order,
                                                     double eos_weight = 2.0) {
    std::vector<std::string> tokens;
    for (int i = 0; i + 1 < vocab_size; ++i) {
        tokens.push_back("t" + std::to_string(i));
    }
    tokens.push_back(mbrd::kEosToken);

    std::vector<ModelRow> rows;
    std::vector<std::vector<std::string>> contexts{{}};
    for (int len = 0; len < order; ++len) {
        std::vector<std::vector<std::string>> extended;
        for (const auto& ctx : contexts) {
            if (static_cast<int>(ctx.size()) != len) continue;
            for (int t = 0; t + 1 < vocab_size; ++t) {
                auto next = ctx;
                next.push_back("t" + std::to_string(t));
                extended.push_back(std::move(next));
            }
        }
        for (auto& ctx : extended) {
            contexts.push_back(std::move(ctx));
        }
    }
    for (const auto& ctx : contexts) {
        std::vector<double> probs(static_cast<size_t>(vocab_size));
        double sum = 0.0;
        for (int i = 0; i < vocab_size; ++i) {
            double w = rng.next_double() + 1e-3;
            if (i == vocab_size - 1) {
                w *= eos_weight;
            }
            probs[static_cast<size_t>(i)] = w;
            sum += w;
        }
        for (double& p : probs) {
            p /= sum;
        }
        rows.emplace_back("src", ctx, std::move(probs));
    }
    return make_model(std::move(tokens), order, rows);
}

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("mbrd-test-" + tag + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace testsupport
