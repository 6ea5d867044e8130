#include "mbrd/mbr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "mbrd/errors.hpp"

namespace mbrd {

UtilityMatrix compute_utility_matrix(const CandidatePool& pool, const UtilityMetric& metric,
                                     const Detokenizer& detok) {
    if (pool.entries.empty()) {
        throw ValidationError("cannot compute a utility matrix for an empty pool");
    }
    const int dim = static_cast<int>(pool.entries.size());
    std::vector<std::string> texts;
    texts.reserve(pool.entries.size());
    for (const PoolEntry& entry : pool.entries) {
        texts.push_back(detok(entry.seq));
    }

    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(static_cast<size_t>(dim) * dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            pairs.emplace_back(texts[static_cast<size_t>(i)], texts[static_cast<size_t>(j)]);
        }
    }
    UtilityMatrix matrix;
    matrix.dim = dim;
    matrix.metric_id = metric.id();
    matrix.values = metric.score_batch(pairs);
    return matrix;
}

MbrResult mbr_decode(const CandidatePool& pool, const UtilityMatrix& matrix) {
    const int dim = static_cast<int>(pool.entries.size());
    if (matrix.dim != dim) {
        throw ValidationError("utility matrix dimension " + std::to_string(matrix.dim) +
                              " does not match pool distinct count " + std::to_string(dim));
    }
    long long total = 0;
    for (const PoolEntry& entry : pool.entries) {
        total += entry.count;
    }
    if (total != pool.n) {
        throw ValidationError("pool counts do not sum to n");
    }

    MbrResult result;
    result.expected_utilities.resize(static_cast<size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        double sum = 0.0;
        for (int j = 0; j < dim; ++j) {
            sum += static_cast<double>(pool.entries[static_cast<size_t>(j)].count) * matrix.at(i, j);
        }
        result.expected_utilities[static_cast<size_t>(i)] = sum / static_cast<double>(pool.n);
    }

    result.ranking.resize(static_cast<size_t>(dim));
    std::iota(result.ranking.begin(), result.ranking.end(), 0);
    std::sort(result.ranking.begin(), result.ranking.end(), [&](int a, int b) {
        const double ua = result.expected_utilities[static_cast<size_t>(a)];
        const double ub = result.expected_utilities[static_cast<size_t>(b)];
        if (ua != ub) return ua > ub;
        const double la = pool.entries[static_cast<size_t>(a)].logprob;
        const double lb = pool.entries[static_cast<size_t>(b)].logprob;
        if (la != lb) return la > lb;
        return a < b;
    });
    result.chosen_index = result.ranking.front();
    result.chosen = pool.entries[static_cast<size_t>(result.chosen_index)].seq;
    return result;
}

Enumeration enumerate_terminated(const ToyAutoregressiveModel& model, const std::string& source_key,
                                 int max_len, double budget) {
    if (max_len < 1) {
        throw ValidationError("max_len must be >= 1");
    }
    const double space = std::pow(static_cast<double>(model.vocab().size()),
                                  static_cast<double>(max_len));
    if (space > budget) {
        throw ValidationError("enumeration budget exceeded: |V|^max_len = " +
                              std::to_string(space) + " > " + std::to_string(budget));
    }

    Enumeration out;
    TokenSequence prefix;
    const int eos = model.vocab().eos_id();

    // lexicographic DFS over prefixes, carrying the prefix probability
    auto walk = [&](auto&& self, double prefix_prob) -> void {
        const NextTokenDistribution dist = model.next_token_dist(source_key, prefix);
        for (int id = 0; id < model.vocab().size(); ++id) {
            const double p = dist.probs[static_cast<size_t>(id)];
            if (p <= 0.0) {
                continue;
            }
            const double prob = prefix_prob * p;
            if (id == eos) {
                EnumeratedSequence seq;
                seq.seq.ids = prefix.ids;
                seq.seq.ids.push_back(eos);
                seq.seq.terminated = true;
                seq.prob = prob;
                seq.logprob = std::log(prob);
                out.sequences.push_back(std::move(seq));
            } else if (static_cast<int>(prefix.ids.size()) + 1 < max_len) {
                prefix.ids.push_back(id);
                self(self, prob);
                prefix.ids.pop_back();
            } else {
                out.unterminated_mass += prob;  // stranded at the cap
            }
        }
    };
    walk(walk, 1.0);
    return out;
}

ExactUtility exact_expected_utility(const ToyAutoregressiveModel& model,
                                    const std::string& source_key, const TokenSequence& hypothesis,
                                    const UtilityMetric& metric, int max_len, double budget) {
    const Enumeration enumeration = enumerate_terminated(model, source_key, max_len, budget);
    const Detokenizer detok{&model.vocab()};
    const std::string hyp_text = detok(hypothesis);

    ExactUtility out;
    out.unterminated_mass = enumeration.unterminated_mass;
    for (const EnumeratedSequence& ref : enumeration.sequences) {
        out.value += metric.score(hyp_text, detok(ref.seq)) * ref.prob;
    }
    return out;
}

OracleResult exact_mbr_oracle(const ToyAutoregressiveModel& model, const std::string& source_key,
                              const UtilityMetric& metric, int max_len, double budget) {
    const Enumeration enumeration = enumerate_terminated(model, source_key, max_len, budget);
    if (enumeration.sequences.empty()) {
        throw ValidationError("no terminated sequence within max_len; nothing to rank");
    }
    const Detokenizer detok{&model.vocab()};
    std::vector<std::string> texts;
    texts.reserve(enumeration.sequences.size());
    for (const EnumeratedSequence& seq : enumeration.sequences) {
        texts.push_back(detok(seq.seq));
    }

    OracleResult best;
    best.unterminated_mass = enumeration.unterminated_mass;
    bool have_best = false;
    for (size_t h = 0; h < enumeration.sequences.size(); ++h) {
        double utility = 0.0;
        for (size_t y = 0; y < enumeration.sequences.size(); ++y) {
            utility += metric.score(texts[h], texts[y]) * enumeration.sequences[y].prob;
        }
        if (!have_best || utility > best.expected_utility) {
            best.chosen = enumeration.sequences[h].seq;
            best.expected_utility = utility;
            best.tie = false;
            have_best = true;
        } else if (utility == best.expected_utility) {
            best.tie = true;
            // sequences arrive in lexicographic order, so the incumbent
            // is already the smaller one
        }
    }
    return best;
}

namespace {
constexpr char kMatrixMagic[8] = {'M', 'B', 'R', 'U', 'M', 'T', 'X', '\x01'};
constexpr uint32_t kMatrixVersion = 1;
}  // namespace

std::string matrix_cache_filename(uint64_t pool_hash, const std::string& metric_id) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(pool_hash));
    std::string safe_id;
    for (char c : metric_id) {
        safe_id += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    }
    return std::string(hex) + "." + safe_id + ".umtx";
}

bool try_load_matrix(const std::string& path, uint64_t pool_hash, const std::string& metric_id,
                     UtilityMatrix* out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return false;
    }
    char magic[8];
    uint32_t version = 0;
    uint64_t stored_hash = 0;
    uint32_t id_len = 0;
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMatrixMagic, sizeof(magic)) != 0) {
        return false;
    }
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&stored_hash), sizeof(stored_hash));
    in.read(reinterpret_cast<char*>(&id_len), sizeof(id_len));
    if (!in || version != kMatrixVersion || stored_hash != pool_hash || id_len > 4096) {
        return false;
    }
    std::string stored_id(id_len, '\0');
    in.read(stored_id.data(), id_len);
    uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in || stored_id != metric_id || dim == 0) {
        return false;
    }
    UtilityMatrix matrix;
    matrix.dim = static_cast<int>(dim);
    matrix.metric_id = stored_id;
    matrix.values.resize(static_cast<size_t>(dim) * dim);
    in.read(reinterpret_cast<char*>(matrix.values.data()),
            static_cast<std::streamsize>(matrix.values.size() * sizeof(double)));
    if (!in) {
        return false;
    }
    *out = std::move(matrix);
    return true;
}

void save_matrix(const std::string& path, uint64_t pool_hash, const UtilityMatrix& matrix) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write matrix cache: " + path);
    }
    out.write(kMatrixMagic, sizeof(kMatrixMagic));
    out.write(reinterpret_cast<const char*>(&kMatrixVersion), sizeof(kMatrixVersion));
    out.write(reinterpret_cast<const char*>(&pool_hash), sizeof(pool_hash));
    const uint32_t id_len = static_cast<uint32_t>(matrix.metric_id.size());
    out.write(reinterpret_cast<const char*>(&id_len), sizeof(id_len));
    out.write(matrix.metric_id.data(), id_len);
    const uint32_t dim = static_cast<uint32_t>(matrix.dim);
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(matrix.values.data()),
              static_cast<std::streamsize>(matrix.values.size() * sizeof(double)));
}

}  // namespace mbrd
