// Command-line surface for the decoding pipeline: sample candidate pools,
// decode them with MBR or beam search, evaluate hypotheses, and run the
// distribution/sweep/significance analyses. Every command writes a run
// manifest next to its outputs and is a pure function of (inputs, flags,
// seed).

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbrd/analysis.hpp"
#include "mbrd/beam.hpp"
#include "mbrd/corpus.hpp"
#include "mbrd/errors.hpp"
#include "mbrd/manifest.hpp"
#include "mbrd/mbr.hpp"
#include "mbrd/metrics.hpp"
#include "mbrd/parallel.hpp"
#include "mbrd/pool.hpp"
#include "mbrd/sampling.hpp"
#include "mbrd/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitScorer = 3;

std::string timestamp_utc() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

void require_safe_key(const std::string& key) {
    for (char c : key) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
            throw mbrd::ValidationError("corpus key '" + key +
                                        "' contains characters unusable in file names");
        }
    }
}

struct CommonState {
    std::vector<std::string> argv;
};

mbrd::RunManifest base_manifest(const CommonState& state, uint64_t seed) {
    mbrd::RunManifest manifest;
    manifest.tool_version = std::string(mbrd::kToolName) + " " + mbrd::kToolVersion;
    manifest.command = state.argv;
    manifest.seed = seed;
    manifest.created_at = timestamp_utc();
    return manifest;
}

mbrd::SamplingPolicy policy_from_flags(const std::string& strategy, double tau, int k, double p,
                                       double epsilon, bool k_set, bool p_set) {
    const mbrd::Strategy tag = mbrd::parse_strategy(strategy);
    switch (tag) {
        case mbrd::Strategy::kAncestral:
            return mbrd::ancestral_policy(tau);
        case mbrd::Strategy::kTopK:
            if (!k_set) {
                throw mbrd::ValidationError("--strategy topk requires --k");
            }
            return mbrd::top_k_policy(k, tau);
        case mbrd::Strategy::kNucleus:
            if (!p_set) {
                throw mbrd::ValidationError("--strategy nucleus requires --p");
            }
            return mbrd::nucleus_policy(p, tau);
        case mbrd::Strategy::kEpsilon:
            return mbrd::epsilon_policy(epsilon, tau);
    }
    throw mbrd::ValidationError("unreachable strategy tag");
}

struct HypRecord {
    std::string key;
    std::string text;
};

std::vector<HypRecord> load_hypotheses(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw mbrd::IoError("cannot open hypothesis file: " + path);
    }
    std::vector<HypRecord> records;
    std::unordered_set<std::string> keys;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            json doc = json::parse(line);
            records.push_back({doc.at("key").get<std::string>(), doc.at("text").get<std::string>()});
        } catch (const json::exception& e) {
            throw mbrd::ValidationError("malformed hypothesis line " + std::to_string(line_no) +
                                        " in " + path + ": " + e.what());
        }
        if (!keys.insert(records.back().key).second) {
            throw mbrd::ValidationError("duplicate hypothesis key '" + records.back().key +
                                        "' in " + path);
        }
    }
    return records;
}

// Scores CSV as written by `evaluate`: key,metric,score (MEAN rows skipped).
std::map<std::string, double> load_scores_csv(const std::string& path,
                                              const std::string& metric_filter) {
    std::ifstream in(path);
    if (!in) {
        throw mbrd::IoError("cannot open scores file: " + path);
    }
    std::map<std::string, double> scores;
    std::set<std::string> metrics_seen;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (first) {
            first = false;
            if (line.rfind("key,", 0) == 0) {
                continue;  // header
            }
        }
        const size_t c1 = line.find(',');
        const size_t c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw mbrd::ValidationError("bad scores row in " + path + ": " + line);
        }
        const std::string key = line.substr(0, c1);
        const std::string metric = line.substr(c1 + 1, c2 - c1 - 1);
        if (key == "MEAN") {
            continue;
        }
        if (!metric_filter.empty() && metric != metric_filter) {
            continue;
        }
        metrics_seen.insert(metric);
        if (metrics_seen.size() > 1) {
            throw mbrd::ValidationError("scores file " + path +
                                        " mixes metrics; disambiguate with --metric");
        }
        scores[key] = std::stod(line.substr(c2 + 1));
    }
    if (scores.empty()) {
        throw mbrd::ValidationError("no usable score rows in " + path);
    }
    return scores;
}

std::vector<std::string> collect_pool_files(const std::vector<std::string>& pool_args) {
    std::vector<std::string> files;
    for (const std::string& arg : pool_args) {
        if (fs::is_directory(arg)) {
            for (const auto& entry : fs::directory_iterator(arg)) {
                if (entry.path().extension() == ".jsonl" &&
                    entry.path().filename() != "manifest.json" &&
                    entry.path().string().find(".pool.") != std::string::npos) {
                    files.push_back(entry.path().string());
                }
            }
        } else {
            files.push_back(arg);
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw mbrd::ValidationError("no pool files found");
    }
    return files;
}

mbrd::UtilityMatrix matrix_with_cache(const mbrd::CandidatePool& pool,
                                      const mbrd::UtilityMetric& metric,
                                      const mbrd::Detokenizer& detok,
                                      const std::string& cache_dir) {
    if (cache_dir.empty()) {
        return mbrd::compute_utility_matrix(pool, metric, detok);
    }
    fs::create_directories(cache_dir);
    const uint64_t hash = mbrd::pool_hash(pool);
    const std::string path =
        (fs::path(cache_dir) / mbrd::matrix_cache_filename(hash, metric.id())).string();
    mbrd::UtilityMatrix matrix;
    if (mbrd::try_load_matrix(path, hash, metric.id(), &matrix)) {
        return matrix;
    }
    matrix = mbrd::compute_utility_matrix(pool, metric, detok);
    mbrd::save_matrix(path, hash, matrix);
    return matrix;
}

int cmd_sample(const CommonState& state, const std::string& corpus_path,
               const std::string& model_path, const mbrd::SamplingPolicy& policy, int n,
               int max_len, uint64_t seed, const std::string& out_dir) {
    const mbrd::Corpus corpus = mbrd::load_corpus(corpus_path);
    const mbrd::ToyAutoregressiveModel model = mbrd::load_model(model_path);
    fs::create_directories(out_dir);

    const mbrd::Rng root(seed);
    const mbrd::Rng sample_stream = root.substream("sample");
    for (size_t i = 0; i < corpus.records.size(); ++i) {
        const mbrd::CorpusRecord& record = corpus.records[i];
        require_safe_key(record.key);
        if (!model.has_source(record.key)) {
            throw mbrd::ValidationError("model has no source entry for corpus key '" + record.key +
                                        "'");
        }
        const mbrd::Rng record_stream = sample_stream.substream(static_cast<uint64_t>(i));
        const mbrd::CandidatePool pool =
            mbrd::sample_pool(model, record.key, policy, record_stream, n, max_len);
        const std::string path = (fs::path(out_dir) / (record.key + ".pool.jsonl")).string();
        mbrd::save_pool(pool, model.vocab(), path);
    }

    mbrd::RunManifest manifest = base_manifest(state, seed);
    manifest.model_path = model_path;
    manifest.model_hash = mbrd::file_hash_hex(model_path);
    manifest.policy = policy;
    manifest.n = n;
    manifest.max_len = max_len;
    mbrd::write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    std::cerr << "sampled " << corpus.records.size() << " pool(s) into " << out_dir << "\n";
    return kExitOk;
}

int cmd_decode_mbr(const CommonState& state, const std::vector<std::string>& pool_args,
                   const std::string& model_path, const std::string& metric_spec,
                   const std::string& cache_dir, const std::string& out_path) {
    const mbrd::ToyAutoregressiveModel model = mbrd::load_model(model_path);
    const auto metric = mbrd::make_metric(metric_spec);
    const mbrd::Detokenizer detok{&model.vocab()};

    struct Row {
        std::string key;
        json record;
    };
    std::vector<Row> rows;
    for (const std::string& path : collect_pool_files(pool_args)) {
        const mbrd::CandidatePool pool = mbrd::load_pool(path, model.vocab());
        const mbrd::UtilityMatrix matrix = matrix_with_cache(pool, *metric, detok, cache_dir);
        const mbrd::MbrResult result = mbrd::mbr_decode(pool, matrix);
        json record;
        record["key"] = pool.source_key;
        record["text"] = detok(result.chosen);
        record["expected_utility"] =
            result.expected_utilities[static_cast<size_t>(result.chosen_index)];
        record["ranking_size"] = static_cast<int>(pool.entries.size());
        record["terminated"] = result.chosen.terminated;
        rows.push_back({pool.source_key, std::move(record)});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });

    std::ofstream out(out_path);
    if (!out) {
        throw mbrd::IoError("cannot write output: " + out_path);
    }
    for (const Row& row : rows) {
        out << row.record.dump() << '\n';
    }

    mbrd::RunManifest manifest = base_manifest(state, 0);
    manifest.model_path = model_path;
    manifest.model_hash = mbrd::file_hash_hex(model_path);
    manifest.metric_ids = {metric->id()};
    mbrd::write_manifest(manifest, out_path + ".manifest.json");
    return kExitOk;
}

int cmd_decode_beam(const CommonState& state, const std::string& corpus_path,
                    const std::string& model_path, const mbrd::BeamConfig& config,
                    const std::string& out_path) {
    const mbrd::Corpus corpus = mbrd::load_corpus(corpus_path);
    const mbrd::ToyAutoregressiveModel model = mbrd::load_model(model_path);
    const mbrd::Detokenizer detok{&model.vocab()};

    std::vector<std::string> keys;
    for (const mbrd::CorpusRecord& record : corpus.records) {
        keys.push_back(record.key);
    }
    std::sort(keys.begin(), keys.end());

    std::ofstream out(out_path);
    if (!out) {
        throw mbrd::IoError("cannot write output: " + out_path);
    }
    for (const std::string& key : keys) {
        const mbrd::BeamHypothesis hyp = mbrd::beam_search(model, key, config);
        json row;
        row["key"] = key;
        row["text"] = detok(hyp.seq);
        row["logprob"] = hyp.logprob;
        row["penalized_score"] = hyp.penalized_score;
        row["terminated"] = hyp.seq.terminated;
        out << row.dump() << '\n';
    }

    mbrd::RunManifest manifest = base_manifest(state, 0);
    manifest.model_path = model_path;
    manifest.model_hash = mbrd::file_hash_hex(model_path);
    manifest.max_len = config.max_len;
    mbrd::write_manifest(manifest, out_path + ".manifest.json");
    return kExitOk;
}

int cmd_evaluate(const CommonState& state, const std::string& hyp_path,
                 const std::string& corpus_path, const std::vector<std::string>& metric_specs,
                 const std::string& out_path) {
    const mbrd::Corpus corpus = mbrd::load_corpus(corpus_path);
    std::vector<HypRecord> hyps = load_hypotheses(hyp_path);
    std::sort(hyps.begin(), hyps.end(),
              [](const HypRecord& a, const HypRecord& b) { return a.key < b.key; });

    std::vector<std::unique_ptr<mbrd::UtilityMetric>> metrics;
    for (const std::string& spec : metric_specs) {
        metrics.push_back(mbrd::make_metric(spec));
    }

    std::ofstream out(out_path);
    if (!out) {
        throw mbrd::IoError("cannot write output: " + out_path);
    }
    out << "key,metric,score\n";
    if (hyps.empty()) {
        std::cerr << "warning: empty hypothesis set, nothing to evaluate\n";
    }
    for (const auto& metric : metrics) {
        double sum = 0.0;
        for (const HypRecord& hyp : hyps) {
            const mbrd::CorpusRecord* record = corpus.find(hyp.key);
            if (record == nullptr) {
                throw mbrd::ValidationError("hypothesis key '" + hyp.key + "' not in corpus");
            }
            if (!record->reference) {
                throw mbrd::ValidationError("corpus record '" + hyp.key + "' has no reference");
            }
            const double score = metric->score(hyp.text, *record->reference);
            sum += score;
            out << hyp.key << ',' << metric->id() << ',' << fmt_double(score) << '\n';
        }
        if (!hyps.empty()) {
            out << "MEAN," << metric->id() << ',' << fmt_double(sum / hyps.size()) << '\n';
        }
    }

    mbrd::RunManifest manifest = base_manifest(state, 0);
    for (const auto& metric : metrics) {
        manifest.metric_ids.push_back(metric->id());
    }
    mbrd::write_manifest(manifest, out_path + ".manifest.json");
    return kExitOk;
}

int cmd_sweep(const CommonState& state, const std::string& pool_path,
              const std::string& model_path, const std::string& corpus_path,
              const std::string& metric_spec, const std::string& eval_metric_spec,
              const std::string& sizes_arg, int repeats, uint64_t seed,
              const std::string& cache_dir, const std::string& out_path) {
    const mbrd::ToyAutoregressiveModel model = mbrd::load_model(model_path);
    const mbrd::CandidatePool pool = mbrd::load_pool(pool_path, model.vocab());
    const mbrd::Corpus corpus = mbrd::load_corpus(corpus_path);
    const mbrd::CorpusRecord* record = corpus.find(pool.source_key);
    if (record == nullptr || !record->reference) {
        throw mbrd::ValidationError("corpus reference missing for pool source '" + pool.source_key +
                                    "'");
    }

    std::vector<int> sizes;
    if (sizes_arg.empty()) {
        for (int s = 1; s <= pool.n; s *= 2) {
            sizes.push_back(s);
            if (s > pool.n / 2) break;
        }
        if (sizes.back() != pool.n) sizes.push_back(pool.n);
    } else {
        std::stringstream ss(sizes_arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            sizes.push_back(std::stoi(item));
        }
    }

    const auto metric = mbrd::make_metric(metric_spec);
    const auto eval_metric =
        eval_metric_spec.empty() ? mbrd::make_metric(metric_spec) : mbrd::make_metric(eval_metric_spec);
    const mbrd::Detokenizer detok{&model.vocab()};
    const mbrd::UtilityMatrix matrix = matrix_with_cache(pool, *metric, detok, cache_dir);

    mbrd::Rng rng = mbrd::Rng(seed).substream("sweep");
    const mbrd::SweepCurve curve = mbrd::candidate_size_sweep(pool, matrix, sizes, repeats, rng,
                                                              *eval_metric, *record->reference,
                                                              detok);

    std::ofstream out(out_path);
    if (!out) {
        throw mbrd::IoError("cannot write output: " + out_path);
    }
    out << "size,mean,stderr\n";
    for (const mbrd::SweepPoint& point : curve.points) {
        out << point.candidate_size << ',' << fmt_double(point.mean_utility) << ','
            << fmt_double(point.std_error) << '\n';
    }

    mbrd::RunManifest manifest = base_manifest(state, seed);
    manifest.model_path = model_path;
    manifest.model_hash = mbrd::file_hash_hex(model_path);
    manifest.policy = pool.policy;
    manifest.n = pool.n;
    manifest.metric_ids = {metric->id(), eval_metric->id()};
    mbrd::write_manifest(manifest, out_path + ".manifest.json");
    return kExitOk;
}

int cmd_mass_curve(const CommonState& state, const std::string& pool_path,
                   const std::string& model_path, const std::string& out_path) {
    const mbrd::ToyAutoregressiveModel model = mbrd::load_model(model_path);
    const mbrd::CandidatePool pool = mbrd::load_pool(pool_path, model.vocab());
    const mbrd::MassCurve curve = mbrd::cumulative_mass_curve(pool, model, pool.source_key);

    std::ofstream out(out_path);
    if (!out) {
        throw mbrd::IoError("cannot write output: " + out_path);
    }
    out << "m,cumulative_mass\n";
    for (const auto& [m, mass] : curve.points) {
        out << m << ',' << fmt_double(mass) << '\n';
    }

    mbrd::RunManifest manifest = base_manifest(state, pool.seed);
    manifest.model_path = model_path;
    manifest.model_hash = mbrd::file_hash_hex(model_path);
    mbrd::write_manifest(manifest, out_path + ".manifest.json");
    return kExitOk;
}

int cmd_dump_dist(const CommonState& state, const std::string& model_path,
                  const std::string& source_key, const std::string& prefix_text, int top_n,
                  const std::string& out_path) {
    const mbrd::ToyAutoregressiveModel model = mbrd::load_model(model_path);
    const mbrd::TokenSequence prefix = mbrd::tokenize(model.vocab(), prefix_text);
    const mbrd::TopTokens top = mbrd::dump_next_token_dist(model, source_key, prefix, top_n);

    std::ofstream out(out_path);
    if (!out) {
        throw mbrd::IoError("cannot write output: " + out_path);
    }
    out << "rank,token,prob\n";
    for (size_t i = 0; i < top.top.size(); ++i) {
        out << (i + 1) << ',' << model.vocab().token(top.top[i].first) << ','
            << fmt_double(top.top[i].second) << '\n';
    }
    out << "tail,," << fmt_double(top.tail_mass) << '\n';

    mbrd::RunManifest manifest = base_manifest(state, 0);
    manifest.model_path = model_path;
    manifest.model_hash = mbrd::file_hash_hex(model_path);
    mbrd::write_manifest(manifest, out_path + ".manifest.json");
    return kExitOk;
}

int cmd_annotate(const CommonState& state, const std::string& model_path,
                 const std::string& hyp_path, double threshold, const std::string& out_dir) {
    const mbrd::ToyAutoregressiveModel model = mbrd::load_model(model_path);
    fs::create_directories(out_dir);

    std::vector<HypRecord> hyps = load_hypotheses(hyp_path);
    std::sort(hyps.begin(), hyps.end(),
              [](const HypRecord& a, const HypRecord& b) { return a.key < b.key; });
    for (const HypRecord& hyp : hyps) {
        require_safe_key(hyp.key);
        // hypotheses are complete sentences; annotate their EOS step too
        mbrd::TokenSequence seq = mbrd::tokenize(model.vocab(), hyp.text);
        if (!seq.terminated) {
            seq.ids.push_back(model.vocab().eos_id());
            seq.terminated = true;
        }
        const mbrd::TokenAnnotation annotation =
            mbrd::annotate_token_probs(model, hyp.key, seq, threshold);
        const std::string path = (fs::path(out_dir) / (hyp.key + ".annotation.csv")).string();
        std::ofstream out(path);
        if (!out) {
            throw mbrd::IoError("cannot write output: " + path);
        }
        out << "position,token,prob,flagged\n";
        for (const mbrd::TokenAnnotationEntry& entry : annotation.tokens) {
            out << entry.position << ',' << model.vocab().token(entry.token_id) << ','
                << fmt_double(entry.prob) << ',' << (entry.flagged ? 1 : 0) << '\n';
        }
    }

    mbrd::RunManifest manifest = base_manifest(state, 0);
    manifest.model_path = model_path;
    manifest.model_hash = mbrd::file_hash_hex(model_path);
    mbrd::write_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
    return kExitOk;
}

int cmd_perm_test(const CommonState& state, const std::string& scores_a_path,
                  const std::string& scores_b_path, const std::string& metric_filter,
                  int iterations, uint64_t seed, const std::string& out_path) {
    const auto scores_a = load_scores_csv(scores_a_path, metric_filter);
    const auto scores_b = load_scores_csv(scores_b_path, metric_filter);
    if (scores_a.size() != scores_b.size()) {
        throw mbrd::ValidationError("score files cover different segment counts");
    }
    std::vector<double> a, b;
    for (const auto& [key, value] : scores_a) {
        auto it = scores_b.find(key);
        if (it == scores_b.end()) {
            throw mbrd::ValidationError("segment '" + key + "' missing from " + scores_b_path);
        }
        a.push_back(value);
        b.push_back(it->second);
    }

    mbrd::Rng rng = mbrd::Rng(seed).substream("perm-test");
    const double p = mbrd::permutation_test(a, b, iterations, rng);
    std::cout << "p_value=" << fmt_double(p) << "\n";

    if (!out_path.empty()) {
        json doc;
        doc["p_value"] = p;
        doc["iterations"] = iterations;
        doc["segments"] = static_cast<int>(a.size());
        std::ofstream out(out_path);
        if (!out) {
            throw mbrd::IoError("cannot write output: " + out_path);
        }
        out << doc.dump(2) << '\n';
        mbrd::RunManifest manifest = base_manifest(state, seed);
        mbrd::write_manifest(manifest, out_path + ".manifest.json");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sampling-based MBR decoding toolkit"};
    app.set_version_flag("--version", std::string(mbrd::kToolName) + " " + mbrd::kToolVersion);
    app.require_subcommand(1);

    CommonState state;
    for (int i = 0; i < argc; ++i) {
        state.argv.emplace_back(argv[i]);
    }

    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = auto)");

    // ---- sample ----
    auto* sample = app.add_subcommand("sample", "draw candidate pools for each corpus record");
    std::string corpus_path, model_path, out_dir, strategy = "ancestral";
    double tau = 1.0, nucleus_p = 0.9, epsilon = 0.02;
    int top_k = 10, num_samples = 1024, max_len = 128;
    uint64_t seed = 0;
    sample->add_option("--corpus", corpus_path)->required();
    sample->add_option("--model", model_path)->required();
    sample->add_option("--strategy", strategy, "ancestral | topk | nucleus | epsilon")->required();
    sample->add_option("--temperature", tau, "sampling temperature");
    auto* k_opt = sample->add_option("--k", top_k, "top-k cutoff");
    auto* p_opt = sample->add_option("--p", nucleus_p, "nucleus mass");
    sample->add_option("--epsilon", epsilon, "epsilon threshold (default 0.02)");
    sample->add_option("--num-samples", num_samples, "samples per sentence (default 1024)");
    sample->add_option("--max-len", max_len, "max sequence length incl. EOS");
    sample->add_option("--seed", seed);
    sample->add_option("--out", out_dir, "output directory")->required();

    // ---- decode-mbr ----
    auto* decode_mbr = app.add_subcommand("decode-mbr", "MBR-decode candidate pools");
    std::vector<std::string> pool_args;
    std::string metric_spec = "chrf", cache_dir, out_path, dm_model;
    decode_mbr->add_option("--pools", pool_args, "pool files or a directory of them")->required();
    decode_mbr->add_option("--model", dm_model)->required();
    decode_mbr->add_option("--metric", metric_spec, "chrf | bleu | exact | external:<cfg>");
    decode_mbr->add_option("--cache-dir", cache_dir, "utility-matrix cache directory");
    decode_mbr->add_option("--out", out_path)->required();

    // ---- decode-beam ----
    auto* decode_beam = app.add_subcommand("decode-beam", "beam-search baseline");
    std::string db_corpus, db_model, db_out;
    mbrd::BeamConfig beam_config;
    decode_beam->add_option("--corpus", db_corpus)->required();
    decode_beam->add_option("--model", db_model)->required();
    decode_beam->add_option("--beam-size", beam_config.beam_size, "beam size (default 4)");
    decode_beam->add_option("--alpha", beam_config.alpha, "length-penalty alpha (default 0.5)");
    decode_beam->add_option("--max-len", beam_config.max_len);
    decode_beam->add_option("--out", db_out)->required();

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "score hypotheses against references");
    std::string ev_hyp, ev_corpus, ev_out;
    std::vector<std::string> ev_metrics{"chrf"};
    evaluate->add_option("--hyp", ev_hyp, "hypothesis JSONL (key, text)")->required();
    evaluate->add_option("--corpus", ev_corpus)->required();
    evaluate->add_option("--metric", ev_metrics, "metrics to apply (repeatable)");
    evaluate->add_option("--out", ev_out)->required();

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "MBR utility vs candidate-list size");
    std::string sw_pool, sw_model, sw_corpus, sw_metric = "chrf", sw_eval_metric, sw_sizes,
                sw_cache, sw_out;
    int sw_repeats = 10;
    uint64_t sw_seed = 0;
    sweep->add_option("--pool", sw_pool)->required();
    sweep->add_option("--model", sw_model)->required();
    sweep->add_option("--corpus", sw_corpus, "corpus with references")->required();
    sweep->add_option("--metric", sw_metric, "utility metric for the matrix");
    sweep->add_option("--eval-metric", sw_eval_metric, "evaluation metric (default: --metric)");
    sweep->add_option("--sizes", sw_sizes, "comma list, powers of two (default: 1,2,4,...,n)");
    sweep->add_option("--repeats", sw_repeats, "subsets per size (default 10)");
    sweep->add_option("--seed", sw_seed);
    sweep->add_option("--cache-dir", sw_cache);
    sweep->add_option("--out", sw_out)->required();

    // ---- mass-curve ----
    auto* mass = app.add_subcommand("mass-curve", "cumulative model mass over draws");
    std::string mc_pool, mc_model, mc_out;
    mass->add_option("--pool", mc_pool)->required();
    mass->add_option("--model", mc_model)->required();
    mass->add_option("--out", mc_out)->required();

    // ---- dump-dist ----
    auto* dump = app.add_subcommand("dump-dist", "sorted next-token probabilities");
    std::string dd_model, dd_source, dd_prefix, dd_out;
    int dd_top_n = 30;
    dump->add_option("--model", dd_model)->required();
    dump->add_option("--source", dd_source, "source key")->required();
    dump->add_option("--prefix", dd_prefix, "whitespace-separated prefix tokens");
    dump->add_option("--top-n", dd_top_n);
    dump->add_option("--out", dd_out)->required();

    // ---- annotate ----
    auto* annotate = app.add_subcommand("annotate", "token-level probability flags");
    std::string an_model, an_hyp, an_out;
    double an_threshold = 0.02;
    annotate->add_option("--model", an_model)->required();
    annotate->add_option("--hyp", an_hyp, "hypothesis JSONL (key, text)")->required();
    annotate->add_option("--threshold", an_threshold, "flag tokens below this (default 0.02)");
    annotate->add_option("--out", an_out, "output directory")->required();

    // ---- perm-test ----
    auto* perm = app.add_subcommand("perm-test", "paired permutation significance test");
    std::string pt_a, pt_b, pt_metric, pt_out;
    int pt_iterations = 10000;
    uint64_t pt_seed = 0;
    perm->add_option("--scores-a", pt_a, "evaluate CSV for system A")->required();
    perm->add_option("--scores-b", pt_b, "evaluate CSV for system B")->required();
    perm->add_option("--metric", pt_metric, "metric to select when files mix metrics");
    perm->add_option("--iterations", pt_iterations, "permutations (default 10000)");
    perm->add_option("--seed", pt_seed);
    perm->add_option("--out", pt_out, "optional JSON result file");

    CLI11_PARSE(app, argc, argv);
    mbrd::set_max_threads(threads);

    try {
        if (sample->parsed()) {
            const mbrd::SamplingPolicy policy = policy_from_flags(
                strategy, tau, top_k, nucleus_p, epsilon, k_opt->count() > 0, p_opt->count() > 0);
            return cmd_sample(state, corpus_path, model_path, policy, num_samples, max_len, seed,
                              out_dir);
        }
        if (decode_mbr->parsed()) {
            return cmd_decode_mbr(state, pool_args, dm_model, metric_spec, cache_dir, out_path);
        }
        if (decode_beam->parsed()) {
            return cmd_decode_beam(state, db_corpus, db_model, beam_config, db_out);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(state, ev_hyp, ev_corpus, ev_metrics, ev_out);
        }
        if (sweep->parsed()) {
            return cmd_sweep(state, sw_pool, sw_model, sw_corpus, sw_metric, sw_eval_metric,
                             sw_sizes, sw_repeats, sw_seed, sw_cache, sw_out);
        }
        if (mass->parsed()) {
            return cmd_mass_curve(state, mc_pool, mc_model, mc_out);
        }
        if (dump->parsed()) {
            return cmd_dump_dist(state, dd_model, dd_source, dd_prefix, dd_top_n, dd_out);
        }
        if (annotate->parsed()) {
            return cmd_annotate(state, an_model, an_hyp, an_threshold, an_out);
        }
        if (perm->parsed()) {
            return cmd_perm_test(state, pt_a, pt_b, pt_metric, pt_iterations, pt_seed, pt_out);
        }
    } catch (const mbrd::ScorerError& e) {
        std::cerr << "scorer error: " << e.what() << "\n";
        return kExitScorer;
    } catch (const mbrd::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const mbrd::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
