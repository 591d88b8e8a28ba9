#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "ldd/backends.hpp"
#include "ldd/corpus.hpp"
#include "ldd/digest.hpp"
#include "ldd/fixtures.hpp"
#include "ldd/labelspace.hpp"
#include "ldd/metrics.hpp"
#include "ldd/promptkit.hpp"
#include "ldd/published.hpp"
#include "ldd/report.hpp"
#include "ldd/runner.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAborted = 3;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!known.contains(key)) {
            throw ConfigError("unknown key \"" + key + "\" in " + where);
        }
    }
}

ldd::corpus::CorpusFormat format_from_string(const std::string& s) {
    if (s == "imdb-dir") return ldd::corpus::CorpusFormat::DirectoryPerClass;
    if (s == "jsonl") return ldd::corpus::CorpusFormat::SingleTable;
    throw ConfigError("unknown corpus format \"" + s + "\" (expected imdb-dir or jsonl)");
}

// ---------------------------------------------------------------------------
// run configuration document
// ---------------------------------------------------------------------------

struct RunConfig {
    std::vector<ldd::backends::ModelHandle> models;
    std::string backend = "mock";
    ldd::backends::MockPolicy mock;
    ldd::runner::MatrixConfig matrix;

    bool use_fixture_corpus = false;
    std::string corpus_path;
    std::string corpus_format = "jsonl";
    std::string split_dir;

    std::string pairs_file;
    std::string cache_dir;
    std::string out_dir = "runs";
    std::string run_id;
    std::string avg_mode = "perm-mean";
    bool strict = false;
    std::size_t max_demo_chars = 0;
    int parallelism = 1;
};

RunConfig load_run_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file: " + file.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": bad JSON: " + e.what());
    }
    reject_unknown_keys(doc,
                        {"models", "backend", "mock", "conditions", "shots", "permutations",
                         "pairs", "repeats", "corpus", "split_dir", "fixture_corpus",
                         "pairs_file", "cache_dir", "out", "run_id", "avg_mode", "strict",
                         "max_demo_chars", "parallelism"},
                        "run config");

    RunConfig config;
    if (!doc.contains("models") || !doc.at("models").is_array() || doc.at("models").empty()) {
        throw ConfigError("run config needs a non-empty \"models\" array");
    }
    for (const auto& entry : doc.at("models")) {
        ldd::backends::ModelHandle handle;
        if (entry.is_string()) {
            handle.name = entry.get<std::string>();
        } else if (entry.is_object()) {
            reject_unknown_keys(entry,
                                {"name", "endpoint", "auth_env", "adapter", "temperature",
                                 "max_output_tokens"},
                                "model entry");
            handle.name = entry.at("name").get<std::string>();
            handle.endpoint = entry.value("endpoint", "");
            handle.auth_env = entry.value("auth_env", "");
            handle.adapter = entry.value("adapter", "openai");
            handle.params.temperature = entry.value("temperature", 0.0);
            handle.params.max_output_tokens = entry.value("max_output_tokens", 16);
        } else {
            throw ConfigError("model entries must be names or objects");
        }
        if (handle.name.empty()) throw ConfigError("model entry with empty name");
        config.models.push_back(std::move(handle));
    }

    config.backend = doc.value("backend", "mock");
    if (config.backend != "mock" && config.backend != "http") {
        throw ConfigError("unknown backend \"" + config.backend + "\" (expected mock or http)");
    }
    if (doc.contains("mock")) {
        reject_unknown_keys(doc.at("mock"), {"obedience", "alias_competence", "seed"}, "mock");
        config.mock = ldd::backends::MockPolicy::from_json(doc.at("mock"));
    }

    config.matrix = ldd::runner::MatrixConfig::from_json(doc);

    if (doc.contains("corpus")) {
        const auto& c = doc.at("corpus");
        reject_unknown_keys(c, {"path", "format"}, "corpus");
        config.corpus_path = c.at("path").get<std::string>();
        config.corpus_format = c.value("format", "jsonl");
    }
    config.split_dir = doc.value("split_dir", "");
    config.use_fixture_corpus = doc.value("fixture_corpus", false);
    const int sources = (config.corpus_path.empty() ? 0 : 1) +
                        (config.split_dir.empty() ? 0 : 1) +
                        (config.use_fixture_corpus ? 1 : 0);
    if (sources != 1) {
        throw ConfigError(
            "exactly one of \"corpus\", \"split_dir\" or \"fixture_corpus\" must be set");
    }

    config.pairs_file = doc.value("pairs_file", "");
    config.cache_dir = doc.value("cache_dir", "");
    config.out_dir = doc.value("out", "runs");
    config.run_id = doc.value("run_id", "");
    config.avg_mode = doc.value("avg_mode", "perm-mean");
    config.strict = doc.value("strict", false);
    config.max_demo_chars = doc.value("max_demo_chars", std::size_t{0});
    config.parallelism = doc.value("parallelism", 1);
    return config;
}

std::vector<ldd::labelspace::AliasPair> registry_for(const std::string& pairs_file) {
    if (pairs_file.empty()) return ldd::labelspace::registry();
    return ldd::labelspace::load_registry(pairs_file);
}

ldd::corpus::CorpusSplit split_for(const RunConfig& config) {
    if (config.use_fixture_corpus) return ldd::fixtures::fixture_split();
    if (!config.split_dir.empty()) return ldd::corpus::load_split(config.split_dir);
    const auto reviews = ldd::corpus::load_corpus(config.corpus_path,
                                                  format_from_string(config.corpus_format));
    return ldd::corpus::build_split(reviews);
}

std::string derive_run_id(const ldd::runner::RunManifest& manifest) {
    json doc = manifest.to_json();
    doc.erase("run_id");
    return "run-" + ldd::sha256_hex(doc.dump()).substr(0, 12);
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_split(const std::string& corpus, const std::string& format, const std::string& out,
              bool dry_run) {
    ldd::corpus::LoadStats stats;
    const auto reviews =
        ldd::corpus::load_corpus(corpus, format_from_string(format), &stats);
    const auto split = ldd::corpus::build_split(reviews);

    std::map<int, int> train_counts, test_counts;
    for (const auto& r : split.train) ++train_counts[r.rating];
    for (const auto& r : split.test) ++test_counts[r.rating];

    std::cout << "loaded " << stats.loaded << " reviews (" << stats.dropped_neutral
              << " neutral dropped)\n";
    std::cout << "train ratings:";
    for (const auto& [rating, count] : train_counts) {
        std::cout << " " << rating << "x" << count;
    }
    std::cout << "\ntest ratings:";
    for (const auto& [rating, count] : test_counts) {
        std::cout << " " << rating << "x" << count;
    }
    std::cout << "\ntrain=" << split.train.size() << " test=" << split.test.size() << "\n";

    if (dry_run) {
        std::cout << "dry run: nothing written\n";
        return kExitOk;
    }
    ldd::corpus::export_split(split, out);
    std::cout << "wrote " << (fs::path(out) / "train.jsonl").string() << " and "
              << (fs::path(out) / "test.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_prompts(const std::string& out, const std::string& corpus, const std::string& format,
                const std::string& pairs_file) {
    const auto registry = registry_for(pairs_file);
    ldd::corpus::CorpusSplit split;
    if (corpus.empty()) {
        split = ldd::fixtures::fixture_split();
    } else {
        split = ldd::corpus::build_split(
            ldd::corpus::load_corpus(corpus, format_from_string(format)));
    }

    ldd::runner::MatrixConfig config;  // the standard 74-cell grid
    const auto cells = ldd::runner::expand_matrix({"golden"}, config, registry);
    const auto& target = split.test.front();

    fs::create_directories(out);
    for (const auto& cell : cells) {
        const auto prompt = ldd::promptkit::render_for(cell.spec, split.train, target);
        const auto path = fs::path(out) / ldd::promptkit::golden_file_name(cell.spec);
        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        if (!file) throw ConfigError("cannot write golden file: " + path.string());
        file << prompt;
    }
    std::cout << "wrote " << cells.size() << " golden prompts to " << out << "\n";
    return kExitOk;
}

int cmd_run(const std::string& config_file, const std::string& backend_flag,
            std::optional<std::uint64_t> seed, std::optional<int> parallelism,
            const std::string& cache_dir_flag, const std::string& out_flag,
            const std::string& run_id_flag, const std::string& pairs_file_flag,
            std::optional<int> repeats, bool strict_flag,
            std::optional<std::size_t> max_demo_chars) {
    RunConfig config = load_run_config(config_file);
    if (!backend_flag.empty()) config.backend = backend_flag;
    if (seed) config.mock.seed = *seed;
    if (parallelism) config.parallelism = *parallelism;
    if (!cache_dir_flag.empty()) config.cache_dir = cache_dir_flag;
    if (!out_flag.empty()) config.out_dir = out_flag;
    if (!run_id_flag.empty()) config.run_id = run_id_flag;
    if (!pairs_file_flag.empty()) config.pairs_file = pairs_file_flag;
    if (repeats) config.matrix.repeats = *repeats;
    if (strict_flag) config.strict = true;
    if (max_demo_chars) config.max_demo_chars = *max_demo_chars;
    if (config.cache_dir.empty()) {
        if (const char* env = std::getenv("LDD_CACHE_DIR")) config.cache_dir = env;
    }

    // All referenced paths are validated before any backend is touched.
    if (!config.corpus_path.empty() && !fs::exists(config.corpus_path)) {
        throw ConfigError("corpus path does not exist: " + config.corpus_path);
    }
    if (!config.split_dir.empty() && !fs::exists(config.split_dir)) {
        throw ConfigError("split_dir does not exist: " + config.split_dir);
    }
    if (!config.pairs_file.empty() && !fs::exists(config.pairs_file)) {
        throw ConfigError("pairs_file does not exist: " + config.pairs_file);
    }

    const auto registry = registry_for(config.pairs_file);
    const auto split = split_for(config);

    std::vector<std::string> model_names;
    for (const auto& m : config.models) model_names.push_back(m.name);

    std::unique_ptr<ldd::backends::Backend> backend;
    std::unique_ptr<ldd::backends::CompletionCache> cache;
    json backend_params;
    if (config.backend == "mock") {
        backend_params = {{"backend", "mock"}, {"policy", config.mock.to_json()}};
        backend = std::make_unique<ldd::backends::MockBackend>(config.mock);
    } else {
        std::map<std::string, ldd::backends::ModelHandle> handles;
        for (const auto& m : config.models) {
            if (m.endpoint.empty()) {
                throw ConfigError("model " + m.name + " needs an endpoint for the http backend");
            }
            if (!m.auth_env.empty() && std::getenv(m.auth_env.c_str()) == nullptr) {
                throw ConfigError("environment variable " + m.auth_env + " (secret for " +
                                  m.name + ") is not set");
            }
            handles[m.name] = m;
        }
        json params = json::object();
        for (const auto& m : config.models) {
            params[m.name] = {{"endpoint", m.endpoint},
                              {"adapter", m.adapter},
                              {"params", m.params.to_json()}};
        }
        backend_params = {{"backend", "http"}, {"models", params}};
        if (!config.cache_dir.empty()) {
            cache = std::make_unique<ldd::backends::CompletionCache>(config.cache_dir);
        }
        backend = std::make_unique<ldd::backends::HttpBackend>(
            std::move(handles), ldd::backends::RetryPolicy{}, cache.get());
    }

    auto manifest = ldd::runner::make_manifest(config.run_id, model_names, config.matrix, split,
                                               registry, backend_params);
    if (manifest.run_id.empty()) manifest.run_id = derive_run_id(manifest);

    const fs::path run_dir = fs::path(config.out_dir) / manifest.run_id;
    ldd::runner::ExecuteOptions options;
    options.parallelism = config.parallelism;
    options.strictness = config.strict ? ldd::labelspace::Strictness::Strict
                                       : ldd::labelspace::Strictness::Lenient;
    options.max_demo_chars = config.max_demo_chars;

    const auto result =
        ldd::runner::execute(manifest, split, registry, *backend, run_dir, options);
    std::cout << "run " << manifest.run_id << ": planned " << result.planned << ", resumed "
              << result.resumed << ", executed " << result.executed << ", errors "
              << result.errors << "\n";
    std::cout << "log: " << result.log_path.string() << "\n";
    return kExitOk;
}

int cmd_metrics(const std::string& run_dir, const std::string& fixtures,
                const std::string& avg_mode, const std::string& out_file,
                const std::string& pairs_file) {
    if (!fixtures.empty()) {
        if (fixtures != "paper") {
            throw ConfigError("unknown fixture set \"" + fixtures + "\" (expected: paper)");
        }
        bool all_passed = true;
        for (const auto& check : ldd::published::run_all_checks()) {
            std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name << ": "
                      << check.checked << " values checked";
            if (!check.failures.empty()) {
                std::cout << ", " << check.failures.size() << " deviations";
            }
            std::cout << "\n";
            for (const auto& failure : check.failures) {
                std::cout << "       " << failure << "\n";
            }
            all_passed = all_passed && check.passed;
        }
        return all_passed ? kExitOk : 1;
    }

    if (run_dir.empty()) throw ConfigError("metrics needs --run or --fixtures");
    const fs::path trials = fs::path(run_dir) / "trials.jsonl";
    if (!fs::exists(trials)) {
        throw ConfigError("no trial log at " + trials.string());
    }
    const auto records = ldd::runner::load_trials(trials);
    if (records.empty()) throw ConfigError("trial log is empty: " + trials.string());
    ldd::runner::verify_unique(records);

    const auto analysis = ldd::metrics::analyze(records, registry_for(pairs_file),
                                                ldd::metrics::avg_mode_from_string(avg_mode));
    const fs::path out =
        out_file.empty() ? fs::path(run_dir) / "metrics.json" : fs::path(out_file);
    std::ofstream file(out, std::ios::binary | std::ios::trunc);
    if (!file) throw ConfigError("cannot write " + out.string());
    file << analysis.to_json().dump(2) << "\n";

    std::cout << "analyzed " << records.size() << " trials across " << analysis.cells.size()
              << " cells\n";
    for (const auto& m : analysis.models) {
        std::cout << m.model;
        if (m.clean_accuracy) std::cout << " clean=" << *m.clean_accuracy;
        if (m.attack_accuracy) std::cout << " attacked=" << *m.attack_accuracy;
        if (m.clean_accuracy && m.attack_accuracy) {
            std::cout << " drop=" << ldd::metrics::accuracy_drop(*m.clean_accuracy,
                                                                 *m.attack_accuracy);
        }
        std::cout << "\n";
    }
    if (!analysis.flagged_cells.empty()) {
        std::cout << "cells with backend errors (excluded from clean interpretation):\n";
        for (const auto& cell : analysis.flagged_cells) std::cout << "  " << cell << "\n";
    }
    std::cout << "metrics: " << out.string() << "\n";
    return kExitOk;
}

int cmd_report(const std::string& run_dir, const std::string& format,
               const std::string& avg_mode, const std::string& out_dir,
               const std::string& pairs_file) {
    const fs::path trials = fs::path(run_dir) / "trials.jsonl";
    if (!fs::exists(trials)) throw ConfigError("no trial log at " + trials.string());
    const auto records = ldd::runner::load_trials(trials);
    if (records.empty()) throw ConfigError("trial log is empty: " + trials.string());

    const auto analysis = ldd::metrics::analyze(records, registry_for(pairs_file),
                                                ldd::metrics::avg_mode_from_string(avg_mode));
    const fs::path out = out_dir.empty() ? fs::path(run_dir) / "report" : fs::path(out_dir);
    const auto written =
        ldd::report::write_bundle(analysis, out, ldd::report::format_from_string(format));
    std::cout << "wrote " << written.size() << " files under " << out.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmark harness for class-directive prompt injection and the alias-label "
                 "disguise defense"};
    app.require_subcommand(1);

    auto* split = app.add_subcommand("split", "Build the 8/200 train/test split from a corpus");
    std::string split_corpus, split_format = "jsonl", split_out = "split";
    bool split_dry = false;
    split->add_option("--corpus", split_corpus, "corpus path")->required();
    split->add_option("--format", split_format, "imdb-dir or jsonl");
    split->add_option("--out", split_out, "output directory");
    split->add_flag("--dry-run", split_dry, "validate and report without writing");

    auto* prompts = app.add_subcommand("prompts", "Prompt template utilities");
    bool emit_goldens = false;
    std::string prompts_out = "fixtures/prompts", prompts_corpus, prompts_format = "jsonl",
                prompts_pairs;
    prompts->add_flag("--emit-goldens", emit_goldens, "write the golden prompt corpus")
        ->required();
    prompts->add_option("--out", prompts_out, "golden directory");
    prompts->add_option("--corpus", prompts_corpus,
                        "render against this corpus instead of the built-in fixture corpus");
    prompts->add_option("--format", prompts_format, "imdb-dir or jsonl");
    prompts->add_option("--pairs-file", prompts_pairs, "custom alias registry JSON");

    auto* run = app.add_subcommand("run", "Execute the experiment matrix");
    std::string run_config, run_backend, run_cache, run_out, run_id, run_pairs;
    std::optional<std::uint64_t> run_seed;
    std::optional<int> run_parallelism, run_repeats;
    std::optional<std::size_t> run_max_demo_chars;
    bool run_strict = false;
    run->add_option("--config", run_config, "run config JSON")->required();
    run->add_option("--backend", run_backend, "mock or http (overrides config)");
    run->add_option("--seed", run_seed, "mock seed override");
    run->add_option("--parallelism", run_parallelism, "max in-flight requests");
    run->add_option("--cache-dir", run_cache, "completion cache directory");
    run->add_option("--out", run_out, "runs directory");
    run->add_option("--run-id", run_id, "explicit run id");
    run->add_option("--pairs-file", run_pairs, "custom alias registry JSON");
    run->add_option("--repeats", run_repeats, "trials per (cell, review)");
    run->add_option("--max-demo-chars", run_max_demo_chars,
                    "fail fast when a demonstration exceeds this many chars");
    run->add_flag("--strict", run_strict, "exact-token output parsing only");

    auto* metrics_cmd = app.add_subcommand("metrics", "Compute metrics from a run log");
    std::string metrics_run, metrics_fixtures, metrics_avg = "perm-mean", metrics_out,
                metrics_pairs;
    metrics_cmd->add_option("--run", metrics_run, "run directory");
    metrics_cmd->add_option("--fixtures", metrics_fixtures,
                            "check bundled reference tables (value: paper)");
    metrics_cmd->add_option("--avg-mode", metrics_avg, "perm-mean or pooled");
    metrics_cmd->add_option("--out", metrics_out, "metrics JSON path");
    metrics_cmd->add_option("--pairs-file", metrics_pairs, "custom alias registry JSON");

    auto* report_cmd = app.add_subcommand("report", "Render tables and curves from a run");
    std::string report_run, report_format = "csv", report_avg = "perm-mean", report_out,
                report_pairs;
    report_cmd->add_option("--run", report_run, "run directory")->required();
    report_cmd->add_option("--format", report_format, "csv, md or json");
    report_cmd->add_option("--avg-mode", report_avg, "perm-mean or pooled");
    report_cmd->add_option("--out", report_out, "report directory");
    report_cmd->add_option("--pairs-file", report_pairs, "custom alias registry JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (split->parsed()) return cmd_split(split_corpus, split_format, split_out, split_dry);
        if (prompts->parsed()) {
            return cmd_prompts(prompts_out, prompts_corpus, prompts_format, prompts_pairs);
        }
        if (run->parsed()) {
            return cmd_run(run_config, run_backend, run_seed, run_parallelism, run_cache,
                           run_out, run_id, run_pairs, run_repeats, run_strict,
                           run_max_demo_chars);
        }
        if (metrics_cmd->parsed()) {
            return cmd_metrics(metrics_run, metrics_fixtures, metrics_avg, metrics_out,
                               metrics_pairs);
        }
        if (report_cmd->parsed()) {
            return cmd_report(report_run, report_format, report_avg, report_out, report_pairs);
        }
    } catch (const ldd::runner::RunAbortedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAborted;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
