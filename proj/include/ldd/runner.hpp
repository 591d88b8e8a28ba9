#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldd/backends.hpp"
#include "ldd/corpus.hpp"
#include "ldd/labelspace.hpp"
#include "ldd/promptkit.hpp"

namespace ldd::runner {

class RunnerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when the per-run failure threshold is exceeded; the partial log
/// stays on disk for resumption.
class RunAbortedError : public RunnerError {
public:
    using RunnerError::RunnerError;
};

/// One model call, scored. `correct` always equals matches(parsed, gold);
/// unparseable and backend-failed trials are incorrect.
struct TrialRecord {
    std::string model;
    promptkit::Condition condition = promptkit::Condition::CleanZeroShot;
    int shots = 0;
    std::string permutation;  // "none" | "sequential" | "reverse"
    std::string pair_slug;
    std::int64_t review_id = 0;
    int repeat = 0;
    Polarity gold = Polarity::Negative;
    std::string prompt_digest;
    std::string raw_output;
    labelspace::Label parsed_label = labelspace::Label::Unparseable;
    labelspace::MatchTier matched_via = labelspace::MatchTier::None;
    bool correct = false;
    std::string timestamp;  // ISO-8601 UTC
    std::string error;      // non-empty when the backend failed

    std::string cell_key() const;   // model|condition|shots|perm|pair
    std::string trial_key() const;  // cell_key|review_id|repeat

    nlohmann::json to_json() const;
    static TrialRecord from_json(const nlohmann::json& j);
};

/// The experiment matrix shape. Defaults reproduce the standard 74-cell
/// per-model grid: 1 clean zero-shot + 1 attacked zero-shot +
/// 8 attacked few-shot + 64 disguised few-shot cells.
struct MatrixConfig {
    std::vector<promptkit::Condition> conditions = {
        promptkit::Condition::CleanZeroShot, promptkit::Condition::AttackZeroShot,
        promptkit::Condition::AttackFewShot, promptkit::Condition::AttackLddFewShot};
    std::vector<int> shots = {2, 4, 6, 8};
    std::vector<promptkit::PermutationScheme> permutations = {
        promptkit::PermutationScheme::Sequential, promptkit::PermutationScheme::Reverse};
    std::vector<std::string> pairs = {"heaven-hell", "green-red",   "good-bad", "happy-sad",
                                      "symbols",     "blue-yellow", "i-j",      "cat-dog"};
    int repeats = 1;

    nlohmann::json to_json() const;
    static MatrixConfig from_json(const nlohmann::json& j);
};

struct Cell {
    std::string model;
    promptkit::PromptSpec spec;
};

/// Expands (models x conditions x shots x permutations x pairs) into cells.
/// Zero-shot conditions contribute one cell each; the disguised condition
/// crosses every configured alias pair. Throws on unknown pair names.
std::vector<Cell> expand_matrix(const std::vector<std::string>& models,
                                const MatrixConfig& config,
                                const std::vector<labelspace::AliasPair>& registry);

/// Pins one run: the matrix, the exact corpus and registry, and backend
/// parameters. A manifest fully determines the prompt set.
struct RunManifest {
    std::string run_id;
    std::vector<std::string> models;
    MatrixConfig matrix;
    std::string corpus_digest;
    std::string registry_digest;
    nlohmann::json backend_params = nlohmann::json::object();

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& file) const;
    static RunManifest load(const std::filesystem::path& file);
};

RunManifest make_manifest(std::string run_id, std::vector<std::string> models,
                          MatrixConfig matrix, const corpus::CorpusSplit& split,
                          const std::vector<labelspace::AliasPair>& registry,
                          nlohmann::json backend_params = nlohmann::json::object());

struct ExecuteOptions {
    int parallelism = 1;
    std::size_t trial_budget = 0;  // stop after this many new trials (0 = unlimited)
    double abort_error_fraction = 0.10;
    labelspace::Strictness strictness = labelspace::Strictness::Lenient;
    std::size_t max_demo_chars = 0;
};

struct ExecuteResult {
    std::filesystem::path log_path;
    std::size_t planned = 0;    // trials in the full matrix
    std::size_t resumed = 0;    // already present, skipped
    std::size_t executed = 0;   // newly appended this invocation
    std::size_t errors = 0;     // still failed after the retry pass
    bool complete = false;
};

/// Runs every (cell x test review x repeat) not already present in
/// `<run_dir>/trials.jsonl`, appending records in completion order. Failed
/// trials get one run-level retry pass; trials that still fail are recorded
/// with an error note and scored incorrect. Aborts (RunAbortedError) when
/// more than `abort_error_fraction` of this invocation's trials error.
ExecuteResult execute(const RunManifest& manifest, const corpus::CorpusSplit& split,
                      const std::vector<labelspace::AliasPair>& registry,
                      backends::Backend& backend, const std::filesystem::path& run_dir,
                      const ExecuteOptions& options = {});

std::vector<TrialRecord> load_trials(const std::filesystem::path& trials_file);

/// Uniqueness scan: throws RunnerError on a duplicate
/// (model, condition, shots, permutation, pair, review_id, repeat).
void verify_unique(const std::vector<TrialRecord>& records);

}  // namespace ldd::runner
