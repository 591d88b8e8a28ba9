#include "ldd/runner.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <thread>

#include "ldd/digest.hpp"

namespace ldd::runner {

namespace {

using nlohmann::json;

std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t secs = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string join_key(std::initializer_list<std::string> parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += '|';
        out += p;
    }
    return out;
}

struct WorkItem {
    std::size_t cell_index;
    std::size_t review_index;
    int repeat;
};

}  // namespace

std::string TrialRecord::cell_key() const {
    return join_key({model, promptkit::to_string(condition), std::to_string(shots), permutation,
                     pair_slug});
}

std::string TrialRecord::trial_key() const {
    return join_key({cell_key(), std::to_string(review_id), std::to_string(repeat)});
}

json TrialRecord::to_json() const {
    json j{{"model", model},
           {"condition", promptkit::to_string(condition)},
           {"shots", shots},
           {"permutation", permutation},
           {"pair", pair_slug},
           {"review_id", review_id},
           {"gold", to_string(gold)},
           {"prompt_digest", prompt_digest},
           {"raw_output", raw_output},
           {"parsed", {{"label", labelspace::to_string(parsed_label)},
                       {"matched_via", labelspace::to_string(matched_via)}}},
           {"correct", correct},
           {"timestamp", timestamp}};
    if (repeat != 0) j["repeat"] = repeat;
    if (!error.empty()) j["error"] = error;
    return j;
}

TrialRecord TrialRecord::from_json(const json& j) {
    TrialRecord r;
    r.model = j.at("model").get<std::string>();
    r.condition = promptkit::condition_from_string(j.at("condition").get<std::string>());
    r.shots = j.at("shots").get<int>();
    r.permutation = j.at("permutation").get<std::string>();
    r.pair_slug = j.at("pair").get<std::string>();
    r.review_id = j.at("review_id").get<std::int64_t>();
    r.repeat = j.value("repeat", 0);
    r.gold = polarity_from_string(j.at("gold").get<std::string>());
    r.prompt_digest = j.at("prompt_digest").get<std::string>();
    r.raw_output = j.at("raw_output").get<std::string>();
    const auto& parsed = j.at("parsed");
    const std::string label = parsed.at("label").get<std::string>();
    r.parsed_label = label == "positive"  ? labelspace::Label::Positive
                     : label == "negative" ? labelspace::Label::Negative
                                            : labelspace::Label::Unparseable;
    const std::string via = parsed.at("matched_via").get<std::string>();
    r.matched_via = via == "alias-exact"        ? labelspace::MatchTier::AliasExact
                    : via == "alias-whole-word"  ? labelspace::MatchTier::AliasWholeWord
                    : via == "original-fallback" ? labelspace::MatchTier::OriginalFallback
                                                  : labelspace::MatchTier::None;
    r.correct = j.at("correct").get<bool>();
    r.timestamp = j.value("timestamp", "");
    r.error = j.value("error", "");
    return r;
}

json MatrixConfig::to_json() const {
    json conds = json::array();
    for (auto c : conditions) conds.push_back(promptkit::to_string(c));
    json perms = json::array();
    for (auto p : permutations) perms.push_back(promptkit::to_string(p));
    return json{{"conditions", conds},
                {"shots", shots},
                {"permutations", perms},
                {"pairs", pairs},
                {"repeats", repeats}};
}

MatrixConfig MatrixConfig::from_json(const json& j) {
    MatrixConfig c;
    if (j.contains("conditions")) {
        c.conditions.clear();
        for (const auto& s : j.at("conditions")) {
            c.conditions.push_back(promptkit::condition_from_string(s.get<std::string>()));
        }
    }
    if (j.contains("shots")) c.shots = j.at("shots").get<std::vector<int>>();
    if (j.contains("permutations")) {
        c.permutations.clear();
        for (const auto& s : j.at("permutations")) {
            c.permutations.push_back(promptkit::permutation_from_string(s.get<std::string>()));
        }
    }
    if (j.contains("pairs")) c.pairs = j.at("pairs").get<std::vector<std::string>>();
    c.repeats = j.value("repeats", 1);
    if (c.repeats < 1) throw RunnerError("repeats must be >= 1");
    return c;
}

std::vector<Cell> expand_matrix(const std::vector<std::string>& models,
                                const MatrixConfig& config,
                                const std::vector<labelspace::AliasPair>& registry) {
    using promptkit::Condition;
    const auto& original = labelspace::pair_by_name(registry, "original");

    std::vector<const labelspace::AliasPair*> alias_pairs;
    for (const auto& name : config.pairs) {
        const auto& pair = labelspace::pair_by_name(registry, name);
        if (pair.alignment == labelspace::Alignment::Original) {
            throw RunnerError("matrix pair list must name disguise pairs, not " + pair.name);
        }
        alias_pairs.push_back(&pair);
    }

    std::vector<Cell> cells;
    for (const auto& model : models) {
        if (model.empty()) throw RunnerError("empty model name in matrix");
        for (auto condition : config.conditions) {
            switch (condition) {
                case Condition::CleanZeroShot:
                case Condition::AttackZeroShot:
                    cells.push_back({model, promptkit::make_spec(
                                                condition, 0,
                                                promptkit::PermutationScheme::Sequential,
                                                original)});
                    break;
                case Condition::AttackFewShot:
                    for (int shots : config.shots) {
                        for (auto perm : config.permutations) {
                            cells.push_back(
                                {model, promptkit::make_spec(condition, shots, perm, original)});
                        }
                    }
                    break;
                case Condition::AttackLddFewShot:
                    for (int shots : config.shots) {
                        for (auto perm : config.permutations) {
                            for (const auto* pair : alias_pairs) {
                                cells.push_back(
                                    {model, promptkit::make_spec(condition, shots, perm, *pair)});
                            }
                        }
                    }
                    break;
            }
        }
    }
    return cells;
}

json RunManifest::to_json() const {
    return json{{"run_id", run_id},
                {"models", models},
                {"matrix", matrix.to_json()},
                {"corpus_digest", corpus_digest},
                {"registry_digest", registry_digest},
                {"backend_params", backend_params}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.models = j.at("models").get<std::vector<std::string>>();
    m.matrix = MatrixConfig::from_json(j.at("matrix"));
    m.corpus_digest = j.at("corpus_digest").get<std::string>();
    m.registry_digest = j.at("registry_digest").get<std::string>();
    m.backend_params = j.value("backend_params", json::object());
    return m;
}

void RunManifest::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw RunnerError("cannot write manifest: " + file.string());
    out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw RunnerError("cannot read manifest: " + file.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw RunnerError(file.string() + ": bad manifest JSON: " + e.what());
    }
    return from_json(doc);
}

RunManifest make_manifest(std::string run_id, std::vector<std::string> models,
                          MatrixConfig matrix, const corpus::CorpusSplit& split,
                          const std::vector<labelspace::AliasPair>& registry,
                          json backend_params) {
    RunManifest m;
    m.run_id = std::move(run_id);
    m.models = std::move(models);
    m.matrix = std::move(matrix);
    m.corpus_digest = corpus::split_digest(split);
    m.registry_digest = labelspace::registry_digest(registry);
    m.backend_params = std::move(backend_params);
    return m;
}

std::vector<TrialRecord> load_trials(const std::filesystem::path& trials_file) {
    std::ifstream in(trials_file, std::ios::binary);
    if (!in) throw RunnerError("cannot read trial log: " + trials_file.string());
    std::vector<TrialRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(TrialRecord::from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw RunnerError(trials_file.string() + ":" + std::to_string(line_no) +
                              ": bad trial record: " + e.what());
        }
    }
    return records;
}

void verify_unique(const std::vector<TrialRecord>& records) {
    std::set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.trial_key()).second) {
            throw RunnerError("duplicate trial: " + r.trial_key());
        }
    }
}

ExecuteResult execute(const RunManifest& manifest, const corpus::CorpusSplit& split,
                      const std::vector<labelspace::AliasPair>& registry,
                      backends::Backend& backend, const std::filesystem::path& run_dir,
                      const ExecuteOptions& options) {
    if (options.parallelism < 1) throw RunnerError("parallelism must be >= 1");
    corpus::validate_split(split);
    if (corpus::split_digest(split) != manifest.corpus_digest) {
        throw RunnerError("corpus digest mismatch: the loaded split is not the one the "
                          "manifest pins");
    }
    if (labelspace::registry_digest(registry) != manifest.registry_digest) {
        throw RunnerError("registry digest mismatch: the loaded alias registry is not the one "
                          "the manifest pins");
    }

    std::filesystem::create_directories(run_dir);
    const auto manifest_path = run_dir / "manifest.json";
    if (std::filesystem::exists(manifest_path)) {
        const RunManifest existing = RunManifest::load(manifest_path);
        if (existing.to_json() != manifest.to_json()) {
            throw RunnerError("run directory " + run_dir.string() +
                              " belongs to a different manifest");
        }
    } else {
        manifest.save(manifest_path);
    }

    const std::vector<Cell> cells = expand_matrix(manifest.models, manifest.matrix, registry);

    ExecuteResult result;
    result.log_path = run_dir / "trials.jsonl";
    result.planned = cells.size() * split.test.size() *
                     static_cast<std::size_t>(manifest.matrix.repeats);

    std::set<std::string> done;
    if (std::filesystem::exists(result.log_path)) {
        for (const auto& r : load_trials(result.log_path)) done.insert(r.trial_key());
    }

    // Work list in deterministic matrix order.
    std::vector<WorkItem> work;
    {
        TrialRecord probe;
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
            probe.model = cells[ci].model;
            probe.condition = cells[ci].spec.condition;
            probe.shots = cells[ci].spec.shots;
            probe.permutation = promptkit::permutation_label(cells[ci].spec);
            probe.pair_slug = cells[ci].spec.pair.slug;
            for (std::size_t ri = 0; ri < split.test.size(); ++ri) {
                probe.review_id = split.test[ri].id;
                for (int rep = 0; rep < manifest.matrix.repeats; ++rep) {
                    probe.repeat = rep;
                    if (done.contains(probe.trial_key())) continue;
                    work.push_back({ci, ri, rep});
                }
            }
        }
    }
    result.resumed = done.size();
    if (options.trial_budget != 0 && work.size() > options.trial_budget) {
        work.resize(options.trial_budget);
    }

    std::ofstream log(result.log_path, std::ios::binary | std::ios::app);
    if (!log) throw RunnerError("cannot open trial log for append: " + result.log_path.string());

    std::mutex log_mutex;
    std::mutex retry_mutex;
    std::vector<std::pair<WorkItem, std::string>> failed;  // item + first error
    std::atomic<std::size_t> next_item{0};
    std::atomic<std::size_t> error_count{0};
    std::atomic<bool> aborted{false};
    const std::size_t abort_at = work.empty()
                                     ? std::numeric_limits<std::size_t>::max()
                                     : static_cast<std::size_t>(
                                           options.abort_error_fraction *
                                           static_cast<double>(work.size()));

    auto run_trial = [&](const WorkItem& item, std::string* failure) -> TrialRecord {
        const Cell& cell = cells[item.cell_index];
        const corpus::Review& target = split.test[item.review_index];

        TrialRecord record;
        record.model = cell.model;
        record.condition = cell.spec.condition;
        record.shots = cell.spec.shots;
        record.permutation = promptkit::permutation_label(cell.spec);
        record.pair_slug = cell.spec.pair.slug;
        record.review_id = target.id;
        record.repeat = item.repeat;
        record.gold = target.gold;

        const std::string prompt =
            promptkit::render_for(cell.spec, split.train, target, options.max_demo_chars);
        record.prompt_digest = sha256_hex(prompt);
        try {
            const backends::Completion completion =
                backend.complete(cell.model, prompt, record.trial_key());
            const auto parsed = labelspace::parse_prediction(completion.text, cell.spec.pair,
                                                             options.strictness);
            record.raw_output = completion.text;
            record.parsed_label = parsed.label;
            record.matched_via = parsed.matched_via;
            record.correct = labelspace::matches(parsed.label, target.gold);
        } catch (const backends::BackendError& e) {
            if (failure) *failure = e.what();
            record.raw_output.clear();
            record.parsed_label = labelspace::Label::Unparseable;
            record.matched_via = labelspace::MatchTier::None;
            record.correct = false;
            record.error = e.what();
        }
        record.timestamp = utc_now_iso8601();
        return record;
    };

    auto append = [&](const TrialRecord& record) {
        std::lock_guard<std::mutex> lock(log_mutex);
        log << record.to_json().dump() << '\n';
        log.flush();
    };

    std::exception_ptr worker_error;
    std::mutex worker_error_mutex;

    auto worker = [&] {
        try {
            while (!aborted.load()) {
                const std::size_t i = next_item.fetch_add(1);
                if (i >= work.size()) return;
                std::string failure;
                TrialRecord record = run_trial(work[i], &failure);
                if (!failure.empty()) {
                    const std::size_t errors_so_far = error_count.fetch_add(1) + 1;
                    {
                        std::lock_guard<std::mutex> lock(retry_mutex);
                        failed.emplace_back(work[i], failure);
                    }
                    if (errors_so_far > abort_at) {
                        aborted.store(true);
                        throw RunAbortedError(
                            "aborting run: " + std::to_string(errors_so_far) + " of " +
                            std::to_string(work.size()) + " trials failed (threshold " +
                            std::to_string(abort_at) + ")");
                    }
                    continue;  // deferred to the retry pass, not logged yet
                }
                append(record);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(worker_error_mutex);
            if (!worker_error) worker_error = std::current_exception();
        }
    };

    {
        std::vector<std::thread> pool;
        const int threads = std::min<int>(options.parallelism,
                                          static_cast<int>(std::max<std::size_t>(work.size(), 1)));
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (worker_error) std::rethrow_exception(worker_error);

    // Run-level retry pass: failed trials get one more chance before they
    // are recorded as errored.
    std::size_t still_failed = 0;
    for (const auto& [item, first_error] : failed) {
        std::string failure;
        TrialRecord record = run_trial(item, &failure);
        if (!failure.empty()) ++still_failed;
        append(record);
    }

    result.executed = work.size();
    result.errors = still_failed;
    result.complete = done.size() + work.size() >= result.planned;
    return result;
}

}  // namespace ldd::runner
