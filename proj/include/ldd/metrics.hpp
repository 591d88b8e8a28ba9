#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldd/labelspace.hpp"
#include "ldd/promptkit.hpp"
#include "ldd/runner.hpp"

namespace ldd::metrics {

class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact rational on int64. All averaging accumulates in this type and
/// divides to double once at the end, so results are order-independent and
/// identities like acc(cur) - acc(base) == (recovery - regression)/n hold
/// exactly, which IEEE doubles do not guarantee.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Fraction of(std::int64_t num, std::int64_t den);
    Fraction operator+(const Fraction& o) const;
    Fraction operator-(const Fraction& o) const;
    Fraction over(std::int64_t k) const;  // division by a positive integer
    double value() const;

    friend bool operator==(const Fraction&, const Fraction&) = default;
};

Fraction mean(const std::vector<Fraction>& values);  // throws on empty

/// Identity of one experiment cell.
struct CellKey {
    std::string model;
    promptkit::Condition condition = promptkit::Condition::CleanZeroShot;
    int shots = 0;
    std::string permutation;  // "none" | "sequential" | "reverse"
    std::string pair_slug;

    friend auto operator<=>(const CellKey&, const CellKey&) = default;
    std::string str() const;
};

/// Aggregated outcome of one cell over the test set.
struct CellScore {
    CellKey key;
    int n = 0;
    int correct = 0;
    int errors = 0;  // backend-failed trials (scored incorrect)
    std::map<std::int64_t, bool> per_review;  // review_id -> correct (repeat 0)
    int recovery = 0;
    int regression = 0;
    bool has_baseline = false;

    Fraction accuracy_fraction() const;
    double accuracy() const;
};

/// correct / n over a per-review correctness map. Throws on empty input.
double accuracy(const std::map<std::int64_t, bool>& per_review);

/// clean - attacked.
double accuracy_drop(double clean, double attacked);

/// Transition counts against the attack baseline:
/// recovery = wrong->right, regression = right->wrong.
/// Throws MetricsError when the review-id key sets differ.
std::pair<int, int> recovery_regression(const std::map<std::int64_t, bool>& baseline,
                                        const std::map<std::int64_t, bool>& current);

/// R / (R + S); nullopt when R + S == 0. Throws on negative inputs.
std::optional<double> recovery_ratio(double recovery, double regression);

enum class Category { High, Moderate, Low };

std::string to_string(Category c);
Category category_from_string(std::string_view s);

/// Effectiveness of a disguise vocabulary against the undefended few-shot
/// baseline: High when the cross-shot average exceeds the baseline, Low when
/// it falls more than 10% of the baseline below it, Moderate between.
Category categorize(double avg_ldd, double baseline_avg);

enum class AvgMode { PermMean, Pooled };

std::string to_string(AvgMode m);
AvgMode avg_mode_from_string(std::string_view s);

/// Per-(model, label set) recovery/regression summary.
struct MetricsSummary {
    std::string model;
    labelspace::Alignment label_set = labelspace::Alignment::Original;
    double avg_recovery = 0.0;
    double avg_regression = 0.0;
    double r_minus_r = 0.0;
    std::optional<double> ratio;  // undefined when avg_recovery + avg_regression == 0
    int cells = 0;
};

/// Means of recovery/regression over the given cells. PermMean averages the
/// two permutations of each (pair, shots) group before averaging groups;
/// Pooled averages cells flat. Throws on an empty cell set.
MetricsSummary summarize_label_set(const std::vector<const CellScore*>& cells,
                                   const std::string& model, labelspace::Alignment label_set,
                                   AvgMode mode);

/// Cross-shot LDD outcome for one (model, pair).
struct PairOutcome {
    std::string model;
    std::string pair_slug;
    labelspace::Alignment alignment = labelspace::Alignment::Aligned;
    std::map<int, Fraction> ldd_by_shots;  // shots -> perm-mean accuracy
    bool complete = false;                 // all configured shots present
    double avg_ldd_accuracy = 0.0;
    double baseline_avg = 0.0;
    std::optional<Category> category;      // present when comparable
};

/// Everything the report layer needs for one model.
struct ModelOutcome {
    std::string model;
    std::optional<double> clean_accuracy;   // clean zero-shot
    std::optional<double> attack_accuracy;  // attacked zero-shot (the baseline cell)
    std::map<int, Fraction> attacked_fewshot_by_shots;
    std::optional<double> fewshot_baseline_avg;
    std::vector<PairOutcome> pairs;
    std::vector<MetricsSummary> summaries;
};

struct RunAnalysis {
    AvgMode avg_mode = AvgMode::PermMean;
    std::vector<CellScore> cells;  // sorted by key
    std::vector<ModelOutcome> models;
    std::vector<std::string> flagged_cells;  // cells containing backend errors

    const CellScore* find_cell(const CellKey& key) const;
    nlohmann::json to_json() const;
};

/// Aggregates a trial log into cell scores, baselines, cross-shot averages,
/// categories, and label-set summaries.
RunAnalysis analyze(const std::vector<runner::TrialRecord>& records,
                    const std::vector<labelspace::AliasPair>& registry,
                    AvgMode mode = AvgMode::PermMean);

}  // namespace ldd::metrics
