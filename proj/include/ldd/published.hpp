#pragma once

#include <array>
#include <string>
#include <vector>

#include "ldd/metrics.hpp"

namespace ldd::published {

/// Reference evaluation results bundled as fixtures. Every derived quantity
/// (accuracy drop, effectiveness category, R-R margin, recovery ratio) is
/// recomputed from the primary values and checked against the published
/// rows; nothing here feeds the live pipeline.

inline constexpr int kModelCount = 9;
inline constexpr int kPairCount = 8;

/// Disguise pairs in reference column order.
extern const std::array<const char*, kPairCount> kPairOrder;

/// Zero-shot accuracy before/after the class-directive injection.
struct ConditionRow {
    const char* model;
    double normal;
    double under_attack;
    double delta;  // published drop, re-derived by the checks
};
extern const std::array<ConditionRow, kModelCount> kConditionTable;

/// Cross-shot average disguised accuracy per (model, pair), plus the
/// undefended few-shot baseline column.
struct LddAverageRow {
    const char* model;
    std::array<double, kPairCount> by_pair;
    double baseline;  // "positive vs. negative" column
};
extern const std::array<LddAverageRow, kModelCount> kLddAverages;

/// Published effectiveness categories and per-model category counts.
struct CategoryRow {
    const char* model;
    std::array<metrics::Category, kPairCount> by_pair;
    int high;
    int moderate;
    int low;
};
extern const std::array<CategoryRow, kModelCount> kCategories;

/// Per-model recovery/regression summary for one label set.
struct RecoveryRow {
    const char* model;
    double avg_recovery;
    double avg_regression;
    double r_minus_r;       // published margin
    double recovery_ratio;  // published ratio
};
extern const std::array<RecoveryRow, kModelCount> kAlignedRecovery;
extern const std::array<RecoveryRow, kModelCount> kUnalignedRecovery;

struct FixtureCheck {
    std::string name;
    bool passed = false;
    int checked = 0;
    std::vector<std::string> failures;
};

/// Re-derives the accuracy-drop row from the normal/under-attack rows.
FixtureCheck check_condition_table();

/// Re-derives all 72 categories (and the per-model counts) from the
/// published averages with the per-model baseline column.
FixtureCheck check_categories();

/// Re-derives both R-R rows and both recovery-ratio rows from the published
/// average recovery/regression pairs.
FixtureCheck check_recovery_tables();

std::vector<FixtureCheck> run_all_checks();

}  // namespace ldd::published
