#include "ldd/published.hpp"

#include <cmath>
#include <sstream>

namespace ldd::published {

namespace {

using metrics::Category;

constexpr Category H = Category::High;
constexpr Category M = Category::Moderate;
constexpr Category L = Category::Low;

// Published values carry three decimals; a derived quantity may differ from
// its published rounding by exactly 0.001, so the comparison is inclusive
// with a small representation epsilon.
constexpr double kTolerance = 0.001 + 1e-9;

bool close(double a, double b) { return std::fabs(a - b) <= kTolerance; }

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

const std::array<const char*, kPairCount> kPairOrder = {
    "heaven-hell", "green-red", "good-bad", "happy-sad",
    "blue-yellow", "cat-dog",   "i-j",      "symbols"};

const std::array<ConditionRow, kModelCount> kConditionTable = {{
    {"gpt-5", 0.93, 0.475, 0.455},
    {"gemma3", 0.87, 0.695, 0.175},
    {"gemma3-12b", 0.895, 0.715, 0.180},
    {"gpt-4o", 0.905, 0.85, 0.055},
    {"gpt-4o-mini", 0.88, 0.825, 0.055},
    {"llama-3.2", 0.89, 0.675, 0.215},
    {"llama-3.2-1b", 0.73, 0.50, 0.230},
    {"mistral-large", 0.905, 0.82, 0.085},
    {"mistral-small", 0.91, 0.815, 0.095},
}};

const std::array<LddAverageRow, kModelCount> kLddAverages = {{
    {"gpt-5",
     {0.5925, 0.603125, 0.511875, 0.61125, 0.360625, 0.35, 0.20375, 0.019375},
     0.494375},
    {"gpt-4o",
     {0.910625, 0.90375, 0.91625, 0.870625, 0.898125, 0.883125, 0.86, 0.854375},
     0.884375},
    {"gpt-4o-mini",
     {0.825, 0.843125, 0.8825, 0.773125, 0.76375, 0.6, 0.80625, 0.491875},
     0.89},
    {"llama-3.2",
     {0.7275, 0.776875, 0.738125, 0.66375, 0.68625, 0.528125, 0.600625, 0.215},
     0.6425},
    {"llama-3.2-1b",
     {0.593125, 0.51625, 0.36625, 0.525, 0.529375, 0.569375, 0.513125, 0.173125},
     0.508125},
    {"mistral-large",
     {0.686875, 0.795625, 0.826875, 0.810625, 0.6775, 0.68125, 0.53375, 0.765625},
     0.845625},
    {"mistral-small",
     {0.855, 0.87, 0.8775, 0.815, 0.785, 0.78875, 0.826875, 0.52},
     0.868125},
    {"gemma3",
     {0.72125, 0.70625, 0.81375, 0.73125, 0.67125, 0.606875, 0.6225, 0.39},
     0.793125},
    {"gemma3-12b",
     {0.77375, 0.89, 0.831875, 0.7575, 0.735, 0.759375, 0.895, 0.7125},
     0.851875},
}};

const std::array<CategoryRow, kModelCount> kCategories = {{
    {"gpt-5", {H, H, H, H, L, L, L, L}, 4, 0, 4},
    {"gpt-4o", {H, H, H, M, H, M, M, M}, 4, 4, 0},
    {"gpt-4o-mini", {M, M, M, L, L, L, M, L}, 0, 4, 4},
    {"llama-3.2", {H, H, H, H, H, L, H, L}, 6, 0, 2},
    {"llama-3.2-1b", {H, H, L, H, H, H, H, L}, 6, 0, 2},
    {"mistral-large", {L, M, M, M, L, L, L, M}, 0, 4, 4},
    {"mistral-small", {M, H, H, M, M, M, M, L}, 2, 5, 1},
    {"gemma3", {M, L, H, M, L, L, L, L}, 1, 2, 5},
    {"gemma3-12b", {M, H, M, L, L, L, H, L}, 2, 2, 4},
}};

const std::array<RecoveryRow, kModelCount> kAlignedRecovery = {{
    {"gpt-5", 46.375, 25.438, 20.938, 0.646},
    {"gemma3", 22.188, 12.562, 9.625, 0.638},
    {"gemma3-12b", 26.625, 6.969, 19.656, 0.793},
    {"gpt-4o", 13.281, 3.219, 10.062, 0.805},
    {"gpt-4o-mini", 12.156, 10.969, 1.188, 0.526},
    {"llama-3.2", 29.781, 19.469, 10.312, 0.605},
    {"llama-3.2-1b", 42.531, 42.500, 0.031, 0.500},
    {"mistral-small", 17.688, 9.812, 7.875, 0.643},
    {"mistral-large", 6.406, 14.406, -8.000, 0.308},
}};

const std::array<RecoveryRow, kModelCount> kUnalignedRecovery = {{
    {"gpt-5", 17.188, 65.500, -48.313, 0.208},
    {"gemma3", 23.188, 47.656, -24.469, 0.327},
    {"gemma3-12b", 35.969, 23.875, 12.094, 0.601},
    {"gpt-4o", 14.688, 9.906, 4.781, 0.597},
    {"gpt-4o-mini", 10.813, 42.719, -31.906, 0.202},
    {"llama-3.2", 32.906, 66.406, -33.500, 0.331},
    {"llama-3.2-1b", 18.438, 29.188, -10.750, 0.387},
    {"mistral-small", 21.563, 38.531, -16.969, 0.359},
    {"mistral-large", 4.094, 35.188, -31.094, 0.104},
}};

FixtureCheck check_condition_table() {
    FixtureCheck check;
    check.name = "condition-table";
    for (const auto& row : kConditionTable) {
        ++check.checked;
        const double derived = metrics::accuracy_drop(row.normal, row.under_attack);
        if (!close(derived, row.delta)) {
            check.failures.push_back(std::string(row.model) + ": derived drop " + fmt(derived) +
                                     " vs published " + fmt(row.delta));
        }
    }
    check.passed = check.failures.empty();
    return check;
}

FixtureCheck check_categories() {
    FixtureCheck check;
    check.name = "category-table";
    for (int m = 0; m < kModelCount; ++m) {
        const auto& averages = kLddAverages[m];
        const auto& expected = kCategories[m];
        int high = 0, moderate = 0, low = 0;
        for (int p = 0; p < kPairCount; ++p) {
            ++check.checked;
            const Category derived = metrics::categorize(averages.by_pair[p],
                                                         averages.baseline);
            switch (derived) {
                case Category::High: ++high; break;
                case Category::Moderate: ++moderate; break;
                case Category::Low: ++low; break;
            }
            if (derived != expected.by_pair[p]) {
                check.failures.push_back(std::string(averages.model) + " / " + kPairOrder[p] +
                                         ": derived " + metrics::to_string(derived) +
                                         " vs published " +
                                         metrics::to_string(expected.by_pair[p]) + " (avg " +
                                         fmt(averages.by_pair[p]) + ", baseline " +
                                         fmt(averages.baseline) + ")");
            }
        }
        if (high != expected.high || moderate != expected.moderate || low != expected.low) {
            check.failures.push_back(std::string(averages.model) + ": derived counts " +
                                     std::to_string(high) + "/" + std::to_string(moderate) +
                                     "/" + std::to_string(low) + " vs published " +
                                     std::to_string(expected.high) + "/" +
                                     std::to_string(expected.moderate) + "/" +
                                     std::to_string(expected.low));
        }
    }
    check.passed = check.failures.empty();
    return check;
}

FixtureCheck check_recovery_tables() {
    FixtureCheck check;
    check.name = "recovery-tables";
    for (const auto* table : {&kAlignedRecovery, &kUnalignedRecovery}) {
        const char* set = table == &kAlignedRecovery ? "aligned" : "unaligned";
        for (const auto& row : *table) {
            ++check.checked;
            const double margin = row.avg_recovery - row.avg_regression;
            if (!close(margin, row.r_minus_r)) {
                check.failures.push_back(std::string(row.model) + " (" + set +
                                         "): derived R-R " + fmt(margin) + " vs published " +
                                         fmt(row.r_minus_r));
            }
            const auto ratio = metrics::recovery_ratio(row.avg_recovery, row.avg_regression);
            if (!ratio.has_value()) {
                check.failures.push_back(std::string(row.model) + " (" + set +
                                         "): ratio undefined");
            } else if (!close(*ratio, row.recovery_ratio)) {
                check.failures.push_back(std::string(row.model) + " (" + set +
                                         "): derived ratio " + fmt(*ratio) + " vs published " +
                                         fmt(row.recovery_ratio));
            }
        }
    }
    check.passed = check.failures.empty();
    return check;
}

std::vector<FixtureCheck> run_all_checks() {
    return {check_condition_table(), check_categories(), check_recovery_tables()};
}

}  // namespace ldd::published
