#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldd/metrics.hpp"

namespace ldd::report {

class ReportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A rendered table: CSV plus an aligned plain-text view. Every number is
/// recomputed from the analysis; nothing is passed through pre-aggregated.
struct TableDoc {
    std::string csv;
    std::string text;
};

enum class Format { Csv, Md, Json };
Format format_from_string(std::string_view s);

/// Zero-shot accuracy before/after injection with the drop recomputed.
/// Throws ReportError naming every model missing one of the two cells.
TableDoc emit_condition_table(const metrics::RunAnalysis& analysis);

/// Cross-shot disguised-accuracy averages and the category table with
/// per-model High/Moderate/Low counts.
std::pair<TableDoc, TableDoc> emit_ldd_tables(const metrics::RunAnalysis& analysis);

/// Recovery/regression summaries per (model, label set).
TableDoc emit_recovery_table(const metrics::RunAnalysis& analysis);

/// Per-shot accuracy series, one CSV per (model, pair), schema
/// `shots,clean,attacked,ldd`. Gaps render as empty fields, never
/// interpolated.
struct CurveFile {
    std::string filename;  // <model>_<pair>.csv
    std::string csv;
};
std::vector<CurveFile> emit_curves(const metrics::RunAnalysis& analysis);

/// Writes the full bundle under `out`: table2..table5 plus curves/ and
/// summary.json (format Md adds .md renderings, Json writes only the
/// summary). Returns the files written.
std::vector<std::filesystem::path> write_bundle(const metrics::RunAnalysis& analysis,
                                                const std::filesystem::path& out, Format format);

}  // namespace ldd::report
