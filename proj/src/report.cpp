#include "ldd/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ldd::report {

namespace {

// Matches the reference tables' precision.
std::string num(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string render_text_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t i = 0; i < row.size(); ++i) {
            widths[i] = std::max(widths[i], row[i].size());
        }
    }
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += pad(row[i], widths[i]);
            if (i + 1 < row.size()) out += "  ";
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += '\n';
    }
    return out;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += csv_escape(fields[i]);
    }
    out += '\n';
    return out;
}

// Stable pair column order: the built-in registry's disguise pairs first,
// then any custom slugs alphabetically.
std::vector<std::string> pair_columns(const metrics::RunAnalysis& analysis) {
    std::set<std::string> seen;
    for (const auto& m : analysis.models) {
        for (const auto& p : m.pairs) seen.insert(p.pair_slug);
    }
    std::vector<std::string> ordered;
    for (const auto& pair : labelspace::registry()) {
        if (seen.erase(pair.slug) > 0) ordered.push_back(pair.slug);
    }
    ordered.insert(ordered.end(), seen.begin(), seen.end());
    return ordered;
}

const metrics::PairOutcome* find_pair(const metrics::ModelOutcome& m, const std::string& slug) {
    for (const auto& p : m.pairs) {
        if (p.pair_slug == slug) return &p;
    }
    return nullptr;
}

std::string md_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    bool header = true;
    while (std::getline(in, line)) {
        std::string row = "|";
        std::size_t cols = 1;
        std::string field;
        std::istringstream fields(line);
        while (std::getline(fields, field, ',')) {
            row += " " + field + " |";
            ++cols;
        }
        out += row + "\n";
        if (header) {
            out += "|";
            for (std::size_t i = 1; i < cols; ++i) out += " --- |";
            out += "\n";
            header = false;
        }
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ReportError("unwritable output: " + path.string());
    out << content;
}

}  // namespace

Format format_from_string(std::string_view s) {
    if (s == "csv") return Format::Csv;
    if (s == "md") return Format::Md;
    if (s == "json") return Format::Json;
    throw ReportError("unknown format: " + std::string(s));
}

TableDoc emit_condition_table(const metrics::RunAnalysis& analysis) {
    std::vector<std::string> missing;
    for (const auto& m : analysis.models) {
        if (!m.clean_accuracy) missing.push_back(m.model + " (clean zero-shot)");
        if (!m.attack_accuracy) missing.push_back(m.model + " (attacked zero-shot)");
    }
    if (!missing.empty()) {
        std::string what = "condition table is missing cells:";
        for (const auto& cell : missing) what += " " + cell;
        throw ReportError(what);
    }

    TableDoc doc;
    doc.csv = csv_line({"model", "normal", "under_attack", "delta"});
    std::vector<std::vector<std::string>> text_rows;
    text_rows.push_back({"condition"});
    std::vector<std::string> normal_row{"normal"}, attack_row{"under-attack"}, delta_row{"delta"};
    for (const auto& m : analysis.models) {
        const double delta = metrics::accuracy_drop(*m.clean_accuracy, *m.attack_accuracy);
        doc.csv += csv_line(
            {m.model, num(*m.clean_accuracy), num(*m.attack_accuracy), num(delta)});
        text_rows[0].push_back(m.model);
        normal_row.push_back(num(*m.clean_accuracy));
        attack_row.push_back(num(*m.attack_accuracy));
        delta_row.push_back(num(delta));
    }
    text_rows.push_back(normal_row);
    text_rows.push_back(attack_row);
    text_rows.push_back(delta_row);
    doc.text = render_text_table(text_rows);
    return doc;
}

std::pair<TableDoc, TableDoc> emit_ldd_tables(const metrics::RunAnalysis& analysis) {
    const std::vector<std::string> columns = pair_columns(analysis);

    std::vector<std::string> incomplete;
    for (const auto& m : analysis.models) {
        for (const auto& p : m.pairs) {
            if (!p.complete) incomplete.push_back(m.model + "/" + p.pair_slug);
        }
    }
    if (!incomplete.empty()) {
        std::string what = "incomplete shot coverage:";
        for (const auto& cell : incomplete) what += " " + cell;
        throw ReportError(what);
    }

    TableDoc averages;
    {
        std::vector<std::string> header{"model"};
        header.insert(header.end(), columns.begin(), columns.end());
        header.push_back("original-baseline");
        averages.csv = csv_line(header);
        std::vector<std::vector<std::string>> text_rows{header};
        for (const auto& m : analysis.models) {
            std::vector<std::string> row{m.model};
            for (const auto& col : columns) {
                const auto* p = find_pair(m, col);
                row.push_back(p ? num(p->avg_ldd_accuracy) : std::string());
            }
            row.push_back(opt_num(m.fewshot_baseline_avg));
            averages.csv += csv_line(row);
            text_rows.push_back(row);
        }
        averages.text = render_text_table(text_rows);
    }

    TableDoc categories;
    {
        std::vector<std::string> header{"model"};
        header.insert(header.end(), columns.begin(), columns.end());
        header.push_back("num_high");
        header.push_back("num_moderate");
        header.push_back("num_low");
        categories.csv = csv_line(header);
        std::vector<std::vector<std::string>> text_rows{header};
        for (const auto& m : analysis.models) {
            std::vector<std::string> row{m.model};
            int high = 0, moderate = 0, low = 0;
            for (const auto& col : columns) {
                const auto* p = find_pair(m, col);
                if (p == nullptr || !p->category) {
                    row.push_back("");
                    continue;
                }
                row.push_back(metrics::to_string(*p->category));
                switch (*p->category) {
                    case metrics::Category::High: ++high; break;
                    case metrics::Category::Moderate: ++moderate; break;
                    case metrics::Category::Low: ++low; break;
                }
            }
            row.push_back(std::to_string(high));
            row.push_back(std::to_string(moderate));
            row.push_back(std::to_string(low));
            categories.csv += csv_line(row);
            text_rows.push_back(row);
        }
        categories.text = render_text_table(text_rows);
    }
    return {averages, categories};
}

TableDoc emit_recovery_table(const metrics::RunAnalysis& analysis) {
    TableDoc doc;
    doc.csv = csv_line(
        {"model", "label_set", "avg_recovery", "avg_regression", "r_minus_r", "recovery_ratio"});
    std::vector<std::vector<std::string>> text_rows{
        {"model", "label_set", "avg_recovery", "avg_regression", "r_minus_r", "recovery_ratio"}};
    for (const auto& m : analysis.models) {
        for (const auto& s : m.summaries) {
            std::vector<std::string> row{m.model,
                                         labelspace::to_string(s.label_set),
                                         num(s.avg_recovery),
                                         num(s.avg_regression),
                                         num(s.r_minus_r),
                                         s.ratio ? num(*s.ratio) : "n/a"};
            doc.csv += csv_line(row);
            text_rows.push_back(row);
        }
    }
    doc.text = render_text_table(text_rows);
    return doc;
}

std::vector<CurveFile> emit_curves(const metrics::RunAnalysis& analysis) {
    std::vector<CurveFile> files;
    for (const auto& m : analysis.models) {
        for (const auto& p : m.pairs) {
            std::set<int> shot_values;
            for (const auto& [shots, acc] : p.ldd_by_shots) {
                (void)acc;
                shot_values.insert(shots);
            }
            for (const auto& [shots, acc] : m.attacked_fewshot_by_shots) {
                (void)acc;
                shot_values.insert(shots);
            }
            CurveFile file;
            file.filename = m.model + "_" + p.pair_slug + ".csv";
            file.csv = "shots,clean,attacked,ldd\n";
            for (int shots : shot_values) {
                // Clean few-shot cells are not part of the standard matrix;
                // the column stays an explicit null until a log provides them.
                std::string attacked, ldd;
                auto a = m.attacked_fewshot_by_shots.find(shots);
                if (a != m.attacked_fewshot_by_shots.end()) attacked = num(a->second.value());
                auto l = p.ldd_by_shots.find(shots);
                if (l != p.ldd_by_shots.end()) ldd = num(l->second.value());
                file.csv += csv_line({std::to_string(shots), "", attacked, ldd});
            }
            files.push_back(std::move(file));
        }
    }
    std::sort(files.begin(), files.end(),
              [](const CurveFile& a, const CurveFile& b) { return a.filename < b.filename; });
    return files;
}

std::vector<std::filesystem::path> write_bundle(const metrics::RunAnalysis& analysis,
                                                const std::filesystem::path& out, Format format) {
    std::filesystem::create_directories(out);
    std::vector<std::filesystem::path> written;

    const auto summary_path = out / "summary.json";
    write_file(summary_path, analysis.to_json().dump(2) + "\n");
    written.push_back(summary_path);
    if (format == Format::Json) return written;

    const TableDoc table2 = emit_condition_table(analysis);
    const auto [table3, table4] = emit_ldd_tables(analysis);
    const TableDoc table5 = emit_recovery_table(analysis);

    const std::pair<const char*, const TableDoc*> tables[] = {
        {"table2", &table2}, {"table3", &table3}, {"table4", &table4}, {"table5", &table5}};
    for (const auto& [name, doc] : tables) {
        const auto csv_path = out / (std::string(name) + ".csv");
        write_file(csv_path, doc->csv);
        written.push_back(csv_path);
        if (format == Format::Md) {
            const auto md_path = out / (std::string(name) + ".md");
            write_file(md_path, md_from_csv(doc->csv));
            written.push_back(md_path);
        }
    }

    const auto curves_dir = out / "curves";
    std::filesystem::create_directories(curves_dir);
    for (const auto& curve : emit_curves(analysis)) {
        const auto path = curves_dir / curve.filename;
        write_file(path, curve.csv);
        written.push_back(path);
    }
    return written;
}

}  // namespace ldd::report
