#include "d3g/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "d3g/errors.hpp"

namespace d3g {

using nlohmann::json;

double top1_accuracy(std::span<const Prediction> preds, std::span<const ClassValue> labels) {
    if (preds.empty()) {
        throw EmptyInputError("top1_accuracy: no predictions");
    }
    if (preds.size() != labels.size()) {
        throw InvalidConfigError("top1_accuracy: " + std::to_string(preds.size()) +
                                 " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    size_t correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        correct += preds[i].predicted == labels[i] ? 1 : 0;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
}

PerClassRow per_class_accuracy(std::span<const Prediction> preds,
                               std::span<const ClassValue> labels, const DemographicAxis& axis) {
    if (preds.empty()) {
        throw EmptyInputError("per_class_accuracy: no predictions");
    }
    if (preds.size() != labels.size()) {
        throw InvalidConfigError("per_class_accuracy: " + std::to_string(preds.size()) +
                                 " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    std::map<std::string, std::pair<size_t, size_t>> tally;  // label -> (correct, total)
    for (size_t i = 0; i < preds.size(); ++i) {
        auto& [correct, total] = tally[labels[i].label];
        ++total;
        correct += preds[i].predicted == labels[i] ? 1 : 0;
    }
    PerClassRow row;
    row.target_axis = axis.id;
    for (const std::string& value : axis.values) {
        auto it = tally.find(value);
        if (it == tally.end()) continue;  // zero support: absent, not 0
        const auto [correct, total] = it->second;
        PerClassEntry entry;
        entry.value = ClassValue{axis.id, value};
        entry.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
        entry.support = total;
        row.entries.push_back(std::move(entry));
    }
    return row;
}

double bias_gap(const PerClassRow& row) {
    if (row.entries.empty()) {
        throw EmptyInputError("bias_gap: row has no per-class entries");
    }
    double lo = row.entries.front().accuracy;
    double hi = lo;
    for (const PerClassEntry& e : row.entries) {
        lo = std::min(lo, e.accuracy);
        hi = std::max(hi, e.accuracy);
    }
    return hi - lo;
}

ReportFormat report_format_from_string(std::string_view name) {
    if (name == "table-text" || name == "txt" || name == "table") return ReportFormat::table_text;
    if (name == "csv") return ReportFormat::csv;
    if (name == "json-lines" || name == "jsonl") return ReportFormat::json_lines;
    throw UnknownFormatError(std::string(name));
}

std::string to_string(ReportFormat format) {
    switch (format) {
        case ReportFormat::table_text: return "table-text";
        case ReportFormat::csv: return "csv";
        case ReportFormat::json_lines: return "json-lines";
    }
    return "unknown";
}

namespace {

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string weight_cell(double w_text, double w_image) {
    return fmt2(w_text) + " / " + fmt2(w_image);
}

// Minimal fixed-width table: column 0 left-aligned, the rest right-aligned,
// separator row of dashes, no trailing spaces anywhere.
struct TextTable {
    std::vector<std::string> headers;
    std::vector<std::vector<std::string>> rows;

    std::string render() const {
        std::vector<size_t> width(headers.size());
        for (size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
        for (const auto& row : rows) {
            for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
        }
        std::ostringstream out;
        auto emit = [&](const std::vector<std::string>& cells) {
            for (size_t c = 0; c < cells.size(); ++c) {
                if (c > 0) out << " | ";
                const auto pad = width[c] - cells[c].size();
                if (c == 0) {
                    out << cells[c];
                    if (c + 1 < cells.size()) out << std::string(pad, ' ');
                } else {
                    out << std::string(pad, ' ') << cells[c];
                }
            }
            out << "\n";
        };
        emit(headers);
        for (size_t c = 0; c < headers.size(); ++c) {
            if (c > 0) out << "-+-";
            out << std::string(width[c], '-');
        }
        out << "\n";
        for (const auto& row : rows) emit(row);
        return out.str();
    }
};

std::vector<std::string> ordered_unique(const std::vector<std::string>& seq) {
    std::vector<std::string> out;
    for (const std::string& s : seq) {
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
    return out;
}

std::string metadata_block(const ReportMetadata& m) {
    std::ostringstream out;
    out << "# d3g evaluation report\n";
    out << "# dataset: " << m.dataset_name << "\n";
    for (const BackendDescriptor& b : m.backends) {
        out << "# backend: id=" << b.id << " kind=" << to_string(b.kind) << " dim="
            << b.embedding_dim << " version=" << b.version << "\n";
    }
    out << "# seed: " << m.seed << "\n";
    if (!m.note.empty()) out << "# note: " << m.note << "\n";
    if (!m.timestamp.empty()) out << "# timestamp: " << m.timestamp << "\n";
    return out.str();
}

std::string render_table_text(const EvaluationReport& report) {
    auto display = [&](const std::string& axis_id) {
        for (const auto& [id, name] : report.axis_display) {
            if (id == axis_id) return name;
        }
        return axis_id;
    };

    std::ostringstream out;
    out << metadata_block(report.metadata);

    std::vector<std::string> target_seq;
    for (const EvaluationCell& cell : report.grid) target_seq.push_back(cell.target_axis);
    for (const std::string& target : ordered_unique(target_seq)) {
        std::vector<std::string> method_seq;
        std::vector<std::string> augment_seq;
        for (const EvaluationCell& cell : report.grid) {
            if (cell.target_axis != target) continue;
            method_seq.push_back(to_string(cell.method));
            augment_seq.push_back(cell.augment_axis);
        }
        const auto methods = ordered_unique(method_seq);
        const auto augments = ordered_unique(augment_seq);

        auto find_cell = [&](const std::string& method,
                             const std::string& augment) -> const EvaluationCell* {
            for (const EvaluationCell& cell : report.grid) {
                if (cell.target_axis == target && to_string(cell.method) == method &&
                    cell.augment_axis == augment) {
                    return &cell;
                }
            }
            return nullptr;
        };

        out << "\n== Target: " << display(target) << " ==\n";

        TextTable accuracy;
        accuracy.headers.push_back("Method");
        for (const std::string& a : augments) accuracy.headers.push_back(display(a));
        TextTable weights = accuracy;

        for (const std::string& method : methods) {
            std::vector<std::string> acc_row{display_name(prototype_mode_from_string(method))};
            std::vector<std::string> w_row = acc_row;
            for (const std::string& augment : augments) {
                const EvaluationCell* cell = find_cell(method, augment);
                acc_row.push_back(cell ? fmt2(cell->top1) : "-");
                w_row.push_back(cell ? weight_cell(cell->w_text, cell->w_image) : "-");
            }
            accuracy.rows.push_back(std::move(acc_row));
            weights.rows.push_back(std::move(w_row));
        }

        out << "\nTop-1 accuracy (%)\n" << accuracy.render();
        out << "\nFusion weights (text / image)\n" << weights.render();
    }

    for (const PerClassRow& row : report.per_class) {
        out << "\nPer-class accuracy (%): " << display_name(row.method) << ", target "
            << display(row.target_axis) << ", augment " << display(row.augment_axis) << "\n";
        TextTable table;
        table.headers = {"Class", "Accuracy", "Support"};
        for (const PerClassEntry& e : row.entries) {
            table.rows.push_back({e.value.label, fmt2(e.accuracy), std::to_string(e.support)});
        }
        table.rows.push_back({"Gap", fmt2(bias_gap(row)), "-"});
        out << table.render();
    }
    return out.str();
}

std::string render_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << metadata_block(report.metadata);
    out << "kind,method,target_axis,augment_axis,class_value,top1,w_text,w_image,accuracy,"
           "support\n";
    for (const EvaluationCell& cell : report.grid) {
        out << "cell," << to_string(cell.method) << "," << cell.target_axis << ","
            << cell.augment_axis << ",," << fmt2(cell.top1) << "," << fmt2(cell.w_text) << ","
            << fmt2(cell.w_image) << ",," << cell.support << "\n";
    }
    for (const PerClassRow& row : report.per_class) {
        for (const PerClassEntry& e : row.entries) {
            out << "per_class," << to_string(row.method) << "," << row.target_axis << ","
                << row.augment_axis << "," << e.value.label << ",,,," << fmt2(e.accuracy) << ","
                << e.support << "\n";
        }
        out << "bias_gap," << to_string(row.method) << "," << row.target_axis << ","
            << row.augment_axis << ",,,,," << fmt2(bias_gap(row)) << ",\n";
    }
    return out.str();
}

json prompt_mode_json(PrototypeMode mode) { return to_string(mode); }

std::string render_jsonl(const EvaluationReport& report) {
    std::ostringstream out;
    {
        json meta;
        meta["kind"] = "metadata";
        meta["dataset"] = report.metadata.dataset_name;
        json backends = json::array();
        for (const BackendDescriptor& b : report.metadata.backends) {
            backends.push_back({{"id", b.id},
                                {"backend_kind", to_string(b.kind)},
                                {"dim", b.embedding_dim},
                                {"version", b.version}});
        }
        meta["backends"] = backends;
        meta["seed"] = report.metadata.seed;
        meta["note"] = report.metadata.note;
        meta["timestamp"] = report.metadata.timestamp;
        json display = json::array();
        for (const auto& [id, name] : report.axis_display) display.push_back({id, name});
        meta["axis_display"] = display;
        out << meta.dump() << "\n";
    }
    for (const EvaluationCell& cell : report.grid) {
        json j{{"kind", "cell"},
               {"method", prompt_mode_json(cell.method)},
               {"target_axis", cell.target_axis},
               {"augment_axis", cell.augment_axis},
               {"top1", cell.top1},
               {"w_text", cell.w_text},
               {"w_image", cell.w_image},
               {"support", cell.support}};
        out << j.dump() << "\n";
    }
    for (const PerClassRow& row : report.per_class) {
        json entries = json::array();
        for (const PerClassEntry& e : row.entries) {
            entries.push_back({{"axis", e.value.axis},
                               {"label", e.value.label},
                               {"accuracy", e.accuracy},
                               {"support", e.support}});
        }
        json j{{"kind", "per_class"},
               {"method", prompt_mode_json(row.method)},
               {"target_axis", row.target_axis},
               {"augment_axis", row.augment_axis},
               {"entries", entries}};
        out << j.dump() << "\n";
    }
    return out.str();
}

}  // namespace

std::string render_report(const EvaluationReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::table_text: return render_table_text(report);
        case ReportFormat::csv: return render_csv(report);
        case ReportFormat::json_lines: return render_jsonl(report);
    }
    throw UnknownFormatError(std::to_string(static_cast<int>(format)));
}

EvaluationReport parse_report_jsonl(std::string_view bytes) {
    EvaluationReport report;
    bool saw_metadata = false;
    std::istringstream in{std::string(bytes)};
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("report.jsonl", line_no, e.what());
        }
        try {
            const std::string kind = j.at("kind").get<std::string>();
            if (kind == "metadata") {
                saw_metadata = true;
                report.metadata.dataset_name = j.at("dataset").get<std::string>();
                for (const json& b : j.at("backends")) {
                    BackendDescriptor d;
                    d.id = b.at("id").get<std::string>();
                    const std::string k = b.at("backend_kind").get<std::string>();
                    d.kind = k == "remote"     ? BackendKind::remote
                             : k == "file-store" ? BackendKind::file_store
                                                 : BackendKind::synthetic;
                    d.embedding_dim = b.at("dim").get<int>();
                    d.version = b.at("version").get<std::string>();
                    report.metadata.backends.push_back(std::move(d));
                }
                report.metadata.seed = j.at("seed").get<uint64_t>();
                report.metadata.note = j.at("note").get<std::string>();
                report.metadata.timestamp = j.at("timestamp").get<std::string>();
                for (const json& pair : j.at("axis_display")) {
                    report.axis_display.emplace_back(pair.at(0).get<std::string>(),
                                                     pair.at(1).get<std::string>());
                }
            } else if (kind == "cell") {
                EvaluationCell cell;
                cell.method = prototype_mode_from_string(j.at("method").get<std::string>());
                cell.target_axis = j.at("target_axis").get<std::string>();
                cell.augment_axis = j.at("augment_axis").get<std::string>();
                cell.top1 = j.at("top1").get<double>();
                cell.w_text = j.at("w_text").get<double>();
                cell.w_image = j.at("w_image").get<double>();
                cell.support = j.at("support").get<size_t>();
                report.grid.push_back(std::move(cell));
            } else if (kind == "per_class") {
                PerClassRow row;
                row.method = prototype_mode_from_string(j.at("method").get<std::string>());
                row.target_axis = j.at("target_axis").get<std::string>();
                row.augment_axis = j.at("augment_axis").get<std::string>();
                for (const json& e : j.at("entries")) {
                    PerClassEntry entry;
                    entry.value.axis = e.at("axis").get<std::string>();
                    entry.value.label = e.at("label").get<std::string>();
                    entry.accuracy = e.at("accuracy").get<double>();
                    entry.support = e.at("support").get<size_t>();
                    row.entries.push_back(std::move(entry));
                }
                report.per_class.push_back(std::move(row));
            } else {
                throw ParseError("report.jsonl", line_no, "unknown record kind: " + kind);
            }
        } catch (const json::exception& e) {
            throw ParseError("report.jsonl", line_no, e.what());
        }
    }
    if (!saw_metadata) {
        throw ParseError("report.jsonl: missing metadata record");
    }
    return report;
}

}  // namespace d3g
