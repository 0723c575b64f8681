#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d3g/backend.hpp"
#include "d3g/pipeline.hpp"
#include "d3g/taxonomy.hpp"

namespace d3g {

// One cell of the method x augmenting-strategy grid: top-1 accuracy plus the
// fusion weight pair that produced it.
struct EvaluationCell {
    PrototypeMode method{PrototypeMode::clip_baseline};
    std::string target_axis;
    std::string augment_axis;
    double top1{0.0};    // percent
    double w_text{1.0};
    double w_image{0.0};
    size_t support{0};   // evaluated rows

    bool operator==(const EvaluationCell&) const = default;
};

struct PerClassEntry {
    ClassValue value;
    double accuracy{0.0};  // percent, recall over rows whose TRUE label is value
    size_t support{0};

    bool operator==(const PerClassEntry&) const = default;
};

// Per-class breakdown of one grid cell. Entries follow canonical value
// order; values with zero support are absent, not zero.
struct PerClassRow {
    PrototypeMode method{PrototypeMode::clip_baseline};
    std::string target_axis;
    std::string augment_axis;
    std::vector<PerClassEntry> entries;

    bool operator==(const PerClassRow&) const = default;
};

struct ReportMetadata {
    std::string dataset_name;
    std::vector<BackendDescriptor> backends;
    uint64_t seed{0};
    std::string note;
    // Rendered only when set; left empty for byte-reproducible runs.
    std::string timestamp;

    bool operator==(const ReportMetadata&) const = default;
};

struct EvaluationReport {
    ReportMetadata metadata;
    // axis id -> column header ("race7" -> "Race 7"), carried so renderers
    // need no taxonomy access.
    std::vector<std::pair<std::string, std::string>> axis_display;
    std::vector<EvaluationCell> grid;
    std::vector<PerClassRow> per_class;

    bool operator==(const EvaluationReport&) const = default;
};

// 100 x correct/total. Throws EmptyInput on no predictions, InvalidConfig
// when predictions and labels disagree in length.
double top1_accuracy(std::span<const Prediction> preds, std::span<const ClassValue> labels);

// Per-true-class recall for each axis value, canonical order, zero-support
// values omitted. method/target/augment fields are left for the caller.
PerClassRow per_class_accuracy(std::span<const Prediction> preds,
                               std::span<const ClassValue> labels, const DemographicAxis& axis);

// Max minus min per-class accuracy, in percentage points.
double bias_gap(const PerClassRow& row);

enum class ReportFormat { table_text, csv, json_lines };

ReportFormat report_format_from_string(std::string_view name);  // UnknownFormat
std::string to_string(ReportFormat format);

// Deterministic bytes. table_text lays methods out as rows and strategies
// as columns with two-decimal percentages and weight cells like
// "0.85 / 0.15"; json_lines round-trips through parse_report_jsonl at full
// double precision.
std::string render_report(const EvaluationReport& report, ReportFormat format);

EvaluationReport parse_report_jsonl(std::string_view bytes);

}  // namespace d3g
