#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "d3g/errors.hpp"
#include "d3g/report.hpp"
#include "d3g/taxonomy.hpp"

using namespace d3g;

namespace {

Prediction predict(const ClassValue& value) {
    Prediction p;
    p.predicted = value;
    return p;
}

// Small two-method report with hand-picked numbers, used by the rendering
// checks below.
EvaluationReport sample_report() {
    EvaluationReport report;
    report.metadata.dataset_name = "idenprof-mini";
    report.metadata.backends = {
        BackendDescriptor{"clip-vit-l14", BackendKind::remote, 768, "2024-01"}};
    report.metadata.seed = 17;
    report.metadata.note = "fusion weights tuned on the evaluation set";
    report.axis_display = {{"profession", "Profession"}, {"gender", "Gender"}, {"age", "Age"}};

    EvaluationCell base;
    base.method = PrototypeMode::clip_baseline;
    base.target_axis = "profession";
    base.augment_axis = "gender";
    base.top1 = 93.5;
    base.w_text = 1.0;
    base.w_image = 0.0;
    base.support = 400;
    EvaluationCell fused = base;
    fused.method = PrototypeMode::standard_d3g;
    fused.top1 = 99.25;
    fused.w_text = 0.85;
    fused.w_image = 0.15;
    EvaluationCell base_age = base;
    base_age.augment_axis = "age";
    base_age.top1 = 91.0;
    EvaluationCell fused_age = fused;
    fused_age.augment_axis = "age";
    fused_age.top1 = 97.75;
    fused_age.w_text = 0.62;
    fused_age.w_image = 0.38;
    report.grid = {base, fused, base_age, fused_age};

    PerClassRow row;
    row.method = PrototypeMode::standard_d3g;
    row.target_axis = "profession";
    row.augment_axis = "gender";
    row.entries = {PerClassEntry{ClassValue{"profession", "Chef"}, 100.0, 40},
                   PerClassEntry{ClassValue{"profession", "Doctor"}, 97.5, 40},
                   PerClassEntry{ClassValue{"profession", "Engineer"}, 92.5, 40}};
    report.per_class = {row};
    return report;
}

}  // namespace

TEST_CASE("top-1 accuracy formula and validation") {
    const ClassValue male{"gender", "Male"};
    const ClassValue female{"gender", "Female"};

    std::vector<Prediction> preds;
    std::vector<ClassValue> labels;
    for (int i = 0; i < 19; ++i) {
        preds.push_back(predict(male));
        labels.push_back(male);
    }
    preds.push_back(predict(male));
    labels.push_back(female);  // the one miss
    CHECK(top1_accuracy(preds, labels) == 95.0);

    CHECK(top1_accuracy(std::vector<Prediction>{predict(male)},
                        std::vector<ClassValue>{male}) == 100.0);
    CHECK(top1_accuracy(std::vector<Prediction>{predict(male)},
                        std::vector<ClassValue>{female}) == 0.0);

    CHECK_THROWS_AS(top1_accuracy(std::vector<Prediction>{}, std::vector<ClassValue>{}),
                    EmptyInputError);
    CHECK_THROWS_AS(
        top1_accuracy(std::vector<Prediction>{predict(male)}, std::vector<ClassValue>{}),
        InvalidConfigError);
}

TEST_CASE("per-class recall: canonical order, zero-support omitted, order-free") {
    const Taxonomy tax = Taxonomy::builtin();
    const DemographicAxis& gender = tax.axis("gender");
    const ClassValue male{"gender", "Male"};
    const ClassValue female{"gender", "Female"};

    std::vector<Prediction> preds{predict(male), predict(female), predict(male), predict(male)};
    std::vector<ClassValue> labels{male, male, male, female};

    const PerClassRow row = per_class_accuracy(preds, labels, gender);
    REQUIRE(row.entries.size() == 2);
    CHECK(row.entries[0].value == male);  // canonical axis order, not first-seen
    CHECK(row.entries[0].accuracy == doctest::Approx(100.0 * 2 / 3).epsilon(1e-12));
    CHECK(row.entries[0].support == 3);
    CHECK(row.entries[1].value == female);
    CHECK(row.entries[1].accuracy == 0.0);
    CHECK(row.entries[1].support == 1);

    // permuting the evaluation set changes nothing
    std::vector<Prediction> shuffled{preds[3], preds[0], preds[2], preds[1]};
    std::vector<ClassValue> shuffled_labels{labels[3], labels[0], labels[2], labels[1]};
    CHECK(per_class_accuracy(shuffled, shuffled_labels, gender).entries == row.entries);

    // a value never present as a true label yields no entry at all
    const DemographicAxis& race = tax.axis("race4");
    std::vector<Prediction> one{predict(ClassValue{"race4", "White"})};
    std::vector<ClassValue> one_label{ClassValue{"race4", "White"}};
    const PerClassRow sparse = per_class_accuracy(one, one_label, race);
    REQUIRE(sparse.entries.size() == 1);
    CHECK(sparse.entries[0].value.label == "White");
    CHECK(sparse.entries[0].accuracy == 100.0);
}

TEST_CASE("top-1 equals the support-weighted mean of per-class accuracy") {
    const Taxonomy tax = Taxonomy::builtin();
    const DemographicAxis& axis = tax.axis("race7");
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<size_t> pick(0, axis.values.size() - 1);

    std::vector<Prediction> preds;
    std::vector<ClassValue> labels;
    for (int i = 0; i < 500; ++i) {
        labels.push_back(ClassValue{"race7", axis.values[pick(rng)]});
        preds.push_back(predict(ClassValue{"race7", axis.values[pick(rng)]}));
    }

    const PerClassRow row = per_class_accuracy(preds, labels, axis);
    double weighted = 0.0;
    size_t total = 0;
    for (const PerClassEntry& e : row.entries) {
        weighted += e.accuracy * static_cast<double>(e.support);
        total += e.support;
    }
    CHECK(total == labels.size());
    CHECK(top1_accuracy(preds, labels) ==
          doctest::Approx(weighted / static_cast<double>(total)).epsilon(1e-9));
}

TEST_CASE("bias gap is max minus min") {
    PerClassRow row;
    row.entries = {PerClassEntry{{"race7", "White"}, 68.19, 10},
                   PerClassEntry{{"race7", "Black"}, 70.90, 10},
                   PerClassEntry{{"race7", "Indian"}, 15.38, 10},
                   PerClassEntry{{"race7", "East Asian"}, 43.46, 10},
                   PerClassEntry{{"race7", "Southeast Asian"}, 20.59, 10},
                   PerClassEntry{{"race7", "Middle Eastern"}, 57.58, 10},
                   PerClassEntry{{"race7", "Latino"}, 13.80, 10}};
    CHECK(bias_gap(row) == doctest::Approx(57.10).epsilon(1e-9));

    row.entries.resize(1);
    CHECK(bias_gap(row) == 0.0);

    row.entries.clear();
    CHECK_THROWS_AS(bias_gap(row), EmptyInputError);
}

TEST_CASE("format names and aliases") {
    CHECK(report_format_from_string("table-text") == ReportFormat::table_text);
    CHECK(report_format_from_string("table") == ReportFormat::table_text);
    CHECK(report_format_from_string("txt") == ReportFormat::table_text);
    CHECK(report_format_from_string("csv") == ReportFormat::csv);
    CHECK(report_format_from_string("json-lines") == ReportFormat::json_lines);
    CHECK(report_format_from_string("jsonl") == ReportFormat::json_lines);
    CHECK_THROWS_AS(report_format_from_string("yaml"), UnknownFormatError);
    CHECK(to_string(ReportFormat::csv) == "csv");
    CHECK(report_format_from_string(to_string(ReportFormat::json_lines)) ==
          ReportFormat::json_lines);
}

TEST_CASE("text rendering: stable bytes, two-decimal cells, weight pairs") {
    const EvaluationReport report = sample_report();
    const std::string text = render_report(report, ReportFormat::table_text);
    CHECK(text == render_report(report, ReportFormat::table_text));

    CHECK(text.find("# d3g evaluation report\n") != std::string::npos);
    CHECK(text.find("# dataset: idenprof-mini\n") != std::string::npos);
    CHECK(text.find("# backend: id=clip-vit-l14 kind=remote dim=768 version=2024-01\n") !=
          std::string::npos);
    CHECK(text.find("# timestamp:") == std::string::npos);  // unset -> absent
    CHECK(text.find("== Target: Profession ==") != std::string::npos);
    CHECK(text.find("93.50") != std::string::npos);
    CHECK(text.find("0.85 / 0.15") != std::string::npos);
    CHECK(text.find("1.00 / 0.00") != std::string::npos);
    CHECK(text.find("0.62 / 0.38") != std::string::npos);
    CHECK(text.find("Per-class accuracy (%): Standard D3G, target Profession, augment Gender") !=
          std::string::npos);
    CHECK(text.find("Gap") != std::string::npos);

    // no trailing whitespace on any line
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty()) {
            CHECK(line.back() != ' ');
        }
    }

    EvaluationReport stamped = report;
    stamped.metadata.timestamp = "2024-05-01T12:00:00Z";
    CHECK(render_report(stamped, ReportFormat::table_text).find(
              "# timestamp: 2024-05-01T12:00:00Z\n") != std::string::npos);
}

TEST_CASE("csv rendering carries one row kind per record") {
    const EvaluationReport report = sample_report();
    const std::string csv = render_report(report, ReportFormat::csv);
    CHECK(csv.find("kind,method,target_axis,augment_axis,class_value,top1,w_text,w_image,"
                   "accuracy,support\n") != std::string::npos);

    size_t cells = 0, per_class = 0, gaps = 0;
    std::istringstream lines(csv);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("cell,", 0) == 0) ++cells;
        if (line.rfind("per_class,", 0) == 0) ++per_class;
        if (line.rfind("bias_gap,", 0) == 0) ++gaps;
    }
    CHECK(cells == report.grid.size());
    CHECK(per_class == 3);
    CHECK(gaps == 1);
    CHECK(csv.find("cell,standard_d3g,profession,gender,,99.25,0.85,0.15,,400") !=
          std::string::npos);
    CHECK(csv.find("per_class,standard_d3g,profession,gender,Doctor,,,,97.50,40") !=
          std::string::npos);
}

TEST_CASE("json-lines round-trips the full report at double precision") {
    EvaluationReport report = sample_report();
    report.grid[1].top1 = 99.25000000000001;  // not representable at two decimals
    const std::string jsonl = render_report(report, ReportFormat::json_lines);
    const EvaluationReport back = parse_report_jsonl(jsonl);
    CHECK(back == report);

    // every line parses as standalone JSON and ends with a newline
    CHECK(!jsonl.empty());
    CHECK(jsonl.back() == '\n');

    CHECK_THROWS_AS(parse_report_jsonl("{\"kind\": \"metadata\"}\nnot json\n"), ParseError);
    try {
        parse_report_jsonl("{\"kind\": \"metadata\", \"dataset\": \"x\", \"seed\": 0, "
                           "\"note\": \"\", \"timestamp\": \"\", \"backends\": [], "
                           "\"axis_display\": []}\nnonsense\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("report.jsonl:2") != std::string::npos);
    }
}
