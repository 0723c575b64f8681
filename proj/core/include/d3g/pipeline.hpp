#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d3g/backend.hpp"
#include "d3g/dataset.hpp"
#include "d3g/embedding.hpp"
#include "d3g/taxonomy.hpp"

namespace d3g {

// The three classification methods: text-only baseline, fusion with one
// generated image per prompt, fusion with five averaged per prompt.
enum class PrototypeMode { clip_baseline, standard_d3g, average_image_d3g };

std::string to_string(PrototypeMode mode);       // machine name, e.g. "standard_d3g"
std::string display_name(PrototypeMode mode);    // report name, e.g. "Standard D3G"
PrototypeMode prototype_mode_from_string(std::string_view name);  // InvalidConfig
int images_per_prompt(PrototypeMode mode);       // 0 / 1 / 5

// Whether a class's text part averages every demographic prompt or embeds
// only the plain class prompt. Averaging is the default; both readings are
// kept behind this switch.
enum class TextPartPolicy { averaged_prompts, plain_prompt };

std::string to_string(TextPartPolicy policy);
TextPartPolicy text_part_policy_from_string(std::string_view name);  // InvalidConfig

struct PipelineOptions {
    TextPartPolicy text_policy = TextPartPolicy::averaged_prompts;
    // -1 keeps the mode's count (1 or 5); any positive value overrides it.
    int images_per_prompt_override = -1;
    uint64_t generation_seed = 17;
    int scan_threads = 0;  // 0 = pick from hardware concurrency
};

// Unfused ingredients of one class prototype. text_part / image_part are
// plain means (not normalized); fusing normalizes.
struct PrototypeParts {
    ClassValue class_value;
    Embedding text_part;
    std::optional<Embedding> image_part;
    std::vector<std::pair<RenderedPrompt, std::vector<ImageRef>>> provenance;
};

struct ClassPrototype {
    ClassValue class_value;
    Embedding text_part;
    std::optional<Embedding> image_part;
    Embedding fused;
    FusionWeight w{1.0};
    std::vector<std::pair<RenderedPrompt, std::vector<ImageRef>>> provenance;
};

struct Prediction {
    ImageRef query;
    std::map<ClassValue, double> scores;
    ClassValue predicted;

    bool operator==(const Prediction&) const = default;
};

struct LabeledEmbedding {
    Embedding embedding;
    ClassValue label;
};

// Full 0.01-grid scan record. accuracy_by_w[k] is the top-1 percentage with
// text weight k/100; best_w is the smallest maximizing weight.
struct WeightScanResult {
    FusionWeight best_w{1.0};
    std::array<double, 101> accuracy_by_w{};
    double best_accuracy{0.0};
};

// Embeds and averages one class's prompts and generated images.
// clip_baseline performs no generation and leaves image_part empty; the
// D3G modes fail fast with GenerationUnsupported when the backend cannot
// generate. Averages run over ALL images across the class's prompts.
PrototypeParts build_parts(const Taxonomy& taxonomy, const ClassValue& class_value,
                           std::string_view augment_axis, PrototypeMode mode, Backend& backend,
                           const PipelineOptions& options = {});

// One parts bundle per target-axis value, canonical order.
std::vector<PrototypeParts> build_all_parts(const Taxonomy& taxonomy,
                                            std::string_view target_axis,
                                            std::string_view augment_axis, PrototypeMode mode,
                                            Backend& backend,
                                            const PipelineOptions& options = {});

// clip_baseline: fused = normalize(text_part), w forced to 1.00.
// Otherwise:    fused = fuse(text_part, image_part, w).
ClassPrototype fuse_parts(const PrototypeParts& parts, PrototypeMode mode, FusionWeight w);
std::vector<ClassPrototype> fuse_all(std::span<const PrototypeParts> parts, PrototypeMode mode,
                                     FusionWeight w);

ClassPrototype build_prototype(const Taxonomy& taxonomy, const ClassValue& class_value,
                               std::string_view augment_axis, PrototypeMode mode, FusionWeight w,
                               Backend& backend, const PipelineOptions& options = {});

// Cosine argmax over the prototypes (which must share one axis and the
// query's dim). Ties keep the earliest prototype, i.e. canonical value
// order when the prototypes came from build_all_parts.
Prediction classify(const Embedding& query, std::span<const ClassPrototype> prototypes);

// Fuses every class at each of the 101 grid weights, classifies every
// labeled embedding and tabulates accuracy. Grid points are independent, so
// the scan parallelizes over them; results never depend on scheduling.
WeightScanResult scan_weights(std::span<const LabeledEmbedding> labeled,
                              std::span<const PrototypeParts> parts, int threads = 0);

struct MethodRunResult {
    PrototypeMode mode{PrototypeMode::clip_baseline};
    std::string target_axis;
    std::string augment_axis;
    WeightScanResult scan;
    std::vector<ClassPrototype> prototypes;  // fused at scan.best_w
    std::vector<Prediction> predictions;     // one per evaluated row, manifest order
    std::vector<ClassValue> true_labels;     // parallel to predictions
    std::vector<size_t> evaluated_rows;      // manifest indices carrying the target label
};

// End-to-end method run: builds parts once, scans w over the dataset's
// target-labeled rows (skipped for clip_baseline, which reports w = 1.00
// and a flat 101-entry table), then predicts at the chosen weight.
MethodRunResult run_method(const DatasetManifest& dataset, const Taxonomy& taxonomy,
                           std::string_view target_axis, std::string_view augment_axis,
                           PrototypeMode mode, Backend& backend,
                           const PipelineOptions& options = {});

}  // namespace d3g
