#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "d3g/backend.hpp"
#include "d3g/dataset.hpp"
#include "d3g/embedding.hpp"
#include "d3g/taxonomy.hpp"

namespace d3g {

// Cluster geometry for the deterministic test-double backend.
//
// Class directions sit on a cone around a shared axis so pairwise cosine is
// class_overlap: dir_c = sqrt(o)*g + sqrt(1-o)*e_c with orthonormal g, e_c.
// Each (class, subgroup) pair owns an orthonormal offset direction u_{c,s}
// (offset_mode per_class) or each subgroup one shared u_s (offset_mode
// shared; provably argmax-neutral, kept for invariance tests).
//
// Text embeddings lean toward the majority subgroup regardless of what the
// prompt says (text_fidelity 0 models an encoder whose "doctor" means the
// majority demographic):
//   text(c, s) = dir_c + text_bias * ((1-f)*u_{c,majority} + f*u_{c,s})
// Image embeddings honor the prompted subgroup (plain prompts fall back to
// generator_default_label):
//   image(c, s) = dir_c + subgroup_offset * u_{c,s} + noise_sigma * noise
// Noise is keyed by content id, so embeddings are pure functions of the ref.
struct SyntheticGeometry {
    int dim = 16;
    uint64_t seed = 17;

    std::string class_axis = "race4";
    std::string subgroup_axis = "gender";
    std::string majority_label = "Male";
    std::string generator_default_label;  // empty -> majority_label

    double class_overlap = 0.89;
    double text_bias = 0.4;
    double text_fidelity = 0.0;
    double subgroup_offset = 0.6;
    double noise_sigma = 0.1;

    enum class OffsetMode { per_class, shared };
    OffsetMode offset_mode = OffsetMode::per_class;

    // Optional explicit unit class directions (one per class-axis value, in
    // canonical order). Requires text_bias == subgroup_offset == 0 because
    // no orthogonal offset dims can be reserved for arbitrary directions.
    std::vector<Embedding> class_directions;

    std::string id = "synthetic";
    std::string version = "1";
};

// Word-boundary, longest-match search for an axis value inside prompt text.
// Handles nested labels ("east asian" never matches inside "southeast
// asian"; "male" never inside "female"; "0-2" never inside "20-29").
// Returns the canonical value index, or nullopt when nothing matches.
std::optional<size_t> match_axis_value(const DemographicAxis& axis, std::string_view text);

class SyntheticBackend : public Backend {
public:
    // Validates the geometry against the taxonomy; throws InvalidConfig.
    SyntheticBackend(Taxonomy taxonomy, SyntheticGeometry geometry);

    const BackendDescriptor& descriptor() const override { return descriptor_; }

    // Pure function of prompt.text: the class label is parsed out of the
    // text (the struct's provenance fields are ignored so the backend works
    // identically behind the wire protocol, which transports bare strings).
    Embedding embed_text(const RenderedPrompt& prompt) override;

    // Pure function of content_id for generated and registered dataset ids;
    // falls back to prompt provenance for generated refs from another
    // process. Unknown ids raise BackendUnavailable.
    Embedding embed_image(const ImageRef& image) override;

    bool supports_generation() const override { return true; }
    std::vector<ImageRef> generate_images(const GenerationRequest& request) override;

    // Makes a dataset row embeddable: its embedding is drawn from the
    // (class, subgroup) cell named by its labels. Rows without the class
    // axis label are ignored.
    void register_dataset_image(const LabeledImage& row);
    void register_dataset(const DatasetManifest& manifest);

    // Analytic accessors for tests: exact cluster centers, no noise.
    const SyntheticGeometry& geometry() const { return geometry_; }
    const Taxonomy& taxonomy() const { return taxonomy_; }
    Embedding class_direction(size_t class_idx) const;
    Embedding subgroup_direction(size_t class_idx, size_t subgroup_idx) const;
    Embedding text_point(size_t class_idx, std::optional<size_t> subgroup_idx) const;
    Embedding image_center(size_t class_idx, size_t subgroup_idx) const;

private:
    struct Cell {
        size_t class_idx;
        size_t subgroup_idx;
    };

    Embedding noisy_image_point(const Cell& cell, const std::string& content_id) const;
    Cell cell_for_prompt_text(std::string_view text) const;

    Taxonomy taxonomy_;
    SyntheticGeometry geometry_;
    BackendDescriptor descriptor_;
    size_t class_count_;
    size_t subgroup_count_;
    size_t majority_idx_;
    size_t generator_default_idx_;

    mutable std::mutex mu_;
    std::unordered_map<std::string, Cell> registry_;  // content_id -> cell
};

// Deterministic labeled dataset drawn from the backend's geometry: per class,
// `per_class` rows split across subgroups by `subgroup_mix` (uniform when
// empty), exact stratified counts. Rows must be registered with the backend
// (run_evaluation does this automatically for synthetic backends).
struct SyntheticDatasetSpec {
    std::string name = "synthetic";
    size_t per_class = 40;
    std::vector<double> subgroup_mix;  // one fraction per subgroup value
    uint64_t seed = 99;
};

DatasetManifest synthesize_dataset(const Taxonomy& taxonomy, const SyntheticGeometry& geometry,
                                   const SyntheticDatasetSpec& spec);

}  // namespace d3g
