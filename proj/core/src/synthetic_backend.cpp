#include "d3g/synthetic_backend.hpp"

#include <cctype>
#include <cmath>

#include "d3g/errors.hpp"
#include "d3g/hashing.hpp"
#include "d3g/rng.hpp"

namespace d3g {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool bounded_occurrence(std::string_view text, std::string_view needle) {
    for (size_t pos = text.find(needle); pos != std::string_view::npos;
         pos = text.find(needle, pos + 1)) {
        const size_t end = pos + needle.size();
        const bool left_ok = pos == 0 || !word_char(text[pos - 1]);
        const bool right_ok = end == text.size() || !word_char(text[end]);
        if (left_ok && right_ok) return true;
    }
    return false;
}

}  // namespace

std::optional<size_t> match_axis_value(const DemographicAxis& axis, std::string_view text) {
    const std::string haystack = lower(text);
    std::optional<size_t> best;
    size_t best_len = 0;
    for (size_t i = 0; i < axis.values.size(); ++i) {
        const std::string needle = casing_normalize(axis.values[i]);
        if (needle.size() <= best_len) continue;  // longest match wins, first on ties
        if (bounded_occurrence(haystack, needle)) {
            best = i;
            best_len = needle.size();
        }
    }
    return best;
}

SyntheticBackend::SyntheticBackend(Taxonomy taxonomy, SyntheticGeometry geometry)
    : taxonomy_(std::move(taxonomy)), geometry_(std::move(geometry)) {
    const SyntheticGeometry& g = geometry_;
    if (g.dim <= 0) throw InvalidConfigError("synthetic geometry: dim must be positive");
    if (g.noise_sigma < 0) throw InvalidConfigError("synthetic geometry: noise sigma must be >= 0");
    if (g.text_bias < 0) throw InvalidConfigError("synthetic geometry: text bias must be >= 0");
    if (g.subgroup_offset < 0) {
        throw InvalidConfigError("synthetic geometry: subgroup offset must be >= 0");
    }
    if (g.class_overlap < 0 || g.class_overlap >= 1) {
        throw InvalidConfigError("synthetic geometry: class overlap must be in [0, 1)");
    }
    if (g.text_fidelity < 0 || g.text_fidelity > 1) {
        throw InvalidConfigError("synthetic geometry: text fidelity must be in [0, 1]");
    }
    if (!taxonomy_.has_axis(g.class_axis)) {
        throw InvalidConfigError("synthetic geometry: unknown class axis: " + g.class_axis);
    }
    if (!taxonomy_.has_axis(g.subgroup_axis)) {
        throw InvalidConfigError("synthetic geometry: unknown subgroup axis: " + g.subgroup_axis);
    }
    class_count_ = taxonomy_.axis(g.class_axis).size();
    subgroup_count_ = taxonomy_.axis(g.subgroup_axis).size();
    majority_idx_ = taxonomy_.axis(g.subgroup_axis).index_of(g.majority_label);
    generator_default_idx_ =
        g.generator_default_label.empty()
            ? majority_idx_
            : taxonomy_.axis(g.subgroup_axis).index_of(g.generator_default_label);

    if (!g.class_directions.empty()) {
        if (g.class_directions.size() != class_count_) {
            throw InvalidConfigError("synthetic geometry: expected one class direction per '" +
                                     g.class_axis + "' value");
        }
        if (g.text_bias != 0 || g.subgroup_offset != 0) {
            throw InvalidConfigError(
                "synthetic geometry: explicit class directions require zero text bias and "
                "zero subgroup offset (no orthogonal offset dims are reserved)");
        }
        for (const Embedding& d : g.class_directions) {
            if (d.dim() != static_cast<size_t>(g.dim)) {
                throw InvalidConfigError("synthetic geometry: class direction dim mismatch");
            }
            if (std::abs(l2_norm(d) - 1.0) > 1e-9) {
                throw InvalidConfigError("synthetic geometry: class directions must be unit vectors");
            }
        }
        for (size_t i = 0; i < g.class_directions.size(); ++i) {
            for (size_t j = i + 1; j < g.class_directions.size(); ++j) {
                if (cosine(g.class_directions[i], g.class_directions[j]) >= 1.0 - 1e-9) {
                    throw InvalidConfigError(
                        "synthetic geometry: class directions " + std::to_string(i) + " and " +
                        std::to_string(j) + " coincide; classes must be separable");
                }
            }
        }
    } else {
        const size_t offset_dims = g.offset_mode == SyntheticGeometry::OffsetMode::per_class
                                       ? class_count_ * subgroup_count_
                                       : subgroup_count_;
        const size_t required = 1 + class_count_ + offset_dims;
        if (static_cast<size_t>(g.dim) < required) {
            throw InvalidConfigError("synthetic geometry: dim " + std::to_string(g.dim) +
                                     " too small; cone + class + offset dims need " +
                                     std::to_string(required));
        }
    }

    descriptor_ = BackendDescriptor{g.id, BackendKind::synthetic, g.dim, g.version};
}

Embedding SyntheticBackend::class_direction(size_t class_idx) const {
    if (!geometry_.class_directions.empty()) return geometry_.class_directions[class_idx];
    Embedding v{std::vector<double>(static_cast<size_t>(geometry_.dim), 0.0)};
    v[0] = std::sqrt(geometry_.class_overlap);
    v[1 + class_idx] = std::sqrt(1.0 - geometry_.class_overlap);
    return v;
}

Embedding SyntheticBackend::subgroup_direction(size_t class_idx, size_t subgroup_idx) const {
    Embedding v{std::vector<double>(static_cast<size_t>(geometry_.dim), 0.0)};
    const size_t base = 1 + class_count_;
    const size_t slot = geometry_.offset_mode == SyntheticGeometry::OffsetMode::per_class
                            ? class_idx * subgroup_count_ + subgroup_idx
                            : subgroup_idx;
    v[base + slot] = 1.0;
    return v;
}

Embedding SyntheticBackend::text_point(size_t class_idx,
                                       std::optional<size_t> subgroup_idx) const {
    Embedding v = class_direction(class_idx);
    if (geometry_.text_bias == 0) return v;
    const size_t s = subgroup_idx.value_or(majority_idx_);
    const Embedding to_major = subgroup_direction(class_idx, majority_idx_);
    const Embedding to_named = subgroup_direction(class_idx, s);
    const double f = geometry_.text_fidelity;
    for (size_t k = 0; k < v.dim(); ++k) {
        v[k] += geometry_.text_bias * ((1.0 - f) * to_major[k] + f * to_named[k]);
    }
    return v;
}

Embedding SyntheticBackend::image_center(size_t class_idx, size_t subgroup_idx) const {
    Embedding v = class_direction(class_idx);
    if (geometry_.subgroup_offset == 0) return v;
    const Embedding u = subgroup_direction(class_idx, subgroup_idx);
    for (size_t k = 0; k < v.dim(); ++k) {
        v[k] += geometry_.subgroup_offset * u[k];
    }
    return v;
}

SyntheticBackend::Cell SyntheticBackend::cell_for_prompt_text(std::string_view text) const {
    const auto class_idx = match_axis_value(taxonomy_.axis(geometry_.class_axis), text);
    if (!class_idx) {
        throw BackendUnavailableError("synthetic backend: prompt text does not mention a '" +
                                      geometry_.class_axis + "' value: \"" + std::string(text) +
                                      "\"");
    }
    const auto subgroup_idx = match_axis_value(taxonomy_.axis(geometry_.subgroup_axis), text);
    return Cell{*class_idx, subgroup_idx.value_or(generator_default_idx_)};
}

Embedding SyntheticBackend::embed_text(const RenderedPrompt& prompt) {
    const auto class_idx = match_axis_value(taxonomy_.axis(geometry_.class_axis), prompt.text);
    if (!class_idx) {
        throw BackendUnavailableError("synthetic backend: prompt text does not mention a '" +
                                      geometry_.class_axis + "' value: \"" + prompt.text + "\"");
    }
    const auto subgroup_idx = match_axis_value(taxonomy_.axis(geometry_.subgroup_axis), prompt.text);
    return text_point(*class_idx, subgroup_idx);
}

Embedding SyntheticBackend::noisy_image_point(const Cell& cell,
                                              const std::string& content_id) const {
    Embedding v = image_center(cell.class_idx, cell.subgroup_idx);
    if (geometry_.noise_sigma > 0) {
        CounterRng rng(geometry_.seed, "img|" + content_id);
        for (size_t k = 0; k < v.dim(); ++k) {
            v[k] += geometry_.noise_sigma * rng.gaussian_like(k);
        }
    }
    return v;
}

Embedding SyntheticBackend::embed_image(const ImageRef& image) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = registry_.find(image.content_id);
        if (it != registry_.end()) return noisy_image_point(it->second, image.content_id);
    }
    if (image.provenance) {
        const Cell cell = cell_for_prompt_text(image.provenance->prompt.text);
        std::lock_guard<std::mutex> lock(mu_);
        registry_.emplace(image.content_id, cell);
        return noisy_image_point(cell, image.content_id);
    }
    throw BackendUnavailableError("synthetic backend: unknown content id: " + image.content_id);
}

std::vector<ImageRef> SyntheticBackend::generate_images(const GenerationRequest& request) {
    if (request.count <= 0) {
        throw InvalidConfigError("generation count must be positive");
    }
    const Cell cell = cell_for_prompt_text(request.prompt.text);
    std::vector<ImageRef> refs;
    refs.reserve(static_cast<size_t>(request.count));
    for (int i = 0; i < request.count; ++i) {
        ImageRef ref;
        ref.content_id = sha256_hex("d3g-gen|" + request.prompt.text + "|" +
                                    std::to_string(request.seed) + "|" + std::to_string(i));
        ref.source = ImageSource::generated;
        ref.provenance = PromptProvenance{request.prompt, request.seed, {}};
        refs.push_back(std::move(ref));
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        for (const ImageRef& ref : refs) registry_.emplace(ref.content_id, cell);
    }
    return refs;
}

void SyntheticBackend::register_dataset_image(const LabeledImage& row) {
    const ClassValue* class_label = row.label(geometry_.class_axis);
    if (class_label == nullptr) return;
    Cell cell;
    cell.class_idx = taxonomy_.axis(geometry_.class_axis).index_of(class_label->label);
    const ClassValue* sub_label = row.label(geometry_.subgroup_axis);
    cell.subgroup_idx = sub_label == nullptr
                            ? majority_idx_
                            : taxonomy_.axis(geometry_.subgroup_axis).index_of(sub_label->label);
    std::lock_guard<std::mutex> lock(mu_);
    registry_.emplace(row.image.content_id, cell);
}

void SyntheticBackend::register_dataset(const DatasetManifest& manifest) {
    for (const auto& row : manifest.images) register_dataset_image(row);
}

DatasetManifest synthesize_dataset(const Taxonomy& taxonomy, const SyntheticGeometry& geometry,
                                   const SyntheticDatasetSpec& spec) {
    const DemographicAxis& class_axis = taxonomy.axis(geometry.class_axis);
    const DemographicAxis& subgroup_axis = taxonomy.axis(geometry.subgroup_axis);
    const size_t subgroups = subgroup_axis.size();

    std::vector<double> mix = spec.subgroup_mix;
    if (mix.empty()) {
        mix.assign(subgroups, 1.0 / static_cast<double>(subgroups));
    }
    if (mix.size() != subgroups) {
        throw InvalidConfigError("dataset spec: subgroup mix must have one entry per '" +
                                 geometry.subgroup_axis + "' value");
    }
    double sum = 0;
    for (double m : mix) {
        if (m < 0) throw InvalidConfigError("dataset spec: subgroup mix entries must be >= 0");
        sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidConfigError("dataset spec: subgroup mix must sum to 1");
    }
    if (spec.per_class == 0) {
        throw InvalidConfigError("dataset spec: per_class must be positive");
    }

    // Exact stratified counts: floor each share, then hand the remainder to
    // the earliest subgroups in canonical order.
    std::vector<size_t> cell_count(subgroups, 0);
    size_t assigned = 0;
    for (size_t s = 0; s < subgroups; ++s) {
        cell_count[s] = static_cast<size_t>(mix[s] * static_cast<double>(spec.per_class));
        assigned += cell_count[s];
    }
    for (size_t s = 0; assigned < spec.per_class; s = (s + 1) % subgroups) {
        if (mix[s] > 0) {
            ++cell_count[s];
            ++assigned;
        }
    }

    DatasetManifest manifest;
    manifest.name = spec.name;
    for (const std::string& class_label : class_axis.values) {
        size_t j = 0;
        for (size_t s = 0; s < subgroups; ++s) {
            for (size_t k = 0; k < cell_count[s]; ++k, ++j) {
                LabeledImage row;
                row.image.content_id =
                    sha256_hex("d3g-data|" + spec.name + "|" + std::to_string(spec.seed) + "|" +
                               class_label + "|" + std::to_string(j));
                row.image.source = ImageSource::dataset;
                row.relpath = class_label + "/" + std::to_string(j) + ".img";
                row.labels.emplace(geometry.class_axis,
                                   ClassValue{geometry.class_axis, class_label});
                row.labels.emplace(geometry.subgroup_axis,
                                   ClassValue{geometry.subgroup_axis, subgroup_axis.values[s]});
                manifest.images.push_back(std::move(row));
            }
        }
    }
    for (const auto& row : manifest.images) {
        for (const auto& [axis_id, value] : row.labels) ++manifest.counts[value];
    }
    return manifest;
}

}  // namespace d3g
