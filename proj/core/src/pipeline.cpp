#include "d3g/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

#include "d3g/errors.hpp"
#include "d3g/rng.hpp"

namespace d3g {

std::string to_string(PrototypeMode mode) {
    switch (mode) {
        case PrototypeMode::clip_baseline: return "clip_baseline";
        case PrototypeMode::standard_d3g: return "standard_d3g";
        case PrototypeMode::average_image_d3g: return "average_image_d3g";
    }
    return "unknown";
}

std::string display_name(PrototypeMode mode) {
    switch (mode) {
        case PrototypeMode::clip_baseline: return "CLIP";
        case PrototypeMode::standard_d3g: return "Standard D3G";
        case PrototypeMode::average_image_d3g: return "Average Image D3G";
    }
    return "unknown";
}

PrototypeMode prototype_mode_from_string(std::string_view name) {
    if (name == "clip_baseline") return PrototypeMode::clip_baseline;
    if (name == "standard_d3g") return PrototypeMode::standard_d3g;
    if (name == "average_image_d3g") return PrototypeMode::average_image_d3g;
    throw InvalidConfigError("unknown method: " + std::string(name) +
                             " (expected clip_baseline, standard_d3g or average_image_d3g)");
}

int images_per_prompt(PrototypeMode mode) {
    switch (mode) {
        case PrototypeMode::clip_baseline: return 0;
        case PrototypeMode::standard_d3g: return 1;
        case PrototypeMode::average_image_d3g: return 5;
    }
    return 0;
}

std::string to_string(TextPartPolicy policy) {
    return policy == TextPartPolicy::averaged_prompts ? "averaged_prompts" : "plain_prompt";
}

TextPartPolicy text_part_policy_from_string(std::string_view name) {
    if (name == "averaged_prompts") return TextPartPolicy::averaged_prompts;
    if (name == "plain_prompt") return TextPartPolicy::plain_prompt;
    throw InvalidConfigError("unknown text part policy: " + std::string(name) +
                             " (expected averaged_prompts or plain_prompt)");
}

namespace {

uint64_t seed_for_prompt(uint64_t base_seed, const std::string& prompt_text) {
    return splitmix64(base_seed ^ fnv1a64(prompt_text));
}

}  // namespace

PrototypeParts build_parts(const Taxonomy& taxonomy, const ClassValue& class_value,
                           std::string_view augment_axis, PrototypeMode mode, Backend& backend,
                           const PipelineOptions& options) {
    // Capability check precedes all embedding work so a misconfigured run
    // fails before spending provider calls.
    if (mode != PrototypeMode::clip_baseline && !backend.supports_generation()) {
        throw GenerationUnsupportedError(backend.descriptor().id);
    }
    const int per_prompt = options.images_per_prompt_override > 0
                               ? options.images_per_prompt_override
                               : images_per_prompt(mode);

    const std::vector<RenderedPrompt> prompts = taxonomy.render_prompts(class_value, augment_axis);

    PrototypeParts parts;
    parts.class_value = class_value;

    if (options.text_policy == TextPartPolicy::plain_prompt) {
        const auto plain = taxonomy.render_prompts(class_value, class_value.axis);
        parts.text_part = mean_embedding(backend.embed_texts(plain));
    } else {
        parts.text_part = mean_embedding(backend.embed_texts(prompts));
    }

    std::vector<ImageRef> all_refs;
    for (const RenderedPrompt& prompt : prompts) {
        std::vector<ImageRef> refs;
        if (mode != PrototypeMode::clip_baseline) {
            GenerationRequest req;
            req.prompt = prompt;
            req.count = per_prompt;
            req.seed = seed_for_prompt(options.generation_seed, prompt.text);
            refs = backend.generate_images(req);
        }
        all_refs.insert(all_refs.end(), refs.begin(), refs.end());
        parts.provenance.emplace_back(prompt, std::move(refs));
    }

    if (mode != PrototypeMode::clip_baseline) {
        parts.image_part = mean_embedding(backend.embed_images(all_refs));
    }
    return parts;
}

std::vector<PrototypeParts> build_all_parts(const Taxonomy& taxonomy,
                                            std::string_view target_axis,
                                            std::string_view augment_axis, PrototypeMode mode,
                                            Backend& backend, const PipelineOptions& options) {
    const DemographicAxis& axis = taxonomy.axis(target_axis);
    if (!taxonomy.has_template(target_axis, augment_axis)) {
        throw UnknownTemplateError(std::string(target_axis), std::string(augment_axis));
    }
    std::vector<PrototypeParts> out;
    out.reserve(axis.size());
    for (const std::string& label : axis.values) {
        out.push_back(build_parts(taxonomy, ClassValue{std::string(target_axis), label},
                                  augment_axis, mode, backend, options));
    }
    return out;
}

ClassPrototype fuse_parts(const PrototypeParts& parts, PrototypeMode mode, FusionWeight w) {
    ClassPrototype proto;
    proto.class_value = parts.class_value;
    proto.text_part = parts.text_part;
    proto.provenance = parts.provenance;
    if (mode == PrototypeMode::clip_baseline) {
        proto.image_part = std::nullopt;
        proto.fused = l2_normalize(parts.text_part);
        proto.w = FusionWeight(1.0);
        return proto;
    }
    if (!parts.image_part) {
        throw InvalidConfigError("fuse_parts: no image part for class " +
                                 parts.class_value.label + " (was build run in a D3G mode?)");
    }
    proto.image_part = parts.image_part;
    proto.fused = fuse(parts.text_part, *parts.image_part, w);
    proto.w = w;
    return proto;
}

std::vector<ClassPrototype> fuse_all(std::span<const PrototypeParts> parts, PrototypeMode mode,
                                     FusionWeight w) {
    std::vector<ClassPrototype> out;
    out.reserve(parts.size());
    for (const PrototypeParts& p : parts) out.push_back(fuse_parts(p, mode, w));
    return out;
}

ClassPrototype build_prototype(const Taxonomy& taxonomy, const ClassValue& class_value,
                               std::string_view augment_axis, PrototypeMode mode, FusionWeight w,
                               Backend& backend, const PipelineOptions& options) {
    return fuse_parts(build_parts(taxonomy, class_value, augment_axis, mode, backend, options),
                      mode, w);
}

Prediction classify(const Embedding& query, std::span<const ClassPrototype> prototypes) {
    if (prototypes.empty()) {
        throw EmptyInputError("classify: empty prototype set");
    }
    for (const ClassPrototype& p : prototypes) {
        if (p.class_value.axis != prototypes.front().class_value.axis) {
            throw InvalidConfigError("classify: prototypes mix axes '" +
                                     prototypes.front().class_value.axis + "' and '" +
                                     p.class_value.axis + "'");
        }
    }
    Prediction pred;
    size_t best = 0;
    double best_score = 0.0;
    bool first = true;
    for (size_t c = 0; c < prototypes.size(); ++c) {
        const double s = cosine(query, prototypes[c].fused);
        pred.scores.emplace(prototypes[c].class_value, s);
        // strict > keeps the earliest prototype on ties (canonical order)
        if (first || s > best_score) {
            best = c;
            best_score = s;
            first = false;
        }
    }
    pred.predicted = prototypes[best].class_value;
    return pred;
}

WeightScanResult scan_weights(std::span<const LabeledEmbedding> labeled,
                              std::span<const PrototypeParts> parts, int threads) {
    if (labeled.empty()) {
        throw EmptyInputError("scan_weights: labeled set is empty");
    }
    if (parts.empty()) {
        throw EmptyInputError("scan_weights: no prototype parts");
    }
    for (const PrototypeParts& p : parts) {
        if (!p.image_part) {
            throw InvalidConfigError("scan_weights: class " + p.class_value.label +
                                     " has no image part; the scan needs both parts");
        }
    }

    std::map<ClassValue, size_t> class_index;
    for (size_t c = 0; c < parts.size(); ++c) class_index.emplace(parts[c].class_value, c);
    std::vector<size_t> truth;
    truth.reserve(labeled.size());
    for (const LabeledEmbedding& q : labeled) {
        auto it = class_index.find(q.label);
        if (it == class_index.end()) {
            throw InvalidConfigError("scan_weights: no prototype part for label " +
                                     q.label.axis + "=" + q.label.label);
        }
        truth.push_back(it->second);
    }

    // One slot per grid point; threads write disjoint slots, no sync needed.
    std::array<uint32_t, 101> correct{};
    auto eval_grid_point = [&](int k) {
        const FusionWeight w = FusionWeight::from_grid(k);
        std::vector<Embedding> fused;
        fused.reserve(parts.size());
        for (const PrototypeParts& p : parts) fused.push_back(fuse(p.text_part, *p.image_part, w));
        uint32_t n = 0;
        for (size_t q = 0; q < labeled.size(); ++q) {
            size_t best = 0;
            double best_score = 0.0;
            bool first = true;
            for (size_t c = 0; c < fused.size(); ++c) {
                const double s = cosine(labeled[q].embedding, fused[c]);
                if (first || s > best_score) {
                    best = c;
                    best_score = s;
                    first = false;
                }
            }
            n += best == truth[q] ? 1 : 0;
        }
        correct[static_cast<size_t>(k)] = n;
    };

    unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads)
                                     : std::min(std::thread::hardware_concurrency(), 8u);
    n_threads = std::clamp(n_threads, 1u, 101u);
    if (n_threads == 1) {
        for (int k = 0; k <= 100; ++k) eval_grid_point(k);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        std::mutex err_mu;
        std::exception_ptr err;
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (int k = static_cast<int>(t); k <= 100; k += static_cast<int>(n_threads)) {
                        eval_grid_point(k);
                    }
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            });
        }
        for (std::thread& th : pool) th.join();
        if (err) std::rethrow_exception(err);
    }

    WeightScanResult result;
    const double total = static_cast<double>(labeled.size());
    uint32_t best_correct = 0;
    int best_k = 0;
    for (int k = 0; k <= 100; ++k) {
        const auto i = static_cast<size_t>(k);
        result.accuracy_by_w[i] = 100.0 * static_cast<double>(correct[i]) / total;
        // integer comparison, so float rounding can never shift the winner;
        // strict > keeps the smallest maximizing weight
        if (correct[i] > best_correct || k == 0) {
            best_correct = correct[i];
            best_k = k;
        }
    }
    result.best_w = FusionWeight::from_grid(best_k);
    result.best_accuracy = result.accuracy_by_w[static_cast<size_t>(best_k)];
    return result;
}

MethodRunResult run_method(const DatasetManifest& dataset, const Taxonomy& taxonomy,
                           std::string_view target_axis, std::string_view augment_axis,
                           PrototypeMode mode, Backend& backend, const PipelineOptions& options) {
    MethodRunResult result;
    result.mode = mode;
    result.target_axis = std::string(target_axis);
    result.augment_axis = std::string(augment_axis);

    for (size_t i = 0; i < dataset.images.size(); ++i) {
        if (const ClassValue* label = dataset.images[i].label(target_axis)) {
            result.evaluated_rows.push_back(i);
            result.true_labels.push_back(*label);
        }
    }
    if (result.evaluated_rows.empty()) {
        throw NoLabeledRowsError(std::string(target_axis));
    }

    const std::vector<PrototypeParts> parts =
        build_all_parts(taxonomy, target_axis, augment_axis, mode, backend, options);

    std::vector<ImageRef> query_refs;
    query_refs.reserve(result.evaluated_rows.size());
    for (size_t idx : result.evaluated_rows) query_refs.push_back(dataset.images[idx].image);
    const std::vector<Embedding> queries = backend.embed_images(query_refs);

    if (mode == PrototypeMode::clip_baseline) {
        result.prototypes = fuse_all(parts, mode, FusionWeight(1.0));
    } else {
        std::vector<LabeledEmbedding> labeled;
        labeled.reserve(queries.size());
        for (size_t i = 0; i < queries.size(); ++i) {
            labeled.push_back(LabeledEmbedding{queries[i], result.true_labels[i]});
        }
        result.scan = scan_weights(labeled, parts, options.scan_threads);
        result.prototypes = fuse_all(parts, mode, result.scan.best_w);
    }

    uint32_t n_correct = 0;
    result.predictions.reserve(queries.size());
    for (size_t i = 0; i < queries.size(); ++i) {
        Prediction pred = classify(queries[i], result.prototypes);
        pred.query = query_refs[i];
        n_correct += pred.predicted == result.true_labels[i] ? 1 : 0;
        result.predictions.push_back(std::move(pred));
    }

    if (mode == PrototypeMode::clip_baseline) {
        // No scan for the text-only baseline: report w = 1.00 with a flat
        // table so downstream consumers see the same 101-entry shape.
        const double acc =
            100.0 * static_cast<double>(n_correct) / static_cast<double>(queries.size());
        result.scan.accuracy_by_w.fill(acc);
        result.scan.best_w = FusionWeight(1.0);
        result.scan.best_accuracy = acc;
    }
    return result;
}

}  // namespace d3g
