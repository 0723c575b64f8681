#include "d3g/run.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "d3g/dataset.hpp"
#include "d3g/errors.hpp"
#include "d3g/file_store.hpp"
#include "d3g/remote.hpp"

namespace d3g {

using nlohmann::json;

namespace {

const char* kTuningNote = "fusion weights tuned on the evaluation set";

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw InvalidConfigError("config: unknown key '" + key + "' in " + where);
    }
}

SyntheticGeometry parse_geometry(const json& obj) {
    reject_unknown_keys(obj,
                        {"dim", "seed", "class_axis", "subgroup_axis", "majority_label",
                         "generator_default_label", "class_overlap", "text_bias", "text_fidelity",
                         "subgroup_offset", "noise_sigma", "offset_mode", "id", "version"},
                        "backend.geometry");
    SyntheticGeometry g;
    if (obj.contains("dim")) g.dim = obj.at("dim").get<int>();
    if (obj.contains("seed")) g.seed = obj.at("seed").get<uint64_t>();
    if (obj.contains("class_axis")) g.class_axis = obj.at("class_axis").get<std::string>();
    if (obj.contains("subgroup_axis")) g.subgroup_axis = obj.at("subgroup_axis").get<std::string>();
    if (obj.contains("majority_label")) g.majority_label = obj.at("majority_label").get<std::string>();
    if (obj.contains("generator_default_label")) {
        g.generator_default_label = obj.at("generator_default_label").get<std::string>();
    }
    if (obj.contains("class_overlap")) g.class_overlap = obj.at("class_overlap").get<double>();
    if (obj.contains("text_bias")) g.text_bias = obj.at("text_bias").get<double>();
    if (obj.contains("text_fidelity")) g.text_fidelity = obj.at("text_fidelity").get<double>();
    if (obj.contains("subgroup_offset")) g.subgroup_offset = obj.at("subgroup_offset").get<double>();
    if (obj.contains("noise_sigma")) g.noise_sigma = obj.at("noise_sigma").get<double>();
    if (obj.contains("offset_mode")) {
        const std::string mode = obj.at("offset_mode").get<std::string>();
        if (mode == "per_class") {
            g.offset_mode = SyntheticGeometry::OffsetMode::per_class;
        } else if (mode == "shared") {
            g.offset_mode = SyntheticGeometry::OffsetMode::shared;
        } else {
            throw InvalidConfigError("config: offset_mode must be per_class or shared, got " +
                                     mode);
        }
    }
    if (obj.contains("id")) g.id = obj.at("id").get<std::string>();
    if (obj.contains("version")) g.version = obj.at("version").get<std::string>();
    return g;
}

BackendConfig parse_backend(const json& obj) {
    reject_unknown_keys(
        obj, {"kind", "id", "version", "endpoint", "dim", "max_in_flight", "store_dir", "geometry"},
        "backend");
    BackendConfig b;
    if (obj.contains("kind")) {
        const std::string kind = obj.at("kind").get<std::string>();
        if (kind == "synthetic") {
            b.kind = BackendKind::synthetic;
        } else if (kind == "file-store") {
            b.kind = BackendKind::file_store;
        } else if (kind == "remote") {
            b.kind = BackendKind::remote;
        } else {
            throw InvalidConfigError(
                "config: backend kind must be synthetic, file-store or remote, got " + kind);
        }
    }
    if (obj.contains("id")) b.id = obj.at("id").get<std::string>();
    if (obj.contains("version")) b.version = obj.at("version").get<std::string>();
    if (obj.contains("endpoint")) b.endpoint = obj.at("endpoint").get<std::string>();
    if (obj.contains("dim")) b.dim = obj.at("dim").get<int>();
    if (obj.contains("max_in_flight")) b.max_in_flight = obj.at("max_in_flight").get<int>();
    if (obj.contains("store_dir")) b.store_dir = obj.at("store_dir").get<std::string>();
    if (obj.contains("geometry")) b.geometry = parse_geometry(obj.at("geometry"));
    return b;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
    json obj;
    try {
        obj = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    if (!obj.is_object()) {
        throw ParseError(origin + ": config must be a JSON object");
    }
    try {
        reject_unknown_keys(obj,
                            {"manifest", "target_axis", "augment_axes", "methods", "backend",
                             "seed", "cache_dir", "output_dir", "text_part_policy",
                             "images_per_prompt", "taxonomy", "timestamp"},
                            "config");
        RunConfig c;
        if (obj.contains("manifest")) c.manifest = obj.at("manifest").get<std::string>();
        if (obj.contains("target_axis")) c.target_axis = obj.at("target_axis").get<std::string>();
        if (obj.contains("augment_axes")) {
            c.augment_axes = obj.at("augment_axes").get<std::vector<std::string>>();
        }
        if (obj.contains("methods")) {
            for (const auto& m : obj.at("methods").get<std::vector<std::string>>()) {
                c.methods.push_back(prototype_mode_from_string(m));
            }
        }
        if (obj.contains("backend")) c.backend = parse_backend(obj.at("backend"));
        if (obj.contains("seed")) c.seed = obj.at("seed").get<uint64_t>();
        if (obj.contains("cache_dir")) c.cache_dir = obj.at("cache_dir").get<std::string>();
        if (obj.contains("output_dir")) c.output_dir = obj.at("output_dir").get<std::string>();
        if (obj.contains("text_part_policy")) {
            c.text_policy =
                text_part_policy_from_string(obj.at("text_part_policy").get<std::string>());
        }
        if (obj.contains("images_per_prompt")) {
            c.images_per_prompt_override = obj.at("images_per_prompt").get<int>();
        }
        if (obj.contains("taxonomy")) c.taxonomy_file = obj.at("taxonomy").get<std::string>();
        if (obj.contains("timestamp")) c.timestamp = obj.at("timestamp").get<std::string>();
        return c;
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open config file: " + file.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), file.string());
}

void apply_env_overrides(RunConfig& config) {
    if (const char* endpoint = std::getenv("D3G_ENDPOINT")) {
        if (*endpoint != '\0') config.backend.endpoint = endpoint;
    }
    if (const char* cache_dir = std::getenv("D3G_CACHE_DIR")) {
        if (*cache_dir != '\0') config.cache_dir = cache_dir;
    }
}

Taxonomy taxonomy_for(const RunConfig& config) {
    return config.taxonomy_file.empty() ? Taxonomy::builtin() : Taxonomy::load(config.taxonomy_file);
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config, const Taxonomy& taxonomy) {
    switch (config.kind) {
        case BackendKind::synthetic: {
            SyntheticGeometry g = config.geometry;
            if (!config.id.empty()) g.id = config.id;
            g.version = config.version.empty() ? g.version : config.version;
            return std::make_shared<SyntheticBackend>(taxonomy, std::move(g));
        }
        case BackendKind::file_store: {
            if (config.store_dir.empty()) {
                throw InvalidConfigError("file-store backend: store_dir must be set");
            }
            return std::make_shared<FileStoreBackend>(config.store_dir);
        }
        case BackendKind::remote: {
            BackendDescriptor d;
            d.id = config.id.empty() ? "remote" : config.id;
            d.kind = BackendKind::remote;
            d.embedding_dim = config.dim;
            d.version = config.version;
            RemoteBackend::Options opts;
            opts.endpoint = config.endpoint;
            opts.max_in_flight = config.max_in_flight;
            return std::make_shared<RemoteBackend>(std::move(d), std::move(opts));
        }
    }
    throw InvalidConfigError("unknown backend kind");
}

EvaluateResult run_evaluation(const RunConfig& config) {
    const Taxonomy taxonomy = taxonomy_for(config);
    if (!taxonomy.has_axis(config.target_axis)) {
        throw UnknownAxisError(config.target_axis);
    }
    if (config.manifest.empty()) {
        throw InvalidConfigError("evaluate: a dataset manifest path is required");
    }
    const DatasetManifest manifest = ingest(config.manifest, taxonomy);

    std::shared_ptr<Backend> raw = make_backend(config.backend, taxonomy);
    if (auto* synthetic = dynamic_cast<SyntheticBackend*>(raw.get())) {
        synthetic->register_dataset(manifest);
    }
    auto counting = std::make_shared<CountingBackend>(raw);
    std::shared_ptr<Backend> effective = counting;
    std::shared_ptr<CachingBackend> caching;
    if (!config.cache_dir.empty()) {
        auto cache = std::make_shared<EmbeddingCache>(config.cache_dir);
        caching = std::make_shared<CachingBackend>(counting, cache);
        effective = caching;
    }

    std::vector<std::string> augments = config.augment_axes;
    if (augments.empty()) {
        augments = taxonomy.augment_axes_for(config.target_axis);
    } else {
        for (const std::string& a : augments) {
            if (!taxonomy.has_axis(a)) throw UnknownAxisError(a);
            if (!taxonomy.has_template(config.target_axis, a)) {
                throw UnknownTemplateError(config.target_axis, a);
            }
        }
    }
    std::vector<PrototypeMode> methods = config.methods;
    if (methods.empty()) {
        methods = {PrototypeMode::clip_baseline, PrototypeMode::standard_d3g,
                   PrototypeMode::average_image_d3g};
    }

    PipelineOptions options;
    options.text_policy = config.text_policy;
    options.images_per_prompt_override = config.images_per_prompt_override;
    options.generation_seed = config.seed;

    EvaluateResult result;
    result.report.metadata.dataset_name = manifest.name;
    result.report.metadata.backends.push_back(raw->descriptor());
    result.report.metadata.seed = config.seed;
    result.report.metadata.note = kTuningNote;
    result.report.metadata.timestamp = config.timestamp;
    for (const DemographicAxis& axis : taxonomy.axes()) {
        result.report.axis_display.emplace_back(axis.id, axis.display);
    }

    const DemographicAxis& target = taxonomy.axis(config.target_axis);
    for (PrototypeMode mode : methods) {
        for (const std::string& augment : augments) {
            MethodRunResult run = run_method(manifest, taxonomy, config.target_axis, augment,
                                             mode, *effective, options);
            EvaluationCell cell;
            cell.method = mode;
            cell.target_axis = config.target_axis;
            cell.augment_axis = augment;
            cell.top1 = top1_accuracy(run.predictions, run.true_labels);
            cell.w_text = run.scan.best_w.text();
            cell.w_image = run.scan.best_w.image();
            cell.support = run.predictions.size();
            result.report.grid.push_back(std::move(cell));

            PerClassRow row = per_class_accuracy(run.predictions, run.true_labels, target);
            row.method = mode;
            row.target_axis = config.target_axis;
            row.augment_axis = augment;
            result.report.per_class.push_back(std::move(row));
        }
    }

    result.stats.backend_calls = counting->counts();
    if (caching) {
        result.stats.cache_hits = caching->stats().hits;
        result.stats.cache_misses = caching->stats().misses;
    }
    return result;
}

std::vector<std::filesystem::path> write_report_files(const EvaluationReport& report,
                                                      const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::pair<const char*, ReportFormat> outputs[] = {
        {"report.txt", ReportFormat::table_text},
        {"report.csv", ReportFormat::csv},
        {"report.jsonl", ReportFormat::json_lines},
    };
    std::vector<std::filesystem::path> paths;
    for (const auto& [name, format] : outputs) {
        const std::filesystem::path path = out_dir / name;
        const std::string bytes = render_report(report, format);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("cannot write report file: " + path.string());
        paths.push_back(path);
    }
    return paths;
}

}  // namespace d3g
