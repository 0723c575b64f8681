// Batch front end: renders prompt sets, builds prototypes, runs evaluations
// and re-renders saved reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "d3g/cache.hpp"
#include "d3g/errors.hpp"
#include "d3g/pipeline.hpp"
#include "d3g/report.hpp"
#include "d3g/run.hpp"
#include "d3g/taxonomy.hpp"

namespace {

// Shared flag surface; mirrors RunConfig. Precedence: defaults < config
// file < environment < explicit flags.
struct ConfigFlags {
    std::string config_path;
    std::string manifest;
    std::string target;
    std::vector<std::string> augments;
    std::vector<std::string> methods;
    std::string backend_kind;
    std::string endpoint;
    std::string store_dir;
    int dim = 0;
    std::string cache_dir;
    std::string output_dir;
    uint64_t seed = 0;
    std::string text_policy;
    std::string taxonomy;
    int images_per_prompt = -1;

    CLI::Option* o_manifest = nullptr;
    CLI::Option* o_target = nullptr;
    CLI::Option* o_augment = nullptr;
    CLI::Option* o_method = nullptr;
    CLI::Option* o_backend = nullptr;
    CLI::Option* o_endpoint = nullptr;
    CLI::Option* o_store = nullptr;
    CLI::Option* o_dim = nullptr;
    CLI::Option* o_cache = nullptr;
    CLI::Option* o_output = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_policy = nullptr;
    CLI::Option* o_taxonomy = nullptr;
    CLI::Option* o_ipp = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags override it)");
        o_manifest = cmd->add_option("--manifest", manifest, "dataset manifest file");
        o_target = cmd->add_option("--target", target, "target demographic axis");
        o_augment = cmd->add_option("--augment", augments,
                                    "augmenting axes (repeatable; default: all with templates)");
        o_method = cmd->add_option(
            "--method", methods,
            "methods: clip_baseline, standard_d3g, average_image_d3g (repeatable)");
        o_backend =
            cmd->add_option("--backend", backend_kind, "backend kind: synthetic|file-store|remote");
        o_endpoint = cmd->add_option("--endpoint", endpoint,
                                     "remote backend endpoint (or env D3G_ENDPOINT)");
        o_store = cmd->add_option("--store", store_dir, "file-store backend directory");
        o_dim = cmd->add_option("--dim", dim, "embedding dim (required for remote backends)");
        o_cache = cmd->add_option("--cache-dir", cache_dir,
                                  "embedding cache directory (or env D3G_CACHE_DIR)");
        o_output = cmd->add_option("--output", output_dir, "report output directory");
        o_seed = cmd->add_option("--seed", seed, "base seed for generation and noise");
        o_policy = cmd->add_option("--text-policy", text_policy,
                                   "text part policy: averaged_prompts|plain_prompt");
        o_taxonomy = cmd->add_option("--taxonomy", taxonomy, "taxonomy JSON (default: built-in)");
        o_ipp = cmd->add_option("--images-per-prompt", images_per_prompt,
                                "override the mode's generated images per prompt");
    }

    d3g::RunConfig resolve() const {
        d3g::RunConfig cfg =
            config_path.empty() ? d3g::RunConfig{} : d3g::load_run_config(config_path);
        d3g::apply_env_overrides(cfg);
        if (o_manifest->count() > 0) cfg.manifest = manifest;
        if (o_target->count() > 0) cfg.target_axis = target;
        if (o_augment->count() > 0) cfg.augment_axes = augments;
        if (o_method->count() > 0) {
            cfg.methods.clear();
            for (const std::string& m : methods) {
                cfg.methods.push_back(d3g::prototype_mode_from_string(m));
            }
        }
        if (o_backend->count() > 0) {
            if (backend_kind == "synthetic") {
                cfg.backend.kind = d3g::BackendKind::synthetic;
            } else if (backend_kind == "file-store") {
                cfg.backend.kind = d3g::BackendKind::file_store;
            } else if (backend_kind == "remote") {
                cfg.backend.kind = d3g::BackendKind::remote;
            } else {
                throw d3g::InvalidConfigError(
                    "--backend must be synthetic, file-store or remote, got " + backend_kind);
            }
        }
        if (o_endpoint->count() > 0) cfg.backend.endpoint = endpoint;
        if (o_store->count() > 0) cfg.backend.store_dir = store_dir;
        if (o_dim->count() > 0) cfg.backend.dim = dim;
        if (o_cache->count() > 0) cfg.cache_dir = cache_dir;
        if (o_output->count() > 0) cfg.output_dir = output_dir;
        if (o_seed->count() > 0) cfg.seed = seed;
        if (o_policy->count() > 0) cfg.text_policy = d3g::text_part_policy_from_string(text_policy);
        if (o_taxonomy->count() > 0) cfg.taxonomy_file = taxonomy;
        if (o_ipp->count() > 0) cfg.images_per_prompt_override = images_per_prompt;
        return cfg;
    }
};

void write_or_print(const std::string& bytes, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << bytes;
        return;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw d3g::Error("cannot write file: " + out_path);
}

// One line per rendered prompt:
//   <target>\t<augment>\t<target label>\t<augment label or ->\t<text>
std::string prompt_listing(const d3g::Taxonomy& taxonomy, const std::string& only_target,
                           const std::vector<std::string>& only_augments) {
    std::ostringstream out;
    for (const d3g::DemographicAxis& axis : taxonomy.axes()) {
        if (!only_target.empty() && axis.id != only_target) continue;
        std::vector<std::string> augments =
            only_augments.empty() ? taxonomy.augment_axes_for(axis.id) : only_augments;
        for (const std::string& augment : augments) {
            for (const auto& [value, prompts] : taxonomy.render_all(axis.id, augment)) {
                for (const d3g::RenderedPrompt& p : prompts) {
                    out << axis.id << "\t" << augment << "\t" << value.label << "\t"
                        << (p.augment_value ? p.augment_value->label : "-") << "\t" << p.text
                        << "\n";
                }
            }
        }
    }
    return out.str();
}

int cmd_prompts(const ConfigFlags& flags, const std::string& out_path) {
    const d3g::RunConfig cfg = flags.resolve();
    const d3g::Taxonomy taxonomy = d3g::taxonomy_for(cfg);
    const std::string only_target = flags.o_target->count() > 0 ? flags.target : "";
    if (!only_target.empty() && !taxonomy.has_axis(only_target)) {
        throw d3g::UnknownAxisError(only_target);
    }
    std::vector<std::string> only_augments;
    if (flags.o_augment->count() > 0) {
        only_augments = flags.augments;
        for (const std::string& a : only_augments) {
            if (!taxonomy.has_axis(a)) throw d3g::UnknownAxisError(a);
        }
    }
    write_or_print(prompt_listing(taxonomy, only_target, only_augments), out_path);
    return 0;
}

int cmd_build(const ConfigFlags& flags, int retries) {
    d3g::RunConfig cfg = flags.resolve();
    if (cfg.cache_dir.empty()) {
        throw d3g::InvalidConfigError(
            "build persists prototypes through the cache; set --cache-dir or D3G_CACHE_DIR");
    }
    const d3g::Taxonomy taxonomy = d3g::taxonomy_for(cfg);
    if (!taxonomy.has_axis(cfg.target_axis)) throw d3g::UnknownAxisError(cfg.target_axis);

    auto raw = d3g::make_backend(cfg.backend, taxonomy);
    auto counting = std::make_shared<d3g::CountingBackend>(raw);
    auto cache = std::make_shared<d3g::EmbeddingCache>(cfg.cache_dir);
    d3g::CachingBackend backend(counting, cache);

    std::vector<std::string> augments = cfg.augment_axes;
    if (augments.empty()) augments = taxonomy.augment_axes_for(cfg.target_axis);
    std::vector<d3g::PrototypeMode> methods = cfg.methods;
    if (methods.empty()) {
        methods = {d3g::PrototypeMode::clip_baseline, d3g::PrototypeMode::standard_d3g,
                   d3g::PrototypeMode::average_image_d3g};
    }

    d3g::PipelineOptions options;
    options.text_policy = cfg.text_policy;
    options.images_per_prompt_override = cfg.images_per_prompt_override;
    options.generation_seed = cfg.seed;

    for (d3g::PrototypeMode mode : methods) {
        for (const std::string& augment : augments) {
            int attempt = 0;
            for (;;) {
                ++attempt;
                try {
                    auto parts = d3g::build_all_parts(taxonomy, cfg.target_axis, augment, mode,
                                                      backend, options);
                    std::cout << "built " << parts.size() << " prototypes target="
                              << cfg.target_axis << " augment=" << augment << " method="
                              << d3g::to_string(mode) << "\n";
                    break;
                } catch (const d3g::BackendUnavailableError& e) {
                    if (attempt > retries) {
                        throw d3g::BackendUnavailableError(std::string(e.what()) + " (after " +
                                                           std::to_string(attempt) + " attempts)");
                    }
                    std::cerr << "retrying (" << attempt << "/" << retries << "): " << e.what()
                              << "\n";
                }
            }
        }
    }
    const auto calls = counting->counts();
    const auto stats = backend.stats();
    std::cout << "stats: backend_calls=" << calls.total() << " cache_hits=" << stats.hits
              << " cache_misses=" << stats.misses << "\n";
    return 0;
}

int cmd_evaluate(const ConfigFlags& flags) {
    const d3g::RunConfig cfg = flags.resolve();
    const d3g::EvaluateResult result = d3g::run_evaluation(cfg);
    for (const auto& path : d3g::write_report_files(result.report, cfg.output_dir)) {
        std::cout << "wrote " << path.string() << "\n";
    }
    std::cout << "stats: backend_calls=" << result.stats.backend_calls.total()
              << " cache_hits=" << result.stats.cache_hits
              << " cache_misses=" << result.stats.cache_misses << "\n";
    return 0;
}

int cmd_report(const std::string& from, const std::string& format, const std::string& out_path) {
    std::ifstream in(from, std::ios::binary);
    if (!in) throw d3g::Error("cannot open report file: " + from);
    std::ostringstream buf;
    buf << in.rdbuf();
    const d3g::EvaluationReport report = d3g::parse_report_jsonl(buf.str());
    write_or_print(d3g::render_report(report, d3g::report_format_from_string(format)), out_path);
    return 0;
}

int cmd_cache_inspect(const ConfigFlags& flags) {
    const d3g::RunConfig cfg = flags.resolve();
    if (cfg.cache_dir.empty()) {
        throw d3g::InvalidConfigError("set --cache-dir or D3G_CACHE_DIR");
    }
    d3g::EmbeddingCache cache(cfg.cache_dir);
    const auto stats = cache.stats();
    std::cout << "cache " << cache.root().string() << ": " << stats.entries << " entries, "
              << stats.bytes << " bytes\n";

    namespace fs = std::filesystem;
    for (const auto& backend_dir : fs::directory_iterator(cache.root())) {
        if (!backend_dir.is_directory()) continue;
        for (const auto& version_dir : fs::directory_iterator(backend_dir.path())) {
            if (!version_dir.is_directory()) continue;
            const auto hashes = cache.list_hashes(backend_dir.path().filename().string(),
                                                  version_dir.path().filename().string());
            std::cout << "  " << backend_dir.path().filename().string() << "/"
                      << version_dir.path().filename().string() << ": " << hashes.size()
                      << " entries\n";
        }
    }
    return 0;
}

int cmd_cache_purge(const ConfigFlags& flags, const std::string& backend_id,
                    const std::string& version) {
    const d3g::RunConfig cfg = flags.resolve();
    if (cfg.cache_dir.empty()) {
        throw d3g::InvalidConfigError("set --cache-dir or D3G_CACHE_DIR");
    }
    d3g::EmbeddingCache cache(cfg.cache_dir);
    std::cout << "purged " << cache.purge(backend_id, version) << " entries\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free diverse-prototype zero-shot classification"};
    app.require_subcommand(1);

    auto* prompts = app.add_subcommand("prompts", "render the demographic prompt sets");
    ConfigFlags prompt_flags;
    prompt_flags.attach(prompts);
    std::string prompts_out;
    prompts->add_option("--out", prompts_out, "output file (default: stdout)");

    auto* build = app.add_subcommand("build", "build class prototypes and persist via the cache");
    ConfigFlags build_flags;
    build_flags.attach(build);
    int build_retries = 2;
    build->add_option("--retries", build_retries, "retry count for unavailable backends");

    auto* evaluate = app.add_subcommand("evaluate", "run the method x strategy evaluation grid");
    ConfigFlags eval_flags;
    eval_flags.attach(evaluate);

    auto* report = app.add_subcommand("report", "re-render a saved report.jsonl");
    std::string report_from;
    std::string report_format = "table-text";
    std::string report_out;
    report->add_option("--from", report_from, "report.jsonl to read")->required();
    report->add_option("--format", report_format, "table-text|csv|json-lines");
    report->add_option("--out", report_out, "output file (default: stdout)");

    auto* cache = app.add_subcommand("cache", "inspect or purge the embedding cache");
    cache->require_subcommand(1);
    auto* inspect = cache->add_subcommand("inspect", "show cache contents");
    ConfigFlags inspect_flags;
    inspect_flags.attach(inspect);
    auto* purge = cache->add_subcommand("purge", "drop cache entries");
    ConfigFlags purge_flags;
    purge_flags.attach(purge);
    std::string purge_backend;
    std::string purge_version;
    purge->add_option("--backend-id", purge_backend, "limit purge to one backend id");
    purge->add_option("--backend-version", purge_version, "limit purge to one backend version");

    CLI11_PARSE(app, argc, argv);

    try {
        if (prompts->parsed()) return cmd_prompts(prompt_flags, prompts_out);
        if (build->parsed()) return cmd_build(build_flags, build_retries);
        if (evaluate->parsed()) return cmd_evaluate(eval_flags);
        if (report->parsed()) return cmd_report(report_from, report_format, report_out);
        if (cache->parsed()) {
            if (inspect->parsed()) return cmd_cache_inspect(inspect_flags);
            if (purge->parsed()) return cmd_cache_purge(purge_flags, purge_backend, purge_version);
        }
    } catch (const d3g::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
