#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "d3g/backend.hpp"
#include "d3g/cache.hpp"
#include "d3g/pipeline.hpp"
#include "d3g/report.hpp"
#include "d3g/synthetic_backend.hpp"
#include "d3g/taxonomy.hpp"

namespace d3g {

struct BackendConfig {
    BackendKind kind = BackendKind::synthetic;
    std::string id;            // empty -> kind-specific default
    std::string version = "1";
    std::string endpoint;      // remote
    int dim = 0;               // remote (required there)
    int max_in_flight = 8;
    std::filesystem::path store_dir;  // file-store
    SyntheticGeometry geometry;       // synthetic
};

// Everything one evaluation run needs; mirrors the config file, and flags
// mirror these fields.
struct RunConfig {
    std::filesystem::path manifest;
    std::string target_axis = "race4";
    std::vector<std::string> augment_axes;   // empty -> every axis with a template
    std::vector<PrototypeMode> methods;      // empty -> all three
    BackendConfig backend;
    uint64_t seed = 17;
    std::filesystem::path cache_dir;         // empty -> no cache layer
    std::filesystem::path output_dir = "out";
    TextPartPolicy text_policy = TextPartPolicy::averaged_prompts;
    int images_per_prompt_override = -1;
    std::filesystem::path taxonomy_file;     // empty -> builtin
    std::string timestamp;                   // empty -> omitted from reports
};

RunConfig parse_run_config(const std::string& json_text, const std::string& origin = "<inline>");
RunConfig load_run_config(const std::filesystem::path& file);

// D3G_ENDPOINT overrides backend.endpoint, D3G_CACHE_DIR overrides cache_dir.
void apply_env_overrides(RunConfig& config);

Taxonomy taxonomy_for(const RunConfig& config);

// The raw provider named by the config (no cache or counting layers).
std::shared_ptr<Backend> make_backend(const BackendConfig& config, const Taxonomy& taxonomy);

struct EvaluateStats {
    BackendCallCounts backend_calls;  // calls that reached the raw provider
    uint64_t cache_hits{0};
    uint64_t cache_misses{0};
};

struct EvaluateResult {
    EvaluationReport report;
    EvaluateStats stats;
};

// Full grid run: every configured method x augment strategy over the
// manifest's target-labeled rows. Deterministic byte-for-byte given the same
// config, seed and cache contents.
EvaluateResult run_evaluation(const RunConfig& config);

// report.txt / report.csv / report.jsonl under out_dir; returns the paths.
std::vector<std::filesystem::path> write_report_files(const EvaluationReport& report,
                                                      const std::filesystem::path& out_dir);

}  // namespace d3g
