#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "d3g/dataset.hpp"
#include "d3g/errors.hpp"
#include "d3g/run.hpp"
#include "d3g/synthetic_backend.hpp"

#include "support/test_util.hpp"

using namespace d3g;
using d3g::testutil::TempDir;

namespace {

// A valid manifest on disk, drawn from the default synthetic geometry.
std::filesystem::path write_manifest(const TempDir& tmp, size_t per_class = 10,
                                     uint64_t seed = 99) {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticDatasetSpec spec;
    spec.name = "run-test";
    spec.per_class = per_class;
    spec.seed = seed;
    const DatasetManifest manifest = synthesize_dataset(tax, SyntheticGeometry{}, spec);
    const auto path = tmp.path / "manifest.txt";
    testutil::write_file(path, serialize_manifest(manifest, tax));
    return path;
}

}  // namespace

TEST_CASE("run config: every key parses into its field") {
    const std::string text = R"({
        "manifest": "data/m.txt",
        "target_axis": "profession",
        "augment_axes": ["gender", "age"],
        "methods": ["clip_baseline", "standard_d3g"],
        "backend": {
            "kind": "synthetic",
            "id": "synth-a",
            "version": "7",
            "geometry": {"dim": 24, "noise_sigma": 0.05, "offset_mode": "shared"}
        },
        "seed": 123,
        "cache_dir": "/tmp/cache",
        "output_dir": "results",
        "text_part_policy": "plain_prompt",
        "images_per_prompt": 3,
        "timestamp": "2024-05-01T00:00:00Z"
    })";
    const RunConfig c = parse_run_config(text);
    CHECK(c.manifest == "data/m.txt");
    CHECK(c.target_axis == "profession");
    CHECK(c.augment_axes == std::vector<std::string>{"gender", "age"});
    REQUIRE(c.methods.size() == 2);
    CHECK(c.methods[0] == PrototypeMode::clip_baseline);
    CHECK(c.methods[1] == PrototypeMode::standard_d3g);
    CHECK(c.backend.kind == BackendKind::synthetic);
    CHECK(c.backend.id == "synth-a");
    CHECK(c.backend.version == "7");
    CHECK(c.backend.geometry.dim == 24);
    CHECK(c.backend.geometry.noise_sigma == 0.05);
    CHECK(c.backend.geometry.offset_mode == SyntheticGeometry::OffsetMode::shared);
    CHECK(c.seed == 123);
    CHECK(c.cache_dir == "/tmp/cache");
    CHECK(c.output_dir == "results");
    CHECK(c.text_policy == TextPartPolicy::plain_prompt);
    CHECK(c.images_per_prompt_override == 3);
    CHECK(c.timestamp == "2024-05-01T00:00:00Z");

    // defaults when keys are absent
    const RunConfig d = parse_run_config("{}");
    CHECK(d.target_axis == "race4");
    CHECK(d.augment_axes.empty());
    CHECK(d.methods.empty());
    CHECK(d.seed == 17);
    CHECK(d.images_per_prompt_override == -1);
}

TEST_CASE("run config: malformed input is rejected with its origin") {
    CHECK_THROWS_AS(parse_run_config("{\"targets\": 1}"), InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"backend\": {\"kinds\": \"x\"}}"), InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"backend\": {\"geometry\": {\"sigma\": 1}}}"),
                    InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"methods\": [\"ensemble\"]}"), InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("{\"backend\": {\"kind\": \"gpu\"}}"), InvalidConfigError);
    CHECK_THROWS_AS(
        parse_run_config("{\"backend\": {\"geometry\": {\"offset_mode\": \"spiral\"}}}"),
        InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("[]"), ParseError);

    try {
        parse_run_config("{nope", "bad.json");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
    }

    CHECK_THROWS_AS(load_run_config("/does/not/exist.json"), ParseError);
}

TEST_CASE("run config: file loading and environment overrides") {
    TempDir tmp;
    const auto file = tmp.path / "run.json";
    testutil::write_file(file, "{\"seed\": 5, \"cache_dir\": \"from-file\"}");
    RunConfig c = load_run_config(file);
    CHECK(c.seed == 5);
    CHECK(c.cache_dir == "from-file");

    ::setenv("D3G_CACHE_DIR", "/env/cache", 1);
    ::setenv("D3G_ENDPOINT", "http://env:9", 1);
    apply_env_overrides(c);
    ::unsetenv("D3G_CACHE_DIR");
    ::unsetenv("D3G_ENDPOINT");
    CHECK(c.cache_dir == "/env/cache");
    CHECK(c.backend.endpoint == "http://env:9");

    // empty values do not override
    ::setenv("D3G_CACHE_DIR", "", 1);
    apply_env_overrides(c);
    ::unsetenv("D3G_CACHE_DIR");
    CHECK(c.cache_dir == "/env/cache");
}

TEST_CASE("taxonomy_for and make_backend") {
    RunConfig c;
    CHECK(taxonomy_for(c).axes().size() == 5);

    const Taxonomy tax = Taxonomy::builtin();
    auto synth = make_backend(c.backend, tax);
    CHECK(synth->descriptor().id == "synthetic");  // geometry default when id is unset

    BackendConfig named;
    named.id = "my-synth";
    named.version = "9";
    auto named_backend = make_backend(named, tax);
    CHECK(named_backend->descriptor().id == "my-synth");
    CHECK(named_backend->descriptor().version == "9");

    BackendConfig store;
    store.kind = BackendKind::file_store;
    CHECK_THROWS_AS(make_backend(store, tax), InvalidConfigError);

    BackendConfig remote;
    remote.kind = BackendKind::remote;
    remote.endpoint = "http://127.0.0.1:1";
    CHECK_THROWS_AS(make_backend(remote, tax), InvalidConfigError);  // dim not stated
    remote.dim = 16;
    CHECK(make_backend(remote, tax)->descriptor().embedding_dim == 16);
}

TEST_CASE("run_evaluation produces the full method x augment grid") {
    TempDir tmp;
    RunConfig c;
    c.manifest = write_manifest(tmp);
    c.augment_axes = {"gender"};
    c.methods = {PrototypeMode::clip_baseline, PrototypeMode::standard_d3g};
    c.output_dir = tmp.path / "out";

    const EvaluateResult result = run_evaluation(c);
    REQUIRE(result.report.grid.size() == 2);
    CHECK(result.report.grid[0].method == PrototypeMode::clip_baseline);
    CHECK(result.report.grid[0].w_text == 1.0);
    CHECK(result.report.grid[1].method == PrototypeMode::standard_d3g);
    CHECK(result.report.grid[0].support == 40);
    CHECK(result.report.per_class.size() == 2);
    CHECK(result.report.metadata.dataset_name == "run-test");
    CHECK(result.report.metadata.note == "fusion weights tuned on the evaluation set");
    CHECK(result.report.metadata.timestamp.empty());
    CHECK(result.stats.backend_calls.total() > 0);
    CHECK(result.stats.cache_hits == 0);  // no cache configured

    // empty augment list expands to every compatible axis
    RunConfig wide = c;
    wide.augment_axes.clear();
    wide.methods = {PrototypeMode::clip_baseline};
    const EvaluateResult expanded = run_evaluation(wide);
    CHECK(expanded.report.grid.size() == 4);  // profession, race4, gender, age

    // byte-for-byte determinism across runs
    const EvaluateResult again = run_evaluation(c);
    CHECK(render_report(again.report, ReportFormat::json_lines) ==
          render_report(result.report, ReportFormat::json_lines));
}

TEST_CASE("run_evaluation validates its configuration") {
    TempDir tmp;
    RunConfig c;
    c.manifest = write_manifest(tmp, 4);

    RunConfig no_manifest = c;
    no_manifest.manifest.clear();
    CHECK_THROWS_AS(run_evaluation(no_manifest), InvalidConfigError);

    RunConfig bad_target = c;
    bad_target.target_axis = "species";
    CHECK_THROWS_AS(run_evaluation(bad_target), UnknownAxisError);

    RunConfig bad_augment = c;
    bad_augment.augment_axes = {"race7"};  // race4 x race7 has no template
    CHECK_THROWS_AS(run_evaluation(bad_augment), UnknownTemplateError);

    RunConfig unknown_augment = c;
    unknown_augment.augment_axes = {"species"};
    CHECK_THROWS_AS(run_evaluation(unknown_augment), UnknownAxisError);
}

TEST_CASE("write_report_files emits all three formats and jsonl reparses") {
    TempDir tmp;
    RunConfig c;
    c.manifest = write_manifest(tmp, 5);
    c.augment_axes = {"gender"};
    c.methods = {PrototypeMode::clip_baseline};

    const EvaluateResult result = run_evaluation(c);
    const auto paths = write_report_files(result.report, tmp.path / "out");
    REQUIRE(paths.size() == 3);
    CHECK(paths[0].filename() == "report.txt");
    CHECK(paths[1].filename() == "report.csv");
    CHECK(paths[2].filename() == "report.jsonl");
    for (const auto& p : paths) {
        CHECK(std::filesystem::exists(p));
        CHECK(std::filesystem::file_size(p) > 0);
    }

    const EvaluationReport back = parse_report_jsonl(testutil::read_file(paths[2]));
    CHECK(back == result.report);
}
