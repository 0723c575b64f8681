#include <memory>
#include <set>
#include <vector>

#include <doctest.h>

#include "d3g/backend.hpp"
#include "d3g/embedding.hpp"
#include "d3g/errors.hpp"
#include "d3g/synthetic_backend.hpp"
#include "d3g/taxonomy.hpp"

using namespace d3g;

namespace {

RenderedPrompt prompt(const std::string& text) {
    RenderedPrompt p;
    p.text = text;
    return p;
}

}  // namespace

TEST_CASE("match_axis_value respects word boundaries and longest match") {
    const Taxonomy tax = Taxonomy::builtin();
    const DemographicAxis& race7 = tax.axis("race7");
    const DemographicAxis& gender = tax.axis("gender");
    const DemographicAxis& age = tax.axis("age");

    CHECK(match_axis_value(race7, "a photo of a southeast asian doctor") ==
          race7.index_of("Southeast Asian"));
    CHECK(match_axis_value(race7, "a photo of an east asian judge") ==
          race7.index_of("East Asian"));
    CHECK(match_axis_value(gender, "a photo of a female pilot") == gender.index_of("Female"));
    CHECK(match_axis_value(gender, "a photo of a male pilot") == gender.index_of("Male"));
    CHECK(match_axis_value(age, "a photo of a 20-29 year old") == age.index_of("20-29"));
    CHECK_FALSE(match_axis_value(age, "a photo of a 20-29 year old") == age.index_of("0-2"));
    CHECK_FALSE(match_axis_value(gender, "a photo of a chef").has_value());
}

TEST_CASE("synthetic text embeddings are deterministic with the configured dim") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticBackend backend(tax, SyntheticGeometry{});

    const Embedding a = backend.embed_text(prompt("A photo of a white person"));
    const Embedding b = backend.embed_text(prompt("A photo of a white person"));
    CHECK(a == b);
    CHECK(a.dim() == 16);
    CHECK(backend.descriptor().embedding_dim == 16);
    CHECK(backend.descriptor().kind == BackendKind::synthetic);

    CHECK_THROWS_AS(backend.embed_text(prompt("A photo of a sunset")), BackendUnavailableError);
}

TEST_CASE("class directions form the configured cone") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticGeometry geom;
    SyntheticBackend backend(tax, geom);

    for (size_t c = 0; c < 4; ++c) {
        CHECK(l2_norm(backend.class_direction(c)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (size_t i = 0; i < 4; ++i) {
        for (size_t j = i + 1; j < 4; ++j) {
            CHECK(cosine(backend.class_direction(i), backend.class_direction(j)) ==
                  doctest::Approx(geom.class_overlap).epsilon(1e-12));
        }
    }
}

TEST_CASE("degenerate geometry: no noise, no offsets") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticGeometry geom;
    geom.noise_sigma = 0.0;
    geom.text_bias = 0.0;
    geom.subgroup_offset = 0.0;
    SyntheticBackend backend(tax, geom);

    GenerationRequest req;
    req.prompt = prompt("A photo of a black person");
    req.count = 3;
    req.seed = 5;
    const auto refs = backend.generate_images(req);
    const size_t black = tax.axis("race4").index_of("Black");
    for (const ImageRef& ref : refs) {
        CHECK(backend.embed_image(ref) == backend.class_direction(black));
    }
    CHECK(backend.embed_text(req.prompt) == backend.class_direction(black));
}

TEST_CASE("majority text bias pulls text prototypes toward the majority cell") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticBackend backend(tax, SyntheticGeometry{});
    const size_t male = tax.axis("gender").index_of("Male");
    const size_t female = tax.axis("gender").index_of("Female");

    for (size_t c = 0; c < 4; ++c) {
        const Embedding text = backend.text_point(c, std::nullopt);
        const double to_majority = cosine(text, backend.image_center(c, male));
        const double to_minority = cosine(text, backend.image_center(c, female));
        CHECK(to_majority > to_minority);
    }
}

TEST_CASE("identical class directions are rejected") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticGeometry geom;
    geom.dim = 4;
    geom.text_bias = 0.0;
    geom.subgroup_offset = 0.0;
    const Embedding e0{1.0, 0.0, 0.0, 0.0};
    const Embedding e1{0.0, 1.0, 0.0, 0.0};
    geom.class_directions = {e0, e0, e1, e1};  // race4 needs 4; two coincide
    CHECK_THROWS_AS(SyntheticBackend(tax, geom), InvalidConfigError);

    geom.class_directions = {e0, e1, Embedding{0.0, 0.0, 1.0, 0.0}, Embedding{0.0, 0.0, 0.0, 1.0}};
    CHECK_NOTHROW(SyntheticBackend(tax, geom));
}

TEST_CASE("geometry validation") {
    const Taxonomy tax = Taxonomy::builtin();
    auto with = [](auto mutate) {
        SyntheticGeometry g;
        mutate(g);
        return g;
    };
    CHECK_THROWS_AS(SyntheticBackend(tax, with([](auto& g) { g.noise_sigma = -0.1; })),
                    InvalidConfigError);
    CHECK_THROWS_AS(SyntheticBackend(tax, with([](auto& g) { g.dim = 0; })), InvalidConfigError);
    CHECK_THROWS_AS(SyntheticBackend(tax, with([](auto& g) { g.class_overlap = 1.0; })),
                    InvalidConfigError);
    CHECK_THROWS_AS(SyntheticBackend(tax, with([](auto& g) { g.class_axis = "planet"; })),
                    InvalidConfigError);
    CHECK_THROWS_AS(SyntheticBackend(tax, with([](auto& g) { g.majority_label = "Other"; })),
                    Error);
    // per-class offsets for race4 x gender need 1 + 4 + 8 = 13 dims
    CHECK_THROWS_AS(SyntheticBackend(tax, with([](auto& g) { g.dim = 12; })), InvalidConfigError);
    CHECK_NOTHROW(SyntheticBackend(tax, with([](auto& g) { g.dim = 13; })));
}

TEST_CASE("generation is deterministic, distinct within a request") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticBackend backend(tax, SyntheticGeometry{});

    GenerationRequest req;
    req.prompt = prompt("A photo of an indian male");
    req.count = 5;
    req.seed = 7;

    const auto first = backend.generate_images(req);
    const auto second = backend.generate_images(req);
    REQUIRE(first.size() == 5);
    CHECK(first == second);

    std::set<std::string> ids;
    for (const ImageRef& ref : first) {
        ids.insert(ref.content_id);
        CHECK(ref.source == ImageSource::generated);
        REQUIRE(ref.provenance.has_value());
        CHECK(ref.provenance->prompt.text == req.prompt.text);
        CHECK(ref.provenance->seed == 7);
    }
    CHECK(ids.size() == 5);

    req.count = 1;
    const auto single_a = backend.generate_images(req);
    const auto single_b = backend.generate_images(req);
    CHECK(single_a == single_b);
    CHECK(single_a.size() == 1);

    req.seed = 8;
    CHECK(backend.generate_images(req) != single_a);

    req.count = 0;
    CHECK_THROWS_AS(backend.generate_images(req), InvalidConfigError);
}

TEST_CASE("image embedding: registry, provenance fallback, unknown id") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticBackend backend(tax, SyntheticGeometry{});

    GenerationRequest req;
    req.prompt = prompt("A photo of a white female");
    req.count = 2;
    req.seed = 3;
    const auto refs = backend.generate_images(req);

    const Embedding direct = backend.embed_image(refs[0]);
    CHECK(direct == backend.embed_image(refs[0]));
    CHECK(direct != backend.embed_image(refs[1]));  // per-image noise draw

    // a fresh instance with the same geometry has an empty registry but can
    // serve generated refs from their provenance alone
    SyntheticBackend fresh(tax, SyntheticGeometry{});
    CHECK(fresh.embed_image(refs[0]) == direct);

    ImageRef unknown;
    unknown.content_id = std::string(64, 'a');
    CHECK_THROWS_AS(backend.embed_image(unknown), BackendUnavailableError);
}

TEST_CASE("dataset registration makes manifest rows embeddable") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticGeometry geom;
    SyntheticBackend backend(tax, geom);

    SyntheticDatasetSpec spec;
    spec.name = "reg";
    spec.per_class = 6;
    const DatasetManifest manifest = synthesize_dataset(tax, geom, spec);
    REQUIRE(manifest.images.size() == 24);

    CHECK_THROWS_AS(backend.embed_image(manifest.images[0].image), BackendUnavailableError);
    backend.register_dataset(manifest);
    const Embedding e = backend.embed_image(manifest.images[0].image);
    CHECK(e.dim() == 16);
    CHECK(e == backend.embed_image(manifest.images[0].image));
}

TEST_CASE("synthesized dataset counts are exactly stratified") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticGeometry geom;
    SyntheticDatasetSpec spec;
    spec.per_class = 10;
    spec.subgroup_mix = {0.8, 0.2};
    const DatasetManifest manifest = synthesize_dataset(tax, geom, spec);

    CHECK(manifest.images.size() == 40);
    CHECK(manifest.counts.at(ClassValue{"gender", "Male"}) == 32);
    CHECK(manifest.counts.at(ClassValue{"gender", "Female"}) == 8);
    for (const std::string& label : tax.axis("race4").values) {
        CHECK(manifest.counts.at(ClassValue{"race4", label}) == 10);
    }

    SyntheticDatasetSpec bad = spec;
    bad.subgroup_mix = {0.5, 0.4};
    CHECK_THROWS_AS(synthesize_dataset(tax, geom, bad), InvalidConfigError);
    bad.subgroup_mix = {0.5, 0.25, 0.25};
    CHECK_THROWS_AS(synthesize_dataset(tax, geom, bad), InvalidConfigError);
}

TEST_CASE("counting backend tallies calls to the wrapped provider") {
    const Taxonomy tax = Taxonomy::builtin();
    auto inner = std::make_shared<SyntheticBackend>(tax, SyntheticGeometry{});
    CountingBackend counting(inner);

    GenerationRequest req;
    req.prompt = prompt("A photo of an asian male");
    req.count = 2;
    const auto refs = counting.generate_images(req);
    counting.embed_text(req.prompt);
    counting.embed_text(req.prompt);
    counting.embed_image(refs[0]);

    const BackendCallCounts counts = counting.counts();
    CHECK(counts.text_calls == 2);
    CHECK(counts.image_calls == 1);
    CHECK(counts.generate_calls == 1);
    CHECK(counts.total() == 4);

    counting.reset_counts();
    CHECK(counting.counts().total() == 0);
    CHECK(counting.descriptor() == inner->descriptor());
}

TEST_CASE("batch embed matches per-item embed") {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticBackend backend(tax, SyntheticGeometry{});
    std::vector<RenderedPrompt> prompts;
    for (const std::string& label : tax.axis("race4").values) {
        prompts.push_back(prompt("A photo of a " + casing_normalize(label) + " person"));
    }
    const auto batch = backend.embed_texts(prompts);
    REQUIRE(batch.size() == prompts.size());
    for (size_t i = 0; i < prompts.size(); ++i) {
        CHECK(batch[i] == backend.embed_text(prompts[i]));
    }
}

TEST_CASE("generation-incapable backends throw the capability error") {
    const Taxonomy tax = Taxonomy::builtin();

    struct TextOnly : Backend {
        BackendDescriptor desc{"text-only", BackendKind::synthetic, 4, "1"};
        const BackendDescriptor& descriptor() const override { return desc; }
        Embedding embed_text(const RenderedPrompt&) override { return Embedding{1, 0, 0, 0}; }
        Embedding embed_image(const ImageRef&) override { return Embedding{1, 0, 0, 0}; }
    } text_only;

    CHECK_FALSE(text_only.supports_generation());
    GenerationRequest req;
    req.prompt = prompt("A photo of a doctor");
    CHECK_THROWS_AS(text_only.generate_images(req), GenerationUnsupportedError);
    (void)tax;
}
