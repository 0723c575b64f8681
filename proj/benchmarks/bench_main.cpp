// Microbenchmarks for the hot paths: cosine/fuse kernels, mean pooling, the
// 101-point weight scan and content hashing.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "d3g/embedding.hpp"
#include "d3g/hashing.hpp"
#include "d3g/pipeline.hpp"
#include "d3g/synthetic_backend.hpp"
#include "d3g/taxonomy.hpp"

using namespace d3g;

namespace {

Embedding random_embedding(std::mt19937_64& rng, size_t dim) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Embedding e;
    e.values.resize(dim);
    for (double& x : e.values) x = unit(rng);
    return e;
}

}  // namespace

static void BM_Cosine(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const auto a = random_embedding(rng, static_cast<size_t>(state.range(0)));
    const auto b = random_embedding(rng, static_cast<size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(cosine(a, b));
    }
}
BENCHMARK(BM_Cosine)->Arg(16)->Arg(512);

static void BM_Fuse(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const auto text = random_embedding(rng, static_cast<size_t>(state.range(0)));
    const auto image = random_embedding(rng, static_cast<size_t>(state.range(0)));
    const FusionWeight w(0.85);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fuse(text, image, w));
    }
}
BENCHMARK(BM_Fuse)->Arg(16)->Arg(512);

static void BM_MeanEmbedding(benchmark::State& state) {
    std::mt19937_64 rng(3);
    std::vector<Embedding> batch;
    for (int i = 0; i < 46; ++i) batch.push_back(random_embedding(rng, 512));
    for (auto _ : state) {
        benchmark::DoNotOptimize(mean_embedding(batch));
    }
}
BENCHMARK(BM_MeanEmbedding);

static void BM_Sha256(benchmark::State& state) {
    const std::string payload(static_cast<size_t>(state.range(0)), 'x');
    for (auto _ : state) {
        benchmark::DoNotOptimize(sha256_hex(payload));
    }
}
BENCHMARK(BM_Sha256)->Arg(64)->Arg(4096);

static void BM_SyntheticEmbedText(benchmark::State& state) {
    const Taxonomy tax = Taxonomy::builtin();
    SyntheticBackend backend(tax, SyntheticGeometry{});
    RenderedPrompt prompt;
    prompt.text = "A photo of a white male person";
    for (auto _ : state) {
        benchmark::DoNotOptimize(backend.embed_text(prompt));
    }
}
BENCHMARK(BM_SyntheticEmbedText);

// Full 0.01-grid scan: 4 classes, `range(0)` labeled queries, dim 16.
static void BM_ScanWeights(benchmark::State& state) {
    std::mt19937_64 rng(4);
    const size_t dim = 16, classes = 4;
    const char* names[classes] = {"a", "b", "c", "d"};

    std::vector<PrototypeParts> parts(classes);
    for (size_t c = 0; c < classes; ++c) {
        parts[c].class_value = ClassValue{"cls", names[c]};
        parts[c].text_part = random_embedding(rng, dim);
        parts[c].image_part = random_embedding(rng, dim);
    }
    std::vector<LabeledEmbedding> labeled;
    for (int q = 0; q < state.range(0); ++q) {
        labeled.push_back(LabeledEmbedding{random_embedding(rng, dim),
                                           ClassValue{"cls", names[static_cast<size_t>(q) % classes]}});
    }

    const int threads = static_cast<int>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(scan_weights(labeled, parts, threads));
    }
}
BENCHMARK(BM_ScanWeights)
    ->Args({200, 1})
    ->Args({200, 0})
    ->Args({2000, 1})
    ->Args({2000, 0})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
