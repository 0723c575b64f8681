#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "d3g/embedding.hpp"
#include "d3g/errors.hpp"
#include "d3g/taxonomy.hpp"

namespace d3g {

enum class BackendKind { synthetic, file_store, remote };

std::string to_string(BackendKind kind);

struct BackendDescriptor {
    std::string id;
    BackendKind kind{BackendKind::synthetic};
    int embedding_dim{0};
    std::string version;

    bool operator==(const BackendDescriptor&) const = default;
};

enum class ImageSource { generated, dataset };

std::string to_string(ImageSource source);

// How a generated image came to be: the prompt, the seed, and any opaque
// generator settings (guidance scale, step count, ...) recorded verbatim.
struct PromptProvenance {
    RenderedPrompt prompt;
    uint64_t seed{0};
    std::vector<std::pair<std::string, std::string>> settings;

    bool operator==(const PromptProvenance&) const = default;
};

// Opaque handle to pixel content. The engine never touches pixels; it only
// moves content ids between generator, embedder and cache.
struct ImageRef {
    std::string content_id;  // sha256 hex of the pixel content
    ImageSource source{ImageSource::dataset};
    std::optional<PromptProvenance> provenance;

    bool operator==(const ImageRef&) const = default;
};

struct GenerationRequest {
    RenderedPrompt prompt;
    int count{1};
    uint64_t seed{0};
};

// Narrow provider interface: text embedding, image embedding and (optionally)
// conditional image generation. Implementations must be safe to call from
// multiple threads and referentially transparent within one (id, version).
class Backend {
public:
    virtual ~Backend() = default;

    virtual const BackendDescriptor& descriptor() const = 0;

    virtual Embedding embed_text(const RenderedPrompt& prompt) = 0;
    virtual Embedding embed_image(const ImageRef& image) = 0;

    virtual bool supports_generation() const { return false; }
    // Exactly request.count refs, ids unique within the request, each ref
    // carrying prompt provenance. Throws GenerationUnsupported by default.
    virtual std::vector<ImageRef> generate_images(const GenerationRequest& request);

    // Batch forms; the defaults loop, the remote client overrides them to
    // coalesce wire round-trips.
    virtual std::vector<Embedding> embed_texts(std::span<const RenderedPrompt> prompts);
    virtual std::vector<Embedding> embed_images(std::span<const ImageRef> images);
};

struct BackendCallCounts {
    uint64_t text_calls{0};
    uint64_t image_calls{0};
    uint64_t generate_calls{0};

    uint64_t total() const { return text_calls + image_calls + generate_calls; }

    bool operator==(const BackendCallCounts&) const = default;
};

// Decorator that counts how often the wrapped backend is actually hit.
// Wrapping the inner (pre-cache) backend lets tests assert that a warm
// cache results in zero provider calls.
class CountingBackend : public Backend {
public:
    explicit CountingBackend(std::shared_ptr<Backend> inner);

    const BackendDescriptor& descriptor() const override;
    Embedding embed_text(const RenderedPrompt& prompt) override;
    Embedding embed_image(const ImageRef& image) override;
    bool supports_generation() const override;
    std::vector<ImageRef> generate_images(const GenerationRequest& request) override;

    BackendCallCounts counts() const;
    void reset_counts();

private:
    std::shared_ptr<Backend> inner_;
    std::atomic<uint64_t> text_calls_{0};
    std::atomic<uint64_t> image_calls_{0};
    std::atomic<uint64_t> generate_calls_{0};
};

}  // namespace d3g
