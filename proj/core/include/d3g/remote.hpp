#pragma once

#include <memory>
#include <semaphore>
#include <span>
#include <string>

#include "d3g/backend.hpp"

namespace d3g {

// HTTP client for an embedding/generation service speaking the wire contract:
//   POST /v1/embed_text  {"texts": [..]}        -> {"dim": n, "embeddings": [[..]..]}
//   POST /v1/embed_image {"content_ids": [..]}  -> {"dim": n, "embeddings": [[..]..]}
//   POST /v1/generate    {"prompt", "count", "seed"} -> {"content_ids": [..]}
// The wire carries bare strings; the client reattaches provenance from its
// own request. In-flight requests are bounded by max_in_flight; batch calls
// are chunked and dispatched concurrently.
class RemoteBackend : public Backend {
public:
    struct Options {
        std::string endpoint;  // e.g. "http://127.0.0.1:8080"
        int max_in_flight = 8;
        int batch_size = 64;
        int timeout_seconds = 30;
    };

    // descriptor.embedding_dim must be positive: the contract has no
    // discovery endpoint, so the caller states the expected dim and every
    // response is validated against it (DimMismatch otherwise).
    RemoteBackend(BackendDescriptor descriptor, Options options);

    const BackendDescriptor& descriptor() const override { return descriptor_; }

    Embedding embed_text(const RenderedPrompt& prompt) override;
    Embedding embed_image(const ImageRef& image) override;
    std::vector<Embedding> embed_texts(std::span<const RenderedPrompt> prompts) override;
    std::vector<Embedding> embed_images(std::span<const ImageRef> images) override;

    bool supports_generation() const override { return true; }
    std::vector<ImageRef> generate_images(const GenerationRequest& request) override;

private:
    std::string post_json(const std::string& path, const std::string& body);
    std::vector<Embedding> embed_batch(const std::string& path, const std::string& field,
                                       std::span<const std::string> items);

    BackendDescriptor descriptor_;
    Options options_;
    std::counting_semaphore<> slots_;
};

// Serves any Backend over the wire contract. Failures map to status codes:
// 400 malformed request, 501 generation unsupported, 503 provider error.
class BackendServer {
public:
    explicit BackendServer(std::shared_ptr<Backend> backend);
    ~BackendServer();

    BackendServer(const BackendServer&) = delete;
    BackendServer& operator=(const BackendServer&) = delete;

    // Binds and serves on a background thread; port 0 picks a free port.
    // Returns the bound port.
    int start(const std::string& host, int port);
    void stop();

    // Foreground variant for the serve tool; returns on stop()/failure.
    bool serve_blocking(const std::string& host, int port);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace d3g
