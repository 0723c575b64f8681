#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "d3g/backend.hpp"
#include "d3g/embedding.hpp"

namespace d3g {

// What a cache entry can hold: one embedding (text or image record) or the
// image refs produced by one generation request.
using CachePayload = std::variant<Embedding, std::vector<ImageRef>>;

struct CacheKey {
    std::string backend_id;
    std::string version;
    std::string hash;  // 64-char hex

    bool operator==(const CacheKey&) const = default;
};

// Canonical content hashes for the three cacheable operations.
std::string text_cache_hash(std::string_view prompt_text);
std::string image_cache_hash(const ImageRef& image);
std::string generation_cache_hash(std::string_view prompt_text, int count, uint64_t seed);

// Byte codec for cache files ("D3GC" magic, little-endian, embeddings as
// 64-bit floats). parse(serialize(p)) == p for every payload.
std::string serialize_cache_payload(const CachePayload& payload);
CachePayload parse_cache_payload(std::string_view bytes);

// On-disk layout: <root>/<backend-id>/<version>/<hash[0:2]>/<hash>.bin with
// a flat index.txt of hashes per (backend, version). Entries are immutable:
// a second put to the same key must carry bit-identical bytes. Writes go to
// a temp file then rename, so readers never observe partial records.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::filesystem::path root);

    bool contains(const CacheKey& key) const;
    CachePayload get(const CacheKey& key) const;          // CacheMiss
    void put(const CacheKey& key, const CachePayload& payload);  // PayloadConflict

    std::vector<std::string> list_hashes(const std::string& backend_id,
                                         const std::string& version) const;
    // Drops entries for one (backend, version), one backend, or everything
    // when the arguments are empty. Returns the number of entries removed.
    size_t purge(const std::string& backend_id = "", const std::string& version = "");

    struct Stats {
        size_t entries{0};
        uint64_t bytes{0};
    };
    Stats stats() const;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path entry_path(const CacheKey& key) const;
    static void validate_key(const CacheKey& key);

    std::filesystem::path root_;
    mutable std::mutex mu_;  // serializes same-key writers and index appends
};

// Decorator that satisfies reads from the cache and forwards misses to the
// wrapped backend. Wrap the inner backend in a CountingBackend to verify the
// warm-cache "zero provider calls" contract.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<EmbeddingCache> cache);

    const BackendDescriptor& descriptor() const override;
    Embedding embed_text(const RenderedPrompt& prompt) override;
    Embedding embed_image(const ImageRef& image) override;
    bool supports_generation() const override;
    std::vector<ImageRef> generate_images(const GenerationRequest& request) override;

    struct CacheHitStats {
        uint64_t hits{0};
        uint64_t misses{0};
    };
    CacheHitStats stats() const;

private:
    CacheKey key_for(const std::string& hash) const;

    std::shared_ptr<Backend> inner_;
    std::shared_ptr<EmbeddingCache> cache_;
    std::atomic<uint64_t> hits_{0};
    std::atomic<uint64_t> misses_{0};
};

}  // namespace d3g
