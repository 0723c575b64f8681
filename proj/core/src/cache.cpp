#include "d3g/cache.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "d3g/errors.hpp"
#include "d3g/hashing.hpp"

namespace d3g {

std::string text_cache_hash(std::string_view prompt_text) { return sha256_hex(prompt_text); }

std::string image_cache_hash(const ImageRef& image) { return image.content_id; }

std::string generation_cache_hash(std::string_view prompt_text, int count, uint64_t seed) {
    return sha256_hex("gen|" + std::string(prompt_text) + "|" + std::to_string(count) + "|" +
                      std::to_string(seed));
}

namespace {

constexpr char kMagic[4] = {'D', '3', 'G', 'C'};
constexpr uint8_t kCodecVersion = 1;
constexpr uint8_t kTypeEmbedding = 1;
constexpr uint8_t kTypeImageRefs = 2;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, std::string_view s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.append(s);
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

// Strict sequential reader; any overrun means a corrupt record.
struct Reader {
    std::string_view bytes;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > bytes.size()) throw ParseError("cache payload: truncated record");
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(bytes[pos++]);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos++])) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes[pos++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(bytes.substr(pos, n));
        pos += n;
        return s;
    }
};

void put_prompt(std::string& out, const RenderedPrompt& p) {
    put_string(out, p.text);
    put_string(out, p.target_value.axis);
    put_string(out, p.target_value.label);
    out.push_back(p.augment_value ? 1 : 0);
    if (p.augment_value) {
        put_string(out, p.augment_value->axis);
        put_string(out, p.augment_value->label);
    }
    put_string(out, p.template_id);
}

RenderedPrompt read_prompt(Reader& r) {
    RenderedPrompt p;
    p.text = r.str();
    p.target_value.axis = r.str();
    p.target_value.label = r.str();
    if (r.u8() != 0) {
        ClassValue v;
        v.axis = r.str();
        v.label = r.str();
        p.augment_value = std::move(v);
    }
    p.template_id = r.str();
    return p;
}

}  // namespace

std::string serialize_cache_payload(const CachePayload& payload) {
    std::string out(kMagic, 4);
    out.push_back(static_cast<char>(kCodecVersion));
    if (const Embedding* e = std::get_if<Embedding>(&payload)) {
        out.push_back(static_cast<char>(kTypeEmbedding));
        put_u32(out, static_cast<uint32_t>(e->dim()));
        for (double v : e->values) put_f64(out, v);
        return out;
    }
    const auto& refs = std::get<std::vector<ImageRef>>(payload);
    out.push_back(static_cast<char>(kTypeImageRefs));
    put_u32(out, static_cast<uint32_t>(refs.size()));
    for (const ImageRef& ref : refs) {
        put_string(out, ref.content_id);
        out.push_back(ref.source == ImageSource::generated ? 1 : 0);
        out.push_back(ref.provenance ? 1 : 0);
        if (ref.provenance) {
            put_prompt(out, ref.provenance->prompt);
            put_u64(out, ref.provenance->seed);
            put_u32(out, static_cast<uint32_t>(ref.provenance->settings.size()));
            for (const auto& [k, v] : ref.provenance->settings) {
                put_string(out, k);
                put_string(out, v);
            }
        }
    }
    return out;
}

CachePayload parse_cache_payload(std::string_view bytes) {
    Reader r{bytes};
    r.need(4);
    if (bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
        throw ParseError("cache payload: bad magic");
    }
    r.pos = 4;
    if (r.u8() != kCodecVersion) throw ParseError("cache payload: unsupported codec version");
    const uint8_t type = r.u8();
    if (type == kTypeEmbedding) {
        Embedding e;
        const uint32_t n = r.u32();
        e.values.reserve(n);
        for (uint32_t i = 0; i < n; ++i) e.values.push_back(r.f64());
        if (r.pos != bytes.size()) throw ParseError("cache payload: trailing bytes");
        return e;
    }
    if (type != kTypeImageRefs) throw ParseError("cache payload: unknown payload type");
    std::vector<ImageRef> refs;
    const uint32_t n = r.u32();
    refs.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        ImageRef ref;
        ref.content_id = r.str();
        ref.source = r.u8() != 0 ? ImageSource::generated : ImageSource::dataset;
        if (r.u8() != 0) {
            PromptProvenance prov;
            prov.prompt = read_prompt(r);
            prov.seed = r.u64();
            const uint32_t ns = r.u32();
            prov.settings.reserve(ns);
            for (uint32_t j = 0; j < ns; ++j) {
                std::string k = r.str();
                std::string v = r.str();
                prov.settings.emplace_back(std::move(k), std::move(v));
            }
            ref.provenance = std::move(prov);
        }
        refs.push_back(std::move(ref));
    }
    if (r.pos != bytes.size()) throw ParseError("cache payload: trailing bytes");
    return refs;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

void EmbeddingCache::validate_key(const CacheKey& key) {
    auto path_safe = [](const std::string& s) {
        return !s.empty() && s.find('/') == std::string::npos &&
               s.find('\\') == std::string::npos && s != "." && s != "..";
    };
    if (!path_safe(key.backend_id) || !path_safe(key.version)) {
        throw InvalidConfigError("cache key: backend id and version must be nonempty path-safe "
                                 "strings");
    }
    if (!looks_like_sha256(key.hash)) {
        throw InvalidConfigError("cache key: hash must be 64-char hex, got: " + key.hash);
    }
}

std::filesystem::path EmbeddingCache::entry_path(const CacheKey& key) const {
    return root_ / key.backend_id / key.version / key.hash.substr(0, 2) / (key.hash + ".bin");
}

bool EmbeddingCache::contains(const CacheKey& key) const {
    validate_key(key);
    return std::filesystem::exists(entry_path(key));
}

CachePayload EmbeddingCache::get(const CacheKey& key) const {
    validate_key(key);
    std::ifstream in(entry_path(key), std::ios::binary);
    if (!in) {
        throw CacheMissError(key.backend_id + "/" + key.version + "/" + key.hash);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_cache_payload(buf.str());
}

void EmbeddingCache::put(const CacheKey& key, const CachePayload& payload) {
    validate_key(key);
    const std::string bytes = serialize_cache_payload(payload);
    const std::filesystem::path path = entry_path(key);

    std::lock_guard<std::mutex> lock(mu_);
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        if (buf.str() == bytes) return;  // idempotent re-put
        throw PayloadConflictError(key.backend_id + "/" + key.version + "/" + key.hash);
    }

    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("cache: failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);

    std::ofstream index(root_ / key.backend_id / key.version / "index.txt", std::ios::app);
    index << key.hash << "\n";
}

std::vector<std::string> EmbeddingCache::list_hashes(const std::string& backend_id,
                                                     const std::string& version) const {
    std::vector<std::string> out;
    std::ifstream index(root_ / backend_id / version / "index.txt");
    std::string line;
    while (std::getline(index, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

size_t EmbeddingCache::purge(const std::string& backend_id, const std::string& version) {
    std::lock_guard<std::mutex> lock(mu_);
    std::filesystem::path target = root_;
    if (!backend_id.empty()) target /= backend_id;
    if (!backend_id.empty() && !version.empty()) target /= version;

    size_t removed = 0;
    if (std::filesystem::exists(target)) {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(target)) {
            if (entry.is_regular_file() && entry.path().extension() == ".bin") ++removed;
        }
        if (target == root_) {
            for (const auto& entry : std::filesystem::directory_iterator(root_)) {
                std::filesystem::remove_all(entry.path());
            }
        } else {
            std::filesystem::remove_all(target);
        }
    }
    return removed;
}

EmbeddingCache::Stats EmbeddingCache::stats() const {
    Stats s;
    if (!std::filesystem::exists(root_)) return s;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".bin") {
            ++s.entries;
            s.bytes += entry.file_size();
        }
    }
    return s;
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner,
                               std::shared_ptr<EmbeddingCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

const BackendDescriptor& CachingBackend::descriptor() const { return inner_->descriptor(); }

CacheKey CachingBackend::key_for(const std::string& hash) const {
    const BackendDescriptor& d = inner_->descriptor();
    return CacheKey{d.id, d.version, hash};
}

Embedding CachingBackend::embed_text(const RenderedPrompt& prompt) {
    const CacheKey key = key_for(text_cache_hash(prompt.text));
    if (cache_->contains(key)) {
        hits_.fetch_add(1, std::memory_order_relaxed);
        return std::get<Embedding>(cache_->get(key));
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    Embedding e = inner_->embed_text(prompt);
    cache_->put(key, e);
    return e;
}

Embedding CachingBackend::embed_image(const ImageRef& image) {
    const CacheKey key = key_for(image_cache_hash(image));
    if (cache_->contains(key)) {
        hits_.fetch_add(1, std::memory_order_relaxed);
        return std::get<Embedding>(cache_->get(key));
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    Embedding e = inner_->embed_image(image);
    cache_->put(key, e);
    return e;
}

bool CachingBackend::supports_generation() const { return inner_->supports_generation(); }

std::vector<ImageRef> CachingBackend::generate_images(const GenerationRequest& request) {
    const CacheKey key =
        key_for(generation_cache_hash(request.prompt.text, request.count, request.seed));
    if (cache_->contains(key)) {
        hits_.fetch_add(1, std::memory_order_relaxed);
        return std::get<std::vector<ImageRef>>(cache_->get(key));
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    std::vector<ImageRef> refs = inner_->generate_images(request);
    cache_->put(key, refs);
    return refs;
}

CachingBackend::CacheHitStats CachingBackend::stats() const {
    return CacheHitStats{hits_.load(std::memory_order_relaxed),
                        misses_.load(std::memory_order_relaxed)};
}

}  // namespace d3g
