#include "d3g/remote.hpp"

#include <algorithm>
#include <functional>
#include <future>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "d3g/errors.hpp"

namespace d3g {

using nlohmann::json;

RemoteBackend::RemoteBackend(BackendDescriptor descriptor, Options options)
    : descriptor_(std::move(descriptor)),
      options_(std::move(options)),
      slots_(options_.max_in_flight > 0 ? options_.max_in_flight : 1) {
    descriptor_.kind = BackendKind::remote;
    if (options_.endpoint.empty()) {
        throw InvalidConfigError("remote backend: endpoint must be set");
    }
    if (descriptor_.embedding_dim <= 0) {
        throw InvalidConfigError("remote backend: embedding dim must be stated up front");
    }
    if (options_.max_in_flight <= 0) {
        throw InvalidConfigError("remote backend: max_in_flight must be positive");
    }
    if (options_.batch_size <= 0) {
        throw InvalidConfigError("remote backend: batch_size must be positive");
    }
}

std::string RemoteBackend::post_json(const std::string& path, const std::string& body) {
    slots_.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{slots_};

    // A fresh client per call: httplib clients are not thread-safe, and the
    // semaphore already bounds concurrent connections.
    httplib::Client client(options_.endpoint);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);

    httplib::Result res = client.Post(path, body, "application/json");
    if (!res) {
        throw BackendUnavailableError("remote backend: cannot reach " + options_.endpoint + path +
                                      " (" + httplib::to_string(res.error()) + ")");
    }
    if (res->status == 501) {
        throw GenerationUnsupportedError(descriptor_.id);
    }
    if (res->status != 200) {
        std::string detail;
        try {
            detail = json::parse(res->body).value("error", "");
        } catch (const json::exception&) {
        }
        throw BackendUnavailableError("remote backend: " + options_.endpoint + path +
                                      " returned status " + std::to_string(res->status) +
                                      (detail.empty() ? "" : ": " + detail));
    }
    return res->body;
}

std::vector<Embedding> RemoteBackend::embed_batch(const std::string& path,
                                                  const std::string& field,
                                                  std::span<const std::string> items) {
    json req;
    req[field] = items;
    json resp;
    try {
        resp = json::parse(post_json(path, req.dump()));
    } catch (const json::exception& e) {
        throw ParseError("remote backend: malformed response from " + path + ": " + e.what());
    }
    if (!resp.is_object() || !resp.contains("dim") || !resp.contains("embeddings")) {
        throw ParseError("remote backend: response from " + path +
                         " lacks dim/embeddings fields");
    }
    const int dim = resp.at("dim").get<int>();
    if (dim != descriptor_.embedding_dim) {
        throw DimMismatchError("remote backend: service dim " + std::to_string(dim) +
                               " != configured dim " + std::to_string(descriptor_.embedding_dim));
    }
    const auto& rows = resp.at("embeddings");
    if (!rows.is_array() || rows.size() != items.size()) {
        throw ParseError("remote backend: expected " + std::to_string(items.size()) +
                         " embeddings from " + path + ", got " + std::to_string(rows.size()));
    }
    std::vector<Embedding> out;
    out.reserve(items.size());
    for (const auto& row : rows) {
        Embedding e{row.get<std::vector<double>>()};
        if (e.dim() != static_cast<size_t>(dim)) {
            throw DimMismatchError("remote backend: embedding row dim " +
                                   std::to_string(e.dim()) + " != stated dim " +
                                   std::to_string(dim));
        }
        out.push_back(std::move(e));
    }
    return out;
}

Embedding RemoteBackend::embed_text(const RenderedPrompt& prompt) {
    const std::string items[] = {prompt.text};
    return embed_batch("/v1/embed_text", "texts", items)[0];
}

Embedding RemoteBackend::embed_image(const ImageRef& image) {
    const std::string items[] = {image.content_id};
    return embed_batch("/v1/embed_image", "content_ids", items)[0];
}

namespace {

// Chunked concurrent dispatch, results reassembled positionally so the
// output order never depends on scheduling.
std::vector<Embedding> gather_chunks(size_t total, int batch_size,
                                     const std::function<std::vector<Embedding>(size_t, size_t)>& run) {
    std::vector<Embedding> out(total);
    std::vector<std::future<std::vector<Embedding>>> futures;
    std::vector<size_t> starts;
    for (size_t start = 0; start < total; start += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(total, start + static_cast<size_t>(batch_size));
        starts.push_back(start);
        futures.push_back(std::async(std::launch::async, run, start, end));
    }
    for (size_t i = 0; i < futures.size(); ++i) {
        std::vector<Embedding> chunk = futures[i].get();
        for (size_t j = 0; j < chunk.size(); ++j) out[starts[i] + j] = std::move(chunk[j]);
    }
    return out;
}

}  // namespace

std::vector<Embedding> RemoteBackend::embed_texts(std::span<const RenderedPrompt> prompts) {
    std::vector<std::string> items;
    items.reserve(prompts.size());
    for (const auto& p : prompts) items.push_back(p.text);
    if (items.empty()) return {};
    return gather_chunks(items.size(), options_.batch_size, [&](size_t start, size_t end) {
        return embed_batch("/v1/embed_text", "texts",
                           std::span<const std::string>(items).subspan(start, end - start));
    });
}

std::vector<Embedding> RemoteBackend::embed_images(std::span<const ImageRef> images) {
    std::vector<std::string> items;
    items.reserve(images.size());
    for (const auto& img : images) items.push_back(img.content_id);
    if (items.empty()) return {};
    return gather_chunks(items.size(), options_.batch_size, [&](size_t start, size_t end) {
        return embed_batch("/v1/embed_image", "content_ids",
                           std::span<const std::string>(items).subspan(start, end - start));
    });
}

std::vector<ImageRef> RemoteBackend::generate_images(const GenerationRequest& request) {
    if (request.count <= 0) {
        throw InvalidConfigError("generation count must be positive");
    }
    json req{{"prompt", request.prompt.text},
             {"count", request.count},
             {"seed", request.seed}};
    json resp;
    try {
        resp = json::parse(post_json("/v1/generate", req.dump()));
    } catch (const json::exception& e) {
        throw ParseError(std::string("remote backend: malformed response from /v1/generate: ") +
                         e.what());
    }
    if (!resp.is_object() || !resp.contains("content_ids") || !resp.at("content_ids").is_array()) {
        throw ParseError("remote backend: /v1/generate response lacks content_ids");
    }
    const auto ids = resp.at("content_ids").get<std::vector<std::string>>();
    if (ids.size() != static_cast<size_t>(request.count)) {
        throw ParseError("remote backend: asked for " + std::to_string(request.count) +
                         " images, service returned " + std::to_string(ids.size()));
    }
    std::vector<ImageRef> refs;
    refs.reserve(ids.size());
    for (const std::string& id : ids) {
        ImageRef ref;
        ref.content_id = id;
        ref.source = ImageSource::generated;
        ref.provenance = PromptProvenance{request.prompt, request.seed, {}};
        refs.push_back(std::move(ref));
    }
    return refs;
}

// ---------------------------------------------------------------------------

struct BackendServer::Impl {
    std::shared_ptr<Backend> backend;
    httplib::Server server;
    std::thread thread;

    explicit Impl(std::shared_ptr<Backend> b) : backend(std::move(b)) { install_routes(); }

    void install_routes() {
        server.Post("/v1/embed_text", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [this](const json& body) {
                const auto texts = body.at("texts").get<std::vector<std::string>>();
                json rows = json::array();
                for (const std::string& t : texts) {
                    RenderedPrompt prompt;
                    prompt.text = t;
                    rows.push_back(backend->embed_text(prompt).values);
                }
                return json{{"dim", backend->descriptor().embedding_dim}, {"embeddings", rows}};
            });
        });
        server.Post("/v1/embed_image", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [this](const json& body) {
                const auto ids = body.at("content_ids").get<std::vector<std::string>>();
                json rows = json::array();
                for (const std::string& id : ids) {
                    ImageRef ref;
                    ref.content_id = id;
                    ref.source = ImageSource::dataset;
                    rows.push_back(backend->embed_image(ref).values);
                }
                return json{{"dim", backend->descriptor().embedding_dim}, {"embeddings", rows}};
            });
        });
        server.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [this](const json& body) {
                GenerationRequest gen;
                gen.prompt.text = body.at("prompt").get<std::string>();
                gen.count = body.at("count").get<int>();
                gen.seed = body.at("seed").get<uint64_t>();
                if (!backend->supports_generation()) {
                    throw GenerationUnsupportedError(backend->descriptor().id);
                }
                json ids = json::array();
                for (const ImageRef& ref : backend->generate_images(gen)) {
                    ids.push_back(ref.content_id);
                }
                return json{{"content_ids", ids}};
            });
        });
    }

    template <typename Fn>
    void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", std::string("malformed request: ") + e.what()}}.dump(),
                            "application/json");
            return;
        }
        try {
            res.set_content(fn(body).dump(), "application/json");
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", std::string("malformed request: ") + e.what()}}.dump(),
                            "application/json");
        } catch (const GenerationUnsupportedError& e) {
            res.status = 501;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        } catch (const Error& e) {
            res.status = 503;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    }
};

BackendServer::BackendServer(std::shared_ptr<Backend> backend)
    : impl_(std::make_unique<Impl>(std::move(backend))) {}

BackendServer::~BackendServer() { stop(); }

int BackendServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound <= 0) throw BackendUnavailableError("backend server: cannot bind to " + host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw BackendUnavailableError("backend server: cannot bind to " + host + ":" +
                                      std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void BackendServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

bool BackendServer::serve_blocking(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

}  // namespace d3g
