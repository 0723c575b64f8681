// Exposes a local backend (synthetic or file-store) over the HTTP embedding
// protocol so remote clients can evaluate against it.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "d3g/errors.hpp"
#include "d3g/remote.hpp"
#include "d3g/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"serve a backend over the HTTP embedding protocol"};
    std::string config_path;
    std::string backend_kind;
    std::string store_dir;
    std::string taxonomy_file;
    std::string host = "127.0.0.1";
    int port = 8080;
    app.add_option("--config", config_path, "JSON config; its backend section is served");
    auto* o_backend = app.add_option("--backend", backend_kind, "backend kind: synthetic|file-store");
    auto* o_store = app.add_option("--store", store_dir, "file-store directory");
    app.add_option("--taxonomy", taxonomy_file, "taxonomy JSON (default: built-in)");
    app.add_option("--host", host, "bind address");
    app.add_option("--port", port, "bind port");
    CLI11_PARSE(app, argc, argv);

    try {
        d3g::RunConfig cfg =
            config_path.empty() ? d3g::RunConfig{} : d3g::load_run_config(config_path);
        if (o_backend->count() > 0) {
            if (backend_kind == "synthetic") {
                cfg.backend.kind = d3g::BackendKind::synthetic;
            } else if (backend_kind == "file-store") {
                cfg.backend.kind = d3g::BackendKind::file_store;
            } else {
                throw d3g::InvalidConfigError("--backend must be synthetic or file-store, got " +
                                              backend_kind);
            }
        }
        if (o_store->count() > 0) cfg.backend.store_dir = store_dir;
        if (!taxonomy_file.empty()) cfg.taxonomy_file = taxonomy_file;
        if (cfg.backend.kind == d3g::BackendKind::remote) {
            throw d3g::InvalidConfigError("cannot serve a remote backend; pick synthetic or file-store");
        }

        auto backend = d3g::make_backend(cfg.backend, d3g::taxonomy_for(cfg));
        const auto descriptor = backend->descriptor();
        std::cout << "serving " << descriptor.id << " (dim " << descriptor.embedding_dim << ") on "
                  << host << ":" << port << "\n"
                  << std::flush;
        d3g::BackendServer server(backend);
        server.serve_blocking(host, port);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
