// Builds a file-store backend directory from tab-separated embedding dumps.
//
// Input lines: text<TAB>content<TAB>float...  or  image<TAB>sha256<TAB>float...
// Floats are space-separated and stored as f32, so re-reading is bit-exact.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "d3g/backend.hpp"
#include "d3g/errors.hpp"
#include "d3g/file_store.hpp"

int main(int argc, char** argv) {
    CLI::App app{"import embedding dumps into a file-store backend directory"};
    std::string store_dir;
    std::string backend_id = "file-store";
    std::string version = "1";
    int dim = 0;
    std::vector<std::string> inputs;
    app.add_option("--store", store_dir, "directory to create or extend")->required();
    app.add_option("--id", backend_id, "backend id recorded in meta.json");
    app.add_option("--backend-version", version, "backend version recorded in meta.json");
    app.add_option("--dim", dim, "embedding dim (0 = infer from the first record)");
    app.add_option("files", inputs, "dump files (default: stdin)");
    CLI11_PARSE(app, argc, argv);

    try {
        d3g::BackendDescriptor descriptor;
        descriptor.id = backend_id;
        descriptor.kind = d3g::BackendKind::file_store;
        descriptor.embedding_dim = dim;
        descriptor.version = version;
        d3g::FileStoreWriter writer(store_dir, descriptor);
        size_t records = 0;
        if (inputs.empty()) {
            records += d3g::import_store_lines(std::cin, writer, "<stdin>");
        } else {
            for (const std::string& path : inputs) {
                std::ifstream in(path, std::ios::binary);
                if (!in) throw d3g::Error("cannot open input file: " + path);
                records += d3g::import_store_lines(in, writer, path);
            }
        }
        writer.finalize();
        std::cout << "imported " << records << " records (dim " << writer.dim() << ") into "
                  << store_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
