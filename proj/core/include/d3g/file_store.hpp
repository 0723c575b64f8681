#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "d3g/backend.hpp"
#include "d3g/embedding.hpp"

namespace d3g {

// Precomputed-embedding store, one directory per store:
//   meta.json    {"id": ..., "version": ..., "dim": N}
//   index.txt    "<sha256> <byte offset>" per line, sorted by hash
//   vectors.bin  records of [u32 LE count][count x f32 LE]
// Text records are keyed by sha256 of the prompt text, image records by the
// image's content id. Values are 32-bit floats by contract, so a store is
// portable between machines byte for byte.
class FileStoreBackend : public Backend {
public:
    explicit FileStoreBackend(std::filesystem::path dir);

    const BackendDescriptor& descriptor() const override { return descriptor_; }

    // Key sha256(prompt.text); absent -> BackendUnavailable naming the key.
    Embedding embed_text(const RenderedPrompt& prompt) override;
    // Key image.content_id.
    Embedding embed_image(const ImageRef& image) override;

    // Generation stays unsupported (base class throws GenerationUnsupported).

    bool contains_text(std::string_view text) const;
    bool contains_image(std::string_view content_id) const;
    size_t size() const { return index_.size(); }

private:
    Embedding read_record(const std::string& key);

    std::filesystem::path dir_;
    BackendDescriptor descriptor_;
    std::unordered_map<std::string, uint64_t> index_;
    mutable std::mutex mu_;  // serializes seeks on the shared stream
    std::ifstream data_;
};

// Builds a store directory. Keys put twice must carry identical vectors
// (PayloadConflict otherwise); finalize() writes the three files atomically
// enough for a fresh directory and leaves the writer spent.
class FileStoreWriter {
public:
    // descriptor.embedding_dim 0 means "infer from the first vector".
    FileStoreWriter(std::filesystem::path dir, BackendDescriptor descriptor);

    void put_text(std::string_view text, const Embedding& embedding);
    void put_image(std::string_view content_id, const Embedding& embedding);
    void put_key(const std::string& key, const Embedding& embedding);

    size_t size() const { return records_.size(); }
    int dim() const { return descriptor_.embedding_dim; }

    void finalize();

private:
    std::filesystem::path dir_;
    BackendDescriptor descriptor_;
    std::map<std::string, Embedding> records_;  // sorted index for free
    bool finalized_ = false;
};

// Plain-text import format, tab-separated, '#' comments allowed:
//   text<TAB>A photo of a doctor<TAB>0.1 0.25 -0.3 ...
//   image<TAB><64-hex content id><TAB>0.7 0.1 ...
// Returns the number of records imported. Malformed lines -> ParseError
// with origin:line.
size_t import_store_lines(std::istream& in, FileStoreWriter& writer, const std::string& origin);

}  // namespace d3g
