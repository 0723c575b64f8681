#include "d3g/file_store.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "d3g/errors.hpp"
#include "d3g/hashing.hpp"

namespace d3g {

namespace {

void append_u32le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t read_u32le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void append_f32le(std::string& out, float f) { append_u32le(out, std::bit_cast<uint32_t>(f)); }

}  // namespace

FileStoreBackend::FileStoreBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
    const auto meta_path = dir_ / "meta.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) {
        throw BackendUnavailableError("file store: cannot open " + meta_path.string());
    }
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(meta_path.string() + ": " + e.what());
    }
    if (!meta.is_object() || !meta.contains("id") || !meta.contains("version") ||
        !meta.contains("dim")) {
        throw ParseError(meta_path.string() + ": expected object with id, version, dim");
    }
    descriptor_.id = meta.at("id").get<std::string>();
    descriptor_.kind = BackendKind::file_store;
    descriptor_.version = meta.at("version").get<std::string>();
    descriptor_.embedding_dim = meta.at("dim").get<int>();
    if (descriptor_.embedding_dim <= 0) {
        throw ParseError(meta_path.string() + ": dim must be positive");
    }

    const auto index_path = dir_ / "index.txt";
    std::ifstream index_in(index_path);
    if (!index_in) {
        throw BackendUnavailableError("file store: cannot open " + index_path.string());
    }
    std::string line;
    size_t line_no = 0;
    while (std::getline(index_in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string key;
        uint64_t offset = 0;
        if (!(row >> key >> offset) || !looks_like_sha256(key)) {
            throw ParseError(index_path.string(), line_no, "expected '<sha256> <offset>'");
        }
        index_[key] = offset;
    }

    data_.open(dir_ / "vectors.bin", std::ios::binary);
    if (!data_) {
        throw BackendUnavailableError("file store: cannot open " + (dir_ / "vectors.bin").string());
    }
}

Embedding FileStoreBackend::read_record(const std::string& key) {
    auto it = index_.find(key);
    if (it == index_.end()) {
        throw BackendUnavailableError("file store '" + descriptor_.id +
                                      "': no record for key " + key);
    }
    std::lock_guard<std::mutex> lock(mu_);
    data_.clear();
    data_.seekg(static_cast<std::streamoff>(it->second));
    unsigned char head[4];
    if (!data_.read(reinterpret_cast<char*>(head), 4)) {
        throw ParseError("file store: truncated record at offset " + std::to_string(it->second));
    }
    const uint32_t count = read_u32le(head);
    if (count != static_cast<uint32_t>(descriptor_.embedding_dim)) {
        throw DimMismatchError("file store record for " + key + " has dim " +
                               std::to_string(count) + ", store dim is " +
                               std::to_string(descriptor_.embedding_dim));
    }
    std::vector<unsigned char> raw(static_cast<size_t>(count) * 4);
    if (!data_.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw ParseError("file store: truncated record at offset " + std::to_string(it->second));
    }
    Embedding out;
    out.values.resize(count);
    for (uint32_t k = 0; k < count; ++k) {
        out.values[k] = static_cast<double>(std::bit_cast<float>(read_u32le(raw.data() + 4 * k)));
    }
    return out;
}

Embedding FileStoreBackend::embed_text(const RenderedPrompt& prompt) {
    return read_record(sha256_hex(prompt.text));
}

Embedding FileStoreBackend::embed_image(const ImageRef& image) {
    return read_record(image.content_id);
}

bool FileStoreBackend::contains_text(std::string_view text) const {
    return index_.find(sha256_hex(text)) != index_.end();
}

bool FileStoreBackend::contains_image(std::string_view content_id) const {
    return index_.find(std::string(content_id)) != index_.end();
}

FileStoreWriter::FileStoreWriter(std::filesystem::path dir, BackendDescriptor descriptor)
    : dir_(std::move(dir)), descriptor_(std::move(descriptor)) {
    descriptor_.kind = BackendKind::file_store;
    if (descriptor_.embedding_dim < 0) {
        throw InvalidConfigError("file store writer: dim must be >= 0");
    }
}

void FileStoreWriter::put_key(const std::string& key, const Embedding& embedding) {
    if (finalized_) throw InvalidConfigError("file store writer: already finalized");
    if (!looks_like_sha256(key)) {
        throw InvalidConfigError("file store writer: key is not a sha256 hash: " + key);
    }
    embedding.validate("file store record");
    if (descriptor_.embedding_dim == 0) {
        descriptor_.embedding_dim = static_cast<int>(embedding.dim());
    } else if (embedding.dim() != static_cast<size_t>(descriptor_.embedding_dim)) {
        throw DimMismatchError("file store writer: record dim " + std::to_string(embedding.dim()) +
                               " != store dim " + std::to_string(descriptor_.embedding_dim));
    }
    auto [it, inserted] = records_.emplace(key, embedding);
    if (!inserted && !(it->second == embedding)) {
        throw PayloadConflictError(key);
    }
}

void FileStoreWriter::put_text(std::string_view text, const Embedding& embedding) {
    put_key(sha256_hex(text), embedding);
}

void FileStoreWriter::put_image(std::string_view content_id, const Embedding& embedding) {
    if (!looks_like_sha256(content_id)) {
        throw InvalidConfigError("file store writer: image content id is not a sha256 hash: " +
                                 std::string(content_id));
    }
    put_key(std::string(content_id), embedding);
}

void FileStoreWriter::finalize() {
    if (finalized_) throw InvalidConfigError("file store writer: already finalized");
    if (records_.empty()) throw EmptyInputError("file store writer: no records to write");
    finalized_ = true;

    std::filesystem::create_directories(dir_);

    std::string blob;
    std::ostringstream index;
    for (const auto& [key, embedding] : records_) {
        index << key << " " << blob.size() << "\n";
        append_u32le(blob, static_cast<uint32_t>(embedding.dim()));
        for (double v : embedding.values) append_f32le(blob, static_cast<float>(v));
    }

    {
        std::ofstream out(dir_ / "vectors.bin", std::ios::binary | std::ios::trunc);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw Error("file store writer: failed writing vectors.bin");
    }
    {
        std::ofstream out(dir_ / "index.txt", std::ios::binary | std::ios::trunc);
        out << index.str();
        if (!out) throw Error("file store writer: failed writing index.txt");
    }
    {
        nlohmann::json meta{{"id", descriptor_.id},
                            {"version", descriptor_.version},
                            {"dim", descriptor_.embedding_dim}};
        std::ofstream out(dir_ / "meta.json", std::ios::binary | std::ios::trunc);
        out << meta.dump(2) << "\n";
        if (!out) throw Error("file store writer: failed writing meta.json");
    }
}

size_t import_store_lines(std::istream& in, FileStoreWriter& writer, const std::string& origin) {
    std::string line;
    size_t line_no = 0;
    size_t imported = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        const size_t tab1 = line.find('\t');
        const size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) {
            throw ParseError(origin, line_no, "expected 'kind<TAB>content<TAB>floats'");
        }
        const std::string kind = line.substr(0, tab1);
        const std::string content = line.substr(tab1 + 1, tab2 - tab1 - 1);

        Embedding e;
        std::istringstream floats(line.substr(tab2 + 1));
        double v = 0;
        while (floats >> v) e.values.push_back(v);
        if (!floats.eof()) {
            throw ParseError(origin, line_no, "malformed float list");
        }
        if (e.values.empty()) {
            throw ParseError(origin, line_no, "record carries no values");
        }

        try {
            if (kind == "text") {
                writer.put_text(content, e);
            } else if (kind == "image") {
                writer.put_image(content, e);
            } else {
                throw ParseError(origin, line_no, "unknown record kind: " + kind);
            }
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e2) {
            throw ParseError(origin, line_no, e2.what());
        }
        ++imported;
    }
    return imported;
}

}  // namespace d3g
