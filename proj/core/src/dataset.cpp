#include "d3g/dataset.hpp"

#include <fstream>
#include <sstream>

#include "d3g/errors.hpp"
#include "d3g/hashing.hpp"

namespace d3g {

bool LabeledImage::has_label(std::string_view axis_id) const {
    return labels.find(std::string(axis_id)) != labels.end();
}

const ClassValue* LabeledImage::label(std::string_view axis_id) const {
    auto it = labels.find(std::string(axis_id));
    return it == labels.end() ? nullptr : &it->second;
}

namespace {

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text, const Taxonomy& taxonomy,
                               const std::string& origin, std::string name) {
    DatasetManifest manifest;
    manifest.name = std::move(name);

    size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("# name: ", 0) == 0) {
            manifest.name = line.substr(8);
            continue;
        }
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;

        auto toks = split_ws(line);
        if (toks.size() < 2) {
            throw ParseError(origin, line_no, "expected '<sha256> <relpath> [axis=value ...]'");
        }
        if (!looks_like_sha256(toks[0])) {
            throw ParseError(origin, line_no, "malformed content hash: " + toks[0]);
        }

        LabeledImage row;
        row.image.content_id = toks[0];
        row.image.source = ImageSource::dataset;
        row.relpath = toks[1];

        // axis=value pairs; a bare token continues the previous value so
        // multi-word labels like "East Asian" survive whitespace splitting.
        std::vector<std::pair<std::string, std::string>> pairs;
        for (size_t i = 2; i < toks.size(); ++i) {
            size_t eq = toks[i].find('=');
            if (eq == std::string::npos) {
                if (pairs.empty()) {
                    throw ParseError(origin, line_no, "label token before any axis=value pair: " + toks[i]);
                }
                pairs.back().second += " " + toks[i];
            } else {
                pairs.emplace_back(toks[i].substr(0, eq), toks[i].substr(eq + 1));
            }
        }
        for (auto& [axis_id, label] : pairs) {
            if (label.empty()) {
                throw ParseError(origin, line_no, "empty value for axis: " + axis_id);
            }
            ClassValue value = taxonomy.value(axis_id, label);
            if (!row.labels.emplace(axis_id, std::move(value)).second) {
                throw ParseError(origin, line_no, "duplicate label for axis: " + axis_id);
            }
        }
        manifest.images.push_back(std::move(row));
    }

    if (manifest.images.empty()) {
        throw ParseError(origin + ": manifest contains no image rows");
    }
    for (const auto& row : manifest.images) {
        for (const auto& [axis_id, value] : row.labels) {
            ++manifest.counts[value];
        }
    }
    return manifest;
}

DatasetManifest ingest(const std::filesystem::path& manifest_file, const Taxonomy& taxonomy) {
    std::ifstream in(manifest_file, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open manifest file: " + manifest_file.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), taxonomy, manifest_file.string(),
                          manifest_file.stem().string());
}

std::string serialize_manifest(const DatasetManifest& manifest, const Taxonomy& taxonomy) {
    std::ostringstream out;
    out << "# name: " << manifest.name << "\n";
    for (const auto& row : manifest.images) {
        out << row.image.content_id << " " << row.relpath;
        for (const auto& axis : taxonomy.axes()) {
            if (const ClassValue* v = row.label(axis.id)) {
                out << " " << axis.id << "=" << v->label;
            }
        }
        out << "\n";
    }
    return out.str();
}

AxisDistribution demographic_distribution(const DatasetManifest& manifest,
                                          std::string_view axis_id) {
    AxisDistribution dist;
    std::map<ClassValue, size_t> counts;
    for (const auto& row : manifest.images) {
        if (const ClassValue* v = row.label(axis_id)) {
            ++counts[*v];
            ++dist.included;
        } else {
            ++dist.excluded;
        }
    }
    if (dist.included == 0) {
        throw NoLabeledRowsError(std::string(axis_id));
    }
    const double denom = static_cast<double>(dist.included);
    for (const auto& [value, n] : counts) {
        dist.fractions[value] = static_cast<double>(n) / denom;
    }
    return dist;
}

}  // namespace d3g
