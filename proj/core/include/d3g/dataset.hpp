#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "d3g/backend.hpp"
#include "d3g/taxonomy.hpp"

namespace d3g {

// One dataset row: opaque image handle plus its axis labels. profession-style
// class labels and demographic sidecar labels share one map; an axis appears
// at most once per row.
struct LabeledImage {
    ImageRef image;
    std::string relpath;
    std::map<std::string, ClassValue> labels;  // axis id -> value

    bool has_label(std::string_view axis_id) const;
    // nullptr when the row does not carry the axis.
    const ClassValue* label(std::string_view axis_id) const;
};

struct DatasetManifest {
    std::string name;
    std::vector<LabeledImage> images;
    std::map<ClassValue, size_t> counts;

    size_t size() const { return images.size(); }
};

// Manifest file format, one record per line:
//   <sha256> <relpath> profession=Doctor race7=East Asian gender=Male
// Tokens after the relpath without an '=' continue the previous value
// ("East" + "Asian"). '#' lines and blank lines are ignored. A leading
// "# name: <x>" comment names the dataset.
DatasetManifest parse_manifest(std::string_view text, const Taxonomy& taxonomy,
                               const std::string& origin = "<inline>",
                               std::string name = "dataset");

DatasetManifest ingest(const std::filesystem::path& manifest_file, const Taxonomy& taxonomy);

// Canonical serialization; ingest(serialize(ingest(f))) == ingest(f).
std::string serialize_manifest(const DatasetManifest& manifest, const Taxonomy& taxonomy);

struct AxisDistribution {
    std::map<ClassValue, double> fractions;  // over included rows; sums to 1
    size_t included{0};
    size_t excluded{0};  // rows without a label for the axis
};

// Label fractions for one axis. Rows missing the axis are excluded and
// counted, not errors. Throws NoLabeledRows when nothing carries the axis.
AxisDistribution demographic_distribution(const DatasetManifest& manifest,
                                          std::string_view axis_id);

}  // namespace d3g
