#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "d3g/errors.hpp"

namespace d3g {

// One label family: its ordered value list and the placeholder token its
// values substitute into prompt patterns (e.g. "<race>").
struct DemographicAxis {
    std::string id;
    std::string display;      // column header used in reports
    std::string placeholder;  // pattern token without the angle brackets
    std::vector<std::string> values;

    size_t size() const { return values.size(); }
    bool has_value(std::string_view label) const;
    // Position in the canonical value order; throws UnknownAxisValue.
    size_t index_of(std::string_view label) const;
};

struct ClassValue {
    std::string axis;
    std::string label;

    bool operator==(const ClassValue&) const = default;
    auto operator<=>(const ClassValue&) const = default;
};

struct PromptTemplate {
    std::string target_axis;
    std::string augment_axis;
    std::string pattern;

    std::string id() const { return target_axis + "|" + augment_axis; }
};

// A concrete text string produced from a template, plus where it came from.
struct RenderedPrompt {
    std::string text;
    ClassValue target_value;
    std::optional<ClassValue> augment_value;
    std::string template_id;

    bool operator==(const RenderedPrompt&) const = default;
};

// Lowercases a label for interpolation mid-sentence ("East Asian" -> "east asian").
std::string casing_normalize(std::string_view label);

// Immutable after load; rendering is pure, so any number of threads may use
// one Taxonomy concurrently.
class Taxonomy {
public:
    // The shipped default (IdenProf professions plus the FairFace-style
    // race/gender/age axes and their prompt patterns).
    static Taxonomy builtin();
    static Taxonomy load(const std::filesystem::path& file);
    static Taxonomy parse(std::string_view json_text, const std::string& origin = "<inline>");

    const std::vector<DemographicAxis>& axes() const { return axes_; }
    bool has_axis(std::string_view id) const;
    const DemographicAxis& axis(std::string_view id) const;  // UnknownAxis

    // Validated (axis, label) pair; throws UnknownAxis / UnknownAxisValue.
    ClassValue value(std::string_view axis_id, std::string_view label) const;

    bool has_template(std::string_view target_axis, std::string_view augment_axis) const;
    const PromptTemplate& prompt_template(std::string_view target_axis,
                                          std::string_view augment_axis) const;  // UnknownTemplate

    // Augment axes (canonical order) that have a template for this target.
    std::vector<std::string> augment_axes_for(std::string_view target_axis) const;

    // One prompt when augment == target axis (the plain pattern), otherwise
    // one prompt per augment value in canonical order.
    std::vector<RenderedPrompt> render_prompts(const ClassValue& target,
                                               std::string_view augment_axis_id) const;

    // Per target value, in canonical order.
    std::vector<std::pair<ClassValue, std::vector<RenderedPrompt>>> render_all(
        std::string_view target_axis_id, std::string_view augment_axis_id) const;

private:
    std::vector<DemographicAxis> axes_;
    std::vector<PromptTemplate> templates_;
};

}  // namespace d3g
