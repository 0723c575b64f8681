#include "d3g/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "d3g/default_taxonomy.hpp"

namespace d3g {

using nlohmann::json;

bool DemographicAxis::has_value(std::string_view label) const {
    return std::find(values.begin(), values.end(), label) != values.end();
}

size_t DemographicAxis::index_of(std::string_view label) const {
    auto it = std::find(values.begin(), values.end(), label);
    if (it == values.end()) {
        throw UnknownAxisValueError(id, std::string(label));
    }
    return static_cast<size_t>(it - values.begin());
}

std::string casing_normalize(std::string_view label) {
    std::string out;
    out.reserve(label.size());
    for (char c : label) {
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

namespace {

// Collects the distinct <token> occurrences in a pattern.
std::vector<std::string> pattern_placeholders(const std::string& pattern,
                                              const std::string& origin) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos < pattern.size()) {
        const size_t open = pattern.find('<', pos);
        if (open == std::string::npos) break;
        const size_t close = pattern.find('>', open + 1);
        if (close == std::string::npos) {
            throw ParseError(origin + ": unterminated placeholder in pattern: " + pattern);
        }
        std::string token = pattern.substr(open + 1, close - open - 1);
        if (token.empty()) {
            throw ParseError(origin + ": empty placeholder in pattern: " + pattern);
        }
        if (std::find(out.begin(), out.end(), token) == out.end()) {
            out.push_back(token);
        }
        pos = close + 1;
    }
    return out;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

}  // namespace

Taxonomy Taxonomy::builtin() {
    return parse(kDefaultTaxonomyJson, "<builtin>");
}

Taxonomy Taxonomy::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ParseError("cannot open taxonomy file: " + file.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), file.string());
}

Taxonomy Taxonomy::parse(std::string_view json_text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }

    Taxonomy t;
    if (!doc.contains("axes") || !doc["axes"].is_array() || doc["axes"].empty()) {
        throw ParseError(origin + ": missing or empty 'axes' array");
    }
    for (const auto& a : doc["axes"]) {
        DemographicAxis axis;
        axis.id = a.value("id", "");
        axis.display = a.value("display", axis.id);
        axis.placeholder = a.value("placeholder", "");
        if (axis.id.empty() || axis.placeholder.empty()) {
            throw ParseError(origin + ": axis needs non-empty 'id' and 'placeholder'");
        }
        if (t.has_axis(axis.id)) {
            throw ParseError(origin + ": duplicate axis id: " + axis.id);
        }
        if (!a.contains("values") || !a["values"].is_array() || a["values"].empty()) {
            throw ParseError(origin + ": axis '" + axis.id + "' needs a non-empty value list");
        }
        std::set<std::string> seen;
        for (const auto& v : a["values"]) {
            std::string label = v.get<std::string>();
            if (label.empty() || !seen.insert(label).second) {
                throw ParseError(origin + ": axis '" + axis.id +
                                 "' has an empty or duplicate value: " + label);
            }
            axis.values.push_back(std::move(label));
        }
        t.axes_.push_back(std::move(axis));
    }

    if (!doc.contains("templates") || !doc["templates"].is_array()) {
        throw ParseError(origin + ": missing 'templates' array");
    }
    for (const auto& tp : doc["templates"]) {
        PromptTemplate tmpl;
        tmpl.target_axis = tp.value("target", "");
        tmpl.augment_axis = tp.value("augment", "");
        tmpl.pattern = tp.value("pattern", "");
        if (!t.has_axis(tmpl.target_axis)) {
            throw ParseError(origin + ": template targets unknown axis: " + tmpl.target_axis);
        }
        if (!t.has_axis(tmpl.augment_axis)) {
            throw ParseError(origin + ": template augments unknown axis: " + tmpl.augment_axis);
        }
        if (t.has_template(tmpl.target_axis, tmpl.augment_axis)) {
            throw ParseError(origin + ": duplicate template for " + tmpl.id());
        }

        const auto& target = t.axis(tmpl.target_axis);
        const auto& augment = t.axis(tmpl.augment_axis);
        const auto tokens = pattern_placeholders(tmpl.pattern, origin);
        if (tmpl.target_axis == tmpl.augment_axis) {
            if (tokens.size() != 1 || tokens.front() != target.placeholder) {
                throw ParseError(origin + ": plain template " + tmpl.id() +
                                 " must contain exactly the target placeholder");
            }
        } else {
            if (target.placeholder == augment.placeholder) {
                throw ParseError(origin + ": template " + tmpl.id() +
                                 " pairs axes sharing placeholder '" + target.placeholder +
                                 "', substitution would be ambiguous");
            }
            for (const auto& tok : tokens) {
                if (tok != target.placeholder && tok != augment.placeholder) {
                    throw ParseError(origin + ": template " + tmpl.id() +
                                     " uses unsatisfiable placeholder <" + tok + ">");
                }
            }
        }
        t.templates_.push_back(std::move(tmpl));
    }
    return t;
}

bool Taxonomy::has_axis(std::string_view id) const {
    return std::any_of(axes_.begin(), axes_.end(),
                       [&](const DemographicAxis& a) { return a.id == id; });
}

const DemographicAxis& Taxonomy::axis(std::string_view id) const {
    for (const auto& a : axes_) {
        if (a.id == id) return a;
    }
    throw UnknownAxisError(std::string(id));
}

ClassValue Taxonomy::value(std::string_view axis_id, std::string_view label) const {
    const DemographicAxis& a = axis(axis_id);
    if (!a.has_value(label)) {
        throw UnknownAxisValueError(a.id, std::string(label));
    }
    return ClassValue{a.id, std::string(label)};
}

bool Taxonomy::has_template(std::string_view target_axis, std::string_view augment_axis) const {
    return std::any_of(templates_.begin(), templates_.end(), [&](const PromptTemplate& t) {
        return t.target_axis == target_axis && t.augment_axis == augment_axis;
    });
}

const PromptTemplate& Taxonomy::prompt_template(std::string_view target_axis,
                                                std::string_view augment_axis) const {
    for (const auto& t : templates_) {
        if (t.target_axis == target_axis && t.augment_axis == augment_axis) return t;
    }
    throw UnknownTemplateError(std::string(target_axis), std::string(augment_axis));
}

std::vector<std::string> Taxonomy::augment_axes_for(std::string_view target_axis) const {
    std::vector<std::string> out;
    for (const auto& a : axes_) {
        if (has_template(target_axis, a.id)) {
            out.push_back(a.id);
        }
    }
    return out;
}

std::vector<RenderedPrompt> Taxonomy::render_prompts(const ClassValue& target,
                                                     std::string_view augment_axis_id) const {
    const DemographicAxis& target_axis = axis(target.axis);
    if (!target_axis.has_value(target.label)) {
        throw UnknownAxisValueError(target_axis.id, target.label);
    }
    const DemographicAxis& augment_axis = axis(augment_axis_id);
    const PromptTemplate& tmpl = prompt_template(target.axis, augment_axis_id);

    const std::string target_token = "<" + target_axis.placeholder + ">";
    const std::string base =
        replace_all(tmpl.pattern, target_token, casing_normalize(target.label));

    std::vector<RenderedPrompt> out;
    if (tmpl.target_axis == tmpl.augment_axis) {
        out.push_back(RenderedPrompt{base, target, std::nullopt, tmpl.id()});
        return out;
    }

    const std::string augment_token = "<" + augment_axis.placeholder + ">";
    out.reserve(augment_axis.size());
    for (const std::string& label : augment_axis.values) {
        RenderedPrompt p;
        p.text = replace_all(base, augment_token, casing_normalize(label));
        p.target_value = target;
        p.augment_value = ClassValue{augment_axis.id, label};
        p.template_id = tmpl.id();
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<std::pair<ClassValue, std::vector<RenderedPrompt>>> Taxonomy::render_all(
    std::string_view target_axis_id, std::string_view augment_axis_id) const {
    const DemographicAxis& target_axis = axis(target_axis_id);
    // Surface UnknownTemplate before rendering anything.
    (void)prompt_template(target_axis_id, augment_axis_id);

    std::vector<std::pair<ClassValue, std::vector<RenderedPrompt>>> out;
    out.reserve(target_axis.size());
    for (const std::string& label : target_axis.values) {
        ClassValue cv{target_axis.id, label};
        out.emplace_back(cv, render_prompts(cv, augment_axis_id));
    }
    return out;
}

}  // namespace d3g
