#include "spearmm/archmap.hpp"

#include "spearmm/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace spearmm {

namespace {

struct KindName {
    ComponentKind kind;
    std::string_view name;
};

constexpr KindName kNames[] = {
    {ComponentKind::q_proj, "q_proj"},       {ComponentKind::k_proj, "k_proj"},
    {ComponentKind::v_proj, "v_proj"},       {ComponentKind::o_proj, "o_proj"},
    {ComponentKind::mlp_gate, "mlp_gate"},   {ComponentKind::mlp_up, "mlp_up"},
    {ComponentKind::mlp_down, "mlp_down"},   {ComponentKind::embedding, "embedding"},
    {ComponentKind::norm, "norm"},           {ComponentKind::head, "head"},
    {ComponentKind::other, "other"},
};

} // namespace

std::string_view component_name(ComponentKind k) {
    for (const auto & kn : kNames) {
        if (kn.kind == k) return kn.name;
    }
    return "other";
}

std::optional<ComponentKind> parse_component(std::string_view s) {
    for (const auto & kn : kNames) {
        if (kn.name == s) return kn.kind;
    }
    return std::nullopt;
}

MacroGroup macro_group(ComponentKind k) {
    switch (k) {
        case ComponentKind::q_proj:
        case ComponentKind::k_proj:
        case ComponentKind::v_proj:
        case ComponentKind::o_proj:
            return MacroGroup::attention;
        case ComponentKind::mlp_gate:
        case ComponentKind::mlp_up:
        case ComponentKind::mlp_down:
            return MacroGroup::mlp;
        default:
            return MacroGroup::other;
    }
}

bool layer_order(const ParamLocator & a, const ParamLocator & b) {
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.name < b.name;
}

void ArchProfile::add(const std::string & pattern, ComponentKind component) {
    try {
        rules_.push_back({pattern, std::regex(pattern, std::regex::ECMAScript), component});
    } catch (const std::regex_error & e) {
        throw ValidationError("invalid profile pattern '" + pattern + "': " + e.what());
    }
    if (rules_.back().re.mark_count() > 1) {
        throw ValidationError("profile pattern '" + pattern + "' has more than one capture group");
    }
}

ArchProfile ArchProfile::llama() {
    ArchProfile p;
    const std::string layer = R"(model\.layers\.(\d+)\.)";
    p.add(layer + R"(self_attn\.q_proj\.weight)", ComponentKind::q_proj);
    p.add(layer + R"(self_attn\.k_proj\.weight)", ComponentKind::k_proj);
    p.add(layer + R"(self_attn\.v_proj\.weight)", ComponentKind::v_proj);
    p.add(layer + R"(self_attn\.o_proj\.weight)", ComponentKind::o_proj);
    p.add(layer + R"(mlp\.gate_proj\.weight)", ComponentKind::mlp_gate);
    p.add(layer + R"(mlp\.up_proj\.weight)", ComponentKind::mlp_up);
    p.add(layer + R"(mlp\.down_proj\.weight)", ComponentKind::mlp_down);
    p.add(layer + R"([a-z_]*norm\.weight)", ComponentKind::norm);
    p.add(R"(model\.embed_tokens\.weight)", ComponentKind::embedding);
    p.add(R"(model\.norm\.weight)", ComponentKind::norm);
    p.add(R"(lm_head\.weight)", ComponentKind::head);
    return p;
}

ArchProfile ArchProfile::from_json_text(const std::string & text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception & e) {
        throw ValidationError(std::string("profile is not valid JSON: ") + e.what());
    }
    if (!j.is_array()) {
        throw ValidationError("profile must be a JSON array");
    }
    ArchProfile p;
    for (const auto & rule : j) {
        if (!rule.is_object() || !rule.contains("pattern") || !rule.contains("component") ||
            !rule["pattern"].is_string() || !rule["component"].is_string()) {
            throw ValidationError("profile rules need string fields 'pattern' and 'component'");
        }
        const auto comp = parse_component(rule["component"].get<std::string>());
        if (!comp) {
            throw ValidationError("unknown component '" + rule["component"].get<std::string>() + "'");
        }
        p.add(rule["pattern"].get<std::string>(), *comp);
    }
    return p;
}

ArchProfile ArchProfile::from_file(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open profile '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

ParamLocator classify(const std::string & name, const ArchProfile & profile) {
    ParamLocator loc{name, std::nullopt, ComponentKind::other};
    for (const auto & rule : profile.rules()) {
        std::smatch m;
        if (!std::regex_match(name, m, rule.re)) continue;
        loc.component = rule.component;
        if (m.size() > 1 && m[1].matched) {
            int layer = 0;
            const auto s = m[1].str();
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), layer);
            if (ec == std::errc{} && ptr == s.data() + s.size() && layer >= 0) {
                loc.layer = layer;
            }
        }
        break;
    }
    return loc;
}

std::map<ComponentKind, std::vector<ParamLocator>> group_by_component(const std::vector<ParamLocator> & locators) {
    std::map<ComponentKind, std::vector<ParamLocator>> groups;
    for (const auto & loc : locators) {
        groups[loc.component].push_back(loc);
    }
    for (auto & [kind, list] : groups) {
        std::sort(list.begin(), list.end(), layer_order);
    }
    return groups;
}

} // namespace spearmm
