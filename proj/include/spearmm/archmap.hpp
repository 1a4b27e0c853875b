#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace spearmm {

enum class ComponentKind { q_proj, k_proj, v_proj, o_proj, mlp_gate, mlp_up, mlp_down, embedding, norm, head, other };

enum class MacroGroup { attention, mlp, other };

inline constexpr ComponentKind kLayerComponents[] = {
    ComponentKind::q_proj,   ComponentKind::k_proj, ComponentKind::v_proj,  ComponentKind::o_proj,
    ComponentKind::mlp_gate, ComponentKind::mlp_up, ComponentKind::mlp_down,
};

std::string_view component_name(ComponentKind k);
std::optional<ComponentKind> parse_component(std::string_view s);
MacroGroup macro_group(ComponentKind k);

struct ParamLocator {
    std::string name;
    std::optional<int> layer;
    ComponentKind component = ComponentKind::other;

    friend bool operator==(const ParamLocator &, const ParamLocator &) = default;
};

// Orders by (layer, name); unlayered tensors sort first.
bool layer_order(const ParamLocator & a, const ParamLocator & b);

class ArchProfile {
public:
    struct Rule {
        std::string pattern;
        std::regex re;
        ComponentKind component;
    };

    // Throws ValidationError on a bad pattern.
    void add(const std::string & pattern, ComponentKind component);
    const std::vector<Rule> & rules() const { return rules_; }

    static ArchProfile llama();
    // JSON array of {"pattern": string, "component": string}.
    static ArchProfile from_json_text(const std::string & text);
    static ArchProfile from_file(const std::filesystem::path & path);

private:
    std::vector<Rule> rules_;
};

ParamLocator classify(const std::string & name, const ArchProfile & profile);

std::map<ComponentKind, std::vector<ParamLocator>> group_by_component(const std::vector<ParamLocator> & locators);

} // namespace spearmm
