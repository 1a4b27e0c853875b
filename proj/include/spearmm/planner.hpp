#pragma once

#include "spearmm/archmap.hpp"
#include "spearmm/metrics.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace spearmm {

enum class PolicyName { conservative, balanced, aggressive, custom };
enum class SelectionMode { combined, swci_only, svdr_only, snr_only, random };
enum class RestoreEnd { top, bottom };

std::string_view policy_name(PolicyName p);
std::optional<PolicyName> parse_policy_name(std::string_view s);
std::string_view mode_name(SelectionMode m);
std::optional<SelectionMode> parse_mode(std::string_view s);

struct Policy {
    PolicyName name = PolicyName::balanced;
    double frac_mlp = 0.5;
    double frac_attn = 0.6;
    double t = 0.5;
    SelectionMode mode = SelectionMode::combined;
    std::uint64_t seed = 0;
    RestoreEnd restore_end = RestoreEnd::top;

    // Restoration fractions: conservative 40/40, balanced 50/60, aggressive 60/95 (MLP/attention).
    static Policy preset(PolicyName name);
    static Policy custom(double frac_mlp, double frac_attn, double t = 0.5);

    void validate() const;
    nlohmann::json to_json() const;
    static Policy from_json(const nlohmann::json & j);
};

struct PlanEntry {
    std::string name;
    ParamLocator locator;
    double fused_score = 0.0;
    double selection_score = 0.0; // the score the mode ranked by
    int rank_in_group = 0;        // 1-based
    bool restore = false;
    double t = 0.0;               // 0 for entries that are not restored
};

struct MergePlan {
    std::vector<PlanEntry> entries; // lexicographic by name
    Policy policy;
    std::string config_digest;

    std::size_t restored_count() const;
    const PlanEntry * find(const std::string & name) const;
};

struct ScoredLocator {
    ParamLocator locator;
    double score = 0.0;
};

struct RankedLocator {
    ParamLocator locator;
    double score = 0.0;
    int rank = 0;
};

// Descending by score; ties by ascending layer, then name.
std::vector<RankedLocator> rank_group(std::vector<ScoredLocator> rows);

// floor(frac * size + 0.5)
std::size_t selection_count(double frac, std::size_t group_size);

MergePlan build_plan(const std::vector<FusedRow> & scored, const Policy & policy);

nlohmann::json plan_to_json(const MergePlan & plan);
MergePlan plan_from_json(const nlohmann::json & j);
MergePlan load_plan(const std::filesystem::path & path);
std::string plan_digest(const MergePlan & plan);

} // namespace spearmm
