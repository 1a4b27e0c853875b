#include "spearmm/planner.hpp"

#include "spearmm/canonical.hpp"
#include "spearmm/errors.hpp"
#include "spearmm/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace spearmm {

using nlohmann::json;

namespace {

double fraction_for(const Policy & p, ComponentKind k) {
    switch (macro_group(k)) {
        case MacroGroup::attention: return p.frac_attn;
        case MacroGroup::mlp:       return p.frac_mlp;
        case MacroGroup::other:     return 0.0;
    }
    return 0.0;
}

double mode_score(const FusedRow & r, SelectionMode m) {
    switch (m) {
        case SelectionMode::combined:  return r.fused;
        case SelectionMode::swci_only: return r.swci_norm;
        case SelectionMode::svdr_only: return r.svdr_norm;
        case SelectionMode::snr_only:  return r.snr_norm;
        case SelectionMode::random:    return r.fused;
    }
    return r.fused;
}

template <typename T>
T require_field(const json & j, const char * key) {
    if (!j.is_object() || !j.contains(key)) {
        throw ValidationError(std::string("plan JSON missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &) {
        throw ValidationError(std::string("plan JSON field '") + key + "' has the wrong type");
    }
}

} // namespace

std::string_view policy_name(PolicyName p) {
    switch (p) {
        case PolicyName::conservative: return "conservative";
        case PolicyName::balanced:     return "balanced";
        case PolicyName::aggressive:   return "aggressive";
        case PolicyName::custom:       return "custom";
    }
    return "custom";
}

std::optional<PolicyName> parse_policy_name(std::string_view s) {
    for (auto p : {PolicyName::conservative, PolicyName::balanced, PolicyName::aggressive, PolicyName::custom}) {
        if (policy_name(p) == s) return p;
    }
    return std::nullopt;
}

std::string_view mode_name(SelectionMode m) {
    switch (m) {
        case SelectionMode::combined:  return "combined";
        case SelectionMode::swci_only: return "swci_only";
        case SelectionMode::svdr_only: return "svdr_only";
        case SelectionMode::snr_only:  return "snr_only";
        case SelectionMode::random:    return "random";
    }
    return "combined";
}

std::optional<SelectionMode> parse_mode(std::string_view s) {
    for (auto m : {SelectionMode::combined, SelectionMode::swci_only, SelectionMode::svdr_only,
                   SelectionMode::snr_only, SelectionMode::random}) {
        if (mode_name(m) == s) return m;
    }
    return std::nullopt;
}

Policy Policy::preset(PolicyName name) {
    Policy p;
    p.name = name;
    switch (name) {
        case PolicyName::conservative: p.frac_mlp = 0.40; p.frac_attn = 0.40; break;
        case PolicyName::balanced:     p.frac_mlp = 0.50; p.frac_attn = 0.60; break;
        case PolicyName::aggressive:   p.frac_mlp = 0.60; p.frac_attn = 0.95; break;
        case PolicyName::custom:       break;
    }
    return p;
}

Policy Policy::custom(double frac_mlp, double frac_attn, double t) {
    Policy p;
    p.name = PolicyName::custom;
    p.frac_mlp = frac_mlp;
    p.frac_attn = frac_attn;
    p.t = t;
    return p;
}

void Policy::validate() const {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(frac_mlp) || !in_unit(frac_attn)) {
        throw ValidationError("restoration fractions must lie in [0,1]");
    }
    if (!in_unit(t)) {
        throw ValidationError("interpolation coefficient t must lie in [0,1]");
    }
}

json Policy::to_json() const {
    return {
        {"name", policy_name(name)},
        {"frac_mlp", round9(frac_mlp)},
        {"frac_attn", round9(frac_attn)},
        {"t", round9(t)},
        {"mode", mode_name(mode)},
        {"seed", seed},
        {"restore_end", restore_end == RestoreEnd::top ? "top" : "bottom"},
    };
}

Policy Policy::from_json(const json & j) {
    Policy p;
    const auto name = parse_policy_name(require_field<std::string>(j, "name"));
    const auto mode = parse_mode(require_field<std::string>(j, "mode"));
    const auto end = require_field<std::string>(j, "restore_end");
    if (!name || !mode || (end != "top" && end != "bottom")) {
        throw ValidationError("plan policy has an unknown name, mode or restore_end");
    }
    p.name = *name;
    p.mode = *mode;
    p.restore_end = end == "top" ? RestoreEnd::top : RestoreEnd::bottom;
    p.frac_mlp = require_field<double>(j, "frac_mlp");
    p.frac_attn = require_field<double>(j, "frac_attn");
    p.t = require_field<double>(j, "t");
    p.seed = require_field<std::uint64_t>(j, "seed");
    p.validate();
    return p;
}

std::size_t MergePlan::restored_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const PlanEntry & e) { return e.restore; }));
}

const PlanEntry * MergePlan::find(const std::string & name) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), name,
                               [](const PlanEntry & e, const std::string & n) { return e.name < n; });
    return it != entries.end() && it->name == name ? &*it : nullptr;
}

std::vector<RankedLocator> rank_group(std::vector<ScoredLocator> rows) {
    std::sort(rows.begin(), rows.end(), [](const ScoredLocator & a, const ScoredLocator & b) {
        if (a.score != b.score) return a.score > b.score;
        return layer_order(a.locator, b.locator);
    });
    std::vector<RankedLocator> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.push_back({std::move(rows[i].locator), rows[i].score, static_cast<int>(i + 1)});
    }
    return out;
}

std::size_t selection_count(double frac, std::size_t group_size) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(group_size) + 0.5));
}

MergePlan build_plan(const std::vector<FusedRow> & scored, const Policy & policy) {
    policy.validate();

    std::map<ComponentKind, std::vector<const FusedRow *>> groups;
    bool have_attn = false;
    bool have_mlp = false;
    for (const auto & r : scored) {
        groups[r.locator.component].push_back(&r);
        have_attn |= macro_group(r.locator.component) == MacroGroup::attention;
        have_mlp |= macro_group(r.locator.component) == MacroGroup::mlp;
    }
    if (!have_attn || !have_mlp) {
        throw ValidationError("a merge plan needs at least one attention and one MLP tensor");
    }

    MergePlan plan;
    plan.policy = policy;
    plan.policy.t = round9(policy.t);

    for (auto & [kind, rows] : groups) {
        std::sort(rows.begin(), rows.end(),
                  [](const FusedRow * a, const FusedRow * b) { return layer_order(a->locator, b->locator); });

        std::vector<ScoredLocator> to_rank;
        std::map<std::string, const FusedRow *> by_name;
        if (policy.mode == SelectionMode::random) {
            // Seeded Fisher-Yates; the permutation position becomes the score.
            std::vector<const FusedRow *> perm = rows;
            CounterRng rng(derive_seed(policy.seed, "select:" + std::string(component_name(kind))));
            for (std::size_t i = perm.size(); i > 1; --i) {
                std::swap(perm[i - 1], perm[rng.below(i)]);
            }
            for (std::size_t i = 0; i < perm.size(); ++i) {
                const double score = static_cast<double>(perm.size() - i) / static_cast<double>(perm.size());
                to_rank.push_back({perm[i]->locator, score});
            }
        } else {
            for (const auto * r : rows) to_rank.push_back({r->locator, mode_score(*r, policy.mode)});
        }
        for (const auto * r : rows) by_name[r->locator.name] = r;

        const auto ranked = rank_group(std::move(to_rank));
        const std::size_t g = ranked.size();
        const std::size_t n = selection_count(fraction_for(policy, kind), g);
        for (const auto & rk : ranked) {
            const FusedRow & row = *by_name.at(rk.locator.name);
            PlanEntry e;
            e.name = rk.locator.name;
            e.locator = rk.locator;
            e.fused_score = row.fused;
            e.selection_score = rk.score;
            e.rank_in_group = rk.rank;
            const auto rank = static_cast<std::size_t>(rk.rank);
            e.restore = macro_group(kind) != MacroGroup::other &&
                        (policy.restore_end == RestoreEnd::top ? rank <= n : rank > g - n);
            e.t = e.restore ? plan.policy.t : 0.0;
            plan.entries.push_back(std::move(e));
        }
    }

    std::sort(plan.entries.begin(), plan.entries.end(),
              [](const PlanEntry & a, const PlanEntry & b) { return a.name < b.name; });
    plan.config_digest = plan_digest(plan);
    return plan;
}

namespace {

json plan_body(const MergePlan & plan) {
    json entries = json::array();
    for (const auto & e : plan.entries) {
        entries.push_back({
            {"name", e.name},
            {"layer", e.locator.layer ? json(*e.locator.layer) : json(nullptr)},
            {"component", component_name(e.locator.component)},
            {"fused_score", round9(e.fused_score)},
            {"selection_score", round9(e.selection_score)},
            {"rank_in_group", e.rank_in_group},
            {"restore", e.restore},
            {"t", round9(e.t)},
        });
    }
    return {{"entries", std::move(entries)}, {"policy", plan.policy.to_json()}};
}

} // namespace

std::string plan_digest(const MergePlan & plan) {
    return sha256_hex(canonical_dump(plan_body(plan)));
}

json plan_to_json(const MergePlan & plan) {
    json j = plan_body(plan);
    j["config_digest"] = plan_digest(plan);
    return j;
}

MergePlan plan_from_json(const json & j) {
    MergePlan plan;
    if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array() || !j.contains("policy")) {
        throw ValidationError("plan JSON needs 'entries' and 'policy'");
    }
    plan.policy = Policy::from_json(j["policy"]);
    for (const auto & je : j["entries"]) {
        PlanEntry e;
        e.name = require_field<std::string>(je, "name");
        e.locator.name = e.name;
        if (!je.contains("layer")) throw ValidationError("plan entry missing 'layer'");
        if (!je["layer"].is_null()) e.locator.layer = require_field<int>(je, "layer");
        const auto comp = parse_component(require_field<std::string>(je, "component"));
        if (!comp) throw ValidationError("plan entry '" + e.name + "' has an unknown component");
        e.locator.component = *comp;
        e.fused_score = require_field<double>(je, "fused_score");
        e.selection_score = require_field<double>(je, "selection_score");
        e.rank_in_group = require_field<int>(je, "rank_in_group");
        e.restore = require_field<bool>(je, "restore");
        e.t = require_field<double>(je, "t");
        if (e.t < 0.0 || e.t > 1.0) throw ValidationError("plan entry '" + e.name + "' has t outside [0,1]");
        plan.entries.push_back(std::move(e));
    }
    std::sort(plan.entries.begin(), plan.entries.end(),
              [](const PlanEntry & a, const PlanEntry & b) { return a.name < b.name; });
    for (std::size_t i = 1; i < plan.entries.size(); ++i) {
        if (plan.entries[i].name == plan.entries[i - 1].name) {
            throw ValidationError("plan lists '" + plan.entries[i].name + "' twice");
        }
    }
    // A stored digest is informational; hand-edited plans get a fresh one.
    plan.config_digest = plan_digest(plan);
    return plan;
}

MergePlan load_plan(const std::filesystem::path & path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception & e) {
        throw ValidationError("plan '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return plan_from_json(j);
}

} // namespace spearmm
