#include "spearmm/reports.hpp"

#include "spearmm/canonical.hpp"
#include "spearmm/errors.hpp"
#include "spearmm/search.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace spearmm {

HeatmapTable build_heatmap(const AnalysisReport & report) {
    HeatmapTable h;
    int max_layer = -1;
    for (const auto & r : report.rows) {
        if (r.layer && macro_group(r.component) != MacroGroup::other) max_layer = std::max(max_layer, *r.layer);
    }
    if (max_layer < 0) {
        throw ValidationError("report has no layered attention or MLP tensors");
    }
    h.layers = max_layer + 1;
    const auto L = static_cast<std::size_t>(h.layers);

    for (ComponentKind kind : kLayerComponents) {
        std::vector<std::optional<double>> raw(L);
        bool any = false;
        for (const auto & r : report.rows) {
            if (r.component == kind && r.layer) {
                raw[static_cast<std::size_t>(*r.layer)] = r.fused;
                any = true;
            }
        }
        if (!any) continue;

        std::vector<std::size_t> present;
        std::vector<double> vals;
        for (std::size_t l = 0; l < L; ++l) {
            if (raw[l]) {
                present.push_back(l);
                vals.push_back(*raw[l]);
            }
        }
        const auto norm = minmax_normalize(vals);
        std::vector<std::optional<double>> row(L);
        for (std::size_t i = 0; i < present.size(); ++i) row[present[i]] = norm[i];

        std::vector<std::size_t> order(present.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norm[a] > norm[b]; });
        const std::size_t top = std::min((L + 1) / 2, present.size());
        std::vector<bool> mask(L, false);
        for (std::size_t i = 0; i < top; ++i) mask[present[order[i]]] = true;

        h.components.push_back(kind);
        h.values.push_back(std::move(row));
        h.top_mask.push_back(std::move(mask));
    }
    return h;
}

std::string HeatmapTable::to_csv() const {
    std::ostringstream out;
    out << "component,layer,normalized_fused_score,top_half\n";
    for (std::size_t r = 0; r < components.size(); ++r) {
        for (std::size_t l = 0; l < values[r].size(); ++l) {
            out << component_name(components[r]) << ',' << l << ',';
            if (values[r][l]) out << format9(*values[r][l]);
            out << ',' << (top_mask[r][l] ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

std::vector<double> fraction_grid(double start, double stop, double step) {
    if (!(step > 0.0) || !(start >= 0.0) || !(stop <= 1.0) || stop < start) {
        throw ValidationError("fraction grid needs 0 <= start <= stop <= 1 and step > 0");
    }
    std::vector<double> grid;
    for (int i = 0;; ++i) {
        const double f = start + i * step;
        if (f > stop + 1e-9) break;
        grid.push_back(std::min(round9(f), 1.0));
    }
    return grid;
}

std::vector<FrontierPoint> run_frontier(const Checkpoint & base, const Checkpoint & adapted,
                                        const std::vector<FusedRow> & scores, const std::vector<double> & grid,
                                        double t, const Policy & base_policy, Evaluator & evaluator,
                                        const std::filesystem::path & workdir) {
    if (grid.empty()) {
        throw ValidationError("frontier grid is empty");
    }
    const bool owned = workdir.empty();
    const auto dir = owned ? std::filesystem::temp_directory_path() / ("spearmm-frontier-" + std::to_string(::getpid()))
                           : workdir;
    std::filesystem::create_directories(dir);

    std::vector<FrontierPoint> points;
    bool any_ok = false;
    std::string last_error;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const SearchConfig cfg{grid[i], grid[i], t};
        const MergePlan plan = plan_for_config(scores, cfg, base_policy);
        const Checkpoint merged = apply_plan(base, adapted, plan);
        const auto path = dir / ("frontier_" + std::to_string(i) + ".safetensors");
        save_checkpoint(merged, path, DTypePolicy::force_f32);

        FrontierPoint p{cfg.frac_mlp, cfg.frac_attn, plan.policy.t, std::nullopt};
        try {
            p.scores = evaluator.evaluate({path, merged, cfg, plan});
            any_ok = true;
        } catch (const EvaluatorError & e) {
            last_error = e.what();
        }
        std::error_code ec;
        std::filesystem::remove(path, ec);
        points.push_back(p);
    }
    if (owned) {
        std::error_code ec;
        std::filesystem::remove_all(dir, ec);
    }
    if (!any_ok) {
        throw Error("every frontier evaluation failed; last error: " + last_error);
    }
    return points;
}

std::string frontier_csv(const std::vector<FrontierPoint> & points) {
    std::ostringstream out;
    out << "frac_mlp,frac_attn,t,domain_score,general_score\n";
    for (const auto & p : points) {
        out << format9(p.frac_mlp) << ',' << format9(p.frac_attn) << ',' << format9(p.t) << ',';
        if (p.scores) out << format9(p.scores->domain_score) << ',' << format9(p.scores->general_score);
        else out << ',';
        out << '\n';
    }
    return out.str();
}

} // namespace spearmm
