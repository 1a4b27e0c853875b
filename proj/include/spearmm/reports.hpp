#pragma once

#include "spearmm/analysis.hpp"
#include "spearmm/evaluator.hpp"
#include "spearmm/merger.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spearmm {

struct HeatmapTable {
    std::vector<ComponentKind> components;
    int layers = 0;
    // values[row][layer]; empty when the checkpoint has no tensor for that cell
    std::vector<std::vector<std::optional<double>>> values;
    std::vector<std::vector<bool>> top_mask;

    std::string to_csv() const;
};

// Per-component min-max of fused scores; the mask marks the ceil(L/2)
// highest cells of each row, ties to the lower layer.
HeatmapTable build_heatmap(const AnalysisReport & report);

struct FrontierPoint {
    double frac_mlp = 0.0;
    double frac_attn = 0.0;
    double t = 0.0;
    std::optional<EvalScores> scores; // empty when the evaluator failed
};

// start, start+step, ... up to stop (inclusive within 1e-9). Throws on an empty grid.
std::vector<double> fraction_grid(double start, double stop, double step);

std::vector<FrontierPoint> run_frontier(const Checkpoint & base, const Checkpoint & adapted,
                                        const std::vector<FusedRow> & scores, const std::vector<double> & grid,
                                        double t, const Policy & base_policy, Evaluator & evaluator,
                                        const std::filesystem::path & workdir = {});

std::string frontier_csv(const std::vector<FrontierPoint> & points);

} // namespace spearmm
