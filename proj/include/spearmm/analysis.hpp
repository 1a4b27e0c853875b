#pragma once

#include "spearmm/archmap.hpp"
#include "spearmm/checkpoint_io.hpp"
#include "spearmm/metrics.hpp"
#include "spearmm/planner.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace spearmm {

struct ImportanceRow {
    std::string name;
    std::optional<int> layer;
    ComponentKind component = ComponentKind::other;
    double snr = 0.0;
    double swci = 0.0;
    double svdr = 0.0;
    double rel_change = 0.0;
    double fused = 0.0;
    int rank_in_group = 0;
    bool restore = false;
};

struct AnalysisReport {
    std::vector<ImportanceRow> rows; // sorted by (component, layer, name)
    MetricConfig metrics;
    Policy policy;
    std::string base_digest;
    std::string adapted_digest;
    std::vector<std::string> unmatched;

    nlohmann::json to_json() const;
    static AnalysisReport from_json(const nlohmann::json & j);
};

// Per-tensor metrics for every aligned pair, fused within component groups.
// Tensors are scored on worker threads; output order is lexicographic by name.
std::vector<FusedRow> score_checkpoints(const Checkpoint & base, const Checkpoint & adapted, const MetricConfig & cfg,
                                        const ArchProfile & profile, unsigned threads = 0);

AnalysisReport make_report(const std::vector<FusedRow> & scores, const MergePlan & plan, const MetricConfig & cfg,
                           const Alignment & alignment);

} // namespace spearmm
