#pragma once

#include "spearmm/checkpoint_io.hpp"
#include "spearmm/planner.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace spearmm {

struct SlerpParams {
    double t = 0.5;
    double parallel_threshold = 1e-7;
    double zero_norm_threshold = 1e-12;

    void validate() const;
};

inline constexpr std::string_view kPlanDigestKey = "spearmm.plan_digest";
inline constexpr std::string_view kPolicyKey = "spearmm.policy";

std::vector<float> lerp(std::span<const float> adapted, std::span<const float> base, double t);

// Great-circle interpolation of the flattened tensors, t = 0 at `adapted`.
// Falls back to lerp for near-zero or near-parallel inputs; throws
// ValidationError for antipodal inputs or a length mismatch.
std::vector<float> slerp(std::span<const float> adapted, std::span<const float> base, const SlerpParams & p,
                         std::string_view name = {});

// Restored entries use each entry's own t; thresholds come from `thresholds`.
Checkpoint apply_plan(const Checkpoint & base, const Checkpoint & adapted, const MergePlan & plan,
                      const SlerpParams & thresholds = {});

double frobenius_distance(std::span<const float> a, std::span<const float> b);

} // namespace spearmm
