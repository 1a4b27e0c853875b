#pragma once

#include "spearmm/archmap.hpp"
#include "spearmm/checkpoint_io.hpp"

#include <cstdint>
#include <vector>

namespace spearmm {

// Empty target lists select every component / every layer.
struct Perturbation {
    int lowrank_rank = 4;
    double lowrank_scale = 0.0;
    double noise_scale = 0.0;
    std::vector<ComponentKind> target_components;
    std::vector<int> target_layers;
};

struct SynthSpec {
    int layers = 8;
    int hidden = 64;
    std::uint64_t seed = 0;
    std::vector<Perturbation> perturbations;

    void validate() const;
};

struct SynthPair {
    Checkpoint base;
    Checkpoint adapted;
};

// LLaMA-named fixture: base weights ~ N(0, 1/hidden) (norms are ones), adapted =
// base + lowrank_scale * U V^T + noise_scale * N(0,1) on each targeted tensor,
// where U, V have unit-variance columns so each planted direction has sigma ~ 1.
SynthPair synthesize(const SynthSpec & spec);

} // namespace spearmm
