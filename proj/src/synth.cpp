#include "spearmm/synth.hpp"

#include "spearmm/errors.hpp"
#include "spearmm/random.hpp"

#include <algorithm>
#include <cmath>

namespace spearmm {

namespace {

struct TensorSpec {
    std::string name;
    std::vector<std::int64_t> shape;
    bool ones = false;
};

std::vector<TensorSpec> llama_layout(int layers, int hidden) {
    const std::int64_t h = hidden;
    const std::int64_t inter = 2 * h;
    const std::int64_t vocab = 2 * h;
    std::vector<TensorSpec> out;
    out.push_back({"model.embed_tokens.weight", {vocab, h}});
    out.push_back({"model.norm.weight", {h}, true});
    out.push_back({"lm_head.weight", {vocab, h}});
    for (int l = 0; l < layers; ++l) {
        const std::string p = "model.layers." + std::to_string(l) + ".";
        out.push_back({p + "input_layernorm.weight", {h}, true});
        out.push_back({p + "post_attention_layernorm.weight", {h}, true});
        out.push_back({p + "self_attn.q_proj.weight", {h, h}});
        out.push_back({p + "self_attn.k_proj.weight", {h, h}});
        out.push_back({p + "self_attn.v_proj.weight", {h, h}});
        out.push_back({p + "self_attn.o_proj.weight", {h, h}});
        out.push_back({p + "mlp.gate_proj.weight", {inter, h}});
        out.push_back({p + "mlp.up_proj.weight", {inter, h}});
        out.push_back({p + "mlp.down_proj.weight", {h, inter}});
    }
    return out;
}

bool targets(const Perturbation & p, const ParamLocator & loc) {
    const bool comp = p.target_components.empty() ||
                      std::find(p.target_components.begin(), p.target_components.end(), loc.component) !=
                          p.target_components.end();
    const bool layer = p.target_layers.empty() || !loc.layer ||
                       std::find(p.target_layers.begin(), p.target_layers.end(), *loc.layer) != p.target_layers.end();
    return comp && layer;
}

} // namespace

void SynthSpec::validate() const {
    if (layers < 1 || hidden < 1) throw ValidationError("synth needs layers >= 1 and hidden >= 1");
    for (const auto & p : perturbations) {
        if (p.lowrank_rank < 1 || p.lowrank_rank > hidden) {
            throw ValidationError("synth needs 1 <= lowrank_rank <= hidden");
        }
        if (p.lowrank_scale < 0.0 || p.noise_scale < 0.0) throw ValidationError("synth scales must be non-negative");
    }
}

SynthPair synthesize(const SynthSpec & spec) {
    spec.validate();
    const ArchProfile profile = ArchProfile::llama();
    SynthPair pair;
    const double stdev = 1.0 / std::sqrt(static_cast<double>(spec.hidden));

    for (const auto & ts : llama_layout(spec.layers, spec.hidden)) {
        TensorRecord t;
        t.name = ts.name;
        t.shape = ts.shape;
        t.dtype = DType::f32;
        std::size_t n = 1;
        for (auto d : ts.shape) n *= static_cast<std::size_t>(d);
        t.data.resize(n);
        if (ts.ones) {
            std::fill(t.data.begin(), t.data.end(), 1.0f);
        } else {
            CounterRng rng(derive_seed(spec.seed, "base:" + ts.name));
            for (auto & v : t.data) v = static_cast<float>(stdev * rng.normal());
        }

        TensorRecord adapted = t;
        const ParamLocator loc = classify(ts.name, profile);
        const MatrixView view = t.matrix();
        const std::size_t rows = view.rows;
        const std::size_t cols = view.cols;
        std::vector<double> delta(n, 0.0);
        bool touched = false;
        for (std::size_t pi = 0; pi < spec.perturbations.size(); ++pi) {
            const Perturbation & p = spec.perturbations[pi];
            if (!targets(p, loc) || (p.lowrank_scale == 0.0 && p.noise_scale == 0.0)) continue;
            touched = true;
            CounterRng rng(derive_seed(spec.seed, "perturb:" + ts.name, pi));
            const auto r = static_cast<std::size_t>(p.lowrank_rank);
            if (p.lowrank_scale != 0.0) {
                std::vector<double> u(rows * r), v(cols * r);
                const double su = 1.0 / std::sqrt(static_cast<double>(rows));
                const double sv = 1.0 / std::sqrt(static_cast<double>(cols));
                for (auto & x : u) x = su * rng.normal();
                for (auto & x : v) x = sv * rng.normal();
                for (std::size_t i = 0; i < rows; ++i) {
                    for (std::size_t j = 0; j < cols; ++j) {
                        double acc = 0.0;
                        for (std::size_t k = 0; k < r; ++k) acc += u[i * r + k] * v[j * r + k];
                        delta[i * cols + j] += p.lowrank_scale * acc;
                    }
                }
            }
            if (p.noise_scale != 0.0) {
                for (auto & d : delta) d += p.noise_scale * rng.normal();
            }
        }
        if (touched) {
            for (std::size_t i = 0; i < n; ++i) {
                adapted.data[i] = static_cast<float>(static_cast<double>(t.data[i]) + delta[i]);
            }
        }
        pair.base.add(std::move(t));
        pair.adapted.add(std::move(adapted));
    }
    return pair;
}

} // namespace spearmm
