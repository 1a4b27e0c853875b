#pragma once

// Fixtures shared by the pipeline tests and the acceptance runner.

#include "spearmm/archmap.hpp"
#include "spearmm/checkpoint_io.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>

namespace fixture {

inline std::string layer_tensor_name(int layer, spearmm::ComponentKind k) {
    const std::string p = "model.layers." + std::to_string(layer) + ".";
    switch (k) {
        case spearmm::ComponentKind::q_proj:   return p + "self_attn.q_proj.weight";
        case spearmm::ComponentKind::k_proj:   return p + "self_attn.k_proj.weight";
        case spearmm::ComponentKind::v_proj:   return p + "self_attn.v_proj.weight";
        case spearmm::ComponentKind::o_proj:   return p + "self_attn.o_proj.weight";
        case spearmm::ComponentKind::mlp_gate: return p + "mlp.gate_proj.weight";
        case spearmm::ComponentKind::mlp_up:   return p + "mlp.up_proj.weight";
        case spearmm::ComponentKind::mlp_down: return p + "mlp.down_proj.weight";
        default:                               return p + "other.weight";
    }
}

inline spearmm::TensorRecord to_record(const std::string & name, const Eigen::MatrixXd & m) {
    spearmm::TensorRecord r;
    r.name = name;
    r.shape = {m.rows(), m.cols()};
    r.dtype = spearmm::DType::f32;
    r.data.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.data[static_cast<std::size_t>(i * m.cols() + j)] = static_cast<float>(m(i, j));
    return r;
}

struct Pair {
    spearmm::Checkpoint base;
    spearmm::Checkpoint adapted;
};

// Even layers change only in magnitude (a uniform rescale, spectrum shape kept),
// odd layers only in structure (the top singular values shrink, norm kept close).
// Signal strength of the base varies independently so SNR ranks differently again.
inline Pair ablation_pair(int layers = 8, int dim = 32, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto gaussian = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
        return m;
    };

    Pair out;
    for (int l = 0; l < layers; ++l) {
        for (auto k : spearmm::kLayerComponents) {
            const double strength = 2.0 + 6.0 * u01(rng);
            Eigen::MatrixXd base = gaussian(dim, dim) / std::sqrt(double(dim));
            base += strength * gaussian(dim, 3) * gaussian(3, dim) / double(dim);

            Eigen::MatrixXd adapted;
            if (l % 2 == 0) {
                adapted = base * (1.1 + 0.8 * u01(rng));
            } else {
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(base, Eigen::ComputeFullU | Eigen::ComputeFullV);
                Eigen::VectorXd s = svd.singularValues();
                const double drop = 0.2 + 0.6 * u01(rng);
                for (int i = 0; i < 3; ++i) s(i) *= 1.0 - drop;
                adapted = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
            }
            const auto name = layer_tensor_name(l, k);
            out.base.add(to_record(name, base));
            out.adapted.add(to_record(name, adapted));
        }
    }
    return out;
}

} // namespace fixture
