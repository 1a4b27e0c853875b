#pragma once

#include "spearmm/dtype.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spearmm {

// Row-major matrix view over float storage. Rank-1 tensors are 1 x N,
// higher ranks fold trailing dimensions into columns.
struct MatrixView {
    std::span<const float> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct TensorRecord {
    std::string name;
    std::vector<std::int64_t> shape;
    DType dtype = DType::f32;
    std::vector<float> data;

    std::size_t numel() const;
    MatrixView matrix() const;

    friend bool operator==(const TensorRecord &, const TensorRecord &) = default;
};

struct Checkpoint {
    std::map<std::string, TensorRecord> tensors;
    std::map<std::string, std::string> metadata;

    void add(TensorRecord t);
    const TensorRecord * find(const std::string & name) const;

    friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

enum class DTypePolicy { preserve, force_f32 };

Checkpoint load_checkpoint(const std::filesystem::path & path);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint & ckpt, const std::filesystem::path & path,
                     DTypePolicy policy = DTypePolicy::force_f32);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint & ckpt,
                                               DTypePolicy policy = DTypePolicy::force_f32);

struct TensorPair {
    const TensorRecord * base = nullptr;
    const TensorRecord * adapted = nullptr;
};

struct Alignment {
    std::vector<TensorPair> pairs;       // lexicographic by name
    std::vector<std::string> unmatched;  // names present in only one checkpoint, sorted
};

// Pairs tensors by exact name. Throws AlignmentError on a same-name shape mismatch.
Alignment aligned_pairs(const Checkpoint & base, const Checkpoint & adapted);

} // namespace spearmm
