#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace spearmm {

enum class DType { f32, f16, bf16 };

std::string_view dtype_name(DType d);
std::optional<DType> parse_dtype(std::string_view s);
std::size_t dtype_size(DType d);

// IEEE binary16 / bfloat16 conversions. Narrowing rounds to nearest, ties to even.
std::uint16_t float_to_half(float f);
float half_to_float(std::uint16_t h);
std::uint16_t float_to_bf16(float f);
float bf16_to_float(std::uint16_t b);

} // namespace spearmm
