#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace spearmm {

// Rounds to 9 significant digits; every float that reaches a report goes through here.
double round9(double v);
std::string format9(double v);

// Compact dump with sorted keys.
std::string canonical_dump(const nlohmann::json & j);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string & text);
std::string sha256_file(const std::filesystem::path & path);

void write_text_file(const std::filesystem::path & path, const std::string & text);
std::string read_text_file(const std::filesystem::path & path);

} // namespace spearmm
