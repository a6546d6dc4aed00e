#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace polysketch::io {

std::string read_text(const std::filesystem::path& file);
void write_text(const std::filesystem::path& file, std::string_view text);

// Little-endian binary payloads, no header.
std::vector<float> read_f32(const std::filesystem::path& file);
void write_f32(const std::filesystem::path& file, std::span<const float> values);
std::vector<std::uint32_t> read_u32(const std::filesystem::path& file);
void write_u32(const std::filesystem::path& file, std::span<const std::uint32_t> values);
std::vector<std::uint8_t> read_u8(const std::filesystem::path& file);
void write_u8(const std::filesystem::path& file, std::span<const std::uint8_t> values);

}  // namespace polysketch::io
