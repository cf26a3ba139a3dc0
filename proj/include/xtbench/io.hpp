#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xtb {

// Raw little-endian array files plus JSON manifests. All writes go through
// a temp file and rename so partially written artifacts are never observed.

uint32_t crc32(const void* data, size_t len);

void write_bytes_atomic(const std::filesystem::path& path, const void* data, size_t len);
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);

void write_f64(const std::filesystem::path& path, const std::vector<double>& v);
std::vector<double> read_f64(const std::filesystem::path& path, size_t expected_count);

void write_f32(const std::filesystem::path& path, const std::vector<float>& v);
std::vector<float> read_f32(const std::filesystem::path& path, size_t expected_count);

void write_u8(const std::filesystem::path& path, const std::vector<uint8_t>& v);
std::vector<uint8_t> read_u8(const std::filesystem::path& path, size_t expected_count);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Stable shortest decimal for doubles used in file/directory names (0.03, 0.1800 -> 0.18).
std::string format_alpha(double alpha);

}  // namespace xtb
