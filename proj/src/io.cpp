#include "xtbench/io.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace xtb {

namespace fs = std::filesystem;

uint32_t crc32(const void* data, size_t len) {
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = 0xffffffffu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

void write_bytes_atomic(const fs::path& path, const void* data, size_t len) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  const std::streamsize n = in.tellg();
  in.seekg(0);
  std::vector<unsigned char> buf(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(buf.data()), n);
  if (!in) throw std::runtime_error("read failed: " + path.string());
  return buf;
}

namespace {
template <typename T>
std::vector<T> read_array(const fs::path& path, size_t expected_count) {
  const auto bytes = read_bytes(path);
  if (bytes.size() != expected_count * sizeof(T))
    throw std::runtime_error(path.string() + ": expected " +
                             std::to_string(expected_count * sizeof(T)) + " bytes, found " +
                             std::to_string(bytes.size()));
  std::vector<T> v(expected_count);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}
}  // namespace

void write_f64(const fs::path& path, const std::vector<double>& v) {
  write_bytes_atomic(path, v.data(), v.size() * sizeof(double));
}
std::vector<double> read_f64(const fs::path& path, size_t n) { return read_array<double>(path, n); }

void write_f32(const fs::path& path, const std::vector<float>& v) {
  write_bytes_atomic(path, v.data(), v.size() * sizeof(float));
}
std::vector<float> read_f32(const fs::path& path, size_t n) { return read_array<float>(path, n); }

void write_u8(const fs::path& path, const std::vector<uint8_t>& v) {
  write_bytes_atomic(path, v.data(), v.size());
}
std::vector<uint8_t> read_u8(const fs::path& path, size_t n) { return read_array<uint8_t>(path, n); }

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_bytes_atomic(path, text.data(), text.size());
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

std::string format_alpha(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", alpha);
  return buf;
}

}  // namespace xtb
