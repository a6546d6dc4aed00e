#include "polysketch/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "polysketch/error.hpp"

namespace polysketch::io {

namespace {

std::vector<char> read_bytes(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + file.string());
  return bytes;
}

void write_bytes(const std::filesystem::path& file, const char* data, std::size_t size) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + file.string());
  out.write(data, static_cast<std::streamsize>(size));
  if (!out) throw IoError("write failed: " + file.string());
}

template <typename Word>
Word byteswap_if_big(Word w) {
  if constexpr (std::endian::native == std::endian::big) {
    Word out = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) {
      out = static_cast<Word>((out << 8) | (w & 0xff));
      w >>= 8;
    }
    return out;
  } else {
    return w;
  }
}

template <typename T>
std::vector<T> read_le(const std::filesystem::path& file) {
  using Word = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>;
  const auto bytes = read_bytes(file);
  if (bytes.size() % sizeof(T) != 0)
    throw ValidationError(file.string() + ": byte length is not a multiple of " + std::to_string(sizeof(T)));
  std::vector<T> values(bytes.size() / sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    Word w;
    std::memcpy(&w, bytes.data() + i * sizeof(T), sizeof(T));
    values[i] = std::bit_cast<T>(byteswap_if_big(w));
  }
  return values;
}

template <typename T>
void write_le(const std::filesystem::path& file, std::span<const T> values) {
  using Word = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>;
  std::vector<char> bytes(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Word w = byteswap_if_big(std::bit_cast<Word>(values[i]));
    std::memcpy(bytes.data() + i * sizeof(T), &w, sizeof(T));
  }
  write_bytes(file, bytes.data(), bytes.size());
}

}  // namespace

std::string read_text(const std::filesystem::path& file) {
  const auto bytes = read_bytes(file);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& file, std::string_view text) {
  write_bytes(file, text.data(), text.size());
}

std::vector<float> read_f32(const std::filesystem::path& file) { return read_le<float>(file); }
void write_f32(const std::filesystem::path& file, std::span<const float> values) { write_le<float>(file, values); }
std::vector<std::uint32_t> read_u32(const std::filesystem::path& file) { return read_le<std::uint32_t>(file); }
void write_u32(const std::filesystem::path& file, std::span<const std::uint32_t> values) {
  write_le<std::uint32_t>(file, values);
}
std::vector<std::uint8_t> read_u8(const std::filesystem::path& file) { return read_le<std::uint8_t>(file); }
void write_u8(const std::filesystem::path& file, std::span<const std::uint8_t> values) {
  write_le<std::uint8_t>(file, values);
}

}  // namespace polysketch::io
