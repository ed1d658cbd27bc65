#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mofill {

// Writes to a sibling temporary file, then renames it over `path`, so a
// partially written file is never visible under the final name.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& contents);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

// Shortest decimal representation that parses back to the same double.
std::string format_real(double value);
// Strict parse of a complete decimal token.
double parse_real(std::string_view token);

// Binary archives of named float arrays, little-endian: 4-byte magic, u32
// version, u32 entry count; per entry u16 name length, name, u8 rank, u32
// dims, f32 data; then a CRC32 of every preceding byte.
struct ArchiveEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
  std::size_t offset = 0;  // byte offset of the entry (set when decoding)
};

inline constexpr std::uint32_t kArchiveVersion = 1;

std::vector<std::uint8_t> encode_archive(std::string_view magic,
                                         const std::vector<ArchiveEntry>& entries);
// Verifies magic, version and checksum; rejects duplicates and trailing bytes.
std::vector<ArchiveEntry> decode_archive(const std::vector<std::uint8_t>& bytes,
                                         std::string_view magic, const std::string& origin);

// Text matrices: a header line "#<tag> v1 key=value ..." followed by lines of
// comma-separated reals. Blank lines are ignored.
struct TextMatrix {
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<std::vector<double>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  // Value of a header field; throws DataError naming `origin` when absent.
  const std::string& field(const std::string& key, const std::string& origin) const;
  int int_field(const std::string& key, const std::string& origin) const;
};

TextMatrix parse_text_matrix(std::string_view text, std::string_view tag,
                             const std::string& origin);

// Joins values with commas using format_real.
std::string format_row(const double* values, std::size_t count);

}  // namespace mofill
