#include "mofill/io.hpp"

#include <zlib.h>

#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "mofill/error.hpp"

namespace mofill {
namespace {

void write_bytes_atomic(const std::filesystem::path& path, const char* data, std::size_t size) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (!fs::is_directory(dir))
    throw DataError("cannot write " + path.string() + ": directory does not exist");
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(data, static_cast<std::streamsize>(size));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                    ec.message());
  }
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  write_bytes_atomic(path, contents.data(), contents.size());
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& contents) {
  write_bytes_atomic(path, reinterpret_cast<const char*>(contents.data()), contents.size());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string format_real(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view token) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size() || token.empty())
    throw DataError("invalid number '" + std::string(token) + "'");
  return value;
}

namespace {

class ArchiveWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ArchiveReader {
 public:
  ArchiveReader(const std::vector<std::uint8_t>& bytes, std::size_t end, const std::string& origin)
      : bytes_(bytes), end_(end), origin_(origin) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(origin_ + ": " + what + " at byte offset " + std::to_string(pos_));
  }
  template <typename U>
  U le(const std::string& what) {
    if (end_ - pos_ < sizeof(U)) fail("truncated " + what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n, const std::string& what) {
    if (end_ - pos_ < n) fail("truncated " + what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void floats(std::vector<float>& out, std::size_t n, const std::string& what) {
    if (n > (end_ - pos_) / 4) fail("truncated data for " + what);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto u = le<std::uint32_t>(what);
      std::memcpy(&out[i], &u, 4);
    }
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == end_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  const std::string& origin_;
};

}  // namespace

std::vector<std::uint8_t> encode_archive(std::string_view magic,
                                         const std::vector<ArchiveEntry>& entries) {
  if (magic.size() != 4) throw UsageError("archive magic must be 4 bytes");
  ArchiveWriter w;
  w.bytes(magic.data(), 4);
  w.le(kArchiveVersion);
  w.le(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xffff) throw UsageError("archive entry name too long");
    std::size_t n = 1;
    for (auto d : e.dims) n *= d;
    if (n != e.data.size() || e.dims.empty() || e.dims.size() > 255)
      throw ShapeError("archive entry " + e.name + " has inconsistent dims");
    w.le(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.le(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) w.le(d);
    for (float f : e.data) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      w.le(u);
    }
  }
  w.le(crc32(w.data().data(), w.data().size()));
  return std::move(w.data());
}

std::vector<ArchiveEntry> decode_archive(const std::vector<std::uint8_t>& bytes,
                                         std::string_view magic, const std::string& origin) {
  if (bytes.size() < 16) throw DataError(origin + ": file too short (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), magic.data(), 4) != 0)
    throw DataError(origin + ": bad magic, expected '" + std::string(magic) + "'");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int k = 0; k < 4; ++k) stored |= std::uint32_t(bytes[body + k]) << (8 * k);

  ArchiveReader r(bytes, body, origin);
  r.str(4, "magic");
  const auto version = r.le<std::uint32_t>("version");
  if (version != kArchiveVersion) r.fail("unsupported version " + std::to_string(version));
  if (crc32(bytes.data(), body) != stored)
    throw DataError(origin + ": checksum mismatch (file corrupted or truncated)");
  const auto count = r.le<std::uint32_t>("entry count");

  std::vector<ArchiveEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    ArchiveEntry e;
    e.offset = r.pos();
    const auto len = r.le<std::uint16_t>("entry name length");
    e.name = r.str(len, "entry name");
    const auto rank = r.le<std::uint8_t>("rank of " + e.name);
    if (rank == 0) r.fail("entry " + e.name + " has rank 0");
    std::size_t n = 1;
    for (int k = 0; k < rank; ++k) {
      const auto d = r.le<std::uint32_t>("dims of " + e.name);
      if (d == 0 || d > (1u << 26)) r.fail("entry " + e.name + " has invalid dimension " + std::to_string(d));
      e.dims.push_back(d);
      n *= d;
      if (n > (std::size_t{1} << 32)) r.fail("entry " + e.name + " is too large");
    }
    r.floats(e.data, n, e.name);
    for (const auto& prev : entries)
      if (prev.name == e.name) r.fail("duplicate entry " + e.name);
    entries.push_back(std::move(e));
  }
  if (!r.done()) r.fail("trailing bytes after the last entry");
  return entries;
}

const std::string& TextMatrix::field(const std::string& key, const std::string& origin) const {
  for (const auto& [k, v] : fields)
    if (k == key) return v;
  throw DataError(origin + ": header is missing '" + key + "='");
}

int TextMatrix::int_field(const std::string& key, const std::string& origin) const {
  const std::string& v = field(key, origin);
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw DataError(origin + ": header field " + key + "=" + v + " is not an integer");
  return out;
}

TextMatrix parse_text_matrix(std::string_view text, std::string_view tag,
                             const std::string& origin) {
  TextMatrix m;
  int line_no = 0;
  bool header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    const std::string where = origin + ":" + std::to_string(line_no);
    if (!header) {
      std::vector<std::string_view> tokens;
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) tokens.push_back(line.substr(i, j - i));
        i = j;
      }
      if (tokens.empty() || tokens[0] != "#" + std::string(tag))
        throw DataError(where + ": expected header '#" + std::string(tag) + " v1 ...'");
      if (tokens.size() < 2 || tokens[1] != "v1")
        throw DataError(where + ": unsupported format version");
      for (std::size_t t = 2; t < tokens.size(); ++t) {
        const auto eq = tokens[t].find('=');
        if (eq == std::string_view::npos || eq == 0)
          throw DataError(where + ": malformed header field '" + std::string(tokens[t]) + "'");
        m.fields.emplace_back(std::string(tokens[t].substr(0, eq)),
                              std::string(tokens[t].substr(eq + 1)));
      }
      header = true;
    } else {
      std::vector<double> row;
      std::size_t i = 0;
      while (true) {
        std::size_t j = line.find(',', i);
        if (j == std::string_view::npos) j = line.size();
        try {
          row.push_back(parse_real(line.substr(i, j - i)));
        } catch (const DataError& e) {
          throw DataError(where + ": " + e.what());
        }
        if (!std::isfinite(row.back())) throw DataError(where + ": non-finite value");
        if (j == line.size()) break;
        i = j + 1;
      }
      m.rows.push_back(std::move(row));
      m.line_numbers.push_back(line_no);
    }
    if (end == text.size()) break;
  }
  if (!header) throw DataError(origin + ": empty file, expected '#" + std::string(tag) + "' header");
  return m;
}

std::string format_row(const double* values, std::size_t count) {
  std::string out;
  out.reserve(count * 12);
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += ',';
    out += format_real(values[i]);
  }
  return out;
}

}  // namespace mofill
