#include "qpinn/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qpinn::io {

std::vector<std::string> csv_columns(std::size_t num_axes) {
  if (num_axes == 2) return {"x", "t", "u"};
  if (num_axes == 3) return {"x", "y", "t", "u"};
  throw std::invalid_argument("CSV grids need 2 or 3 axes");
}

std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string grid_to_csv(const pde::SolutionGrid& grid) {
  grid.validate();
  const auto cols = csv_columns(grid.axes.size());
  std::string out;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    out += cols[c];
  }
  out += '\n';
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    for (double coord : grid.point(i)) {
      out += format_double(coord);
      out += ',';
    }
    out += format_double(grid.values[i]);
    out += '\n';
  }
  return out;
}

void write_grid_csv(const std::filesystem::path& path, const pde::SolutionGrid& grid) {
  write_file(path, grid_to_csv(grid));
}

namespace {

double parse_number(std::string_view s) {
  // strtod accepts what %.17g prints, including inf/nan spellings
  const std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
    throw std::invalid_argument("CSV: bad number '" + tmp + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.size() - start : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

pde::SolutionGrid grid_from_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw std::invalid_argument("CSV: empty input");
  const auto header = split(lines[0], ',');
  const std::size_t num_axes = header.size() - 1;
  std::vector<std::string> expected;
  try {
    expected = csv_columns(num_axes);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("CSV: header must be x,t,u or x,y,t,u");
  }
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != expected[c]) throw std::invalid_argument("CSV: header must be x,t,u or x,y,t,u");
  }

  std::vector<std::vector<double>> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split(lines[r], ',');
    if (fields.size() != header.size()) {
      throw std::invalid_argument("CSV: row " + std::to_string(r) + " has the wrong number of fields");
    }
    std::vector<double> row;
    for (auto f : fields) row.push_back(parse_number(f));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("CSV: no data rows");

  // Axis d repeats with period prod(len(axes < d)); recover lengths in order.
  pde::SolutionGrid grid;
  std::size_t stride = 1;
  for (std::size_t d = 0; d < num_axes; ++d) {
    std::vector<double> axis;
    for (std::size_t i = 0; i < rows.size(); i += stride) {
      if (!axis.empty() && rows[i][d] == axis.front()) break;
      axis.push_back(rows[i][d]);
    }
    grid.axes.push_back(std::move(axis));
    stride *= grid.axes.back().size();
  }
  grid.values.reserve(rows.size());
  for (const auto& row : rows) grid.values.push_back(row.back());
  try {
    grid.validate();
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("CSV: rows do not form a rectangular grid");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto p = grid.point(i);
    for (std::size_t d = 0; d < num_axes; ++d) {
      if (p[d] != rows[i][d]) throw std::invalid_argument("CSV: rows do not form a rectangular grid");
    }
  }
  return grid;
}

pde::SolutionGrid read_grid_csv(const std::filesystem::path& path) {
  return grid_from_csv(read_file(path));
}

Rgb colormap(double v, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("color range needs hi > lo");
  double s = (v - lo) / (hi - lo);
  if (std::isnan(s)) s = 0.5;
  s = std::clamp(s, 0.0, 1.0);
  auto level = [](double f) { return static_cast<std::uint8_t>(std::lround(255.0 * f)); };
  if (s <= 0.5) {
    const std::uint8_t c = level(s / 0.5);
    return {c, c, 255};
  }
  const std::uint8_t c = level(1.0 - (s - 0.5) / 0.5);
  return {255, c, c};
}

ColorRange symmetric_range(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) m = std::max(m, std::abs(v));
  }
  if (m == 0.0) m = 1.0;
  return {-m, m};
}

std::string render_ppm(const pde::SolutionGrid& grid, ColorRange range) {
  grid.validate();
  if (grid.axes.size() != 2) throw std::invalid_argument("heatmap needs a two-axis grid");
  const std::size_t w = grid.axes[0].size();
  const std::size_t h = grid.axes[1].size();
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + 3 * w * h);
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t j = h - 1 - row;  // top row holds the largest second coordinate
    for (std::size_t i = 0; i < w; ++i) {
      const Rgb c = colormap(grid.values[j * w + i], range.lo, range.hi);
      out += static_cast<char>(c.r);
      out += static_cast<char>(c.g);
      out += static_cast<char>(c.b);
    }
  }
  return out;
}

pde::SolutionGrid time_slice(const pde::SolutionGrid& grid, std::size_t k) {
  grid.validate();
  if (grid.axes.size() != 3) throw std::invalid_argument("time_slice needs a three-axis grid");
  if (k >= grid.axes[2].size()) throw std::out_of_range("time index out of range");
  pde::SolutionGrid out;
  out.axes = {grid.axes[0], grid.axes[1]};
  const std::size_t plane = grid.axes[0].size() * grid.axes[1].size();
  out.values.assign(grid.values.begin() + static_cast<std::ptrdiff_t>(k * plane),
                    grid.values.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane));
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace {

constexpr char kMagic[8] = {'Q', 'P', 'I', 'N', 'N', 'C', 'K', 'P'};

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out += static_cast<char>((bits >> (8 * i)) & 0xFFU);
}

template <typename T>
T get_le(std::string_view in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  if (in.size() - pos < sizeof(U)) throw std::invalid_argument("checkpoint is truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bits |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return std::bit_cast<T>(bits);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  std::string out(kMagic, sizeof kMagic);
  put_le(out, kCheckpointVersion);
  put_le(out, ck.shape_hash);
  put_le(out, static_cast<std::uint64_t>(ck.params.size()));
  for (double v : ck.params) put_le(out, v);
  put_le(out, static_cast<std::uint64_t>(ck.config_json.size()));
  out += ck.config_json;
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw std::invalid_argument("not a qpinn checkpoint (bad magic)");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw std::invalid_argument("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.shape_hash = get_le<std::uint64_t>(bytes, pos);
  const auto n = get_le<std::uint64_t>(bytes, pos);
  if (n > (bytes.size() - pos) / 8) throw std::invalid_argument("checkpoint is truncated");
  ck.params.resize(n);
  for (auto& v : ck.params) v = get_le<double>(bytes, pos);
  const auto len = get_le<std::uint64_t>(bytes, pos);
  if (len != bytes.size() - pos) throw std::invalid_argument("checkpoint config length mismatch");
  ck.config_json.assign(bytes.substr(pos));
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file(path, encode_checkpoint(ck));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string git_blob_hash(std::string_view data) {
  std::string blob = "blob " + std::to_string(data.size());
  blob += '\0';
  blob.append(data);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xF];
  }
  return hex;
}

}  // namespace qpinn::io
