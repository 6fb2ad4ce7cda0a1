#pragma once

// File formats: solution-grid CSV, P6 heatmaps, binary checkpoints, and the
// git-style content hash used to label run inputs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qpinn/pde.hpp"

namespace qpinn::io {

/// Column names for a grid with `num_axes` axes: x,t or x,y,t (then u).
std::vector<std::string> csv_columns(std::size_t num_axes);

/// Header `x[,y],t,u`, one row per grid point (first axis fastest), values
/// with 17 significant digits.
std::string grid_to_csv(const pde::SolutionGrid& grid);
void write_grid_csv(const std::filesystem::path& path, const pde::SolutionGrid& grid);

/// Parses the CSV layout written by grid_to_csv. Throws std::invalid_argument
/// when the rows are not a complete Cartesian grid in that order.
pde::SolutionGrid grid_from_csv(std::string_view text);
pde::SolutionGrid read_grid_csv(const std::filesystem::path& path);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Linear blue -> white -> red map over [lo, hi]; values outside are clamped.
Rgb colormap(double v, double lo, double hi);

struct ColorRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// Symmetric range [-m, m] with m = max |v| (m = 1 for an all-zero field).
ColorRange symmetric_range(std::span<const double> values);

/// Binary P6 image of a two-axis grid: first axis left to right, second axis
/// bottom to top, one pixel per cell.
std::string render_ppm(const pde::SolutionGrid& grid, ColorRange range);
void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Two-axis slice of a three-axis grid at time index `k`.
pde::SolutionGrid time_slice(const pde::SolutionGrid& grid, std::size_t k);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t shape_hash = 0;
  std::vector<double> params;
  std::string config_json;
};

/// Layout (all integers and floats little-endian):
///   "QPINNCKP" | u32 version | u64 shape hash | u64 n | n x f64 | u64 len | config bytes
std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::string_view bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);

/// SHA-1 of "blob <size>\0<data>", hex encoded (what `git hash-object` prints).
std::string git_blob_hash(std::string_view data);

/// %.17g formatting.
std::string format_double(double v);

}  // namespace qpinn::io
