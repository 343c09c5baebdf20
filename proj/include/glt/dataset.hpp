#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glt/characteristics.hpp"
#include "glt/geometry.hpp"

namespace glt {

/// One generator of a measured microstructure, lengths in micrometres.
struct GeneratorRecord {
  double x = 0.0, y = 0.0, z = 0.0;
  double radius = 0.0;
};

struct GeneratorDataset {
  std::vector<GeneratorRecord> records;
  std::array<double, 3> extents{0.0, 0.0, 0.0};  // domain size per axis

  /// Throws DatasetError: non-positive extent, point outside [0, L] on some
  /// axis, non-positive radius.
  void validate() const;
};

/// CSV `x_um,y_um,z_um,radius_um` plus a sidecar `<path>.meta` with a
/// [domain] section holding extent_x_um, extent_y_um, extent_z_um.
GeneratorDataset read_dataset(const std::filesystem::path& csv);
void write_dataset(const std::filesystem::path& csv, const GeneratorDataset& data);

struct ScaleReport {
  std::array<double, 3> axis_scale{};  // 1 / extent
  double radius_scale = 0.0;           // 1 / cbrt(volume)
  double max_normalized_radius = 0.0;
};

/// Positions divided by the axis extents, radii by the cube root of the
/// domain volume. Throws RadiusExceedsR0 naming the first offending record.
std::pair<Configuration, ScaleReport> normalize(const GeneratorDataset& data, double r0 = 0.2);

/// CSV `id,x,y,z,radius` in normalized units, 17 significant digits.
void write_configuration_csv(std::ostream& out, const Configuration& config);
Configuration read_configuration_csv(std::istream& in);
void write_configuration_file(const std::filesystem::path& path, const Configuration& config);
Configuration read_configuration_file(const std::filesystem::path& path);

struct MomentSummary {
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator; 0 for fewer than two values
  std::size_t count = 0;
};
MomentSummary summarize(std::span<const double> values);

/// Mean and sd of radius, nof, volume, volume difference and NVR.
struct TessellationStats {
  std::size_t cells = 0;
  std::size_t neighbor_pairs = 0;
  MomentSummary radius, nof, volume, vol_diff, nvr;
};
TessellationStats tessellation_stats(const Tessellation& tess);

struct BinSpec {
  std::optional<std::vector<double>> nof;     // default: integer bins over the observed range
  std::optional<std::vector<double>> volume;  // default: 20 bins over [0, 1.1 max]
};

struct TargetHistograms {
  Histogram nof;
  Histogram volume;
  TessellationStats stats;
};

/// Tessellates the configuration periodically and bins nof and volume.
/// Throws InsufficientData for fewer than two nonempty cells.
TargetHistograms target_histograms(const Configuration& config, const BinSpec& bins = {});

/// Number-of-faces histogram shaped like the measured one: a gamma law with
/// mean 14.1608 and sd 4.8558 discretized on unit bins 4..40, scaled to
/// 1057 cells.
Histogram reference_nof_histogram();

/// Parses "integer:lo:hi", "uniform:lo:hi:bins" or an explicit
/// comma-separated list of breaks. Throws ConfigError.
std::vector<double> parse_breaks(const std::string& spec);

}  // namespace glt
