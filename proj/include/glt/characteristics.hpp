#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "glt/geometry.hpp"

namespace glt {

enum class CharacteristicKind {
  Nof,               // number of faces shared with other generators
  Volume,
  Nvr,               // neighbor-volume ratio of a face-adjacent pair
  VolumeDifference,  // | |C1| - |C2| | of a face-adjacent pair
  Radius,            // mark of the generator
};

/// 1 for per-cell characteristics, 2 for per-neighbor-pair ones.
int arity(CharacteristicKind kind);

std::string_view to_string(CharacteristicKind kind);

/// Accepts "nof", "vol", "nvr", "vol_diff", "radius". Throws ConfigError.
CharacteristicKind parse_characteristic(std::string_view name);

/// (max/min - 1)^(1/2). Throws NonPositiveVolume unless both are > 0.
double nvr(double v1, double v2);

double vol_diff(double v1, double v2);

double cell_value(CharacteristicKind kind, const CellGeometry& cell);
double pair_value(CharacteristicKind kind, double volume_a, double volume_b);

/// Values over all nonempty cells ordered by id (arity 1), or over all
/// neighbor pairs ordered by (first, second) (arity 2).
std::vector<double> extract(CharacteristicKind kind, const Tessellation& tess);

/// Bin counts over [t0, t1), ..., [t_{J-1}, t_J] (last bin closed).
struct Histogram {
  std::vector<double> breaks;
  std::vector<double> counts;
  std::size_t clamped = 0;  // values outside [t0, tJ] that were folded into an end bin

  std::size_t bins() const { return counts.size(); }
  double total() const;

  /// Bin receiving v; out-of-range values map to the nearest end bin and set
  /// *was_clamped when given.
  std::size_t bin_of(double v, bool* was_clamped = nullptr) const;

  void add(double v, double weight = 1.0);
};

/// Throws EmptyBreaks for fewer than two breaks and InvalidParameter when
/// they are not strictly increasing.
Histogram histogram(std::span<const double> values, std::span<const double> breaks);

/// Sum over bins of |h_i/S - h'_i/S'|, in [0, 2]. Throws BinMismatch when the
/// breaks differ and EmptyHistogram when either total is zero.
double discrepancy(const Histogram& h, const Histogram& target);

double sample_mean(std::span<const double> values);      // >= 1 value
double sample_variance(std::span<const double> values);  // >= 2 values, n-1 denominator

/// Unit-width bins [k - 0.5, k + 0.5) for k = lo..hi.
std::vector<double> integer_breaks(int lo, int hi);

/// `bins` equal-width bins over [lo, hi].
std::vector<double> uniform_breaks(double lo, double hi, int bins);

/// Default binning for a target sample: integer bins spanning the observed
/// range for nof, 20 equal bins over [0, 1.1 max] otherwise.
std::vector<double> default_breaks(CharacteristicKind kind, std::span<const double> values);

/// CSV with header bin_left,bin_right,count,relative_frequency.
void write_histogram_csv(std::ostream& out, const Histogram& h);
Histogram read_histogram_csv(std::istream& in);

}  // namespace glt
