#include "glt/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "glt/errors.hpp"

namespace glt {

int arity(CharacteristicKind kind) {
  switch (kind) {
    case CharacteristicKind::Nvr:
    case CharacteristicKind::VolumeDifference:
      return 2;
    default:
      return 1;
  }
}

std::string_view to_string(CharacteristicKind kind) {
  switch (kind) {
    case CharacteristicKind::Nof: return "nof";
    case CharacteristicKind::Volume: return "vol";
    case CharacteristicKind::Nvr: return "nvr";
    case CharacteristicKind::VolumeDifference: return "vol_diff";
    case CharacteristicKind::Radius: return "radius";
  }
  return "?";
}

CharacteristicKind parse_characteristic(std::string_view name) {
  for (auto k : {CharacteristicKind::Nof, CharacteristicKind::Volume, CharacteristicKind::Nvr,
                 CharacteristicKind::VolumeDifference, CharacteristicKind::Radius}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown characteristic '" + std::string(name) + "'");
}

double nvr(double v1, double v2) {
  if (!(v1 > 0.0) || !(v2 > 0.0)) throw NonPositiveVolume("neighbor-volume ratio needs positive volumes");
  const double hi = std::max(v1, v2);
  const double lo = std::min(v1, v2);
  return std::sqrt(hi / lo - 1.0);
}

double vol_diff(double v1, double v2) { return std::abs(v1 - v2); }

double cell_value(CharacteristicKind kind, const CellGeometry& cell) {
  switch (kind) {
    case CharacteristicKind::Nof: return cell.nof;
    case CharacteristicKind::Volume: return cell.volume;
    case CharacteristicKind::Radius: return cell.radius;
    default: throw InvalidParameter(std::string(to_string(kind)) + " is not a cell characteristic");
  }
}

double pair_value(CharacteristicKind kind, double volume_a, double volume_b) {
  switch (kind) {
    case CharacteristicKind::Nvr: return nvr(volume_a, volume_b);
    case CharacteristicKind::VolumeDifference: return vol_diff(volume_a, volume_b);
    default: throw InvalidParameter(std::string(to_string(kind)) + " is not a pair characteristic");
  }
}

std::vector<double> extract(CharacteristicKind kind, const Tessellation& tess) {
  std::vector<double> out;
  if (arity(kind) == 1) {
    out.reserve(tess.cells.size());
    for (const auto& [id, c] : tess.cells) out.push_back(cell_value(kind, c));
  } else {
    out.reserve(tess.neighbor_pairs.size());
    for (const auto& [a, b] : tess.neighbor_pairs) {
      out.push_back(pair_value(kind, tess.cell(a).volume, tess.cell(b).volume));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double Histogram::total() const {
  double s = 0.0;
  for (double c : counts) s += c;
  return s;
}

std::size_t Histogram::bin_of(double v, bool* was_clamped) const {
  if (std::isnan(v)) throw InvalidParameter("cannot bin NaN");
  bool out = false;
  std::size_t bin;
  if (v < breaks.front()) {
    out = true;
    bin = 0;
  } else if (v >= breaks.back()) {
    out = v > breaks.back();
    bin = counts.size() - 1;
  } else {
    const auto it = std::upper_bound(breaks.begin(), breaks.end(), v);
    bin = static_cast<std::size_t>(it - breaks.begin()) - 1;
  }
  if (was_clamped != nullptr) *was_clamped = out;
  return bin;
}

void Histogram::add(double v, double weight) {
  bool out = false;
  counts[bin_of(v, &out)] += weight;
  if (out) ++clamped;
}

Histogram histogram(std::span<const double> values, std::span<const double> breaks) {
  if (breaks.size() < 2) throw EmptyBreaks("a histogram needs at least two breaks");
  for (std::size_t i = 1; i < breaks.size(); ++i) {
    if (!(breaks[i] > breaks[i - 1])) throw InvalidParameter("histogram breaks must be strictly increasing");
  }
  Histogram h;
  h.breaks.assign(breaks.begin(), breaks.end());
  h.counts.assign(breaks.size() - 1, 0.0);
  for (double v : values) h.add(v);
  return h;
}

double discrepancy(const Histogram& h, const Histogram& target) {
  if (h.breaks != target.breaks) throw BinMismatch("histograms have different bins");
  const double s = h.total();
  const double t = target.total();
  if (!(s > 0.0) || !(t > 0.0)) throw EmptyHistogram("discrepancy of an empty histogram");
  double d = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) d += std::abs(h.counts[i] / s - target.counts[i] / t);
  return d;
}

double sample_mean(std::span<const double> values) {
  if (values.empty()) throw InsufficientData("mean of an empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw InsufficientData("variance needs at least two values");
  const double m = sample_mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

std::vector<double> integer_breaks(int lo, int hi) {
  if (hi < lo) throw InvalidParameter("empty integer range");
  std::vector<double> b;
  for (int k = lo; k <= hi + 1; ++k) b.push_back(k - 0.5);
  return b;
}

std::vector<double> uniform_breaks(double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw InvalidParameter("bad uniform bin specification");
  std::vector<double> b(bins + 1);
  for (int i = 0; i <= bins; ++i) b[i] = lo + (hi - lo) * i / bins;
  b.back() = hi;
  return b;
}

std::vector<double> default_breaks(CharacteristicKind kind, std::span<const double> values) {
  if (values.empty()) throw InsufficientData("no values to derive bins from");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (kind == CharacteristicKind::Nof) {
    return integer_breaks(static_cast<int>(std::lround(*lo)), static_cast<int>(std::lround(*hi)));
  }
  const double top = *hi > 0.0 ? 1.1 * *hi : 1.0;
  return uniform_breaks(0.0, top, 20);
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  const double s = h.total();
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "bin_left,bin_right,count,relative_frequency\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    buf << h.breaks[i] << ',' << h.breaks[i + 1] << ',' << h.counts[i] << ','
        << (s > 0.0 ? h.counts[i] / s : 0.0) << '\n';
  }
  out << buf.str();
}

Histogram read_histogram_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("empty histogram file");
  if (line.rfind("bin_left,bin_right,count", 0) != 0) throw DatasetError("unexpected histogram header: " + line);
  Histogram h;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    double values[3];
    for (double& v : values) {
      if (!std::getline(ls, field, ',')) throw DatasetError("short histogram row " + std::to_string(row));
      try {
        v = std::stod(field);
      } catch (const std::exception&) {
        throw DatasetError("bad number '" + field + "' in histogram row " + std::to_string(row));
      }
    }
    if (h.breaks.empty()) {
      h.breaks.push_back(values[0]);
    } else if (values[0] != h.breaks.back()) {
      throw DatasetError("histogram bins are not contiguous at row " + std::to_string(row));
    }
    if (values[2] < 0.0) throw DatasetError("negative count at row " + std::to_string(row));
    h.breaks.push_back(values[1]);
    h.counts.push_back(values[2]);
  }
  if (h.counts.empty()) throw EmptyBreaks("histogram file has no bins");
  histogram(std::span<const double>{}, h.breaks);  // validates the breaks
  return h;
}

}  // namespace glt
