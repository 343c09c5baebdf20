#include "glt/dataset.hpp"

#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "glt/errors.hpp"

namespace glt {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (trim(s.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw DatasetError(context + ": '" + s + "' is not a number");
}

std::filesystem::path meta_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".meta");
}

}  // namespace

void GeneratorDataset::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(extents[a] > 0.0) || !std::isfinite(extents[a]))
      throw DatasetError("domain extent along axis " + std::to_string(a) + " must be positive");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const double c[3] = {r.x, r.y, r.z};
    for (int a = 0; a < 3; ++a) {
      if (!(c[a] >= 0.0 && c[a] <= extents[a]))
        throw DatasetError("record " + std::to_string(i) + " lies outside the domain");
    }
    if (!(r.radius > 0.0)) throw DatasetError("record " + std::to_string(i) + " has a non-positive radius");
  }
}

GeneratorDataset read_dataset(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw DatasetError("cannot open dataset " + csv.string());
  GeneratorDataset data;
  std::string line;
  if (!std::getline(in, line) || trim(line) != "x_um,y_um,z_um,radius_um")
    throw DatasetError(csv.string() + ": expected header x_um,y_um,z_um,radius_um");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    const std::string where = csv.string() + ":" + std::to_string(row);
    if (f.size() != 4) throw DatasetError(where + ": expected 4 fields");
    data.records.push_back({to_double(f[0], where), to_double(f[1], where), to_double(f[2], where),
                            to_double(f[3], where)});
  }

  const auto meta = meta_path(csv);
  if (!std::filesystem::exists(meta)) throw DatasetError("missing sidecar " + meta.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(meta.string(), tree);
    data.extents = {tree.get<double>("domain.extent_x_um"), tree.get<double>("domain.extent_y_um"),
                    tree.get<double>("domain.extent_z_um")};
  } catch (const boost::property_tree::ptree_error& e) {
    throw DatasetError(meta.string() + ": " + e.what());
  }
  data.validate();
  return data;
}

void write_dataset(const std::filesystem::path& csv, const GeneratorDataset& data) {
  std::ofstream out(csv);
  if (!out) throw DatasetError("cannot write " + csv.string());
  out << std::setprecision(17) << "x_um,y_um,z_um,radius_um\n";
  for (const auto& r : data.records) out << r.x << ',' << r.y << ',' << r.z << ',' << r.radius << '\n';
  std::ofstream meta(meta_path(csv));
  meta << std::setprecision(17) << "[domain]\nextent_x_um = " << data.extents[0]
       << "\nextent_y_um = " << data.extents[1] << "\nextent_z_um = " << data.extents[2] << '\n';
}

std::pair<Configuration, ScaleReport> normalize(const GeneratorDataset& data, double r0) {
  data.validate();
  ScaleReport report;
  for (int a = 0; a < 3; ++a) report.axis_scale[a] = 1.0 / data.extents[a];
  report.radius_scale = 1.0 / std::cbrt(data.extents[0] * data.extents[1] * data.extents[2]);
  Configuration config;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    const double radius = r.radius * report.radius_scale;
    if (radius > r0) {
      std::ostringstream msg;
      msg << "record " << i << " has normalized radius " << radius << " > R0 = " << r0;
      throw RadiusExceedsR0(msg.str());
    }
    report.max_normalized_radius = std::max(report.max_normalized_radius, radius);
    const Vec3 p = wrap_to_torus(
        {r.x / data.extents[0], r.y / data.extents[1], r.z / data.extents[2]});
    if (config.occupied(p)) throw DatasetError("record " + std::to_string(i) + " repeats a position");
    config.insert(p, radius);
  }
  return {std::move(config), report};
}

void write_configuration_csv(std::ostream& out, const Configuration& config) {
  const auto old = out.precision(17);
  out << "id,x,y,z,radius\n";
  for (const auto& g : config.sorted_by_id()) {
    out << g.id << ',' << g.position.x << ',' << g.position.y << ',' << g.position.z << ','
        << g.radius << '\n';
  }
  out.precision(old);
}

Configuration read_configuration_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,x,y,z,radius")
    throw DatasetError("expected header id,x,y,z,radius");
  std::vector<MarkedGenerator> gens;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    const std::string where = "configuration row " + std::to_string(row);
    if (f.size() != 5) throw DatasetError(where + ": expected 5 fields");
    MarkedGenerator g;
    try {
      g.id = std::stoll(f[0]);
    } catch (const std::exception&) {
      throw DatasetError(where + ": bad id");
    }
    g.position = {to_double(f[1], where), to_double(f[2], where), to_double(f[3], where)};
    g.radius = to_double(f[4], where);
    gens.push_back(g);
  }
  try {
    return Configuration(std::move(gens));
  } catch (const Error& e) {
    throw DatasetError(std::string("invalid configuration: ") + e.what());
  }
}

void write_configuration_file(const std::filesystem::path& path, const Configuration& config) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  write_configuration_csv(out, config);
}

Configuration read_configuration_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  return read_configuration_csv(in);
}

MomentSummary summarize(std::span<const double> values) {
  MomentSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = sample_mean(values);
  if (values.size() >= 2) s.sd = std::sqrt(sample_variance(values));
  return s;
}

TessellationStats tessellation_stats(const Tessellation& tess) {
  TessellationStats s;
  s.cells = tess.cells.size();
  s.neighbor_pairs = tess.neighbor_pairs.size();
  s.radius = summarize(extract(CharacteristicKind::Radius, tess));
  s.nof = summarize(extract(CharacteristicKind::Nof, tess));
  s.volume = summarize(extract(CharacteristicKind::Volume, tess));
  s.vol_diff = summarize(extract(CharacteristicKind::VolumeDifference, tess));
  s.nvr = summarize(extract(CharacteristicKind::Nvr, tess));
  return s;
}

TargetHistograms target_histograms(const Configuration& config, const BinSpec& bins) {
  const auto tess = build_tessellation(config);
  if (tess.cells.size() < 2) throw InsufficientData("target data need at least two nonempty cells");
  const auto nof = extract(CharacteristicKind::Nof, tess);
  const auto vol = extract(CharacteristicKind::Volume, tess);
  TargetHistograms t;
  t.nof = histogram(nof, bins.nof ? *bins.nof : default_breaks(CharacteristicKind::Nof, nof));
  t.volume = histogram(vol, bins.volume ? *bins.volume : default_breaks(CharacteristicKind::Volume, vol));
  t.stats = tessellation_stats(tess);
  return t;
}

Histogram reference_nof_histogram() {
  constexpr double mean = 14.1608, sd = 4.8558, cells = 1057.0;
  const double shape = (mean / sd) * (mean / sd);
  const boost::math::gamma_distribution<double> law(shape, sd * sd / mean);
  Histogram h = histogram({}, integer_breaks(4, 40));
  const double lo = boost::math::cdf(law, h.breaks.front());
  const double hi = boost::math::cdf(law, h.breaks.back());
  for (std::size_t i = 0; i < h.bins(); ++i) {
    const double p = boost::math::cdf(law, h.breaks[i + 1]) - boost::math::cdf(law, h.breaks[i]);
    h.counts[i] = cells * p / (hi - lo);
  }
  return h;
}

std::vector<double> parse_breaks(const std::string& spec) {
  const auto parts = split(trim(spec), ':');
  auto num = [&](const std::string& s) {
    try {
      return to_double(trim(s), "bins '" + spec + "'");
    } catch (const DatasetError& e) {
      throw ConfigError(e.what());
    }
  };
  std::vector<double> breaks;
  if (parts.size() == 3 && parts[0] == "integer") {
    breaks = integer_breaks(static_cast<int>(num(parts[1])), static_cast<int>(num(parts[2])));
  } else if (parts.size() == 4 && parts[0] == "uniform") {
    breaks = uniform_breaks(num(parts[1]), num(parts[2]), static_cast<int>(num(parts[3])));
  } else if (parts.size() == 1) {
    for (const auto& s : split(parts[0], ',')) breaks.push_back(num(s));
  } else {
    throw ConfigError("cannot parse bins '" + spec + "'");
  }
  try {
    (void)histogram({}, breaks);
  } catch (const Error& e) {
    throw ConfigError("bins '" + spec + "': " + e.what());
  }
  return breaks;
}

}  // namespace glt
