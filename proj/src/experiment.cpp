#include "glt/experiment.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "glt/errors.hpp"

#ifndef GLT_BUNDLED_DATASET
#define GLT_BUNDLED_DATASET "data/synthetic_grains.csv"
#endif

namespace glt {

namespace fs = std::filesystem;
using boost::property_tree::ptree;

std::string_view to_string(RunKind kind) {
  switch (kind) {
    case RunKind::Simulate: return "simulate";
    case RunKind::Reconstruct: return "reconstruct";
    case RunKind::Greedy: return "greedy";
  }
  return "?";
}

RunKind parse_run_kind(std::string_view name) {
  if (name == "simulate") return RunKind::Simulate;
  if (name == "reconstruct") return RunKind::Reconstruct;
  if (name == "greedy") return RunKind::Greedy;
  throw ConfigError("unknown run kind '" + std::string(name) + "'");
}

fs::path bundled_dataset_path() { return fs::path(GLT_BUNDLED_DATASET); }

bool ExperimentConfig::uses_dataset() const {
  return std::any_of(potentials.begin(), potentials.end(),
                     [](const PotentialEntry& p) { return p.source == TargetSource::Dataset; });
}

void ExperimentConfig::validate() const {
  sampler.validate();
  hardcore.validate();
  if (pair && (!std::isfinite(pair->theta) || !(pair->cap > 0.0)))
    throw InvalidParameter("pair potential needs a finite theta and a positive cap");
  for (std::size_t i = 0; i < potentials.size(); ++i) {
    const auto& p = potentials[i];
    const std::string where = "potential." + std::to_string(i + 1);
    if (!std::isfinite(p.theta)) throw InvalidParameter(where + ": theta must be finite");
    if (arity(p.kind) != 1) throw ConfigError(where + ": reconstructing potentials need a cell characteristic");
    const bool histogram_target = p.source == TargetSource::File || p.source == TargetSource::ReferenceNof;
    if (p.functional == Functional::Discrepancy && p.source == TargetSource::Value)
      throw ConfigError(where + ": dsc needs a histogram target");
    if (p.functional != Functional::Discrepancy && histogram_target)
      throw ConfigError(where + ": mean and variance take s0 or target = dataset");
    if (p.source == TargetSource::ReferenceNof && p.kind != CharacteristicKind::Nof)
      throw ConfigError(where + ": reference_nof is a histogram of nof");
    if (p.source == TargetSource::File && !fs::exists(p.target_file))
      throw ConfigError(where + ": target file " + p.target_file.string() + " does not exist");
    if (!p.bins.empty()) (void)parse_breaks(p.bins);
  }
  if (run == RunKind::Reconstruct || run == RunKind::Greedy) {
    if (potentials.empty()) throw ConfigError(std::string(to_string(run)) + " needs a reconstructing potential");
  }
  if (run == RunKind::Reconstruct) stop.validate();
  if (run == RunKind::Greedy) {
    if (greedy_cells < 2) throw InvalidParameter("greedy needs at least two cells");
    if (greedy.quiet_limit == 0) throw InvalidParameter("greedy quiet limit must be positive");
  }
  if (uses_dataset()) {
    const fs::path d = dataset.empty() ? bundled_dataset_path() : dataset;
    if (!fs::exists(d)) throw ConfigError("dataset " + d.string() + " does not exist");
  }
  if (!initial_file.empty() && !fs::exists(initial_file))
    throw ConfigError("initial configuration " + initial_file.string() + " does not exist");
  if (log_every == 0) throw InvalidParameter("log_every must be positive");
}

// ---------------------------------------------------------------------------
// Text format

namespace {

std::string label(double v) { return std::to_string(static_cast<long long>(v)); }

std::string format_double(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return label(v);
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(key + ": '" + s + "' is not a number");
  return v;
}

std::uint64_t parse_count(const std::string& s, const std::string& key) {
  const double v = parse_double(s, key);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19)
    throw ConfigError(key + ": '" + s + "' is not a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

fs::path resolve(const fs::path& base, const std::string& value) {
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

using Keys = std::set<std::string>;

const Keys kSections = {"experiment", "sampler", "hardcore", "pair", "initial", "data", "output"};

void check_keys(const ptree& section, const std::string& name, const Keys& allowed) {
  for (const auto& [key, value] : section) {
    if (!allowed.contains(key)) throw ConfigError("[" + name + "]: unknown key '" + key + "'");
    if (!value.empty()) throw ConfigError("[" + name + "]: nested values are not supported");
  }
}

std::string source_token(const PotentialEntry& p) {
  switch (p.source) {
    case TargetSource::Value: return "value";
    case TargetSource::Dataset: return "dataset";
    case TargetSource::File: return "file:" + p.target_file.string();
    case TargetSource::ReferenceNof: return "reference_nof";
  }
  return "";
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const fs::path& base_dir) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  ptree tree;
  try {
    std::istringstream ini(text);
    boost::property_tree::read_ini(ini, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  ExperimentConfig c;
  std::map<int, const ptree*> potential_sections;
  std::set<std::string> run_sections;
  std::optional<RunKind> declared;

  // The INI reader drops sections without keys; a bare run section still
  // selects the run kind.
  {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      const auto first = line.find_first_not_of(" \t");
      const auto last = line.find_last_not_of(" \t\r");
      if (first == std::string::npos || line[first] != '[' || line[last] != ']') continue;
      const std::string name = line.substr(first + 1, last - first - 1);
      if (name == "simulate" || name == "reconstruct" || name == "greedy") run_sections.insert(name);
      else if (!kSections.contains(name) && name.rfind("potential.", 0) != 0)
        throw ConfigError("unknown section [" + name + "]");
    }
  }

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config: key '" + section + "' outside a section");
    auto get = [&](const std::string& key) { return body.get<std::string>(key); };
    auto has = [&](const std::string& key) { return body.count(key) > 0; };
    const std::string where = "[" + section + "]";

    if (section == "experiment") {
      check_keys(body, section, {"name", "preset", "run", "seed"});
      if (has("name")) c.name = get("name");
      if (has("preset")) c.preset = get("preset");
      if (has("run")) declared = parse_run_kind(get("run"));
      if (has("seed")) c.sampler.seed = parse_count(get("seed"), "seed");
    } else if (section == "sampler") {
      check_keys(body, section, {"z", "sigma", "r0", "reanchor_every"});
      if (has("z")) c.sampler.z = parse_double(get("z"), "z");
      if (has("sigma")) c.sampler.sigma = parse_double(get("sigma"), "sigma");
      if (has("r0")) c.sampler.r0 = parse_double(get("r0"), "r0");
      if (has("reanchor_every")) c.sampler.reanchor_every = parse_count(get("reanchor_every"), "reanchor_every");
    } else if (section == "hardcore") {
      check_keys(body, section, {"alpha", "beta", "shape_bound"});
      if (has("alpha")) c.hardcore.alpha = parse_double(get("alpha"), "alpha");
      if (has("beta")) c.hardcore.beta = parse_double(get("beta"), "beta");
      if (has("shape_bound")) c.hardcore.shape_bound = parse_double(get("shape_bound"), "shape_bound");
    } else if (section == "pair") {
      check_keys(body, section, {"theta", "cap"});
      PairPotentialSpec pair;
      if (!has("theta")) throw ConfigError(where + ": theta is required");
      pair.theta = parse_double(get("theta"), "theta");
      if (has("cap")) pair.cap = parse_double(get("cap"), "cap");
      c.pair = pair;
    } else if (section.rfind("potential.", 0) == 0) {
      const std::string index = section.substr(10);
      const int k = static_cast<int>(parse_count(index, where));
      if (k < 1 || std::to_string(k) != index) throw ConfigError(where + ": expected potential.1, potential.2, ...");
      potential_sections[k] = &body;
    } else if (section == "simulate") {
      check_keys(body, section, {"steps"});
      run_sections.insert(section);
      if (has("steps")) c.steps = parse_count(get("steps"), "steps");
    } else if (section == "reconstruct") {
      check_keys(body, section, {"delta", "t", "max_steps"});
      run_sections.insert(section);
      if (has("delta")) c.stop.delta = parse_double(get("delta"), "delta");
      if (has("t")) c.stop.t = parse_count(get("t"), "t");
      if (has("max_steps")) c.stop.max_steps = parse_count(get("max_steps"), "max_steps");
    } else if (section == "greedy") {
      check_keys(body, section, {"cells", "quiet", "budget", "max_iterations"});
      run_sections.insert(section);
      if (has("cells")) c.greedy_cells = parse_count(get("cells"), "cells");
      if (has("quiet")) c.greedy.quiet_limit = parse_count(get("quiet"), "quiet");
      if (has("budget")) c.greedy.proposal_budget = parse_count(get("budget"), "budget");
      if (has("max_iterations")) c.greedy.max_iterations = parse_count(get("max_iterations"), "max_iterations");
    } else if (section == "initial") {
      check_keys(body, section, {"cells", "file"});
      if (has("cells")) c.initial_cells = parse_count(get("cells"), "initial cells");
      if (has("file")) c.initial_file = resolve(base_dir, get("file"));
    } else if (section == "data") {
      check_keys(body, section, {"dataset"});
      if (has("dataset")) c.dataset = resolve(base_dir, get("dataset"));
    } else if (section == "output") {
      check_keys(body, section, {"dir", "log_every"});
      if (has("dir")) c.output_dir = resolve(base_dir, get("dir"));
      if (has("log_every")) c.log_every = parse_count(get("log_every"), "log_every");
    } else {
      throw ConfigError("unknown section [" + section + "]");
    }
  }

  int expected = 1;
  for (const auto& [k, body] : potential_sections) {
    const std::string name = "potential." + std::to_string(k);
    if (k != expected++) throw ConfigError("[" + name + "]: potential sections must be numbered 1, 2, ...");
    check_keys(*body, name, {"kind", "functional", "theta", "s0", "target", "bins"});
    PotentialEntry p;
    const auto kind = body->get_optional<std::string>("kind");
    const auto functional = body->get_optional<std::string>("functional");
    const auto theta = body->get_optional<std::string>("theta");
    if (!kind || !functional || !theta) throw ConfigError("[" + name + "]: kind, functional and theta are required");
    p.kind = parse_characteristic(*kind);
    p.functional = parse_functional(*functional);
    p.theta = parse_double(*theta, name + ".theta");
    const auto s0 = body->get_optional<std::string>("s0");
    const auto target = body->get_optional<std::string>("target");
    if (s0 && target) throw ConfigError("[" + name + "]: give either s0 or target");
    if (s0) {
      p.source = TargetSource::Value;
      p.s0 = parse_double(*s0, name + ".s0");
    } else if (!target || *target == "dataset") {
      p.source = TargetSource::Dataset;
    } else if (*target == "reference_nof") {
      p.source = TargetSource::ReferenceNof;
    } else if (target->rfind("file:", 0) == 0) {
      p.source = TargetSource::File;
      p.target_file = resolve(base_dir, target->substr(5));
    } else {
      throw ConfigError("[" + name + "]: unknown target '" + *target + "'");
    }
    if (auto bins = body->get_optional<std::string>("bins")) p.bins = *bins;
    c.potentials.push_back(std::move(p));
  }

  if (!declared) {
    if (run_sections.size() != 1)
      throw ConfigError("config must name exactly one run kind ([experiment] run or one run section)");
    declared = parse_run_kind(*run_sections.begin());
  }
  for (const auto& s : run_sections) {
    if (s != to_string(*declared))
      throw ConfigError("config declares run = " + std::string(to_string(*declared)) + " but has a [" + s + "] section");
  }
  c.run = *declared;
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  out << "[experiment]\nname = " << c.name << '\n';
  if (!c.preset.empty()) out << "preset = " << c.preset << '\n';
  out << "run = " << to_string(c.run) << "\nseed = " << c.sampler.seed << "\n\n";
  out << "[sampler]\nz = " << format_double(c.sampler.z) << "\nsigma = " << format_double(c.sampler.sigma)
      << "\nr0 = " << format_double(c.sampler.r0) << "\nreanchor_every = " << c.sampler.reanchor_every << "\n\n";
  if (c.hardcore.enabled()) {
    out << "[hardcore]\n";
    if (c.hardcore.alpha) out << "alpha = " << format_double(*c.hardcore.alpha) << '\n';
    if (c.hardcore.beta) out << "beta = " << format_double(*c.hardcore.beta) << '\n';
    if (c.hardcore.shape_bound) out << "shape_bound = " << format_double(*c.hardcore.shape_bound) << '\n';
    out << '\n';
  }
  if (c.pair) {
    out << "[pair]\ntheta = " << format_double(c.pair->theta) << "\ncap = " << format_double(c.pair->cap) << "\n\n";
  }
  for (std::size_t i = 0; i < c.potentials.size(); ++i) {
    const auto& p = c.potentials[i];
    out << "[potential." << i + 1 << "]\nkind = " << to_string(p.kind) << "\nfunctional = " << to_string(p.functional)
        << "\ntheta = " << format_double(p.theta) << '\n';
    if (p.source == TargetSource::Value) {
      out << "s0 = " << format_double(p.s0) << '\n';
    } else {
      out << "target = " << source_token(p) << '\n';
    }
    if (!p.bins.empty()) out << "bins = " << p.bins << '\n';
    out << '\n';
  }
  switch (c.run) {
    case RunKind::Simulate: out << "[simulate]\nsteps = " << c.steps << "\n\n"; break;
    case RunKind::Reconstruct:
      out << "[reconstruct]\ndelta = " << format_double(c.stop.delta) << "\nt = " << c.stop.t
          << "\nmax_steps = " << c.stop.max_steps << "\n\n";
      break;
    case RunKind::Greedy:
      out << "[greedy]\ncells = " << c.greedy_cells << "\nquiet = " << c.greedy.quiet_limit
          << "\nbudget = " << c.greedy.proposal_budget << "\nmax_iterations = " << c.greedy.max_iterations << "\n\n";
      break;
  }
  if (c.initial_cells || !c.initial_file.empty()) {
    out << "[initial]\n";
    if (c.initial_cells) out << "cells = " << *c.initial_cells << '\n';
    if (!c.initial_file.empty()) out << "file = " << c.initial_file.string() << '\n';
    out << '\n';
  }
  if (!c.dataset.empty()) out << "[data]\ndataset = " << c.dataset.string() << "\n\n";
  out << "[output]\n";
  if (!c.output_dir.empty()) out << "dir = " << c.output_dir.string() << '\n';
  out << "log_every = " << c.log_every << '\n';
}

// ---------------------------------------------------------------------------
// Presets

namespace {

PotentialEntry dsc_on(CharacteristicKind kind, double theta) {
  PotentialEntry p;
  p.kind = kind;
  p.functional = Functional::Discrepancy;
  p.theta = theta;
  p.source = TargetSource::Dataset;
  return p;
}

ExperimentConfig base(std::string name, RunKind run) {
  ExperimentConfig c;
  c.preset = name;
  c.name = std::move(name);
  c.run = run;
  return c;
}

ExperimentConfig rt1(const std::string& name, double theta2) {
  auto c = base(name, RunKind::Simulate);
  c.hardcore.alpha = 0.02;
  c.hardcore.beta = 0.095;
  c.pair = PairPotentialSpec{theta2, 100.0};
  c.steps = 3000000;
  return c;
}

ExperimentConfig rt2(const std::string& name, double theta2) {
  auto c = rt1(name, theta2);
  c.potentials.push_back(dsc_on(CharacteristicKind::Nof, 100000));
  return c;
}

ExperimentConfig rt6(double theta) {
  auto c = base("rt6_" + label(theta), RunKind::Reconstruct);
  c.potentials.push_back(dsc_on(CharacteristicKind::Nof, theta));
  c.stop = {0.002, 500000, 10000000};
  return c;
}

ExperimentConfig rt7(double theta_nof, double theta_vol) {
  auto c = base("rt7_" + label(theta_nof) + "_" + label(theta_vol), RunKind::Reconstruct);
  c.potentials.push_back(dsc_on(CharacteristicKind::Nof, theta_nof));
  c.potentials.push_back(dsc_on(CharacteristicKind::Volume, theta_vol));
  c.stop = {0.002, 500000, 10000000};
  return c;
}

ExperimentConfig mhbdm(const std::string& name, CharacteristicKind kind, double theta) {
  auto c = base(name, RunKind::Reconstruct);
  c.potentials.push_back(dsc_on(kind, theta));
  c.stop = {0.01, 100000, 10000000};
  return c;
}

ExperimentConfig greedy(const std::string& name, CharacteristicKind kind) {
  auto c = base(name, RunKind::Greedy);
  c.potentials.push_back(dsc_on(kind, 1000));
  c.greedy_cells = 1057;
  c.greedy.quiet_limit = 50000;
  return c;
}

// Cells of the nof x volume theta grid.
constexpr std::pair<double, double> kRt7Grid[] = {
    {100, 1000},    {100, 10000},    {100, 100000},    {1000, 1000},     {1000, 10000},
    {1000, 100000}, {1000, 1000000}, {10000, 10000},   {10000, 100000},  {10000, 1000000},
    {100000, 100000}, {100000, 1000000},
};

struct PresetEntry {
  PresetInfo info;
  ExperimentConfig config;
};

const std::vector<PresetEntry>& presets() {
  static const std::vector<PresetEntry> table = [] {
    std::vector<PresetEntry> t;
    auto add = [&](ExperimentConfig c, std::string description) {
      t.push_back({{c.name, std::move(description)}, std::move(c)});
    };
    {
      auto c = base("null", RunKind::Simulate);
      c.sampler.z = 20;
      c.steps = 1100000;
      add(c, "E = 0 with z = 20; cardinality is Poisson(20)");
    }
    add(rt1("rt1_regular", 1), "hardcore alpha 0.02, beta 0.095 with NVR pair theta2 = +1, 3e6 steps");
    add(rt1("rt1_irregular", -1), "hardcore alpha 0.02, beta 0.095 with NVR pair theta2 = -1, 3e6 steps");
    add(rt2("rt2_regular", 1), "rt1_regular plus dsc on nof, theta 1e5, data target");
    add(rt2("rt2_irregular", -1), "rt1_irregular plus dsc on nof, theta 1e5, data target");
    for (double theta : {10.0, 100.0, 1e3, 1e4, 1e5, 1e6})
      add(rt6(theta), "reconstruct nof histogram, theta " + label(theta) + ", stop (0.002, 5e5)");
    for (auto [a, b] : kRt7Grid)
      add(rt7(a, b), "reconstruct nof and volume histograms, thetas " + label(a) + " and " +
                         label(b) + ", stop (0.002, 5e5)");
    add(greedy("greedy_vol", CharacteristicKind::Volume), "greedy, dsc on volume, M 1057, L 5e4");
    add(mhbdm("mhbdm_vol", CharacteristicKind::Volume, 1000), "MHBDM, dsc on volume, theta 1e3, stop (0.01, 1e5)");
    add(greedy("greedy_nof", CharacteristicKind::Nof), "greedy, dsc on nof, M 1057, L 5e4");
    add(mhbdm("mhbdm_nof_1000", CharacteristicKind::Nof, 1000), "MHBDM, dsc on nof, theta 1e3, stop (0.01, 1e5)");
    add(mhbdm("mhbdm_nof_10000", CharacteristicKind::Nof, 10000), "MHBDM, dsc on nof, theta 1e4, stop (0.01, 1e5)");
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<PresetInfo>& preset_list() {
  static const std::vector<PresetInfo> list = [] {
    std::vector<PresetInfo> l;
    for (const auto& e : presets()) l.push_back(e.info);
    return l;
  }();
  return list;
}

ExperimentConfig preset(std::string_view name) {
  static const std::map<std::string, std::string, std::less<>> aliases = {
      {"rt1", "rt1_regular"}, {"rt2", "rt2_regular"}, {"rt6", "rt6_1000"}, {"rt7", "rt7_1000_10000"}};
  std::string resolved(name);
  if (auto it = aliases.find(name); it != aliases.end()) resolved = it->second;
  for (const auto& e : presets()) {
    if (e.info.name == resolved) return e.config;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Model and run

DataReference load_data_reference(const fs::path& dataset, double r0) {
  auto [config, scale] = normalize(read_dataset(dataset), r0);
  auto tess = build_tessellation(config);
  if (tess.cells.size() < 2) throw InsufficientData("dataset tessellates into fewer than two cells");
  return {std::move(config), scale, std::move(tess)};
}

namespace {

Histogram data_histogram(CharacteristicKind kind, const std::string& bins, const DataReference& data) {
  const auto values = extract(kind, data.tessellation);
  return histogram(values, bins.empty() ? default_breaks(kind, values) : parse_breaks(bins));
}

}  // namespace

EnergyModel materialize_model(const ExperimentConfig& c, const DataReference* data) {
  EnergyModel m;
  m.hardcore = c.hardcore;
  m.pair = c.pair;
  for (const auto& p : c.potentials) {
    ReconstructingPotentialSpec spec;
    spec.kind = p.kind;
    spec.functional = p.functional;
    spec.theta = p.theta;
    switch (p.source) {
      case TargetSource::Value: spec.target_value = p.s0; break;
      case TargetSource::Dataset: {
        if (!data) throw ConfigError("potential on " + std::string(to_string(p.kind)) + " needs the dataset");
        const auto values = extract(p.kind, data->tessellation);
        if (p.functional == Functional::Mean) spec.target_value = sample_mean(values);
        else if (p.functional == Functional::Variance) spec.target_value = sample_variance(values);
        else spec.target = data_histogram(p.kind, p.bins, *data);
        break;
      }
      case TargetSource::File: {
        std::ifstream in(p.target_file);
        if (!in) throw ConfigError("cannot open target " + p.target_file.string());
        spec.target = read_histogram_csv(in);
        if (!p.bins.empty() && spec.target.breaks != parse_breaks(p.bins))
          throw BinMismatch("bins of " + p.target_file.string() + " differ from the configured bins");
        break;
      }
      case TargetSource::ReferenceNof: spec.target = reference_nof_histogram(); break;
    }
    m.reconstructing.push_back(std::move(spec));
  }
  m.validate();
  return m;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

nlohmann::json moments(const MomentSummary& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"count", s.count}};
}

nlohmann::json stats_json(const TessellationStats& s) {
  return {{"cells", s.cells},           {"neighbor_pairs", s.neighbor_pairs}, {"radius", moments(s.radius)},
          {"nof", moments(s.nof)},      {"volume", moments(s.volume)},        {"vol_diff", moments(s.vol_diff)},
          {"nvr", moments(s.nvr)}};
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

std::string histogram_text(const Histogram& h) {
  std::ostringstream out;
  write_histogram_csv(out, h);
  return out.str();
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir.empty() ? fs::path("runs") / config.name : config.output_dir;
  fs::create_directories(dir);

  const fs::path dataset = config.dataset.empty() ? bundled_dataset_path() : config.dataset;
  std::optional<DataReference> data;
  if (config.uses_dataset()) data = load_data_reference(dataset, config.sampler.r0);

  auto model = std::make_shared<const EnergyModel>(materialize_model(config, data ? &*data : nullptr));
  {
    std::ostringstream ini;
    write_config(ini, config);
    write_file(dir / "config.ini", ini.str());
  }

  Rng init_rng = Rng(config.sampler.seed).split(1);
  Configuration initial;
  if (!config.initial_file.empty()) {
    initial = read_configuration_file(config.initial_file);
  } else if (config.run == RunKind::Greedy) {
    initial = initial_nonempty(*model, config.sampler, config.greedy_cells, init_rng);
  } else {
    initial = initial_admissible(*model, config.sampler, config.initial_cells, init_rng);
  }

  const RunOptions options{config.log_every};
  RunResult result;
  switch (config.run) {
    case RunKind::Simulate:
      result = simulate(model, config.sampler, config.steps, std::move(initial), options);
      break;
    case RunKind::Reconstruct:
      result = reconstruct(model, config.sampler, config.stop, std::move(initial), options);
      break;
    case RunKind::Greedy:
      result = greedy_reconstruct(model, config.sampler, config.greedy, std::move(initial), options);
      break;
  }
  const auto& d = result.diagnostics;

  {
    std::ostringstream out;
    write_trace_csv(out, d.trace);
    write_file(dir / "trace.csv", out.str());
  }
  {
    std::ostringstream out;
    out.precision(17);
    out << "step";
    for (std::size_t i = 1; i <= model->reconstructing.size(); ++i) out << ",statistic_" << i;
    out << ",n_cells\n";
    for (const auto& row : d.trace) {
      out << row.step;
      for (double v : row.energy.reconstructing_values) out << ',' << v * v;
      out << ',' << row.n_cells << '\n';
    }
    write_file(dir / "potential_trace.csv", out.str());
  }
  {
    std::ostringstream out;
    write_acceptance_csv(out, d.counts);
    write_file(dir / "acceptance.csv", out.str());
  }
  {
    std::ostringstream out;
    write_configuration_csv(out, result.configuration);
    write_file(dir / "configuration.csv", out.str());
  }

  const auto tess = build_tessellation(result.configuration);
  {
    std::ostringstream out;
    write_geometry(out, tess);
    write_file(dir / "geometry.txt", out.str());
  }

  nlohmann::json summary;
  summary["name"] = config.name;
  summary["preset"] = config.preset;
  summary["run"] = std::string(to_string(config.run));
  summary["seed"] = config.sampler.seed;
  summary["steps"] = d.steps;
  summary["termination"] = std::string(to_string(d.termination));
  summary["generators"] = result.configuration.size();
  summary["cells"] = tess.cells.size();
  summary["dropped_generators"] = d.dropped_generators;
  summary["runtime_seconds"] = d.seconds;

  nlohmann::json energy;
  energy["total"] = finite_or_null(result.energy.total);
  energy["hardcore_violations"] = result.energy.hardcore_violations;
  energy["pair_term"] = result.energy.pair_term;
  energy["pair_sum"] = result.energy.pair_sum;
  nlohmann::json potentials = nlohmann::json::array();
  for (std::size_t i = 0; i < model->reconstructing.size(); ++i) {
    const auto& spec = model->reconstructing[i];
    nlohmann::json p = {{"kind", std::string(to_string(spec.kind))},
                        {"functional", std::string(to_string(spec.functional))},
                        {"theta", spec.theta}};
    if (i < result.energy.reconstructing_values.size()) {
      const double v = result.energy.reconstructing_values[i];
      p["value"] = finite_or_null(v);
      p["statistic"] = finite_or_null(v * v);
      p["term"] = finite_or_null(result.energy.reconstructing_terms[i]);
    }
    potentials.push_back(p);
    if (spec.functional == Functional::Discrepancy && !tess.cells.empty()) {
      const auto final_hist = histogram(extract(spec.kind, tess), spec.target.breaks);
      const std::string stem = "potential_" + std::to_string(i + 1);
      write_file(dir / (stem + "_target.csv"), histogram_text(spec.target));
      write_file(dir / (stem + "_final.csv"), histogram_text(final_hist));
    }
  }
  energy["potentials"] = potentials;
  summary["energy"] = energy;

  nlohmann::json acceptance;
  constexpr const char* kinds[] = {"birth", "death", "move"};
  for (int k = 0; k < 3; ++k) {
    acceptance[kinds[k]] = {{"proposed", d.counts.proposed[k]}, {"accepted", d.counts.accepted[k]}};
  }
  summary["acceptance"] = acceptance;
  summary["final_statistics"] = stats_json(tessellation_stats(tess));

  // nof and volume histograms of the result, binned like the data when present.
  nlohmann::json discrepancies = nlohmann::json::object();
  for (auto kind : {CharacteristicKind::Nof, CharacteristicKind::Volume}) {
    const auto values = extract(kind, tess);
    if (values.empty()) continue;
    const std::string stem(to_string(kind));
    if (data) {
      const auto target = data_histogram(kind, "", *data);
      const auto h = histogram(values, target.breaks);
      write_file(dir / ("histogram_" + stem + ".csv"), histogram_text(h));
      write_file(dir / ("data_histogram_" + stem + ".csv"), histogram_text(target));
      discrepancies[stem] = discrepancy(h, target);
    } else {
      write_file(dir / ("histogram_" + stem + ".csv"), histogram_text(histogram(values, default_breaks(kind, values))));
    }
  }
  if (data) {
    summary["data"] = {{"dataset", dataset.filename().string()},
                       {"cells", data->tessellation.cells.size()},
                       {"max_normalized_radius", data->scale.max_normalized_radius},
                       {"statistics", stats_json(tessellation_stats(data->tessellation))},
                       // The measured grains fill a bounded cuboid; targets here come from a
                       // periodic recomputation, so cells near the cuboid faces differ.
                       {"boundary_affected", true},
                       {"boundary_affected_statistics", {"nof", "volume", "vol_diff", "nvr"}}};
    summary["data_discrepancies"] = discrepancies;
  }

  write_file(dir / "summary.json", summary.dump(2) + "\n");
  return {std::move(result), std::move(summary)};
}

std::string summary_without_runtime(const nlohmann::json& summary) {
  auto copy = summary;
  copy.erase("runtime_seconds");
  return copy.dump(2);
}

}  // namespace glt
