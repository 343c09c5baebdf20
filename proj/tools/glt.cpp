#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "glt/dataset.hpp"
#include "glt/errors.hpp"
#include "glt/experiment.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct RunFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> steps;
  std::string out;
  unsigned chains = 1;
  std::optional<std::uint64_t> log_every;
  std::string dataset;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "experiment config file");
  cmd->add_option("--preset", f.preset, "named preset (see `presets list`)");
  cmd->add_option("--seed", f.seed, "chain seed");
  cmd->add_option("--steps", f.steps, "steps (simulate) or step cap (reconstruct, greedy)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--chains", f.chains, "independent chains with derived seeds")->check(CLI::PositiveNumber);
  cmd->add_option("--log-every", f.log_every, "trace interval in steps");
  cmd->add_option("--dataset", f.dataset, "generator dataset CSV for data targets");
}

glt::ExperimentConfig resolve(const RunFlags& f, glt::RunKind verb) {
  if (f.config.empty() == f.preset.empty()) throw glt::ConfigError("give exactly one of --config and --preset");
  glt::ExperimentConfig c = f.config.empty() ? glt::preset(f.preset) : glt::load_config(f.config);
  if (c.run != verb) {
    throw glt::ConfigError("the config describes a " + std::string(glt::to_string(c.run)) + " run, not " +
                           std::string(glt::to_string(verb)));
  }
  if (f.seed) c.sampler.seed = *f.seed;
  if (f.steps) {
    switch (verb) {
      case glt::RunKind::Simulate: c.steps = *f.steps; break;
      case glt::RunKind::Reconstruct: c.stop.max_steps = *f.steps; break;
      case glt::RunKind::Greedy: c.greedy.max_iterations = *f.steps; break;
    }
  }
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.log_every) c.log_every = *f.log_every;
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (c.output_dir.empty()) c.output_dir = fs::path("runs") / c.name;
  return c;
}

int run_chains(const RunFlags& f, glt::RunKind verb) {
  const auto base = resolve(f, verb);
  if (f.chains == 1) {
    const auto outcome = glt::run_experiment(base);
    std::cout << outcome.summary.dump(2) << '\n';
    return 0;
  }
  std::vector<glt::ExperimentConfig> configs;
  for (unsigned k = 0; k < f.chains; ++k) {
    auto c = base;
    c.sampler.seed = glt::Rng::child_seed(base.sampler.seed, k);
    c.output_dir = base.output_dir / ("chain_" + std::to_string(k));
    configs.push_back(std::move(c));
  }
  std::vector<std::exception_ptr> errors(f.chains);
  std::vector<nlohmann::json> summaries(f.chains);
  std::vector<std::thread> threads;
  for (unsigned k = 0; k < f.chains; ++k) {
    threads.emplace_back([&, k] {
      try {
        summaries[k] = glt::run_experiment(configs[k]).summary;
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::cout << nlohmann::json(summaries).dump(2) << '\n';
  return 0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw glt::ConfigError("cannot write " + path.string());
  out << text;
}

nlohmann::json moments(const glt::MomentSummary& s) { return {{"mean", s.mean}, {"sd", s.sd}, {"count", s.count}}; }

nlohmann::json stats_json(const glt::TessellationStats& s) {
  return {{"cells", s.cells},      {"neighbor_pairs", s.neighbor_pairs}, {"radius", moments(s.radius)},
          {"nof", moments(s.nof)}, {"volume", moments(s.volume)},        {"vol_diff", moments(s.vol_diff)},
          {"nvr", moments(s.nvr)}};
}

int exit_code(glt::ErrorCategory c) {
  switch (c) {
    case glt::ErrorCategory::Config:
    case glt::ErrorCategory::Data: return 2;
    case glt::ErrorCategory::Initialization: return 3;
    case glt::ErrorCategory::Geometry: return 4;
    case glt::ErrorCategory::Internal: return 1;
  }
  return 1;
}

const char* category_name(glt::ErrorCategory c) {
  switch (c) {
    case glt::ErrorCategory::Config: return "config";
    case glt::ErrorCategory::Data: return "data";
    case glt::ErrorCategory::Initialization: return "initialization";
    case glt::ErrorCategory::Geometry: return "geometry";
    case glt::ErrorCategory::Internal: return "internal";
  }
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gibbs-Laguerre tessellations: simulation and statistical reconstruction"};
  app.require_subcommand(1);

  std::string input, dataset, out, bins_nof, bins_vol;
  double r0 = 0.2;
  auto* tess_cmd = app.add_subcommand("tessellate", "tessellate a configuration or dataset");
  tess_cmd->add_option("--input", input, "configuration CSV (id,x,y,z,radius)");
  tess_cmd->add_option("--dataset", dataset, "generator dataset CSV in micrometres");
  tess_cmd->add_option("--out", out, "output directory")->required();
  tess_cmd->add_option("--r0", r0, "largest admissible normalized radius");

  RunFlags sim, rec, gre;
  auto* sim_cmd = app.add_subcommand("simulate", "run the birth-death-move sampler for S steps");
  add_run_flags(sim_cmd, sim);
  auto* rec_cmd = app.add_subcommand("reconstruct", "reconstruct until the energy window is flat");
  add_run_flags(rec_cmd, rec);
  auto* gre_cmd = app.add_subcommand("greedy", "greedy reconstruction with a fixed number of cells");
  add_run_flags(gre_cmd, gre);

  auto* tgt_cmd = app.add_subcommand("targets", "target histograms and summary statistics of a dataset");
  tgt_cmd->add_option("--dataset", dataset, "generator dataset CSV (default: bundled sample)");
  tgt_cmd->add_option("--out", out, "output directory")->required();
  tgt_cmd->add_option("--bins-nof", bins_nof, "nof bins, e.g. integer:4:40");
  tgt_cmd->add_option("--bins-vol", bins_vol, "volume bins, e.g. uniform:0:0.005:20");
  tgt_cmd->add_option("--r0", r0, "largest admissible normalized radius");

  auto* presets_cmd = app.add_subcommand("presets", "experiment presets");
  presets_cmd->require_subcommand(1);
  auto* list_cmd = presets_cmd->add_subcommand("list", "list preset names");
  std::string show_name;
  auto* show_cmd = presets_cmd->add_subcommand("show", "print a preset as a config file");
  show_cmd->add_option("name", show_name)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim_cmd) return run_chains(sim, glt::RunKind::Simulate);
    if (*rec_cmd) return run_chains(rec, glt::RunKind::Reconstruct);
    if (*gre_cmd) return run_chains(gre, glt::RunKind::Greedy);

    if (*tess_cmd) {
      if (input.empty() == dataset.empty()) throw glt::ConfigError("give exactly one of --input and --dataset");
      const auto config = input.empty() ? glt::normalize(glt::read_dataset(dataset), r0).first
                                        : glt::read_configuration_file(input);
      fs::create_directories(out);
      const auto tess = glt::build_tessellation(config);
      std::ofstream geo(fs::path(out) / "geometry.txt");
      glt::write_geometry(geo, tess);
      nlohmann::json summary = stats_json(glt::tessellation_stats(tess));
      summary["excluded"] = tess.excluded_ids.size();
      write_text(fs::path(out) / "summary.json", summary.dump(2) + "\n");
      std::cout << summary.dump(2) << '\n';
      return 0;
    }

    if (*tgt_cmd) {
      const fs::path path = dataset.empty() ? glt::bundled_dataset_path() : fs::path(dataset);
      const auto [config, scale] = glt::normalize(glt::read_dataset(path), r0);
      glt::BinSpec bins;
      if (!bins_nof.empty()) bins.nof = glt::parse_breaks(bins_nof);
      if (!bins_vol.empty()) bins.volume = glt::parse_breaks(bins_vol);
      const auto t = glt::target_histograms(config, bins);
      fs::create_directories(out);
      std::ofstream hn(fs::path(out) / "target_nof.csv");
      glt::write_histogram_csv(hn, t.nof);
      std::ofstream hv(fs::path(out) / "target_volume.csv");
      glt::write_histogram_csv(hv, t.volume);
      glt::write_configuration_file(fs::path(out) / "configuration.csv", config);
      nlohmann::json summary = stats_json(t.stats);
      summary["scale"] = {{"axis", scale.axis_scale},
                          {"radius", scale.radius_scale},
                          {"max_normalized_radius", scale.max_normalized_radius}};
      summary["boundary_affected"] = true;
      write_text(fs::path(out) / "summary.json", summary.dump(2) + "\n");
      std::cout << summary.dump(2) << '\n';
      return 0;
    }

    if (*list_cmd) {
      for (const auto& p : glt::preset_list()) std::cout << p.name << "\t" << p.description << '\n';
      return 0;
    }
    if (*show_cmd) {
      glt::write_config(std::cout, glt::preset(show_name));
      return 0;
    }
  } catch (const glt::Error& e) {
    std::cerr << "error (" << category_name(e.category()) << "): " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
