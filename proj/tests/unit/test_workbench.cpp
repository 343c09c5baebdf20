#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "glt/dataset.hpp"
#include "glt/errors.hpp"
#include "glt/experiment.hpp"
#include "glt/rng.hpp"
#include "oracles.hpp"

using namespace glt;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("glt_workbench_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

GeneratorDataset measured_box(std::vector<GeneratorRecord> records) {
  GeneratorDataset d;
  d.extents = {486.0, 529.0, 685.0};
  d.records = std::move(records);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

ExperimentConfig small_reconstruction(const fs::path& out) {
  auto c = preset("rt6_1000");
  c.initial_cells = 300;
  c.stop.max_steps = 400;
  c.log_every = 100;
  c.sampler.seed = 21;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("normalization maps the measured box to the unit cube") {
  auto data = measured_box({{243.0, 264.5, 342.5, 10.0}, {0.0, 0.0, 0.0, 70.0}});
  const auto [config, report] = normalize(data);
  const auto& mid = config.by_index(0);
  CHECK(mid.position.x == 0.5);
  CHECK(mid.position.y == 0.5);
  CHECK(mid.position.z == 0.5);

  const double side = std::cbrt(486.0 * 529.0 * 685.0);
  CHECK(report.radius_scale == doctest::Approx(1.0 / side).epsilon(1e-15));
  CHECK(report.axis_scale[1] == doctest::Approx(1.0 / 529.0).epsilon(1e-15));
  CHECK(config.by_index(1).radius == doctest::Approx(70.0 / side).epsilon(1e-15));
  // 70 um is quoted as "below 0.124"; the exact value is 0.12488.
  CHECK(report.max_normalized_radius == doctest::Approx(0.124).epsilon(1e-2));
  CHECK(report.max_normalized_radius == doctest::Approx(0.12488).epsilon(1e-4));
}

TEST_CASE("dataset validation") {
  auto flat = measured_box({{1.0, 1.0, 1.0, 5.0}});
  flat.extents[2] = 0.0;
  CHECK_THROWS_AS(flat.validate(), DatasetError);
  CHECK_THROWS_AS(normalize(flat), DatasetError);

  CHECK_THROWS_AS(measured_box({{500.0, 1.0, 1.0, 5.0}}).validate(), DatasetError);
  CHECK_THROWS_AS(measured_box({{1.0, 1.0, 1.0, 0.0}}).validate(), DatasetError);
  CHECK_NOTHROW(measured_box({{486.0, 529.0, 685.0, 5.0}}).validate());

  const auto big = measured_box({{1.0, 1.0, 1.0, 5.0}, {2.0, 2.0, 2.0, 200.0}});
  try {
    normalize(big);
    FAIL("expected RadiusExceedsR0");
  } catch (const RadiusExceedsR0& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
  CHECK_NOTHROW(normalize(big, 0.5));
}

TEST_CASE("dataset files round trip") {
  const auto dir = scratch_dir("dataset");
  Rng rng(3);
  GeneratorDataset d = measured_box({});
  for (int i = 0; i < 40; ++i)
    d.records.push_back({rng.uniform() * 486, rng.uniform() * 529, rng.uniform() * 685, 1 + 60 * rng.uniform()});
  write_dataset(dir / "grains.csv", d);
  const auto back = read_dataset(dir / "grains.csv");
  REQUIRE(back.records.size() == d.records.size());
  CHECK(back.extents == d.extents);
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    CHECK(back.records[i].x == d.records[i].x);
    CHECK(back.records[i].radius == d.records[i].radius);
  }

  fs::remove(dir / "grains.csv.meta");
  CHECK_THROWS_AS(read_dataset(dir / "grains.csv"), DatasetError);
  std::ofstream(dir / "bad.csv") << "x,y,z,r\n1,2,3,4\n";
  CHECK_THROWS_AS(read_dataset(dir / "bad.csv"), DatasetError);
}

TEST_CASE("configuration csv round trip is bit exact") {
  Rng rng(4);
  const auto config = testing::random_configuration(rng, 200, 0.2);
  std::stringstream io;
  write_configuration_csv(io, config);
  const auto back = read_configuration_csv(io);
  CHECK(back.sorted_by_id() == config.sorted_by_id());
  CHECK(back.fingerprint() == config.fingerprint());

  std::stringstream bad("id,x,y,z,radius\n0,0.5,0.5,1.5,0.1\n");
  CHECK_THROWS_AS(read_configuration_csv(bad), DatasetError);
}

TEST_CASE("target histograms") {
  const Configuration slabs({MarkedGenerator{0, {0.25, 0.5, 0.5}, 0.1}, MarkedGenerator{1, {0.75, 0.5, 0.5}, 0.1}});
  const auto t = target_histograms(slabs);
  REQUIRE(t.nof.bins() == 1);
  CHECK(t.nof.breaks == std::vector<double>{1.5, 2.5});
  CHECK(t.nof.counts == std::vector<double>{2});
  CHECK(t.volume.total() == 2);
  CHECK(t.stats.cells == 2);
  CHECK(t.stats.neighbor_pairs == 1);
  CHECK(t.stats.nof.mean == 2);
  CHECK(t.stats.volume.mean == doctest::Approx(0.5));

  BinSpec wide;
  wide.nof = integer_breaks(1, 5);
  CHECK(target_histograms(slabs, wide).nof.counts == std::vector<double>{0, 2, 0, 0, 0});

  CHECK_THROWS_AS(target_histograms(Configuration({MarkedGenerator{0, {0.5, 0.5, 0.5}, 0.1}})), InsufficientData);
}

TEST_CASE("summary statistics match direct moments") {
  Rng rng(5);
  const auto tess = build_tessellation(testing::random_configuration(rng, 120, 0.1));
  const auto s = tessellation_stats(tess);
  const auto nof = extract(CharacteristicKind::Nof, tess);
  double sum = 0, sq = 0;
  for (double v : nof) sum += v;
  const double mean = sum / static_cast<double>(nof.size());
  for (double v : nof) sq += (v - mean) * (v - mean);
  CHECK(s.nof.mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(s.nof.sd == doctest::Approx(std::sqrt(sq / static_cast<double>(nof.size() - 1))).epsilon(1e-12));
  CHECK(s.nvr.count == tess.neighbor_pairs.size());
  CHECK(s.cells == tess.cells.size());
}

TEST_CASE("reference nof histogram") {
  const auto h = reference_nof_histogram();
  CHECK(h.breaks.front() == 3.5);
  CHECK(h.breaks.back() == 40.5);
  CHECK(h.total() == doctest::Approx(1057).epsilon(1e-12));
  double m = 0, v = 0;
  for (std::size_t i = 0; i < h.bins(); ++i) m += h.counts[i] * (h.breaks[i] + 0.5);
  m /= h.total();
  for (std::size_t i = 0; i < h.bins(); ++i) v += h.counts[i] * std::pow(h.breaks[i] + 0.5 - m, 2);
  v /= h.total();
  CHECK(m == doctest::Approx(14.1608).epsilon(0.01));
  CHECK(std::sqrt(v) == doctest::Approx(4.8558).epsilon(0.03));
}

TEST_CASE("bin specifications") {
  CHECK(parse_breaks("integer:4:6") == integer_breaks(4, 6));
  CHECK(parse_breaks("uniform:0:1:4") == uniform_breaks(0, 1, 4));
  CHECK(parse_breaks("0,0.5,2") == std::vector<double>{0, 0.5, 2});
  CHECK_THROWS_AS(parse_breaks("uniform:0:1"), ConfigError);
  CHECK_THROWS_AS(parse_breaks("1"), ConfigError);
  CHECK_THROWS_AS(parse_breaks("2,1"), ConfigError);
  CHECK_THROWS_AS(parse_breaks("a,b"), ConfigError);
}

TEST_CASE("config text round trip for every preset") {
  for (const auto& info : preset_list()) {
    const auto c = preset(info.name);
    std::stringstream text;
    write_config(text, c);
    const auto back = parse_config(text);
    std::stringstream again;
    write_config(again, back);
    CHECK_MESSAGE(again.str() == text.str(), info.name);
  }
  CHECK(preset("rt7").name == "rt7_1000_10000");
  CHECK(preset("rt2").name == "rt2_regular");
  CHECK_THROWS_AS(preset("rt9"), ConfigError);
}

TEST_CASE("config parsing errors") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_config(in);
  };
  CHECK(parse("[simulate]\nsteps = 5\n").steps == 5);
  CHECK(parse("[experiment]\nrun = greedy\n[potential.1]\nkind = vol\nfunctional = mean\ntheta = 3\ns0 = 0.001\n").run ==
        RunKind::Greedy);
  CHECK_THROWS_AS(parse("[pair]\ntheta = 1\n"), ConfigError);                       // no run kind
  CHECK(parse("[greedy]\n[potential.1]\nkind = nof\nfunctional = dsc\ntheta = 1\ntarget = reference_nof\n").run ==
        RunKind::Greedy);
  CHECK_THROWS_AS(parse("[simulate]\n[greedy]\n"), ConfigError);
  CHECK_THROWS_AS(parse("[simulate]\nsteps = 1\n[greedy]\nquiet = 1\n"), ConfigError);  // two run kinds
  CHECK_THROWS_AS(parse("[experiment]\nrun = simulate\n[greedy]\nquiet = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[simulate]\nstep = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[simulate]\nsteps = 5.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[simulate]\n[simulations]\n"), ConfigError);
  CHECK_THROWS_AS(parse("[simulate]\nsteps = 1\n[potential.2]\nkind = nof\nfunctional = dsc\ntheta = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[simulate]\nsteps = 1\n[potential.1]\nkind = nof\nfunctional = dsc\ntheta = 1\ns0 = 3\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse("[simulate]\nsteps = 1\n[potential.1]\nkind = nvr\nfunctional = mean\ntheta = 1\ns0 = 3\n"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse("[simulate]\nsteps = 1\n[potential.1]\nkind = nof\nfunctional = dsc\ntheta = 1\ntarget = file:/nonexistent.csv\n"),
      ConfigError);
  CHECK_THROWS_AS(parse("[reconstruct]\n"), ConfigError);  // no reconstructing potential
  CHECK_THROWS_AS(parse("[simulate]\nsteps = 1\n[hardcore]\nalpha = 0.3\nbeta = 0.2\n"), InvalidParameter);
}

TEST_CASE("presets match the parameter table") {
  std::ifstream in(fs::path(GLT_TEST_DATA_DIR) / "presets.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  CHECK(line == "name,run,z,alpha,beta,pair_theta,potentials,steps,delta,t,cells,quiet");
  std::map<std::string, int> seen;
  auto num = [](const std::string& s) { return std::stod(s); };
  while (std::getline(in, line)) {
    const auto f = split(line, ',');
    REQUIRE(f.size() == 12);
    const auto c = preset(f[0]);
    INFO(f[0]);
    seen[f[0]]++;
    CHECK(c.name == f[0]);
    CHECK(to_string(c.run) == f[1]);
    CHECK(c.sampler.z == num(f[2]));
    CHECK(c.sampler.sigma == 0.015);
    CHECK(c.sampler.r0 == 0.2);
    CHECK(c.hardcore.alpha.has_value() == !f[3].empty());
    if (!f[3].empty()) CHECK(*c.hardcore.alpha == num(f[3]));
    CHECK(c.hardcore.beta.has_value() == !f[4].empty());
    if (!f[4].empty()) CHECK(*c.hardcore.beta == num(f[4]));
    CHECK(!c.hardcore.shape_bound);
    CHECK(c.pair.has_value() == !f[5].empty());
    if (!f[5].empty()) CHECK(c.pair->theta == num(f[5]));
    const auto pots = f[6].empty() ? std::vector<std::string>{} : split(f[6], ';');
    REQUIRE(c.potentials.size() == pots.size());
    for (std::size_t i = 0; i < pots.size(); ++i) {
      const auto parts = split(pots[i], ':');
      CHECK(to_string(c.potentials[i].kind) == parts[0]);
      CHECK(to_string(c.potentials[i].functional) == parts[1]);
      CHECK(c.potentials[i].theta == num(parts[2]));
      CHECK(c.potentials[i].source == TargetSource::Dataset);
    }
    if (!f[7].empty()) CHECK(c.steps == num(f[7]));
    if (!f[8].empty()) CHECK(c.stop.delta == num(f[8]));
    if (!f[9].empty()) CHECK(c.stop.t == num(f[9]));
    if (!f[10].empty()) CHECK(c.greedy_cells == num(f[10]));
    if (!f[11].empty()) CHECK(c.greedy.quiet_limit == num(f[11]));
  }
  CHECK(seen.size() == preset_list().size());
  for (const auto& info : preset_list()) CHECK_MESSAGE(seen.contains(info.name), info.name);
}

TEST_CASE("materialized models") {
  const auto data = load_data_reference(bundled_dataset_path(), 0.2);
  CHECK(data.tessellation.cells.size() == 1057);
  CHECK(data.scale.max_normalized_radius <= 70.0 / std::cbrt(486.0 * 529.0 * 685.0));

  const auto m = materialize_model(preset("rt2_irregular"), &data);
  CHECK(*m.hardcore.alpha == 0.02);
  CHECK(m.pair->theta == -1);
  REQUIRE(m.reconstructing.size() == 1);
  CHECK(m.reconstructing[0].functional == Functional::Discrepancy);
  CHECK(m.reconstructing[0].theta == 100000);
  CHECK(m.reconstructing[0].target.total() == 1057);
  CHECK(discrepancy(histogram(extract(CharacteristicKind::Nof, data.tessellation), m.reconstructing[0].target.breaks),
                    m.reconstructing[0].target) == 0.0);
  CHECK_THROWS_AS(materialize_model(preset("rt6"), nullptr), ConfigError);

  auto c = preset("rt6");
  c.potentials[0].source = TargetSource::ReferenceNof;
  CHECK(materialize_model(c, nullptr).reconstructing[0].target.counts == reference_nof_histogram().counts);
  c.potentials[0].functional = Functional::Mean;
  c.potentials[0].source = TargetSource::Dataset;
  CHECK(materialize_model(c, &data).reconstructing[0].target_value ==
        doctest::Approx(tessellation_stats(data.tessellation).nof.mean));
}

TEST_CASE("run output is self-consistent and deterministic") {
  const auto a = scratch_dir("run_a");
  const auto b = scratch_dir("run_b");
  const auto first = run_experiment(small_reconstruction(a));
  const auto second = run_experiment(small_reconstruction(b));
  for (const char* f : {"trace.csv", "potential_trace.csv", "acceptance.csv", "configuration.csv", "geometry.txt",
                        "histogram_nof.csv", "histogram_vol.csv", "potential_1_target.csv", "potential_1_final.csv"}) {
    INFO(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(summary_without_runtime(first.summary) == summary_without_runtime(second.summary));
  CHECK(first.summary["steps"] == 400);
  CHECK(first.summary["data"]["boundary_affected"] == true);

  // The exported configuration, used as a dataset, reproduces its own histogram.
  std::ifstream hin(a / "potential_1_final.csv");
  const auto final_hist = read_histogram_csv(hin);
  BinSpec bins;
  bins.nof = final_hist.breaks;
  const auto t = target_histograms(read_configuration_file(a / "configuration.csv"), bins);
  CHECK(discrepancy(t.nof, final_hist) == 0.0);
  const auto data = load_data_reference(bundled_dataset_path(), 0.2);
  const auto model = materialize_model(small_reconstruction(a), &data);
  CHECK(first.summary["energy"]["potentials"][0]["statistic"].get<double>() ==
        doctest::Approx(discrepancy(final_hist, model.reconstructing[0].target)).epsilon(1e-12));

  auto other = small_reconstruction(b);
  other.sampler.seed = 22;
  const auto third = run_experiment(other);
  CHECK(summary_without_runtime(third.summary) != summary_without_runtime(first.summary));

  std::ifstream ini(a / "config.ini");
  const auto replay = parse_config(ini);
  CHECK(replay.sampler.seed == 21);
  CHECK(replay.stop.max_steps == 400);
}
