#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "glt/energy.hpp"
#include "glt/errors.hpp"
#include "glt/rng.hpp"
#include "oracles.hpp"

using namespace glt;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Tessellation slabs() {
  return build_tessellation(Configuration({MarkedGenerator{0, {0.25, 0.5, 0.5}, 0.1},
                                           MarkedGenerator{1, {0.75, 0.5, 0.5}, 0.1}}));
}

// Cells carrying only a face count; enough for nof functionals.
Tessellation with_nofs(const std::vector<int>& nofs) {
  Tessellation t;
  for (std::size_t i = 0; i < nofs.size(); ++i) {
    CellGeometry c;
    c.generator_id = i;
    c.volume = 1.0 / static_cast<double>(nofs.size());
    c.nof = nofs[i];
    t.cells[i] = c;
  }
  return t;
}

std::vector<int> nof_sample(int fifteens, int total) {
  std::vector<int> v(total, 14);
  for (int i = 0; i < fifteens; ++i) v[i] = 15;
  return v;
}

ReconstructingPotentialSpec mean_nof(double s0, double theta) {
  ReconstructingPotentialSpec s;
  s.kind = CharacteristicKind::Nof;
  s.functional = Functional::Mean;
  s.target_value = s0;
  s.theta = theta;
  return s;
}

ReconstructingPotentialSpec dsc_spec(CharacteristicKind kind, Histogram target, double theta) {
  ReconstructingPotentialSpec s;
  s.kind = kind;
  s.functional = Functional::Discrepancy;
  s.target = std::move(target);
  s.theta = theta;
  return s;
}

Histogram peaked_nof_target() {
  Histogram h = histogram({}, integer_breaks(4, 30));
  for (std::size_t i = 0; i < h.bins(); ++i) {
    const double k = 4.0 + static_cast<double>(i);
    h.counts[i] = std::exp(-0.5 * (k - 14.0) * (k - 14.0) / 16.0) * 100.0;
  }
  return h;
}

EnergyModel mixed_model() {
  EnergyModel m;
  m.hardcore.alpha = 0.001;
  m.pair = PairPotentialSpec{1.0, 100.0};
  m.reconstructing.push_back(dsc_spec(CharacteristicKind::Nof, peaked_nof_target(), 1000.0));
  m.reconstructing.push_back(mean_nof(14.0, 3.0));
  ReconstructingPotentialSpec var = mean_nof(1e-7, 50.0);
  var.kind = CharacteristicKind::Volume;
  var.functional = Functional::Variance;
  m.reconstructing.push_back(var);
  ReconstructingPotentialSpec nvr_mean = mean_nof(0.5, 2.0);
  nvr_mean.kind = CharacteristicKind::Nvr;
  m.reconstructing.push_back(nvr_mean);
  Histogram vol_target = histogram({}, uniform_breaks(0.0, 0.03, 15));
  for (std::size_t i = 0; i < vol_target.bins(); ++i) vol_target.counts[i] = 1.0 + i % 4;
  m.reconstructing.push_back(dsc_spec(CharacteristicKind::Volume, vol_target, 10.0));
  return m;
}

}  // namespace

TEST_CASE("hardcore potential") {
  const auto one = build_tessellation(Configuration({MarkedGenerator{0, {0.5, 0.5, 0.5}, 0.1}}));
  HardcoreParams rt1;
  rt1.alpha = 0.02;
  rt1.beta = 0.095;
  CHECK(v1_hard(one.cell(0), rt1) == kInf);

  const auto t = slabs();
  HardcoreParams lower;
  lower.alpha = 0.02;
  CHECK(v1_hard(t.cell(0), lower) == 0.0);
  lower.alpha = 0.25;
  CHECK(v1_hard(t.cell(0), lower) == kInf);

  // h_max = 0.5 and |C| = 0.5, so B = 0.25 sits exactly on the bound.
  HardcoreParams shape;
  shape.shape_bound = 0.25;
  CHECK(v1_hard(t.cell(0), shape) == kInf);
  shape.shape_bound = 0.2499999;
  CHECK(v1_hard(t.cell(0), shape) == kInf);
  shape.shape_bound = 0.2500001;
  CHECK(v1_hard(t.cell(0), shape) == 0.0);

  HardcoreParams none;
  CHECK(v1_hard(one.cell(0), none) == 0.0);

  HardcoreParams bad;
  bad.alpha = 0.1;
  bad.beta = 0.05;
  CHECK_THROWS_AS(bad.validate(), InvalidParameter);
  bad.beta.reset();
  bad.alpha = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidParameter);
  rt1.validate();
}

TEST_CASE("capped NVR pair potential") {
  CHECK(v2_nvr(0.4, 0.4, 100) == 0.0);
  CHECK(v2_nvr(101, 1, 5) == 5.0);
  CHECK(v2_nvr(2, 1, 5) == 1.0);
  CHECK_THROWS_AS(v2_nvr(0, 1, 5), NonPositiveVolume);
}

TEST_CASE("reconstructing potentials") {
  const auto t = with_nofs(nof_sample(129, 500));  // mean 14.258
  CHECK(vn_reconstructing(mean_nof(12.0, 1.0), t) == doctest::Approx(1.50266).epsilon(1e-5));
  CHECK(vn_reconstructing(mean_nof(14.258, 1.0), t) == doctest::Approx(0.0).epsilon(1e-6));

  std::vector<double> values;
  for (const auto& [id, c] : t.cells) values.push_back(c.nof);
  const auto current = histogram(values, integer_breaks(10, 20));
  CHECK(vn_reconstructing(dsc_spec(CharacteristicKind::Nof, current, 1.0), t) == 0.0);

  ReconstructingPotentialSpec var = mean_nof(0.0, 1.0);
  var.functional = Functional::Variance;
  CHECK_THROWS_AS(vn_reconstructing(var, with_nofs({12})), InsufficientData);
  CHECK_THROWS_AS(vn_reconstructing(mean_nof(12, 1), Tessellation{}), InsufficientData);
  CHECK(vn_reconstructing(var, with_nofs({10, 14})) == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("mean-nof energy change of one step") {
  EnergyModel m;
  m.reconstructing.push_back(mean_nof(12.0, 1000.0));
  const double before = total_energy(m, with_nofs(nof_sample(129, 500))).total;
  const double after = total_energy(m, with_nofs(nof_sample(132, 500))).total;  // mean 14.264
  CHECK((after - before) / 1000.0 == doctest::Approx(0.002).epsilon(0.005));
  CHECK((after - before) / 1000.0 ==
        doctest::Approx(std::sqrt(2.264) - std::sqrt(2.258)).epsilon(1e-9));
}

TEST_CASE("total energy") {
  Rng rng(3);
  const auto random = build_tessellation(testing::random_configuration(rng, 60, 0.1));
  CHECK(total_energy(EnergyModel{}, random).total == 0.0);
  CHECK(EnergyModel{}.is_null());

  // 2x2x2 lattice with equal radii: all cells equal, all NVR zero.
  Configuration lattice;
  for (int i = 0; i < 8; ++i)
    lattice.insert({0.25 + 0.5 * (i & 1), 0.25 + 0.5 * ((i >> 1) & 1), 0.25 + 0.5 * (i >> 2)}, 0.05);
  EnergyModel pair_only;
  pair_only.pair = PairPotentialSpec{1.0, 100.0};
  const auto e = total_energy(pair_only, build_tessellation(lattice));
  CHECK(e.total == doctest::Approx(0.0).epsilon(1e-12));

  EnergyModel hard;
  hard.hardcore.beta = 0.095;
  const auto h = total_energy(hard, slabs());
  CHECK(!h.hardcore_finite);
  CHECK(h.hardcore_violations == 2);
  CHECK(h.total == kInf);
}

TEST_CASE("total energy against independent recomputation") {
  Rng rng(17);
  for (int trial = 0; trial < 4; ++trial) {
    const auto config = testing::random_configuration(rng, 120, 0.08);
    const auto tess = build_tessellation(config);
    const auto ref = testing::reference_cells(config, true);

    EnergyModel m;
    m.pair = PairPotentialSpec{-1.0, 100.0};
    const auto target = peaked_nof_target();
    m.reconstructing.push_back(dsc_spec(CharacteristicKind::Nof, target, 100000.0));
    const auto e = total_energy(m, tess);

    double pair_sum = 0.0;
    std::vector<double> h(target.bins(), 0.0);
    double s = 0.0, s_target = 0.0;
    for (const auto& [id, c] : ref) {
      for (GeneratorId other : c.neighbors) {
        if (other < id) continue;
        const double a = c.volume, b = ref.at(other).volume;
        pair_sum += std::min(std::sqrt(std::max(a, b) / std::min(a, b) - 1.0), 100.0);
      }
      const int k = static_cast<int>(c.neighbors.size());
      const int bin = std::clamp(k - 4, 0, static_cast<int>(h.size()) - 1);
      h[bin] += 1.0;
      s += 1.0;
    }
    for (double c : target.counts) s_target += c;
    double d = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) d += std::abs(h[i] / s - target.counts[i] / s_target);

    CHECK(e.pair_sum == doctest::Approx(pair_sum).epsilon(1e-8));
    CHECK(e.pair_term == doctest::Approx(-pair_sum).epsilon(1e-8));
    REQUIRE(e.reconstructing_terms.size() == 1);
    CHECK(e.reconstructing_terms[0] == doctest::Approx(100000.0 * std::sqrt(d)).epsilon(1e-10));
    CHECK(e.total == doctest::Approx(-pair_sum + 100000.0 * std::sqrt(d)).epsilon(1e-8));
  }
}

TEST_CASE("pair term counts each unordered pair once") {
  Rng rng(8);
  const auto tess = build_tessellation(testing::random_configuration(rng, 200, 0.1));
  double ordered = 0.0;
  for (const auto& [id, c] : tess.cells) {
    std::set<GeneratorId> seen;
    for (const auto& f : c.faces) {
      if (f.neighbor == id || !seen.insert(f.neighbor).second) continue;
      ordered += v2_nvr(c.volume, tess.cell(f.neighbor).volume, 100.0);
    }
  }
  EnergyModel m;
  m.pair = PairPotentialSpec{1.0, 100.0};
  CHECK(total_energy(m, tess).pair_term == doctest::Approx(ordered / 2.0).epsilon(1e-12));
}

TEST_CASE("energy is nonnegative for nonnegative weights") {
  Rng rng(5);
  const auto m = mixed_model();
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = total_energy(m, build_tessellation(testing::random_configuration(rng, 40 + trial * 5, 0.1)));
    CHECK(e.total >= 0.0);
    for (double t : e.reconstructing_terms) CHECK(t >= 0.0);
  }
}

TEST_CASE("admissibility matches per-cell hardcore checks") {
  Rng rng(12);
  EnergyModel m;
  m.hardcore.alpha = 0.02;
  m.hardcore.beta = 0.2;
  for (int trial = 0; trial < 30; ++trial) {
    const auto tess = build_tessellation(testing::random_configuration(rng, 20 + 10 * trial, 0.05));
    bool all_pass = true;
    for (const auto& [id, c] : tess.cells) all_pass &= v1_hard(c, m.hardcore) == 0.0;
    const auto e = total_energy(m, tess);
    CHECK(std::isfinite(e.total) == all_pass);
    CHECK(e.admissible() == all_pass);
  }
}

TEST_CASE("discrepancy term responds monotonically") {
  Rng rng(30);
  EnergyModel m;
  m.reconstructing.push_back(dsc_spec(CharacteristicKind::Nof, peaked_nof_target(), 10.0));
  LocalTessellator engine(testing::random_configuration(rng, 150, 0.05));
  EnergyAccumulator acc(m, engine.tessellation());
  int compared = 0;
  for (int step = 0; step < 300; ++step) {
    const auto change = testing::random_change(rng, engine.configuration(), 0.05, 0.02);
    auto next = energy_delta(m, engine, acc, change);
    const auto before = acc.breakdown();
    const auto target = m.reconstructing[0].target;
    const auto next_tess_dsc = next.breakdown.reconstructing_values[0];
    const auto cur_dsc = before.reconstructing_values[0];
    if (next_tess_dsc < cur_dsc) {
      CHECK(next.breakdown.total < before.total);
      ++compared;
    }
    if (next_tess_dsc > cur_dsc) CHECK(next.breakdown.total > before.total);
    engine.commit(next.proposal, EmptyCellPolicy::RemoveGenerator);
    acc = std::move(next.accumulator);
  }
  CHECK(compared > 0);
}

TEST_CASE("incremental energy tracks full recomputation") {
  Rng rng(44);
  const auto m = mixed_model();
  for (int trial = 0; trial < 3; ++trial) {
    LocalTessellator engine(testing::random_configuration(rng, 150 + 50 * trial, 0.08));
    EnergyAccumulator acc(m, engine.tessellation());
    for (int step = 0; step < 400; ++step) {
      const auto change = testing::random_change(rng, engine.configuration(), 0.08, 0.015);
      const double cached = acc.breakdown().total;
      auto next = energy_delta(m, engine, acc, change);
      if (rng.uniform() < 0.3) {
        // Rejected proposal: cached state stays as it was.
        CHECK(acc.breakdown().total == cached);
        continue;
      }
      engine.commit(next.proposal, step % 2 ? EmptyCellPolicy::RemoveGenerator
                                            : EmptyCellPolicy::KeepGenerator);
      acc = std::move(next.accumulator);
      if (step % 20 == 0) {
        const auto inc = acc.breakdown();
        const auto full = total_energy(m, engine.tessellation());
        REQUIRE(inc.reconstructing_terms.size() == full.reconstructing_terms.size());
        CHECK(inc.hardcore_violations == full.hardcore_violations);
        CHECK(std::abs(inc.pair_term - full.pair_term) < 1e-8);
        for (std::size_t i = 0; i < inc.reconstructing_terms.size(); ++i)
          CHECK(std::abs(inc.reconstructing_terms[i] - full.reconstructing_terms[i]) < 1e-8);
        if (std::isfinite(full.total)) CHECK(std::abs(inc.total - full.total) < 1e-8);
        CHECK(acc.cells() == engine.tessellation().cells.size());
      }
    }
  }
}

TEST_CASE("accumulator needs enough data") {
  EnergyModel m;
  ReconstructingPotentialSpec var = mean_nof(0.0, 1.0);
  var.functional = Functional::Variance;
  m.reconstructing.push_back(var);
  const auto one = build_tessellation(Configuration({MarkedGenerator{0, {0.5, 0.5, 0.5}, 0.1}}));
  CHECK(EnergyAccumulator(m, one).breakdown().total == kInf);
  CHECK(total_energy(m, one).total == kInf);
}

TEST_CASE("model validation") {
  auto m = mixed_model();
  m.validate();
  m.reconstructing[0].target.counts.assign(m.reconstructing[0].target.bins(), 0.0);
  CHECK_THROWS_AS(m.validate(), EmptyHistogram);
  m = mixed_model();
  m.pair->cap = 0.0;
  CHECK_THROWS_AS(m.validate(), InvalidParameter);
  CHECK(parse_functional("dsc") == Functional::Discrepancy);
  CHECK_THROWS_AS(parse_functional("median"), ConfigError);
}

TEST_CASE("energy trace format") {
  std::ostringstream out;
  write_trace_header(out, 2);
  EnergyBreakdown e;
  e.pair_term = 1.5;
  e.reconstructing_terms = {0.25, 2.0};
  e.total = 3.75;
  write_trace_row(out, 10, e, 42);
  CHECK(out.str() ==
        "step,total,hardcore_violations,pair_term,recon_term_1,recon_term_2,n_cells\n"
        "10,3.75,0,1.5,0.25,2,42\n");
}
