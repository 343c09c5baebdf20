#include <cmath>
#include <sstream>

#include "doctest.h"
#include "glt/errors.hpp"
#include "glt/geometry.hpp"
#include "glt/local_tessellator.hpp"
#include "glt/rng.hpp"
#include "oracles.hpp"

using namespace glt;
using glt::testing::random_configuration;
using glt::testing::tessellation_mismatch;

namespace {

void check_symmetric_adjacency(const Tessellation& t) {
  for (const auto& [id, c] : t.cells) {
    for (const auto& f : c.faces) {
      if (f.neighbor == id) continue;
      const NeighborPair p = id < f.neighbor ? NeighborPair{id, f.neighbor} : NeighborPair{f.neighbor, id};
      CHECK(t.neighbor_pairs.contains(p));
    }
  }
  for (const auto& [a, b] : t.neighbor_pairs) {
    REQUIRE(t.cells.contains(a));
    REQUIRE(t.cells.contains(b));
    CHECK(t.cells.at(a).faces.size() > 0);
    bool ab = false, ba = false;
    for (const auto& f : t.cells.at(a).faces) ab |= f.neighbor == b;
    for (const auto& f : t.cells.at(b).faces) ba |= f.neighbor == a;
    CHECK(ab);
    CHECK(ba);
  }
}

}  // namespace

TEST_CASE("power distance") {
  const MarkedGenerator g{0, {0.2, 0.3, 0.4}, 0.1};
  CHECK(power_distance(g.position, g) == doctest::Approx(-0.01));
  CHECK(power_distance(g.position + Vec3{0.1, 0, 0}, g) == doctest::Approx(0.0));
  CHECK(power_distance({1, 0, 0}, MarkedGenerator{0, {0, 0, 0}, 0.0}) == 1.0);
}

TEST_CASE("torus displacement") {
  const Vec3 d = torus_displacement({0.1, 0.1, 0.1}, {0.9, 0.1, 0.1});
  CHECK(d.x == doctest::Approx(-0.2));
  CHECK(d.y == 0.0);
  CHECK(torus_displacement({0.3, 0.3, 0.3}, {0.3, 0.3, 0.3}) == Vec3{0, 0, 0});
  CHECK(torus_displacement({0, 0, 0}, {0.5, 0.5, 0.5}) == Vec3{-0.5, -0.5, -0.5});
}

TEST_CASE("configuration validation") {
  Configuration c;
  c.insert({0.1, 0.2, 0.3}, 0.05);
  CHECK_THROWS_AS(c.insert({0.1, 0.2, 0.3}, 0.01), DegenerateInput);
  CHECK_THROWS_AS(c.insert({1.0, 0.2, 0.3}, 0.01), InvalidParameter);
  CHECK_THROWS_AS(c.insert({0.5, 0.2, 0.3}, -1.0), InvalidParameter);
  CHECK_THROWS_AS(c.erase(42), UnknownId);
  const auto id = c.insert({0.5, 0.5, 0.5}, 0.1);
  CHECK(c.size() == 2);
  const auto before = c.fingerprint();
  c.move(id, {0.6, 0.5, 0.5}, 0.1);
  CHECK(c.fingerprint() != before);
  c.move(id, {0.5, 0.5, 0.5}, 0.1);
  CHECK(c.fingerprint() == before);
  CHECK_THROWS_AS(build_tessellation(Configuration{}), InvalidParameter);
}

TEST_CASE("single generator owns the torus") {
  const Configuration c({MarkedGenerator{7, {0.3, 0.6, 0.9}, 0.05}});
  const auto t = build_tessellation(c);
  REQUIRE(t.cells.size() == 1);
  const auto& cell = t.cell(7);
  CHECK(cell.volume == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cell.nof == 0);
  CHECK(cell.faces.size() == 6);
  CHECK(cell.touches_own_image());
  CHECK(cell.h_min == doctest::Approx(0.5));
  CHECK(cell.h_max == doctest::Approx(0.5));
  CHECK(t.excluded_ids.empty());
  CHECK(t.neighbor_pairs.empty());
}

TEST_CASE("two symmetric generators give slabs") {
  const Configuration c({MarkedGenerator{0, {0.25, 0.5, 0.5}, 0.1},
                         MarkedGenerator{1, {0.75, 0.5, 0.5}, 0.1}});
  const auto t = build_tessellation(c);
  REQUIRE(t.cells.size() == 2);
  for (const auto& [id, cell] : t.cells) {
    CHECK(cell.volume == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cell.nof == 2);
    CHECK(cell.h_min == doctest::Approx(0.25));
    CHECK(cell.h_max == doctest::Approx(0.5));
  }
  CHECK(t.neighbor_pairs.size() == 1);
}

TEST_CASE("swallowed generator is excluded") {
  const Configuration c({MarkedGenerator{0, {0.5, 0.5, 0.5}, 0.2},
                         MarkedGenerator{1, {0.52, 0.5, 0.5}, 0.001},
                         MarkedGenerator{2, {0.1, 0.2, 0.8}, 0.05},
                         MarkedGenerator{3, {0.8, 0.1, 0.2}, 0.05}});
  const auto t = build_tessellation(c);
  CHECK(t.excluded_ids == std::set<GeneratorId>{1});
  CHECK(t.cells.size() == 3);
  CHECK(t.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(glt::testing::voxel_counts(c, 32).at(1) == 0);
}

TEST_CASE("cells agree with independent vertex-enumeration reference") {
  Rng rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 5 + rng.index(60);
    const auto config = random_configuration(rng, n, 0.2);
    const auto tess = build_tessellation(config);
    const auto ref = glt::testing::reference_cells(config, true);
    CHECK(ref.size() == tess.cells.size());
    for (const auto& [id, rc] : ref) {
      REQUIRE(tess.cells.contains(id));
      const auto& cell = tess.cells.at(id);
      CHECK(cell.volume == doctest::Approx(rc.volume).epsilon(1e-9));
      std::set<GeneratorId> nb;
      for (const auto& f : cell.faces) {
        if (f.neighbor != id) nb.insert(f.neighbor);
      }
      CHECK(nb == rc.neighbors);
    }
  }
}

TEST_CASE("voxel oracle agrees on volumes") {
  Rng rng(5);
  const auto config = random_configuration(rng, 40, 0.15);
  const auto tess = build_tessellation(config);
  const int m = 48;
  const auto counts = glt::testing::voxel_counts(config, m);
  const double voxel = 1.0 / (m * m * m);
  for (const auto& [id, cnt] : counts) {
    if (tess.excluded_ids.contains(id)) {
      CHECK(cnt == 0);
      continue;
    }
    if (cnt >= 300) CHECK(tess.cell(id).volume == doctest::Approx(cnt * voxel).epsilon(0.05));
  }
}

TEST_CASE("space filling, symmetric adjacency and cell invariants") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.index(300);
    const auto config = random_configuration(rng, n, 0.2);
    const auto tess = build_tessellation(config);
    CHECK(std::abs(tess.total_volume() - 1.0) < 1e-9 * n);
    CHECK(tess.cells.size() + tess.excluded_ids.size() == n);
    check_symmetric_adjacency(tess);
    for (const auto& [id, c] : tess.cells) {
      CHECK(c.volume > 0.0);
      CHECK(c.h_min > 0.0);
      CHECK(c.h_min <= c.h_max);
      CHECK(c.faces.size() >= 4);
    }
  }
}

TEST_CASE("radii shift leaves the partition unchanged") {
  Rng rng(8);
  const auto config = random_configuration(rng, 120, 0.2);
  std::vector<MarkedGenerator> shifted(config.generators().begin(), config.generators().end());
  for (auto& g : shifted) g.radius = std::sqrt(g.radius * g.radius + 0.05);
  const auto a = build_tessellation(config);
  const auto b = build_tessellation(Configuration(shifted));
  CHECK(tessellation_mismatch(a, b, 1e-9) == "");
}

TEST_CASE("incremental updates match full rebuilds") {
  Rng rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 2 + rng.index(199);
    LocalTessellator engine(random_configuration(rng, n, 0.2));
    for (int step = 0; step < 150; ++step) {
      ConfigurationChange change;
      const auto& cfg = engine.configuration();
      const double u = rng.uniform();
      if (u < 0.34 || cfg.size() < 2) {
        change = Insert{{cfg.next_id(), {rng.uniform(), rng.uniform(), rng.uniform()},
                         rng.uniform_open_closed(0.2)}};
      } else if (u < 0.67) {
        change = Delete{cfg.by_index(rng.index(cfg.size())).id};
      } else {
        const auto& g = cfg.by_index(rng.index(cfg.size()));
        const Vec3 p = wrap_to_torus(g.position + Vec3{rng.normal(0, 0.015), rng.normal(0, 0.015),
                                                       rng.normal(0, 0.015)});
        change = Move{g.id, p, rng.uniform_open_closed(0.2)};
      }
      const auto proposal = engine.propose(change);
      engine.commit(proposal, EmptyCellPolicy::KeepGenerator);
      if (step % 25 == 24) {
        const auto full = build_tessellation(engine.configuration());
        REQUIRE(tessellation_mismatch(engine.tessellation(), full, 1e-10) == "");
      }
    }
  }
}

TEST_CASE("remove policy drops empty generators") {
  Rng rng(4);
  LocalTessellator engine(random_configuration(rng, 50, 0.05));
  const Vec3 p = engine.configuration().by_index(0).position;
  const auto proposal = engine.propose(Insert{{1000, wrap_to_torus(p + Vec3{0.01, 0, 0}), 0.2}});
  const auto dropped = engine.commit(proposal, EmptyCellPolicy::RemoveGenerator);
  CHECK(!dropped.empty());
  CHECK(engine.tessellation().excluded_ids.empty());
  for (GeneratorId id : dropped) CHECK(!engine.configuration().contains(id));
  CHECK(tessellation_mismatch(engine.tessellation(), build_tessellation(engine.configuration()),
                              1e-10) == "");
}

TEST_CASE("insert followed by delete restores the tessellation") {
  Rng rng(9);
  const auto config = random_configuration(rng, 80, 0.2);
  const auto base = build_tessellation(config);
  const MarkedGenerator g{config.next_id(), {0.41, 0.52, 0.63}, 0.11};
  const auto inserted = apply_change(base, config, Insert{g});
  CHECK(inserted.tessellation.cells.contains(g.id));
  const auto restored = apply_change(inserted.tessellation, inserted.configuration, Delete{g.id});
  CHECK(tessellation_mismatch(restored.tessellation, base, 1e-12) == "");
}

TEST_CASE("affected set covers every changed cell") {
  Rng rng(12);
  const auto config = random_configuration(rng, 100, 0.2);
  const auto base = build_tessellation(config);
  const auto& g = config.by_index(17);
  const ConfigurationChange change =
      Move{g.id, wrap_to_torus(g.position + Vec3{0.3, 0, 0}), g.radius};
  const auto affected = affected_ids(base, config, change);
  CHECK(affected.contains(g.id));
  Configuration changed = config;
  changed.apply(change);
  const auto after = build_tessellation(changed);
  for (const auto& [id, cell] : after.cells) {
    if (affected.contains(id)) continue;
    REQUIRE(base.cells.contains(id));
    CHECK(cell.volume == doctest::Approx(base.cells.at(id).volume).epsilon(1e-12));
  }
  CHECK_THROWS_AS(affected_ids(base, config, Delete{9999}), UnknownId);
}

TEST_CASE("geometry export format") {
  const Configuration c({MarkedGenerator{0, {0.25, 0.5, 0.5}, 0.1},
                         MarkedGenerator{1, {0.75, 0.5, 0.5}, 0.1}});
  std::ostringstream out;
  write_geometry(out, build_tessellation(c));
  const std::string s = out.str();
  CHECK(s.rfind("cell 0 volume 0.5", 0) == 0);
  CHECK(s.find("\ncell 1 volume") != std::string::npos);
  CHECK(s.find("/ 1\n") != std::string::npos);
  CHECK(s.find("\nv ") != std::string::npos);
}
