// Writes a synthetic generator dataset shaped like the measured Al-Cu
// sample: grains in a 486 x 529 x 685 um box, radii from a gamma law with
// the measured radius moments truncated at 70 um, generators kept apart
// like packed spheres, every cell nonempty.

#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <iostream>

#include "CLI11.hpp"
#include "glt/dataset.hpp"
#include "glt/errors.hpp"
#include "glt/rng.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic generator dataset"};
  std::string out = "synthetic_grains.csv";
  std::uint64_t seed = 1057;
  std::size_t cells = 1057;
  double radius_mean = 29.7693, radius_sd = 18.9564, radius_max = 70.0;
  double packing = 0.45;
  app.add_option("--out", out, "output CSV (a .meta sidecar is written next to it)");
  app.add_option("--seed", seed);
  app.add_option("--cells", cells);
  app.add_option("--radius-mean", radius_mean);
  app.add_option("--radius-sd", radius_sd);
  app.add_option("--radius-max", radius_max);
  app.add_option("--packing", packing, "generators keep a periodic distance of at least packing * (r1 + r2)");
  CLI11_PARSE(app, argc, argv);

  const double shape = (radius_mean / radius_sd) * (radius_mean / radius_sd);
  const boost::math::gamma_distribution<double> law(shape, radius_sd * radius_sd / radius_mean);
  const double top = boost::math::cdf(law, radius_max);

  glt::GeneratorDataset data;
  data.extents = {486.0, 529.0, 685.0};
  glt::Rng rng(seed);
  auto too_close = [&](const glt::GeneratorRecord& r) {
    for (const auto& q : data.records) {
      const double d[3] = {r.x - q.x, r.y - q.y, r.z - q.z};
      double s = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double w = std::abs(d[a]);
        const double m = std::min(w, data.extents[a] - w);
        s += m * m;
      }
      const double gap = packing * (r.radius + q.radius);
      if (s < gap * gap) return true;
    }
    return false;
  };
  auto draw = [&] {
    glt::GeneratorRecord r;
    r.radius = boost::math::quantile(law, top * (1.0 - rng.uniform()));
    do {
      r.x = rng.uniform() * data.extents[0];
      r.y = rng.uniform() * data.extents[1];
      r.z = rng.uniform() * data.extents[2];
    } while (too_close(r));
    return r;
  };
  for (std::size_t i = 0; i < cells; ++i) data.records.push_back(draw());

  for (int round = 0;; ++round) {
    const auto [config, scale] = glt::normalize(data);
    const auto tess = glt::build_tessellation(config);
    std::cerr << "round " << round << ": " << tess.excluded_ids.size() << " empty cells\n";
    if (tess.excluded_ids.empty()) break;
    if (round == 10000) {
      std::cerr << "did not converge\n";
      return 3;
    }
    // Generator ids follow record order.
    for (auto id : tess.excluded_ids) {
      auto& slot = data.records[static_cast<std::size_t>(id)];
      slot.x = slot.y = slot.z = -1e9;
      slot = draw();
    }
  }
  glt::write_dataset(out, data);
  return 0;
}
