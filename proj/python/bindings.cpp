#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "glt/characteristics.hpp"
#include "glt/dataset.hpp"
#include "glt/errors.hpp"
#include "glt/experiment.hpp"
#include "glt/geometry.hpp"
#include "glt/sampler.hpp"

namespace py = pybind11;
using namespace glt;

namespace {

Configuration make_configuration(const std::vector<std::array<double, 3>>& positions,
                                 const std::vector<double>& radii) {
  if (positions.size() != radii.size()) throw InvalidParameter("positions and radii differ in length");
  std::vector<Vec3> p;
  p.reserve(positions.size());
  for (const auto& q : positions) p.push_back({q[0], q[1], q[2]});
  return Configuration::from_points(p, radii);
}

std::vector<GeneratorId> neighbors(const CellGeometry& c) {
  std::set<GeneratorId> ids;
  for (const auto& f : c.faces) {
    if (f.neighbor != c.generator_id) ids.insert(f.neighbor);
  }
  return {ids.begin(), ids.end()};
}

std::string run_config(const std::string& text, const std::string& base_dir, const std::string& output_dir,
                       std::optional<std::uint64_t> seed) {
  std::istringstream in(text);
  auto config = parse_config(in, base_dir);
  if (seed) config.sampler.seed = *seed;
  config.output_dir = output_dir;
  py::gil_scoped_release release;
  return run_experiment(config).summary.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Periodic Laguerre tessellations and Gibbs-Laguerre samplers";

  static py::exception<Error> error(m, "GltError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<Configuration>(m, "Configuration")
      .def(py::init(&make_configuration), py::arg("positions"), py::arg("radii"))
      .def("__len__", &Configuration::size)
      .def_property_readonly("generators", [](const Configuration& c) {
        std::vector<std::tuple<GeneratorId, double, double, double, double>> out;
        for (const auto& g : c.sorted_by_id()) {
          out.emplace_back(g.id, g.position.x, g.position.y, g.position.z, g.radius);
        }
        return out;
      });

  py::class_<CellGeometry>(m, "Cell")
      .def_readonly("id", &CellGeometry::generator_id)
      .def_readonly("radius", &CellGeometry::radius)
      .def_readonly("volume", &CellGeometry::volume)
      .def_readonly("nof", &CellGeometry::nof)
      .def_readonly("h_min", &CellGeometry::h_min)
      .def_readonly("h_max", &CellGeometry::h_max)
      .def_property_readonly("neighbors", &neighbors);

  py::class_<Tessellation>(m, "Tessellation")
      .def_property_readonly("cells", [](const Tessellation& t) { return t.cells; })
      .def_readonly("neighbor_pairs", &Tessellation::neighbor_pairs)
      .def_readonly("excluded_ids", &Tessellation::excluded_ids)
      .def("total_volume", &Tessellation::total_volume);

  m.def("build_tessellation", [](const Configuration& c) { return build_tessellation(c); }, py::arg("configuration"));

  m.def(
      "characteristic",
      [](const std::string& kind, const Tessellation& t) { return extract(parse_characteristic(kind), t); },
      py::arg("kind"), py::arg("tessellation"),
      "Values of nof, volume, radius (per cell) or nvr, vol_diff (per neighbor pair).");

  m.def(
      "histogram",
      [](const std::vector<double>& values, const std::vector<double>& breaks) {
        return histogram(values, breaks).counts;
      },
      py::arg("values"), py::arg("breaks"), "Counts per bin; out-of-range values go to the end bins.");
  m.def(
      "discrepancy",
      [](const std::vector<double>& counts, const std::vector<double>& target, const std::vector<double>& breaks) {
        Histogram a = histogram({}, breaks), b = histogram({}, breaks);
        a.counts = counts;
        b.counts = target;
        return discrepancy(a, b);
      },
      py::arg("counts"), py::arg("target"), py::arg("breaks"));
  m.def("acceptance_probability", &acceptance_probability, py::arg("c"), py::arg("e_before"), py::arg("e_after"));

  m.def(
      "normalize_dataset",
      [](const std::filesystem::path& csv, double r0) { return normalize(read_dataset(csv), r0).first; },
      py::arg("csv"), py::arg("r0") = 0.2);
  m.def("bundled_dataset_path", &bundled_dataset_path);

  m.def("presets", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& p : preset_list()) out.emplace_back(p.name, p.description);
    return out;
  });
  m.def(
      "preset_config",
      [](const std::string& name) {
        std::ostringstream out;
        write_config(out, preset(name));
        return out.str();
      },
      py::arg("name"));
  m.def("_run_config", &run_config, py::arg("text"), py::arg("base_dir"), py::arg("output_dir"),
        py::arg("seed") = std::nullopt);
}
