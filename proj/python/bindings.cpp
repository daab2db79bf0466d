#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "finelab/cartan.hpp"
#include "finelab/error.hpp"
#include "finelab/report_io.hpp"
#include "finelab/scenario.hpp"

namespace py = pybind11;
using namespace finelab;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::array_t<double> to_array(const ScalarField& f) { return py::array_t<double>(static_cast<py::ssize_t>(f.size()), f.data()); }

Region region_of(const std::vector<NodeIndex>& nodes) { return Region(nodes); }

AnalyticSet descriptor(const py::object& d, int dim) {
  if (py::isinstance<AnalyticSet>(d)) return d.cast<AnalyticSet>();
  if (py::isinstance<py::str>(d)) return AnalyticSet::parse(d.cast<std::string>(), dim);
  return AnalyticSet::from_json(from_py(d));
}

py::dict solve_dict(const SolveResult& r, const WeightedGraphSpace& s) {
  py::dict d = to_py(to_json(r, s));
  d["field"] = to_array(r.field);
  return d;
}

}  // namespace

PYBIND11_MODULE(_finelab, m) {
  m.doc() = "Discrete p-capacity, Wiener tests and Cartan-type constructions on weighted graphs";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&] { return py::object(py::exception<Error>(m, "FinelabError", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object inst = type(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  py::class_<WeightedGraphSpace, std::shared_ptr<WeightedGraphSpace>>(m, "Space")
      .def_property_readonly("size", &WeightedGraphSpace::size)
      .def_property_readonly("dim", &WeightedGraphSpace::dim)
      .def_property_readonly("edge_count", [](const WeightedGraphSpace& s) { return s.edges().size(); })
      .def("total_measure", &WeightedGraphSpace::total_measure)
      .def("measures", [](const WeightedGraphSpace& s) {
        return py::array_t<double>(static_cast<py::ssize_t>(s.size()), s.measures().data());
      })
      .def("positions", [](const WeightedGraphSpace& s) {
        const auto d = static_cast<py::ssize_t>(s.dim());
        py::array_t<double> out({static_cast<py::ssize_t>(s.size()), d});
        auto v = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < s.size(); ++i) {
          const auto x = s.position(static_cast<NodeIndex>(i));
          for (py::ssize_t k = 0; k < d; ++k) v(static_cast<py::ssize_t>(i), k) = x[static_cast<std::size_t>(k)];
        }
        return out;
      })
      .def("nearest_node", [](const WeightedGraphSpace& s, const Point& x) { return s.nearest_node(x); })
      .def("__len__", &WeightedGraphSpace::size);

  auto as_mutable = [](SpacePtr s) { return std::const_pointer_cast<WeightedGraphSpace>(s); };
  m.def("cube_grid", [=](int dim, double half_width, double h) { return as_mutable(build_cube_grid(dim, half_width, h)); },
        py::arg("dim"), py::arg("half_width"), py::arg("h"));
  m.def("radial_grid",
        [=](int n, double rmin, double rmax, double h) {
          RadialOptions o;
          o.n = n;
          o.rmin = rmin;
          o.rmax = rmax;
          o.h = h;
          return as_mutable(build_radial(o));
        },
        py::arg("n"), py::arg("rmin"), py::arg("rmax"), py::arg("h"));
  m.def("scale_grid",
        [=](const Point& x0, double radius, double depth, int resolution) {
          return as_mutable(build_scale_grid(x0, radius, depth, resolution));
        },
        py::arg("x0"), py::arg("radius"), py::arg("depth"), py::arg("resolution"));

  py::class_<AnalyticSet>(m, "AnalyticSet")
      .def_static("parse", &AnalyticSet::parse, py::arg("text"), py::arg("dim") = 2)
      .def_static("empty", &AnalyticSet::empty)
      .def_static("singleton", &AnalyticSet::singleton)
      .def_static("ball", &AnalyticSet::ball, py::arg("center"), py::arg("radius"), py::arg("closed") = false)
      .def_static("sector", &AnalyticSet::sector, py::arg("apex"), py::arg("angle"), py::arg("direction") = 0.0)
      .def_static("exp_cusp", &AnalyticSet::exp_cusp, py::arg("apex"), py::arg("length") = 1.0)
      .def("to_json", [](const AnalyticSet& a) { return to_py(a.to_json()); })
      .def("nodes", [](const AnalyticSet& a, const WeightedGraphSpace& s) { return region_from_descriptor(s, a).nodes(); });

  m.def("ball_nodes", [](const WeightedGraphSpace& s, const Point& c, double r) { return point_ball(s, c, r).nodes(); },
        py::arg("space"), py::arg("center"), py::arg("radius"));

  m.def("variational_capacity",
        [](const WeightedGraphSpace& s, const std::vector<NodeIndex>& E, const std::vector<NodeIndex>& A, double p,
           double tol) {
          const auto r = variational_capacity(s, region_of(E), region_of(A), p, tol);
          py::dict d = to_py(to_json(r));
          d["minimizer"] = to_array(r.minimizer);
          return d;
        },
        py::arg("space"), py::arg("E"), py::arg("A"), py::arg("p") = 2.0, py::arg("tol") = 1e-8);
  m.def("sobolev_capacity",
        [](const WeightedGraphSpace& s, const std::vector<NodeIndex>& E, double p, double tol) {
          const auto r = sobolev_capacity(s, region_of(E), p, tol);
          py::dict d = to_py(to_json(r));
          d["minimizer"] = to_array(r.minimizer);
          return d;
        },
        py::arg("space"), py::arg("E"), py::arg("p") = 2.0, py::arg("tol") = 1e-8);
  m.def("capacitary_potential",
        [](const WeightedGraphSpace& s, const std::vector<NodeIndex>& E, const std::vector<NodeIndex>& B, double p,
           double tol) { return solve_dict(capacitary_potential(s, region_of(E), region_of(B), p, tol), s); },
        py::arg("space"), py::arg("E"), py::arg("B"), py::arg("p") = 2.0, py::arg("tol") = 1e-8);
  m.def("solve_obstacle",
        [](const WeightedGraphSpace& s, const std::vector<NodeIndex>& domain, const std::vector<double>& obstacle,
           const std::vector<double>& boundary, double p, double tol) {
          ObstacleSpec spec{region_of(domain), obstacle, boundary, p};
          return solve_dict(solve_obstacle(s, spec, tol), s);
        },
        py::arg("space"), py::arg("domain"), py::arg("obstacle"), py::arg("boundary"), py::arg("p") = 2.0,
        py::arg("tol") = 1e-8);

  m.def("wiener_terms",
        [](const py::object& set, const Point& x0, int scales, int resolution, double sigma, double p) {
          WienerOptions o;
          o.scales = scales;
          o.resolution = resolution;
          o.sigma = sigma;
          o.p = p;
          const auto rep = wiener_terms(descriptor(set, static_cast<int>(x0.size())), x0, o);
          py::dict d = to_py(to_json(rep));
          d["classification"] = to_py(to_json(classify_thin(rep)));
          return d;
        },
        py::arg("set"), py::arg("x0"), py::arg("scales") = 12, py::arg("resolution") = 128, py::arg("sigma") = 2.0,
        py::arg("p") = 2.0);
  m.def("classify_terms",
        [](const std::vector<double>& terms) { return to_py(to_json(classify_terms(terms))); }, py::arg("terms"));
  m.def("weak_cartan",
        [](const py::object& set, const Point& x0, double r, int resolution, double p) {
          WeakCartanOptions o;
          o.resolution = resolution;
          o.p = p;
          return to_py(to_json(weak_cartan(descriptor(set, static_cast<int>(x0.size())), x0, r, o)));
        },
        py::arg("set"), py::arg("x0"), py::arg("r") = 1.0, py::arg("resolution") = 128, py::arg("p") = 2.0);
  m.def("product_bounds",
        [](const py::object& set, const Point& x0, double r, int resolution, std::optional<double> Cprime, double p) {
          BoundsOptions o;
          o.resolution = resolution;
          o.Cprime = Cprime;
          o.p = p;
          return to_py(to_json(potential_product_bounds(descriptor(set, static_cast<int>(x0.size())), x0, r, o)));
        },
        py::arg("set"), py::arg("x0"), py::arg("r") = 1.0, py::arg("resolution") = 128, py::arg("Cprime") = py::none(),
        py::arg("p") = 2.0);
  m.def("strong_cartan",
        [](const py::object& set, const Point& x0, double R, int scales, int resolution, double p) {
          StrongCartanOptions o;
          o.scales = scales;
          o.resolution = resolution;
          o.p = p;
          return to_py(to_json(strong_cartan_positive_cap(descriptor(set, static_cast<int>(x0.size())), x0, R, o)));
        },
        py::arg("set"), py::arg("x0"), py::arg("R") = 1.0, py::arg("scales") = 6, py::arg("resolution") = 128,
        py::arg("p") = 2.0);

  m.def("run_scenario",
        [](const py::object& config, std::optional<std::filesystem::path> out) {
          return to_py(manifest_json(run_scenario(parse_scenario(from_py(config)), out)));
        },
        py::arg("config"), py::arg("out") = py::none());
  m.def("defaults", [] { return to_py(defaults_table()); });
  m.attr("__version__") = std::string(kToolVersion);
}
