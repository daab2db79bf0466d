#include "finelab/scenario.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "finelab/error.hpp"
#include "finelab/report_io.hpp"

namespace finelab {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) == 1, ErrorCode::IoError,
          "SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

json defaults_table() {
  const SolverOptions solver;
  const WienerOptions wiener;
  const ClassificationPolicy policy;
  const WeakCartanOptions weak;
  const BoundsOptions bounds;
  const BoundaryOptions boundary;
  const StrongCartanOptions strong;
  const HarnackOptions harnack;
  const GeometryOptions geometry;
  return {
      {"solver", {{"tol", solver.tol}, {"max_iterations", solver.max_iterations}}},
      {"wiener", to_json(wiener)},
      {"classification", to_json(policy)},
      {"cartan_weak",
       {{"sigma", weak.sigma},
        {"resolution", weak.resolution},
        {"coverage_tol", weak.coverage_tol},
        {"margin", weak.margin},
        {"levels", weak.levels}}},
      {"cartan_bounds",
       {{"sigma", bounds.sigma}, {"scales", bounds.scales}, {"resolution", bounds.resolution}, {"gap_limit", bounds.gap_limit}}},
      {"cartan_boundary", {{"resolution", boundary.resolution}, {"relaxation", boundary.relaxation}}},
      {"cartan_strong",
       {{"scales", strong.scales}, {"resolution", strong.resolution}, {"max_halvings", strong.max_halvings}}},
      {"harnack",
       {{"q", harnack.q},
        {"samples", harnack.samples},
        {"family", to_string(harnack.family)},
        {"relaxation", harnack.relaxation}}},
      {"geometry", {{"samples", geometry.sample_count}, {"min_radius_cells", geometry.min_radius_cells}}},
      {"p", 2.0},
      {"seed", 1},
  };
}

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& message) {
  fail(ErrorCode::ConfigError, path + ": " + message);
}

/// Reads one JSON object, applying defaults and range checks, and records
/// the resolved values; finish() rejects keys that were never read.
class Section {
 public:
  Section(const json& raw, std::string path) : raw_(raw), path_(std::move(path)) {
    if (!raw_.is_object()) config_error(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return raw_.contains(key) && !raw_.at(key).is_null(); }

  double number(const std::string& key, std::optional<double> fallback, double lo, double hi, bool lo_open = false) {
    used_.insert(key);
    double v = 0.0;
    if (!has(key)) {
      if (!fallback) config_error(at(key), "required");
      v = *fallback;
    } else {
      const json& j = raw_.at(key);
      if (!j.is_number()) config_error(at(key), "expected a number, got " + j.dump());
      v = j.get<double>();
      const bool below = lo_open ? !(v > lo) : !(v >= lo);
      if (below || !(v <= hi)) {
        std::ostringstream ss;
        ss << "must lie in " << (lo_open ? "(" : "[") << lo << ", " << hi << "], got " << format_double(v);
        config_error(at(key), ss.str());
      }
    }
    resolved_[key] = v;
    return v;
  }

  int integer(const std::string& key, std::optional<int> fallback, int lo, int hi) {
    used_.insert(key);
    int v = 0;
    if (!has(key)) {
      if (!fallback) config_error(at(key), "required");
      v = *fallback;
    } else {
      const json& j = raw_.at(key);
      if (!j.is_number_integer()) config_error(at(key), "expected an integer, got " + j.dump());
      const auto w = j.get<std::int64_t>();
      if (w < lo || w > hi) {
        config_error(at(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                                  std::to_string(w));
      }
      v = static_cast<int>(w);
    }
    resolved_[key] = v;
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    used_.insert(key);
    bool v = fallback;
    if (has(key)) {
      if (!raw_.at(key).is_boolean()) config_error(at(key), "expected true or false");
      v = raw_.at(key).get<bool>();
    }
    resolved_[key] = v;
    return v;
  }

  std::string choice(const std::string& key, std::optional<std::string> fallback, const std::vector<std::string>& options) {
    used_.insert(key);
    std::string v;
    if (!has(key)) {
      if (!fallback) config_error(at(key), "required");
      v = *fallback;
    } else {
      if (!raw_.at(key).is_string()) config_error(at(key), "expected a string");
      v = raw_.at(key).get<std::string>();
    }
    if (std::find(options.begin(), options.end(), v) == options.end()) {
      std::string list;
      for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
      config_error(at(key), "unknown value '" + v + "' (expected one of " + list + ")");
    }
    resolved_[key] = v;
    return v;
  }

  std::string text(const std::string& key) {
    used_.insert(key);
    if (!has(key) || !raw_.at(key).is_string()) config_error(at(key), "expected a string");
    resolved_[key] = raw_.at(key);
    return raw_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> fallback, int size = -1) {
    used_.insert(key);
    std::vector<double> v;
    if (!has(key)) {
      if (!fallback) config_error(at(key), "required");
      v = *fallback;
    } else {
      const json& j = raw_.at(key);
      if (!j.is_array()) config_error(at(key), "expected an array of numbers");
      for (const auto& x : j) {
        if (!x.is_number()) config_error(at(key), "expected an array of numbers");
        v.push_back(x.get<double>());
      }
    }
    if (size >= 0 && static_cast<int>(v.size()) != size) {
      config_error(at(key), "expected " + std::to_string(size) + " entries, got " + std::to_string(v.size()));
    }
    resolved_[key] = v;
    return v;
  }

  Point point(const std::string& key, std::optional<Point> fallback, int dim = -1) {
    Point p = numbers(key, std::move(fallback), dim);
    if (p.empty() || p.size() > 3) config_error(at(key), "expected 1 to 3 coordinates");
    return p;
  }

  AnalyticSet descriptor(const std::string& key, int dim) {
    used_.insert(key);
    if (!has(key)) config_error(at(key), "required");
    const json& j = raw_.at(key);
    try {
      AnalyticSet s = j.is_string() ? AnalyticSet::parse(j.get<std::string>(), dim) : AnalyticSet::from_json(j);
      resolved_[key] = s.to_json();
      return s;
    } catch (const Error& e) {
      config_error(at(key), e.detail());
    } catch (const json::exception& e) {
      config_error(at(key), std::string("malformed descriptor: ") + e.what());
    }
  }

  Section child(const std::string& key) {
    used_.insert(key);
    if (!has(key)) config_error(at(key), "required");
    return Section(raw_.at(key), at(key));
  }

  void store(const std::string& key, json value) { resolved_[key] = std::move(value); }
  void mark(const std::string& key) { used_.insert(key); }
  const json& raw(const std::string& key) const { return raw_.at(key); }
  const json& resolved() const { return resolved_; }

  json finish() const {
    for (const auto& [k, v] : raw_.items()) {
      if (!used_.count(k)) config_error(at(k), "unknown key");
    }
    return resolved_;
  }

 private:
  const json& raw_;
  std::string path_;
  json resolved_ = json::object();
  std::set<std::string> used_;
};

int space_file_dim(const std::string& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) config_error(key, "cannot read " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto pos = line.find("dim=");
    if (line.rfind("space", 0) != 0 || pos == std::string::npos) config_error(key, path + " has no space header");
    return std::atoi(line.c_str() + pos + 4);
  }
  config_error(key, path + " is empty");
}

/// Returns the ambient dimension used to read descriptors.
int parse_space_section(Section& s) {
  const std::string b = s.choice("builder", std::nullopt, {"grid", "graded", "cube", "radial", "scale", "file"});
  if (b == "grid" || b == "graded") {
    const int dim = s.integer("dim", 2, 1, 3);
    s.numbers("lo", std::nullopt, dim);
    s.numbers("hi", std::nullopt, dim);
    if (b == "grid") {
      s.number("h", std::nullopt, 0.0, 1e300, true);
    } else {
      s.point("center", std::nullopt, dim);
      s.number("h_min", std::nullopt, 0.0, 1e300, true);
      s.number("h_max", std::nullopt, 0.0, 1e300, true);
      s.number("growth", 1.2, 1.0, 4.0, true);
    }
    s.number("weight_exponent", 0.0, -dim, 1e3, true);
    s.integer("max_nodes", 1 << 22, 1, 1 << 26);
    return dim;
  }
  if (b == "cube") {
    const int dim = s.integer("dim", 2, 1, 3);
    s.number("half_width", std::nullopt, 0.0, 1e300, true);
    s.number("h", std::nullopt, 0.0, 1e300, true);
    s.number("weight_exponent", 0.0, -dim, 1e3, true);
    return dim;
  }
  if (b == "radial") {
    const int n = s.integer("n", 2, 1, 16);
    s.number("rmin", 0.0, 0.0, 1e300);
    s.number("rmax", 1.0, 0.0, 1e300, true);
    s.number("h", std::nullopt, 0.0, 1e300, true);
    s.number("weight_exponent", 0.0, -n, 1e3, true);
    return 1;
  }
  if (b == "scale") {
    const Point c = s.point("center", std::nullopt);
    const double r = s.number("radius", std::nullopt, 0.0, 1e300, true);
    s.number("depth", r / 64.0, 0.0, r, true);
    s.integer("resolution", 64, 16, 4096);
    return static_cast<int>(c.size());
  }
  return space_file_dim(s.text("path"), s.at("path"));
}

SpacePtr build_space(const json& c) {
  const auto b = c.at("builder").get<std::string>();
  if (b == "grid") {
    GridOptions g;
    g.dim = c.at("dim");
    g.lo = c.at("lo").get<std::vector<double>>();
    g.hi = c.at("hi").get<std::vector<double>>();
    g.h = c.at("h");
    g.weight_exponent = c.at("weight_exponent");
    g.max_nodes = c.at("max_nodes").get<std::size_t>();
    return build_grid(g);
  }
  if (b == "graded") {
    GradedGridOptions g;
    g.dim = c.at("dim");
    g.lo = c.at("lo").get<std::vector<double>>();
    g.hi = c.at("hi").get<std::vector<double>>();
    g.center = c.at("center").get<Point>();
    g.h_min = c.at("h_min");
    g.h_max = c.at("h_max");
    g.growth = c.at("growth");
    g.weight_exponent = c.at("weight_exponent");
    g.max_nodes = c.at("max_nodes").get<std::size_t>();
    return build_graded_grid(g);
  }
  if (b == "cube") return build_cube_grid(c.at("dim"), c.at("half_width"), c.at("h"), c.at("weight_exponent"));
  if (b == "radial") {
    RadialOptions r;
    r.n = c.at("n");
    r.rmin = c.at("rmin");
    r.rmax = c.at("rmax");
    r.h = c.at("h");
    r.weight_exponent = c.at("weight_exponent");
    return build_radial(r);
  }
  if (b == "scale") {
    return build_scale_grid(c.at("center").get<Point>(), c.at("radius"), c.at("depth"), c.at("resolution"));
  }
  return load_space(c.at("path").get<std::string>());
}

const std::vector<std::string> kSpaceOps = {"space", "capacity", "potential", "comparison", "shrink", "harnack"};
const std::vector<std::string> kGridOps = {"wiener", "thin_union", "cartan_weak", "cartan_bounds", "cartan_boundary",
                                           "cartan_strong"};

bool needs_space(const std::string& op) {
  return std::find(kSpaceOps.begin(), kSpaceOps.end(), op) != kSpaceOps.end();
}

double read_p(Section& s) { return s.number("p", 2.0, kMinExponent, kMaxExponent); }
double read_tol(Section& s) { return s.number("tol", SolverOptions{}.tol, 0.0, 1.0, true); }

void read_policy(Section& s) {
  const ClassificationPolicy d;
  if (!s.has("policy")) {
    s.mark("policy");
    s.store("policy", to_json(d));
    return;
  }
  Section c = s.child("policy");
  c.number("rho_max", d.rho_max, 0.0, 1.0, true);
  c.number("eps_tail", d.eps_tail, 0.0, 1e300);
  c.number("tau_floor", d.tau_floor, 0.0, 1e300);
  c.integer("K", d.K, 1, 64);
  s.store("policy", c.finish());
}

void read_wiener(Section& s, const WienerOptions& d) {
  s.number("sigma", d.sigma, 1.0, 1e6, true);
  s.number("r0", d.r0, 0.0, 1e300, true);
  s.integer("scales", d.scales, 1, 64);
  s.integer("resolution", d.resolution, 8, 4096);
  s.choice("mode", to_string(d.mode), {"rescaled", "global"});
  s.number("weight_exponent", d.weight_exponent, -3.0, 1e3, true);
}

void read_ball(Section& parent, const std::string& key, int dim) {
  Section b = parent.child(key);
  b.point("center", std::nullopt, dim);
  b.number("radius", std::nullopt, 0.0, 1e300, true);
  parent.store(key, b.finish());
}

json parse_problem(Section& s, int space_dim) {
  const std::string op = s.choice("operation", std::nullopt,
                                  {"space", "capacity", "potential", "comparison", "shrink", "harnack", "wiener",
                                   "thin_union", "cartan_weak", "cartan_bounds", "cartan_boundary", "cartan_strong"});
  auto x0_dim = [&]() {
    const Point x0 = s.point("x0", std::nullopt, space_dim > 0 ? space_dim : -1);
    return static_cast<int>(x0.size());
  };
  if (op == "space") {
    s.flag("geometry", false);
    const GeometryOptions g;
    s.integer("samples", g.sample_count, 1, 100000);
    s.number("min_radius_cells", g.min_radius_cells, 0.0, 1e6);
    read_p(s);
  } else if (op == "capacity") {
    const std::string kind = s.choice("kind", "variational", {"variational", "sobolev"});
    s.descriptor("set", space_dim);
    if (kind == "variational") s.descriptor("domain", space_dim);
    read_p(s);
    read_tol(s);
  } else if (op == "potential") {
    s.descriptor("set", space_dim);
    s.descriptor("domain", space_dim);
    read_p(s);
    read_tol(s);
  } else if (op == "comparison") {
    s.descriptor("set", space_dim);
    s.point("center", std::nullopt, space_dim);
    s.number("radius", std::nullopt, 0.0, 1e300, true);
    read_p(s);
    read_tol(s);
  } else if (op == "shrink") {
    s.descriptor("set", space_dim);
    s.point("x0", std::nullopt, space_dim);
    s.number("radius", std::nullopt, 0.0, 1e300, true);
    const auto radii = s.numbers("radii", std::nullopt);
    if (radii.empty()) config_error(s.at("radii"), "needs at least one radius");
    for (std::size_t k = 1; k < radii.size(); ++k) {
      if (!(radii[k] < radii[k - 1])) config_error(s.at("radii"), "must be strictly decreasing");
    }
    read_p(s);
    read_tol(s);
  } else if (op == "harnack") {
    const HarnackOptions d;
    s.point("center", std::nullopt, space_dim);
    s.number("radius", std::nullopt, 0.0, 1e300, true);
    s.number("q", d.q, 0.0, 64.0, true);
    s.integer("samples", d.samples, 1, 10000);
    s.choice("family", to_string(d.family), {"constant", "harmonic", "capacitary_far_disk"});
    s.choice("form", "both", {"sub", "super", "both"});
    s.number("relaxation", d.relaxation, 2.0, 1e6);
    read_p(s);
    read_tol(s);
  } else if (op == "wiener") {
    const int dim = x0_dim();
    s.descriptor("set", dim);
    read_wiener(s, WienerOptions{});
    read_policy(s);
    read_p(s);
    read_tol(s);
  } else if (op == "thin_union") {
    const int dim = x0_dim();
    s.mark("sets");
    if (!s.has("sets") || !s.raw("sets").is_array() || s.raw("sets").empty()) {
      config_error(s.at("sets"), "expected a nonempty array of descriptors");
    }
    json sets = json::array();
    for (std::size_t k = 0; k < s.raw("sets").size(); ++k) {
      const json& item = s.raw("sets")[k];
      const std::string path = s.at("sets") + "[" + std::to_string(k) + "]";
      try {
        sets.push_back((item.is_string() ? AnalyticSet::parse(item.get<std::string>(), dim) : AnalyticSet::from_json(item)).to_json());
      } catch (const Error& e) {
        config_error(path, e.detail());
      } catch (const json::exception& e) {
        config_error(path, std::string("malformed descriptor: ") + e.what());
      }
    }
    s.store("sets", sets);
    s.number("budget", 0.1, 0.0, 1e300, true);
    read_wiener(s, WienerOptions{});
    read_policy(s);
    read_p(s);
    read_tol(s);
  } else if (op == "cartan_weak") {
    const WeakCartanOptions d;
    const int dim = x0_dim();
    s.descriptor("set", dim);
    s.number("r", 1.0, 0.0, 1e300, true);
    s.number("sigma", d.sigma, 20.0, 1e6, true);
    s.integer("resolution", d.resolution, 16, 4096);
    s.number("coverage_tol", d.coverage_tol, 0.0, 1.0);
    s.number("margin", d.margin, 0.0, 1.0);
    s.integer("levels", d.levels, 3, 16);
    s.flag("classify", false);
    read_p(s);
    read_tol(s);
  } else if (op == "cartan_bounds") {
    const BoundsOptions d;
    const int dim = x0_dim();
    s.descriptor("set", dim);
    s.number("r", 1.0, 0.0, 1e300, true);
    s.number("sigma", d.sigma, 4.0, 1e6, true);
    s.integer("scales", d.scales, 1, 16);
    s.mark("Cprime");
    if (s.has("Cprime")) {
      s.number("Cprime", std::nullopt, 0.0, 1e300);
    } else {
      s.store("Cprime", nullptr);
    }
    s.integer("resolution", d.resolution, 16, 4096);
    s.number("gap_limit", d.gap_limit, 0.0, 1.0);
    read_p(s);
    read_tol(s);
  } else if (op == "cartan_boundary") {
    const BoundaryOptions d;
    read_ball(s, "ball", -1);
    const int dim = static_cast<int>(s.resolved().at("ball").at("center").size());
    read_ball(s, "outer", dim);
    s.descriptor("set", dim);
    s.integer("resolution", d.resolution, 4, 4096);
    s.number("relaxation", d.relaxation, 1.0, 1e6);
    read_p(s);
    read_tol(s);
  } else if (op == "cartan_strong") {
    const StrongCartanOptions d;
    const int dim = x0_dim();
    s.descriptor("set", dim);
    s.number("R", 1.0, 0.0, 1e300, true);
    s.integer("scales", d.scales, 1, 32);
    s.integer("resolution", d.resolution, 16, 4096);
    s.integer("max_halvings", d.max_halvings, 1, 60);
    read_p(s);
    read_tol(s);
  }
  return s.finish();
}

WienerOptions wiener_from(const json& c) {
  WienerOptions o;
  o.sigma = c.at("sigma");
  o.r0 = c.at("r0");
  o.scales = c.at("scales");
  o.resolution = c.at("resolution");
  o.mode = parse_mode(c.at("mode"));
  o.weight_exponent = c.at("weight_exponent");
  o.p = c.at("p");
  o.tol = c.at("tol");
  return o;
}

ClassificationPolicy policy_from(const json& c) {
  ClassificationPolicy p;
  p.rho_max = c.at("rho_max");
  p.eps_tail = c.at("eps_tail");
  p.tau_floor = c.at("tau_floor");
  p.K = c.at("K");
  return p;
}

struct Artifacts {
  std::map<std::string, std::string> files;
  json summary = json::object();
  bool json_out = true;
  bool csv_out = true;
  bool fields = true;

  void put_json(const std::string& name, const json& j) {
    if (json_out) files[name] = dump_json(j);
  }
  template <class F>
  void put_csv(const std::string& name, F&& writer, bool is_field = false) {
    if (!csv_out || (is_field && !fields)) return;
    std::ostringstream ss;
    writer(ss);
    files[name] = ss.str();
  }
};

void run_operation(const json& problem, const SpacePtr& space, std::uint64_t seed, Artifacts& out) {
  const std::string op = problem.at("operation");
  const auto set = [&](const char* key) { return AnalyticSet::from_json(problem.at(key)); };
  const auto region = [&](const char* key) { return region_from_descriptor(*space, set(key)); };
  const double p = problem.at("p");
  const double tol = problem.value("tol", 1e-8);

  if (op == "space") {
    json j = {{"nodes", space->size()},
              {"edges", space->edges().size()},
              {"dim", space->dim()},
              {"builder", space->meta().builder},
              {"parameters", space->meta().parameters},
              {"total_measure", space->total_measure()},
              {"diameter", space->diameter()}};
    if (problem.at("geometry").get<bool>()) {
      GeometryOptions g;
      g.sample_count = problem.at("samples");
      g.min_radius_cells = problem.at("min_radius_cells");
      g.p = p;
      g.rng_seed = seed;
      j["geometry"] = to_json(geometry_report(*space, g));
    }
    out.files["space.txt"] = format_space(*space);
    out.put_json("space.json", j);
    out.summary = {{"nodes", space->size()}, {"edges", space->edges().size()}};
  } else if (op == "capacity") {
    const CapacityResult r = problem.at("kind") == "sobolev"
                                 ? sobolev_capacity(*space, region("set"), p, tol)
                                 : variational_capacity(*space, region("set"), region("domain"), p, tol);
    out.put_json("capacity.json", to_json(r));
    out.put_csv("minimizer.csv", [&](std::ostream& o) { write_field_csv(o, *space, r.minimizer); }, true);
    out.summary = {{"value", json_number(r.value)}};
  } else if (op == "potential") {
    const SolveResult r = capacitary_potential(*space, region("set"), region("domain"), p, tol);
    out.put_json("potential.json", to_json(r, *space));
    out.put_csv("potential.csv", [&](std::ostream& o) { write_field_csv(o, *space, r.field); }, true);
    out.summary = {{"energy", json_number(r.energy)}, {"converged", r.converged}};
  } else if (op == "comparison") {
    const Ball b{space->nearest_node(problem.at("center").get<Point>()), problem.at("radius")};
    const ComparisonReport r = capacity_comparison_check(*space, region("set"), b, p, tol);
    out.put_json("comparison.json", to_json(r));
    out.summary = {{"bounds_hold", r.bounds_hold}};
  } else if (op == "shrink") {
    const Point x0 = problem.at("x0").get<Point>();
    const ShrinkProfile r = capacity_shrink_profile(*space, region("set"), x0, point_ball(*space, x0, problem.at("radius")),
                                                    problem.at("radii").get<std::vector<double>>(), p, tol);
    out.put_json("shrink.json", to_json(r));
    out.put_csv("shrink.csv", [&](std::ostream& o) { write_shrink_csv(o, r); });
    out.summary = {{"monotone", r.monotone}};
  } else if (op == "harnack") {
    HarnackOptions h;
    h.q = problem.at("q");
    h.p = p;
    h.samples = problem.at("samples");
    h.rng_seed = seed;
    h.family = parse_family(problem.at("family"));
    const std::string form = problem.at("form");
    h.form = form == "sub" ? HarnackForm::Sub : form == "super" ? HarnackForm::Super : HarnackForm::Both;
    h.relaxation = problem.at("relaxation");
    h.tol = tol;
    const Ball b{space->nearest_node(problem.at("center").get<Point>()), problem.at("radius")};
    const HarnackReport r = harnack_check(*space, b, h);
    out.put_json("harnack.json", to_json(r));
    out.summary = {{"max_ratio", json_number(r.max_ratio)}};
  } else if (op == "wiener") {
    const WienerReport r = wiener_terms(set("set"), problem.at("x0").get<Point>(), wiener_from(problem));
    const ClassificationPolicy pol = policy_from(problem.at("policy"));
    const Classification c = classify_thin(r, pol);
    out.put_json("wiener.json", {{"report", to_json(r)}, {"classification", to_json(c)}, {"policy", to_json(pol)}});
    out.put_csv("terms.csv", [&](std::ostream& o) { write_terms_csv(o, r); });
    out.summary = {{"verdict", to_string(c.verdict)}, {"decay_ratio", json_number(c.decay_ratio)}};
  } else if (op == "thin_union") {
    const WienerOptions w = wiener_from(problem);
    const ClassificationPolicy pol = policy_from(problem.at("policy"));
    const Point x0 = problem.at("x0").get<Point>();
    std::vector<WienerReport> parts;
    for (const auto& d : problem.at("sets")) parts.push_back(wiener_terms(AnalyticSet::from_json(d), x0, w));
    const ThinUnionResult r = thin_union_radii(parts, problem.at("budget"), pol);
    out.put_json("thin_union.json", to_json(r));
    out.put_csv("terms.csv", [&](std::ostream& o) { write_terms_csv(o, r.combined); });
    out.summary = {{"verdict", to_string(r.classification.verdict)}};
  } else if (op == "cartan_weak") {
    WeakCartanOptions o;
    o.sigma = problem.at("sigma");
    o.p = p;
    o.resolution = problem.at("resolution");
    o.tol = tol;
    o.coverage_tol = problem.at("coverage_tol");
    o.margin = problem.at("margin");
    o.levels = problem.at("levels");
    o.classify = problem.at("classify");
    o.wiener.p = p;
    const CartanCertificate c = weak_cartan(set("set"), problem.at("x0").get<Point>(), problem.at("r"), o);
    out.put_json("cartan_weak.json", to_json(c));
    out.put_csv("u.csv", [&](std::ostream& s) { write_field_csv(s, *c.space, c.u); }, true);
    out.put_csv("u_prime.csv", [&](std::ostream& s) { write_field_csv(s, *c.space, c.u_prime); }, true);
    out.summary = {{"valid", c.valid}, {"u_at_x0", json_number(c.u_at_x0)}, {"uprime_at_x0", json_number(c.uprime_at_x0)}};
  } else if (op == "cartan_bounds") {
    BoundsOptions o;
    o.sigma = problem.at("sigma");
    o.p = p;
    o.scales = problem.at("scales");
    if (!problem.at("Cprime").is_null()) o.Cprime = problem.at("Cprime").get<double>();
    o.resolution = problem.at("resolution");
    o.tol = tol;
    o.gap_limit = problem.at("gap_limit");
    const BoundsReport r = potential_product_bounds(set("set"), problem.at("x0").get<Point>(), problem.at("r"), o);
    out.put_json("cartan_bounds.json", to_json(r));
    out.summary = {{"bounds_hold", r.bounds_hold}, {"u_at_x0", json_number(r.u_at_x0)}};
  } else if (op == "cartan_boundary") {
    BoundaryOptions o;
    o.p = p;
    o.resolution = problem.at("resolution");
    o.relaxation = problem.at("relaxation");
    o.tol = tol;
    const auto ball = [&](const char* key) {
      return PointBall{problem.at(key).at("center").get<Point>(), problem.at(key).at("radius").get<double>()};
    };
    const BoundaryReport r = boundary_estimate_check(set("set"), ball("ball"), ball("outer"), o);
    out.put_json("cartan_boundary.json", to_json(r));
    out.summary = {{"implied_Cprime", json_number(r.implied_Cprime)},
                   {"implied_Cdoubleprime", json_number(r.implied_Cdoubleprime)}};
  } else if (op == "cartan_strong") {
    StrongCartanOptions o;
    o.p = p;
    o.scales = problem.at("scales");
    o.tol = tol;
    o.resolution = problem.at("resolution");
    o.max_halvings = problem.at("max_halvings");
    const StrongCartanResult r = strong_cartan_positive_cap(set("set"), problem.at("x0").get<Point>(), problem.at("R"), o);
    out.put_json("cartan_strong.json", to_json(r));
    out.put_csv("u.csv", [&](std::ostream& s) { write_field_csv(s, *r.space, r.u); }, true);
    out.put_csv("v.csv", [&](std::ostream& s) { write_field_csv(s, *r.space, r.v); }, true);
    out.summary = {{"valid", r.valid}, {"u_at_x0", json_number(r.u_at_x0)}};
  }
}

template <class F>
auto staged(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(e.code(), "stage " + stage + ": " + e.detail());
  }
}

}  // namespace

ScenarioConfig parse_scenario(const json& raw) {
  Section top(raw, "");
  ScenarioConfig cfg;
  top.mark("seed");
  if (top.has("seed")) {
    if (!raw.at("seed").is_number_unsigned()) config_error("seed", "expected a nonnegative integer");
    cfg.seed = raw.at("seed").get<std::uint64_t>();
  }
  top.mark("problem");
  if (!top.has("problem")) config_error("problem", "required");
  top.mark("space");
  top.mark("output");
  {
    // The operation decides whether a space section is needed.
    const json& praw = raw.at("problem");
    if (!praw.is_object()) config_error("problem", "expected an object");
    const std::string op = praw.value("operation", std::string());
    int dim = -1;
    if (needs_space(op)) {
      if (!top.has("space")) config_error("space", "required for operation '" + op + "'");
      Section s(raw.at("space"), "space");
      dim = parse_space_section(s);
      cfg.space = s.finish();
    } else if (top.has("space") && !op.empty()) {
      config_error("space", "operation '" + op + "' builds its own grids; remove this section");
    }
    Section p(praw, "problem");
    cfg.problem = parse_problem(p, dim);
  }
  {
    static const json empty = json::object();
    Section o(top.has("output") ? raw.at("output") : empty, "output");
    if (o.has("directory")) {
      o.text("directory");
    } else {
      o.mark("directory");
      o.store("directory", "finelab_out");
    }
    o.mark("formats");
    json formats = json::array({"json", "csv"});
    if (o.has("formats")) {
      formats = raw.at("output").at("formats");
      if (!formats.is_array()) config_error("output.formats", "expected an array");
      for (const auto& f : formats) {
        if (!f.is_string() || (f != "json" && f != "csv")) config_error("output.formats", "entries must be \"json\" or \"csv\"");
      }
    }
    o.store("formats", formats);
    o.flag("fields", true);
    cfg.output = o.finish();
  }
  top.finish();
  cfg.resolved = {{"space", cfg.space}, {"problem", cfg.problem}, {"output", cfg.output}, {"seed", cfg.seed}};
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json raw;
  try {
    raw = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return parse_scenario(raw);
}

RunManifest run_scenario(const ScenarioConfig& cfg, const std::optional<std::filesystem::path>& out) {
  using clock = std::chrono::steady_clock;
  RunManifest m;
  m.config = cfg.resolved;
  m.version = std::string(kToolVersion);
  m.defaults = defaults_table();

  Artifacts art;
  art.json_out = false;
  art.csv_out = false;
  for (const auto& f : cfg.output.at("formats")) {
    art.json_out |= f == "json";
    art.csv_out |= f == "csv";
  }
  art.fields = cfg.output.at("fields");

  SpacePtr space;
  auto t0 = clock::now();
  if (!cfg.space.is_null()) {
    space = staged("space", [&] { return build_space(cfg.space); });
    m.stage_seconds.emplace_back("space", std::chrono::duration<double>(clock::now() - t0).count());
  }
  const std::string op = cfg.problem.at("operation");
  t0 = clock::now();
  staged(op, [&] {
    run_operation(cfg.problem, space, cfg.seed, art);
    return 0;
  });
  m.stage_seconds.emplace_back(op, std::chrono::duration<double>(clock::now() - t0).count());
  m.summary = art.summary;

  t0 = clock::now();
  const std::filesystem::path dir = out ? *out : std::filesystem::path(cfg.output.at("directory").get<std::string>());
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create output directory " + dir.string() + ": " + ec.message());
  for (const auto& [name, bytes] : art.files) {
    write_file(dir / name, bytes);
    m.files.push_back({name, bytes.size(), sha256_hex(bytes)});
  }
  m.stage_seconds.emplace_back("write", std::chrono::duration<double>(clock::now() - t0).count());
  write_file(dir / "manifest.json", dump_json(manifest_json(m)));
  write_file(dir / "timings.json", dump_json(timings_json(m)));
  return m;
}

json manifest_json(const RunManifest& m) {
  json files = json::array();
  for (const auto& f : m.files) files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  return {{"tool", "finelab"},
          {"version", m.version},
          {"config", m.config},
          {"defaults", m.defaults},
          {"files", files},
          {"summary", m.summary},
          {"timings_file", "timings.json"}};
}

json timings_json(const RunManifest& m) {
  json stages = json::array();
  for (const auto& [name, s] : m.stage_seconds) stages.push_back({{"stage", name}, {"seconds", s}});
  return {{"stages", stages}};
}

}  // namespace finelab
