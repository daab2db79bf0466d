// finelab command line: every subcommand is translated into a scenario
// config and executed by the same runner as `finelab run --config`.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>

#include "finelab/error.hpp"
#include "finelab/report_io.hpp"
#include "finelab/scenario.hpp"

using nlohmann::json;

namespace {

struct SpaceFlags {
  std::string file;
  int dim = 2;
  double half_width = 1.0;
  double h = 1.0 / 64;
  double alpha = 0.0;

  void attach(CLI::App* app) {
    app->add_option("--space", file, "space file (text format); default is a cube grid");
    app->add_option("--dim", dim, "cube grid dimension");
    app->add_option("--half-width", half_width, "cube grid half width");
    app->add_option("--spacing", h, "cube grid spacing");
    app->add_option("--alpha", alpha, "density exponent |x|^alpha");
  }
  json config() const {
    if (!file.empty()) return {{"builder", "file"}, {"path", file}};
    return {{"builder", "cube"}, {"dim", dim}, {"half_width", half_width}, {"h", h}, {"weight_exponent", alpha}};
  }
};

/// Copies an option into the problem section only when the user gave it,
/// so defaults stay in one place.
template <class T>
void put(json& j, const char* key, CLI::Option* opt, const T& value) {
  if (opt->count() > 0) j[key] = value;
}

json point_json(const std::vector<double>& v) { return v; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finelab: capacities, Wiener sums and Cartan-type constructions on weighted graphs"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  std::string config_path;
  std::string out_dir = "finelab_out";
  auto* config_opt = app.add_option("--config", config_path, "scenario config (JSON)");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  bool quiet = false;
  app.add_flag("--quiet", quiet, "print nothing on success");

  json config;
  std::optional<std::string> out_override;

  // run
  auto* run = app.add_subcommand("run", "run a scenario config");
  run->add_option("--config", config_path, "scenario config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (overrides output.directory)");

  // space build|load|check
  auto* space = app.add_subcommand("space", "build, load or check a space");
  space->require_subcommand(1);
  auto* space_build = space->add_subcommand("build", "build a grid or radial space and save it");
  std::string builder = "grid";
  int dim = 2;
  std::vector<double> lo{-1, -1}, hi{1, 1};
  double h = 1.0 / 64, alpha = 0.0, rmin = 0.0, rmax = 1.0;
  int radial_n = 2;
  space_build->add_option("--builder", builder, "grid or radial")->check(CLI::IsMember({"grid", "radial"}));
  space_build->add_option("--dim", dim, "grid dimension");
  space_build->add_option("--lo", lo, "lower corner")->delimiter(',');
  space_build->add_option("--hi", hi, "upper corner")->delimiter(',');
  space_build->add_option("--spacing", h, "spacing");
  space_build->add_option("--alpha", alpha, "density exponent");
  space_build->add_option("--n", radial_n, "ambient dimension of the radial reduction");
  space_build->add_option("--rmin", rmin, "inner radius");
  space_build->add_option("--rmax", rmax, "outer radius");
  space_build->add_option("--out", out_dir, "output directory");
  std::string space_file;
  int geometry_samples = 64;
  auto* space_load = space->add_subcommand("load", "load a space file and summarize it");
  space_load->add_option("file", space_file, "space file")->required();
  space_load->add_option("--out", out_dir, "output directory");
  auto* space_check = space->add_subcommand("check", "empirical doubling and Poincare constants");
  space_check->add_option("file", space_file, "space file")->required();
  space_check->add_option("--samples", geometry_samples, "number of sampled balls");
  space_check->add_option("--out", out_dir, "output directory");

  // shared problem flags
  std::string set_text, domain_text;
  double p = 2.0, tol = 1e-8;

  // cap
  auto* cap = app.add_subcommand("cap", "capacity of a set");
  SpaceFlags cap_space;
  cap_space.attach(cap);
  std::string kind = "variational";
  cap->add_option("--set", set_text, "set descriptor")->required();
  cap->add_option("--domain", domain_text, "domain descriptor (variational capacity)");
  cap->add_option("--kind", kind, "variational or sobolev")->check(CLI::IsMember({"variational", "sobolev"}));
  auto* cap_p = cap->add_option("--p", p, "exponent");
  auto* cap_tol = cap->add_option("--tol", tol, "solver tolerance");
  cap->add_option("--out", out_dir, "output directory");

  // potential
  auto* pot = app.add_subcommand("potential", "capacitary potential of a set in a domain");
  SpaceFlags pot_space;
  pot_space.attach(pot);
  pot->add_option("--set", set_text, "set descriptor")->required();
  pot->add_option("--domain", domain_text, "domain descriptor")->required();
  auto* pot_p = pot->add_option("--p", p, "exponent");
  auto* pot_tol = pot->add_option("--tol", tol, "solver tolerance");
  pot->add_option("--out", out_dir, "output directory");

  // wiener
  auto* wiener = app.add_subcommand("wiener", "Wiener terms and thin/thick verdict at a point");
  std::vector<double> x0{0.0, 0.0};
  double sigma = 2.0, r0 = 1.0;
  int scales = 12, resolution = 128;
  std::string mode = "rescaled";
  wiener->add_option("--set", set_text, "set descriptor")->required();
  wiener->add_option("--x0", x0, "base point, comma separated")->delimiter(',');
  auto* w_sigma = wiener->add_option("--sigma", sigma, "scale ratio");
  auto* w_r0 = wiener->add_option("--r0", r0, "outer radius");
  auto* w_scales = wiener->add_option("--scales", scales, "number of scales J");
  auto* w_res = wiener->add_option("--resolution", resolution, "cells per unit radius");
  auto* w_mode = wiener->add_option("--mode", mode, "rescaled or global");
  auto* w_p = wiener->add_option("--p", p, "exponent");
  auto* w_tol = wiener->add_option("--tol", tol, "solver tolerance");
  wiener->add_option("--out", out_dir, "output directory");

  // cartan weak|bounds|boundary|strong
  auto* cartan = app.add_subcommand("cartan", "Cartan-type constructions");
  cartan->require_subcommand(1);
  double radius = 1.0, cprime = 0.0, relaxation = 8.0;
  int levels = 3, max_halvings = 24;
  bool classify = false;
  std::vector<double> ball_c{0.0, 0.0}, outer_c{0.0, 0.0};
  double ball_r = 0.1, outer_r = 0.8;
  std::map<std::string, CLI::Option*> copt;
  auto common = [&](CLI::App* c, const std::string& tag) {
    c->add_option("--set", set_text, "set descriptor")->required();
    copt[tag + "p"] = c->add_option("--p", p, "exponent");
    copt[tag + "tol"] = c->add_option("--tol", tol, "solver tolerance");
    copt[tag + "res"] = c->add_option("--resolution", resolution, "grid resolution");
    c->add_option("--out", out_dir, "output directory");
  };
  auto* weak = cartan->add_subcommand("weak", "separation certificate at x0");
  common(weak, "w");
  weak->add_option("--x0", x0, "base point")->delimiter(',');
  copt["wr"] = weak->add_option("--r", radius, "outer radius");
  copt["wsigma"] = weak->add_option("--sigma", sigma, "scale ratio (> 20)");
  copt["wlevels"] = weak->add_option("--levels", levels, "resolved annuli");
  weak->add_flag("--classify", classify, "also run the Wiener classification");
  auto* bounds = cartan->add_subcommand("bounds", "product bounds for the potential at x0");
  common(bounds, "b");
  bounds->add_option("--x0", x0, "base point")->delimiter(',');
  copt["br"] = bounds->add_option("--r", radius, "outer radius");
  copt["bsigma"] = bounds->add_option("--sigma", sigma, "scale ratio");
  copt["bscales"] = bounds->add_option("--scales", scales, "number of scales J");
  copt["bC"] = bounds->add_option("--cprime", cprime, "fixed C' (fitted when absent)");
  auto* boundary = cartan->add_subcommand("boundary", "sphere estimate for a far set");
  common(boundary, "d");
  boundary->add_option("--ball-center", ball_c, "center of B")->delimiter(',');
  boundary->add_option("--ball-radius", ball_r, "radius of B");
  boundary->add_option("--outer-center", outer_c, "center of B0")->delimiter(',');
  boundary->add_option("--outer-radius", outer_r, "radius of B0");
  copt["drelax"] = boundary->add_option("--relaxation", relaxation, "dilation factor");
  auto* strong = cartan->add_subcommand("strong", "shell construction at a point of positive capacity");
  common(strong, "s");
  strong->add_option("--x0", x0, "base point")->delimiter(',');
  copt["sR"] = strong->add_option("--R", radius, "outer radius");
  copt["sscales"] = strong->add_option("--scales", scales, "number of shells J");
  copt["shalv"] = strong->add_option("--max-halvings", max_halvings, "candidate radii R 2^-k");

  // verify harnack
  auto* verify = app.add_subcommand("verify", "numerical checks");
  verify->require_subcommand(1);
  auto* harnack = verify->add_subcommand("harnack", "Harnack ratios over a random family");
  SpaceFlags h_space;
  h_space.attach(harnack);
  std::vector<double> center{0.0, 0.0};
  double q = 1.0;
  int samples = 20;
  std::uint64_t seed = 1;
  std::string family = "harmonic";
  std::string form = "both";
  harnack->add_option("--center", center, "ball center")->delimiter(',');
  harnack->add_option("--radius", ball_r, "ball radius");
  auto* h_q = harnack->add_option("--q", q, "mean exponent");
  auto* h_p = harnack->add_option("--p", p, "exponent");
  auto* h_samples = harnack->add_option("--samples", samples, "family size");
  auto* h_family = harnack->add_option("--family", family, "constant, harmonic or capacitary_far_disk");
  auto* h_form = harnack->add_option("--form", form, "sub, super or both");
  auto* h_relax = harnack->add_option("--relaxation", relaxation, "domain dilation factor");
  harnack->add_option("--seed", seed, "random seed");
  harnack->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    json problem;
    json space_cfg;
    if (*run || (app.get_subcommands().empty() && config_opt->count() > 0)) {
      const auto cfg = finelab::load_scenario(config_path);
      if (out_opt->count() > 0 || run->get_option("--out")->count() > 0) out_override = out_dir;
      const auto m = finelab::run_scenario(cfg, out_override);
      if (!quiet) std::cout << finelab::dump_json(m.summary);
      return 0;
    }
    if (app.get_subcommands().empty()) {
      std::cerr << app.help();
      return 2;
    }
    if (*space_build) {
      space_cfg = builder == "grid"
                      ? json{{"builder", "grid"}, {"dim", dim}, {"lo", lo}, {"hi", hi}, {"h", h}, {"weight_exponent", alpha}}
                      : json{{"builder", "radial"}, {"n", radial_n}, {"rmin", rmin}, {"rmax", rmax}, {"h", h}, {"weight_exponent", alpha}};
      problem = {{"operation", "space"}};
    } else if (*space_load) {
      space_cfg = {{"builder", "file"}, {"path", space_file}};
      problem = {{"operation", "space"}};
    } else if (*space_check) {
      space_cfg = {{"builder", "file"}, {"path", space_file}};
      problem = {{"operation", "space"}, {"geometry", true}, {"samples", geometry_samples}};
    } else if (*cap) {
      space_cfg = cap_space.config();
      problem = {{"operation", "capacity"}, {"kind", kind}, {"set", set_text}};
      if (!domain_text.empty()) problem["domain"] = domain_text;
      put(problem, "p", cap_p, p);
      put(problem, "tol", cap_tol, tol);
    } else if (*pot) {
      space_cfg = pot_space.config();
      problem = {{"operation", "potential"}, {"set", set_text}, {"domain", domain_text}};
      put(problem, "p", pot_p, p);
      put(problem, "tol", pot_tol, tol);
    } else if (*wiener) {
      problem = {{"operation", "wiener"}, {"set", set_text}, {"x0", point_json(x0)}};
      put(problem, "sigma", w_sigma, sigma);
      put(problem, "r0", w_r0, r0);
      put(problem, "scales", w_scales, scales);
      put(problem, "resolution", w_res, resolution);
      put(problem, "mode", w_mode, mode);
      put(problem, "p", w_p, p);
      put(problem, "tol", w_tol, tol);
    } else if (*weak) {
      problem = {{"operation", "cartan_weak"}, {"set", set_text}, {"x0", point_json(x0)}, {"classify", classify}};
      put(problem, "r", copt["wr"], radius);
      put(problem, "sigma", copt["wsigma"], sigma);
      put(problem, "levels", copt["wlevels"], levels);
      put(problem, "p", copt["wp"], p);
      put(problem, "tol", copt["wtol"], tol);
      put(problem, "resolution", copt["wres"], resolution);
    } else if (*bounds) {
      problem = {{"operation", "cartan_bounds"}, {"set", set_text}, {"x0", point_json(x0)}};
      put(problem, "r", copt["br"], radius);
      put(problem, "sigma", copt["bsigma"], sigma);
      put(problem, "scales", copt["bscales"], scales);
      put(problem, "Cprime", copt["bC"], cprime);
      put(problem, "p", copt["bp"], p);
      put(problem, "tol", copt["btol"], tol);
      put(problem, "resolution", copt["bres"], resolution);
    } else if (*boundary) {
      problem = {{"operation", "cartan_boundary"},
                 {"set", set_text},
                 {"ball", {{"center", ball_c}, {"radius", ball_r}}},
                 {"outer", {{"center", outer_c}, {"radius", outer_r}}}};
      put(problem, "relaxation", copt["drelax"], relaxation);
      put(problem, "p", copt["dp"], p);
      put(problem, "tol", copt["dtol"], tol);
      put(problem, "resolution", copt["dres"], resolution);
    } else if (*strong) {
      problem = {{"operation", "cartan_strong"}, {"set", set_text}, {"x0", point_json(x0)}};
      put(problem, "R", copt["sR"], radius);
      put(problem, "scales", copt["sscales"], scales);
      put(problem, "max_halvings", copt["shalv"], max_halvings);
      put(problem, "p", copt["sp"], p);
      put(problem, "tol", copt["stol"], tol);
      put(problem, "resolution", copt["sres"], resolution);
    } else if (*harnack) {
      space_cfg = h_space.config();
      problem = {{"operation", "harnack"}, {"center", center}, {"radius", ball_r}};
      put(problem, "q", h_q, q);
      put(problem, "p", h_p, p);
      put(problem, "samples", h_samples, samples);
      put(problem, "family", h_family, family);
      put(problem, "form", h_form, form);
      put(problem, "relaxation", h_relax, relaxation);
    }
    config = {{"problem", problem}, {"output", {{"directory", out_dir}}}, {"seed", seed}};
    if (!space_cfg.is_null()) config["space"] = space_cfg;
    const auto cfg = finelab::parse_scenario(config);
    const auto m = finelab::run_scenario(cfg);
    if (!quiet) std::cout << finelab::dump_json(m.summary);
    return 0;
  } catch (const finelab::Error& e) {
    std::cerr << "finelab: " << e.what() << "\n";
    return finelab::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "finelab: unexpected failure: " << e.what() << "\n";
    return 1;
  }
}
