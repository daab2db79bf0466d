#include "finelab/report_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "finelab/error.hpp"

namespace finelab {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json json_number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  fail(ErrorCode::ParseError, "expected a number, got " + j.dump());
}

namespace {

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

json point(const Point& p) { return numbers(p); }

json diagnostics(const CapacityDiagnostics& d) {
  return {{"iterations", d.iterations}, {"kkt_residual", json_number(d.kkt_residual)}, {"converged", d.converged}};
}

json solve_summary(const SolveResult& r) {
  return {{"energy", json_number(r.energy)},
          {"kkt_residual", json_number(r.kkt_residual)},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"active_nodes", r.active_set.size()}};
}

json annuli(const std::vector<AnnulusInfo>& v) {
  json a = json::array();
  for (const auto& x : v) {
    a.push_back({{"j", x.j}, {"r_in", json_number(x.r_in)}, {"r_out", json_number(x.r_out)}, {"nodes", x.nodes}});
  }
  return a;
}

json ball(const PointBall& b) { return {{"center", point(b.center)}, {"radius", json_number(b.radius)}}; }

}  // namespace

json to_json(const SolveResult& r, const WeightedGraphSpace& space) {
  json j = solve_summary(r);
  json ids = json::array();
  for (auto i : r.active_set.nodes()) ids.push_back(space.id(i));
  j["active_set"] = ids;
  return j;
}

json to_json(const CapacityResult& r) {
  return {{"value", json_number(r.value)},
          {"lp_term", json_number(r.lp_term)},
          {"energy_term", json_number(r.energy_term)},
          {"diagnostics", diagnostics(r.diagnostics)}};
}

json to_json(const ComparisonReport& r) {
  return {{"ratios", numbers({r.ratios.begin(), r.ratios.end()})},
          {"bounds_hold", r.bounds_hold},
          {"measure_E", json_number(r.measure_E)},
          {"measure_B", json_number(r.measure_B)},
          {"cap_2B", json_number(r.cap_2B)},
          {"sobolev", json_number(r.sobolev)},
          {"radius", json_number(r.radius)}};
}

json to_json(const MonotonicityReport& r) {
  return {{"cap_t", json_number(r.cap_t)},     {"cap_tau", json_number(r.cap_tau)},
          {"ratio", json_number(r.ratio)},     {"ratio_bound", json_number(r.ratio_bound)},
          {"monotone", r.monotone},            {"within_bound", r.within_bound}};
}

json to_json(const GeometryReport& r) {
  return {{"doubling_constant_empirical", json_number(r.doubling_constant_empirical)},
          {"poincare_constant_empirical", json_number(r.poincare_constant_empirical)},
          {"sample_count", r.sample_count},
          {"failures", r.failures}};
}

json to_json(const SuperminimizerReport& r) {
  return {{"is_violated", r.is_violated}, {"worst_margin", json_number(r.worst_margin)}, {"trials", r.trials}};
}

json to_json(const WienerOptions& o) {
  return {{"sigma", json_number(o.sigma)},   {"r0", json_number(o.r0)},
          {"scales", o.scales},              {"p", json_number(o.p)},
          {"resolution", o.resolution},      {"mode", to_string(o.mode)},
          {"tol", json_number(o.tol)},       {"weight_exponent", json_number(o.weight_exponent)}};
}

json to_json(const ClassificationPolicy& p) {
  return {{"rho_max", json_number(p.rho_max)},
          {"eps_tail", json_number(p.eps_tail)},
          {"tau_floor", json_number(p.tau_floor)},
          {"K", p.K}};
}

json to_json(const WienerReport& r) {
  json scales = json::array();
  for (const auto& d : r.scales) {
    scales.push_back({{"j", d.j},
                      {"r_j", json_number(d.r_j)},
                      {"cap_num", json_number(d.cap_num)},
                      {"cap_den", json_number(d.cap_den)},
                      {"term", json_number(d.term)},
                      {"kkt_residual", json_number(d.kkt_residual)},
                      {"iterations", d.iterations},
                      {"converged", d.converged},
                      {"convention", d.convention},
                      {"above_one", d.above_one}});
  }
  return {{"descriptor", r.descriptor.to_json()},
          {"x0", point(r.x0)},
          {"options", to_json(r.options)},
          {"terms", numbers(r.terms)},
          {"partial_sums", numbers(r.partial_sums)},
          {"scales", scales},
          {"skipped_scales", r.skipped_scales},
          {"decay_ratio", json_number(r.decay_ratio)},
          {"convention_hits", r.convention_hits},
          {"max_term", json_number(r.max_term)},
          {"flagged", r.flagged}};
}

json to_json(const Classification& c) {
  return {{"verdict", to_string(c.verdict)},
          {"tail_estimate", json_number(c.tail_estimate)},
          {"floor_estimate", json_number(c.floor_estimate)},
          {"decay_ratio", json_number(c.decay_ratio)},
          {"scales_used", c.scales_used}};
}

json to_json(const ShrinkProfile& s) {
  json pts = json::array();
  for (const auto& p : s.points) {
    pts.push_back({{"rho", json_number(p.rho)}, {"capacity", json_number(p.capacity)}, {"diagnostics", diagnostics(p.diagnostics)}});
  }
  return {{"points", pts}, {"monotone", s.monotone}};
}

json to_json(const ThinUnionResult& r) {
  return {{"radii", numbers(r.radii)},
          {"truncation", r.truncation},
          {"tails", numbers(r.tails)},
          {"union_descriptor", r.union_descriptor.to_json()},
          {"combined", to_json(r.combined)},
          {"classification", to_json(r.classification)},
          {"parts_sum", json_number(r.parts_sum)}};
}

json to_json(const CartanCertificate& c) {
  json viol = json::array();
  for (auto id : c.coverage_violations) viol.push_back(id);
  json j = {{"B0", ball(c.B0)},
            {"B", ball(c.B)},
            {"sigma", json_number(c.sigma)},
            {"nodes", c.space ? c.space->size() : 0},
            {"annuli", annuli(c.annuli)},
            {"annuli_prime", annuli(c.annuli_prime)},
            {"u_at_x0", json_number(c.u_at_x0)},
            {"uprime_at_x0", json_number(c.uprime_at_x0)},
            {"level_set_F", c.level_set_F},
            {"level_set_F_prime", c.level_set_F_prime},
            {"coverage_violations", viol},
            {"covered_nodes", c.covered_nodes},
            {"resolvable_annuli", c.resolvable_annuli},
            {"valid", c.valid},
            {"expected_invalid", c.expected_invalid},
            {"u_solve", solve_summary(c.u_solve)},
            {"uprime_solve", solve_summary(c.uprime_solve)}};
  j["verdict"] = c.verdict ? json(to_string(*c.verdict)) : json(nullptr);
  return j;
}

json to_json(const BoundsReport& r) {
  return {{"quotients", numbers(r.quotients)},
          {"a", numbers(r.a)},
          {"upper_products", numbers(r.upper_products)},
          {"lower_products", numbers(r.lower_products)},
          {"u_at_x0", json_number(r.u_at_x0)},
          {"fitted_Cprime", json_number(r.fitted_Cprime)},
          {"fitted_c", json_number(r.fitted_c)},
          {"Cprime_used", json_number(r.Cprime_used)},
          {"Cprime_supplied", r.Cprime_supplied},
          {"wolff_sum", json_number(r.wolff_sum)},
          {"wolff_holds", r.wolff_holds},
          {"bounds_hold", r.bounds_hold},
          {"partial_product_holds", r.partial_product_holds},
          {"removed_fraction", json_number(r.removed_fraction)},
          {"upper_bound", json_number(r.upper_bound)},
          {"lower_bound", json_number(r.lower_bound)}};
}

json to_json(const BoundaryReport& r) {
  return {{"sup_on_sphere", json_number(r.sup_on_sphere)},
          {"inf_on_sphere", json_number(r.inf_on_sphere)},
          {"inf_on_ball", json_number(r.inf_on_ball)},
          {"cap_E", json_number(r.cap_E)},
          {"cap_B", json_number(r.cap_B)},
          {"quotient_rhs", json_number(r.quotient_rhs)},
          {"implied_Cprime", json_number(r.implied_Cprime)},
          {"implied_Cdoubleprime", json_number(r.implied_Cdoubleprime)},
          {"sphere_nodes", r.sphere_nodes},
          {"relaxation", json_number(r.relaxation)},
          {"relaxed", r.relaxed}};
}

json to_json(const StrongCartanResult& r) {
  return {{"nodes", r.space ? r.space->size() : 0},
          {"radii", numbers(r.radii)},
          {"shell_capacity", numbers(r.shell_capacity)},
          {"budgets", numbers(r.budgets)},
          {"shell_sizes", r.shell_sizes},
          {"u_at_x0", json_number(r.u_at_x0)},
          {"min_on_E_near_x0", numbers(r.min_on_E_near_x0)},
          {"levels_hold", r.levels_hold},
          {"valid", r.valid}};
}

json to_json(const HarnackReport& r) {
  return {{"q", json_number(r.q)},
          {"sub_ratios", numbers(r.sub_ratios)},
          {"super_ratios", numbers(r.super_ratios)},
          {"max_ratio", json_number(r.max_ratio)},
          {"function_family", r.function_family}};
}

void write_terms_csv(std::ostream& out, const WienerReport& r) {
  out << "j,r_j,cap_num,cap_den,t_j,partial_sum\n";
  for (std::size_t k = 0; k < r.scales.size(); ++k) {
    const auto& d = r.scales[k];
    out << d.j << ',' << format_double(d.r_j) << ',' << format_double(d.cap_num) << ',' << format_double(d.cap_den)
        << ',' << format_double(d.term) << ',' << format_double(r.partial_sums[k]) << '\n';
  }
}

void write_shrink_csv(std::ostream& out, const ShrinkProfile& s) {
  out << "rho,capacity,kkt_residual,iterations\n";
  for (const auto& p : s.points) {
    out << format_double(p.rho) << ',' << format_double(p.capacity) << ',' << format_double(p.diagnostics.kkt_residual)
        << ',' << p.diagnostics.iterations << '\n';
  }
}

void write_field_csv(std::ostream& out, const WeightedGraphSpace& space, const ScalarField& field) {
  require(field.empty() || field.size() == space.size(), ErrorCode::InvalidArgument, "field size does not match the space");
  out << "node_id,value\n";
  for (std::size_t i = 0; i < field.size(); ++i) {
    out << space.id(static_cast<NodeIndex>(i)) << ',' << format_double(field[i]) << '\n';
  }
}

ScalarField read_field_csv(std::istream& in, const WeightedGraphSpace& space) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "node_id,value", ErrorCode::ParseError,
          "field CSV must start with the header node_id,value");
  ScalarField field(space.size(), NAN);
  std::vector<std::uint8_t> seen(space.size(), 0);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected id,value");
    NodeId id = 0;
    const char* b = line.data();
    auto [ptr, ec] = std::from_chars(b, b + comma, id);
    require(ec == std::errc() && ptr == b + comma, ErrorCode::ParseError,
            "line " + std::to_string(lineno) + ": bad node id");
    const std::string text = line.substr(comma + 1);
    double v = 0.0;
    if (text == "inf") {
      v = INFINITY;
    } else if (text == "-inf") {
      v = -INFINITY;
    } else if (text == "nan") {
      v = NAN;
    } else {
      auto [p2, ec2] = std::from_chars(text.data(), text.data() + text.size(), v);
      require(ec2 == std::errc() && p2 == text.data() + text.size(), ErrorCode::ParseError,
              "line " + std::to_string(lineno) + ": bad value '" + text + "'");
    }
    const auto i = static_cast<std::size_t>(space.index_of(id));
    require(!seen[i], ErrorCode::ParseError, "line " + std::to_string(lineno) + ": node listed twice");
    seen[i] = 1;
    field[i] = v;
  }
  for (auto s : seen) require(s != 0, ErrorCode::ParseError, "field CSV does not cover every node");
  return field;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace finelab
