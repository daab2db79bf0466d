#include "finelab/capacity.hpp"

#include <cmath>

#include "finelab/error.hpp"

namespace finelab {

namespace {

CapacityDiagnostics diagnostics_of(const SolveResult& r) {
  return {r.iterations, r.kkt_residual, r.converged};
}

}  // namespace

CapacityResult sobolev_capacity(const WeightedGraphSpace& space, const Region& E, double p, double tol) {
  check_exponent(p);
  const std::size_t n = space.size();
  CapacityResult res;
  res.minimizer.assign(n, 0.0);
  if (E.empty()) return res;
  BoxProblem prob;
  prob.p = p;
  prob.free.assign(n, 1);
  prob.fixed_value.assign(n, 0.0);
  prob.lower.assign(n, kUnconstrained);
  prob.mass.assign(space.measures().begin(), space.measures().end());
  for (auto i : E.nodes()) {
    prob.free[static_cast<std::size_t>(i)] = 0;
    prob.fixed_value[static_cast<std::size_t>(i)] = 1.0;
  }
  SolverOptions opts;
  opts.tol = tol;
  const SolveResult r = solve_box_problem(space, prob, opts);
  res.minimizer = r.field;
  res.energy_term = r.energy;
  double lp = 0.0;
  for (std::size_t i = 0; i < n; ++i) lp += prob.mass[i] * std::pow(std::abs(r.field[i]), p);
  res.lp_term = lp;
  res.value = res.lp_term + res.energy_term;
  res.diagnostics = diagnostics_of(r);
  return res;
}

CapacityResult variational_capacity(const WeightedGraphSpace& space, const Region& E, const Region& A, double p,
                                    double tol) {
  check_exponent(p);
  require(E.subset_of(A), ErrorCode::EnotInA, "E must be contained in A");
  const std::size_t n = space.size();
  require(A.size() < n, ErrorCode::Infeasible, "the complement of A must be nonempty");
  CapacityResult res;
  res.minimizer.assign(n, 0.0);
  if (E.empty()) return res;
  BoxProblem prob;
  prob.p = p;
  prob.free = A.minus(E).mask(n);
  prob.fixed_value.assign(n, 0.0);
  for (auto i : E.nodes()) prob.fixed_value[static_cast<std::size_t>(i)] = 1.0;
  prob.lower.assign(n, kUnconstrained);
  SolverOptions opts;
  opts.tol = tol;
  const SolveResult r = solve_box_problem(space, prob, opts);
  res.minimizer = r.field;
  res.energy_term = r.energy;
  res.value = r.energy;
  res.diagnostics = diagnostics_of(r);
  return res;
}

SolveResult capacitary_potential(const WeightedGraphSpace& space, const Region& E, const Region& B, double p,
                                 double tol) {
  check_exponent(p);
  require(E.subset_of(B), ErrorCode::EnotInA, "E must be contained in B");
  const std::size_t n = space.size();
  require(B.size() < n, ErrorCode::Infeasible, "the complement of B must be nonempty");
  ObstacleSpec spec;
  spec.domain = B;
  spec.p = p;
  spec.obstacle.assign(n, 0.0);
  for (auto i : E.nodes()) spec.obstacle[static_cast<std::size_t>(i)] = 1.0;
  return solve_obstacle(space, spec, tol);
}

ComparisonReport capacity_comparison_check(const WeightedGraphSpace& space, const Region& E, const Ball& B,
                                           double p, double tol) {
  check_exponent(p);
  ComparisonReport rep;
  rep.radius = B.radius;
  require(B.radius < space.diameter() / 6.0, ErrorCode::GeometryViolation, "ball radius must be below diam/6");
  const Region ball = metric_ball(space, B);
  require(E.subset_of(ball), ErrorCode::EnotInA, "E must be contained in B");
  rep.measure_E = E.measure(space);
  rep.measure_B = ball.measure(space);
  if (E.empty()) return rep;
  const Region twice = metric_ball(space, B.center, 2.0 * B.radius, B.closed);
  rep.cap_2B = variational_capacity(space, E, twice, p, tol).value;
  rep.sobolev = sobolev_capacity(space, E, p, tol).value;
  const double rp = std::pow(B.radius, p);
  rep.ratios[0] = rep.measure_E / (rp * rep.cap_2B);
  rep.ratios[1] = rep.cap_2B * rp / rep.measure_B;
  rep.ratios[2] = rep.sobolev / ((1.0 + rp) * rep.cap_2B);
  rep.ratios[3] = rep.cap_2B / ((1.0 + 1.0 / rp) * rep.sobolev);
  for (double r : rep.ratios) rep.bounds_hold = rep.bounds_hold && std::isfinite(r);
  return rep;
}

MonotonicityReport annulus_monotonicity_check(const WeightedGraphSpace& space, const Region& E, const Ball& B,
                                              double t, double tau, double p, double ratio_bound, double tol) {
  check_exponent(p);
  require(tau > 1.0 && t > tau, ErrorCode::InvalidArgument, "need 1 < tau < t");
  require(t < space.diameter() / (4.0 * B.radius), ErrorCode::GeometryViolation, "t must be below diam/(4 radius)");
  MonotonicityReport rep;
  rep.ratio_bound = ratio_bound;
  const Region tB = metric_ball(space, B.center, t * B.radius, B.closed);
  const Region tauB = metric_ball(space, B.center, tau * B.radius, B.closed);
  if (E.empty()) return rep;
  require(E.subset_of(tauB), ErrorCode::EnotInA, "E must be contained in tau B");
  rep.cap_t = variational_capacity(space, E, tB, p, tol).value;
  rep.cap_tau = variational_capacity(space, E, tauB, p, tol).value;
  rep.ratio = rep.cap_t > 0.0 ? rep.cap_tau / rep.cap_t : 0.0;
  rep.monotone = rep.cap_t <= rep.cap_tau * (1.0 + 2.0 * tol);
  rep.within_bound = rep.cap_tau <= ratio_bound * rep.cap_t;
  return rep;
}

}  // namespace finelab
