#pragma once

#include <array>

#include "finelab/solver.hpp"

namespace finelab {

struct CapacityDiagnostics {
  int iterations = 0;
  double kkt_residual = 0.0;
  bool converged = true;
};

struct CapacityResult {
  double value = 0.0;
  ScalarField minimizer;
  double lp_term = 0.0;      // zeroth-order part (Sobolev capacity only)
  double energy_term = 0.0;  // edge energy of the minimizer
  CapacityDiagnostics diagnostics;
};

/// Sobolev capacity: inf of sum mu|u|^p + energy over u >= 1 on E.
CapacityResult sobolev_capacity(const WeightedGraphSpace& space, const Region& E, double p, double tol = 1e-8);

/// Condenser capacity of E relative to A: inf of the energy over u = 1 on E
/// and u = 0 off A.
CapacityResult variational_capacity(const WeightedGraphSpace& space, const Region& E, const Region& A, double p,
                                    double tol = 1e-8);

/// Solution of the obstacle problem with obstacle the indicator of E and
/// zero boundary values off B.
SolveResult capacitary_potential(const WeightedGraphSpace& space, const Region& E, const Region& B, double p,
                                 double tol = 1e-8);

struct ComparisonReport {
  /// mu(E)/(r^p cap(E,2B)), cap(E,2B) r^p/mu(B), C_p(E)/((1+r^p) cap(E,2B)),
  /// cap(E,2B)/((1+r^-p) C_p(E)).
  std::array<double, 4> ratios{};
  bool bounds_hold = true;
  double measure_E = 0.0;
  double measure_B = 0.0;
  double cap_2B = 0.0;
  double sobolev = 0.0;
  double radius = 0.0;
};

ComparisonReport capacity_comparison_check(const WeightedGraphSpace& space, const Region& E, const Ball& B,
                                           double p, double tol = 1e-8);

struct MonotonicityReport {
  double cap_t = 0.0;    // cap(E, tB)
  double cap_tau = 0.0;  // cap(E, tau B)
  double ratio = 0.0;    // cap_tau / cap_t (0 when both vanish)
  double ratio_bound = 0.0;
  bool monotone = true;      // cap_t <= cap_tau up to solver tolerance
  bool within_bound = true;  // cap_tau <= ratio_bound * cap_t
};

MonotonicityReport annulus_monotonicity_check(const WeightedGraphSpace& space, const Region& E, const Ball& B,
                                              double t, double tau, double p, double ratio_bound = 10.0,
                                              double tol = 1e-8);

}  // namespace finelab
