#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "finelab/space.hpp"

namespace finelab {

/// Node values indexed like the owning space. -inf marks an absent
/// obstacle and is only meaningful in obstacle roles.
using ScalarField = std::vector<double>;
/// Per-edge difference quotients |u(a) - u(b)| / length.
using GradientField = std::vector<double>;

inline constexpr double kUnconstrained = -std::numeric_limits<double>::infinity();

inline constexpr double kMinExponent = 1.001;
inline constexpr double kMaxExponent = 64.0;

void check_exponent(double p);

/// Sum of c_e |u(a) - u(b)|^p over edges touching `region` (all edges when null).
double p_energy(const WeightedGraphSpace& space, const ScalarField& field, double p,
                const Region* region = nullptr);
GradientField gradient_field(const WeightedGraphSpace& space, const ScalarField& field);

struct ObstacleSpec {
  Region domain;
  ScalarField obstacle;  // kUnconstrained where absent; may be empty for none
  ScalarField boundary;  // used outside the domain; may be empty for zero data
  double p = 2.0;
};

struct SolveResult {
  ScalarField field;
  double energy = 0.0;
  double kkt_residual = 0.0;
  Region active_set;
  int iterations = 0;
  bool converged = false;
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 400;
  /// Optional starting field (values outside the domain are ignored).
  const ScalarField* initial = nullptr;
};

/// Minimizer of the p-energy over fields equal to the boundary data off the
/// domain and above the obstacle on it. `kkt_residual` bounds the relative
/// energy suboptimality (E(u) - E_min) / E(u) through the first-order gap
/// over the box the minimizer is known to lie in.
SolveResult solve_obstacle(const WeightedGraphSpace& space, const ObstacleSpec& spec,
                           const SolverOptions& opts = {});
SolveResult solve_obstacle(const WeightedGraphSpace& space, const ObstacleSpec& spec, double tol);

SolveResult harmonic_solution(const WeightedGraphSpace& space, const Region& domain,
                              const ScalarField& boundary, double p, double tol = 1e-8);

/// Lower-level problem shared by the obstacle and capacity solvers:
/// minimize sum_e c_e |du|^p + sum_i mass_i |u_i|^p over u with
/// u_i = fixed_value_i where !free_i and u_i >= lower_i where free_i.
struct BoxProblem {
  double p = 2.0;
  std::vector<std::uint8_t> free;
  ScalarField fixed_value;
  ScalarField lower;  // kUnconstrained allowed
  ScalarField mass;   // empty for no zeroth-order term
};

SolveResult solve_box_problem(const WeightedGraphSpace& space, const BoxProblem& problem,
                              const SolverOptions& opts);

/// Full objective of a box problem, including the zeroth-order term.
double box_objective(const WeightedGraphSpace& space, const BoxProblem& problem, const ScalarField& u);

struct SuperminimizerReport {
  bool is_violated = false;
  double worst_margin = 0.0;
  int trials = 0;
};

/// Samples nonnegative perturbations supported in G and records the
/// smallest energy change; a negative change beyond tolerance means the
/// field is not a superminimizer.
SuperminimizerReport check_superminimizer(const WeightedGraphSpace& space, const ScalarField& field,
                                          const Region& domain, double p, int trials,
                                          std::uint64_t rng_seed, double tol = 1e-8);

}  // namespace finelab
