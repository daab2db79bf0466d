#include "finelab/solver.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "finelab/error.hpp"
#include "finelab/parallel.hpp"
#include "finelab/rng.hpp"

namespace finelab {

void check_exponent(double p) {
  require(std::isfinite(p) && p >= kMinExponent && p <= kMaxExponent, ErrorCode::InvalidArgument,
          "exponent p must lie in [1.001, 64]");
}

double p_energy(const WeightedGraphSpace& space, const ScalarField& field, double p, const Region* region) {
  require(p > 1.0, ErrorCode::InvalidArgument, "exponent p must exceed 1");
  require(field.size() == space.size(), ErrorCode::InvalidArgument, "field size does not match the space");
  const auto edges = space.edges();
  std::vector<std::uint8_t> mask;
  if (region) mask = region->mask(space.size());
  return chunked_sum(edges.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t e = lo; e < hi; ++e) {
      const Edge& ed = edges[e];
      const auto a = static_cast<std::size_t>(ed.a);
      const auto b = static_cast<std::size_t>(ed.b);
      if (region && !mask[a] && !mask[b]) continue;
      if (!std::isfinite(field[a]) || !std::isfinite(field[b])) {
        fail(ErrorCode::InfiniteEnergyInput, "field is not finite on a counted edge");
      }
      s += ed.conductance * std::pow(std::abs(field[a] - field[b]) / ed.length, p);
    }
    return s;
  });
}

GradientField gradient_field(const WeightedGraphSpace& space, const ScalarField& field) {
  require(field.size() == space.size(), ErrorCode::InvalidArgument, "field size does not match the space");
  const auto edges = space.edges();
  GradientField g(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    g[e] = std::abs(field[static_cast<std::size_t>(edges[e].a)] - field[static_cast<std::size_t>(edges[e].b)]) /
           edges[e].length;
  }
  return g;
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Factorization = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

constexpr double kArmijo = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr double kMinStep = 1e-14;
constexpr double kFloorSmallP = 1e-12;  // slope floor relative to the field range, p < 2
constexpr double kFloorLargeP = 1e-14;  // weight floor relative to the range-scaled weight, p > 2
constexpr double kExactCurvatureGap = 1e-4;  // certificate below which p < 2 runs try exact Newton steps
constexpr double kTieTolerance = 1e-10;  // edge differences treated as ties, relative to the field range

/// Working state for one projected Newton run at a fixed exponent.
class NewtonRun {
 public:
  NewtonRun(const WeightedGraphSpace& space, const BoxProblem& prob, double lo, double hi)
      : space_(space), prob_(prob), lo_(lo), hi_(hi), range_(hi > lo ? hi - lo : 1.0) {
    const std::size_t n = space.size();
    var_of_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      if (prob.free[i]) {
        var_of_[i] = static_cast<int>(vars_.size());
        vars_.push_back(static_cast<NodeIndex>(i));
      }
    }
    build_pattern();
  }

  std::size_t var_count() const { return vars_.size(); }

  double objective(const ScalarField& u, double p) const {
    const auto edges = space_.edges();
    double e = chunked_sum(edges.size(), [&](std::size_t lo, std::size_t hi) {
      double s = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        const Edge& ed = edges[k];
        s += ed.conductance *
             std::pow(std::abs(u[static_cast<std::size_t>(ed.a)] - u[static_cast<std::size_t>(ed.b)]) / ed.length, p);
      }
      return s;
    });
    if (!prob_.mass.empty()) {
      e += chunked_sum(u.size(), [&](std::size_t lo, std::size_t hi) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += prob_.mass[i] * std::pow(std::abs(u[i]), p);
        return s;
      });
    }
    return e;
  }

  /// Gradient and Hessian diagonal for the free variables plus per-edge
  /// Hessian weights.
  void derivatives(const ScalarField& u, double p, double factor) {
    const auto edges = space_.edges();
    const std::size_t m = vars_.size();
    weight_.resize(edges.size());
    parallel_for((edges.size() + 8191) / 8192, [&](std::size_t c) {
      const std::size_t lo = c * 8192;
      const std::size_t hi = std::min(edges.size(), lo + 8192);
      for (std::size_t k = lo; k < hi; ++k) {
        const Edge& ed = edges[k];
        const double slope = std::abs(u[static_cast<std::size_t>(ed.a)] - u[static_cast<std::size_t>(ed.b)]) / ed.length;
        weight_[k] = p * factor * ed.conductance * curvature(slope, range_ / ed.length, p) / (ed.length * ed.length);
      }
    });
    grad_.assign(m, 0.0);
    diag_.assign(m, 0.0);
    parallel_for((m + 8191) / 8192, [&](std::size_t c) {
      const std::size_t lo = c * 8192;
      const std::size_t hi = std::min(m, lo + 8192);
      for (std::size_t v = lo; v < hi; ++v) {
        const NodeIndex i = vars_[v];
        const double ui = u[static_cast<std::size_t>(i)];
        double g = 0.0;
        double d = 0.0;
        for (auto k : space_.incident(i)) {
          const Edge& ed = edges[static_cast<std::size_t>(k)];
          const NodeIndex j = ed.a == i ? ed.b : ed.a;
          const double diff = ui - u[static_cast<std::size_t>(j)];
          const double slope = std::abs(diff) / ed.length;
          if (slope > 0.0) {
            g += std::copysign(p * ed.conductance * std::pow(slope, p - 1.0) / ed.length, diff);
          }
          d += weight_[static_cast<std::size_t>(k)];
        }
        if (!prob_.mass.empty()) {
          const double mi = prob_.mass[static_cast<std::size_t>(i)];
          if (ui != 0.0) g += std::copysign(p * mi * std::pow(std::abs(ui), p - 1.0), ui);
          d += p * factor * mi * curvature(std::abs(ui), range_, p);
        }
        grad_[v] = g;
        diag_[v] = d > 0.0 ? d : 1e-300;
      }
    });
  }

  /// Relative first-order gap; an upper bound for (E(u) - E_min) / E(u).
  double certificate(const ScalarField& u, double energy, double energy_scale) const {
    double gap = 0.0;
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      const auto i = static_cast<std::size_t>(vars_[v]);
      const double g = grad_[v];
      if (g > 0.0) {
        gap += g * (u[i] - std::max(prob_.lower[i], lo_));
      } else if (g < 0.0) {
        gap += -g * (hi_ - u[i]);
      }
    }
    gap = std::max(gap, 0.0);
    const double denom = std::max(energy, 1e-20 * energy_scale);
    return denom > 0.0 ? gap / denom : 0.0;
  }

  /// Projected Newton iteration; returns iterations used.
  int iterate(ScalarField& u, double p, double tol, int max_iterations, double& residual, double& energy) {
    const double energy_scale = energy_reference(p);
    energy = objective(u, p);
    int it = 0;
    std::vector<std::uint8_t> active(vars_.size(), 0);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(vars_.size()));
    ScalarField trial = u;
    int stalls = 0;
    for (;;) {
      derivatives(u, p, p - 1.0);
      residual = certificate(u, energy, energy_scale);
      if (residual <= tol || it >= max_iterations) break;
      ++it;

      // Epsilon-active set from the size of the projected gradient step.
      double proj = 0.0;
      for (std::size_t v = 0; v < vars_.size(); ++v) {
        const auto i = static_cast<std::size_t>(vars_[v]);
        const double moved = std::max(prob_.lower[i], u[i] - grad_[v] / diag_[v]);
        proj = std::max(proj, std::abs(u[i] - moved));
      }
      const double eps = std::min(1e-3 * range_, proj);
      for (std::size_t v = 0; v < vars_.size(); ++v) {
        const auto i = static_cast<std::size_t>(vars_[v]);
        active[v] = (std::isfinite(prob_.lower[i]) && u[i] - prob_.lower[i] <= eps && grad_[v] > 0.0) ? 1 : 0;
      }

      const double before = energy;
      Eigen::VectorXd dir = newton_direction(active, rhs);
      bool stepped = false;
      if (p < 2.0) {
        // Far from the minimizer the factor p - 1 is replaced by 1, which
        // makes the quadratic model a majorizer of t -> t^p and stops
        // overshoot into the bounds. Close to it, a full step with the exact
        // curvature is tried first; the majorizer alone converges only linearly.
        if (residual <= kExactCurvatureGap) stepped = try_step(u, trial, dir, active, p, energy, 1.0);
        if (!stepped) {
          derivatives(u, p, 1.0);
          dir = newton_direction(active, rhs);
        }
      }
      if (!stepped && !try_step(u, trial, dir, active, p, energy, kMinStep)) {
        for (std::size_t v = 0; v < vars_.size(); ++v) dir[static_cast<Eigen::Index>(v)] = -grad_[v] / diag_[v];
        std::fill(active.begin(), active.end(), 0);
        if (!try_step(u, trial, dir, active, p, energy, kMinStep)) break;
      }
      if (p < 2.0) snap_ties(u, trial, p, energy);
      // Roundoff floor: stop once steps no longer change the energy.
      stalls = before - energy <= 1e-15 * std::abs(before) ? stalls + 1 : 0;
      if (stalls >= 3) {
        derivatives(u, p, p - 1.0);
        residual = certificate(u, energy, energy_scale);
        break;
      }
    }
    return it;
  }

 private:
  /// Below p = 2 the gradient of |t|^p near t = 0 is of order t^(p-1), so
  /// roundoff-sized differences across edges whose endpoints should coincide
  /// leave a gradient floor. Clusters of free nodes joined by such edges are
  /// set to a common value when that does not raise the energy.
  void snap_ties(ScalarField& u, ScalarField& trial, double p, double& energy) {
    const auto edges = space_.edges();
    const double tie = kTieTolerance * range_;
    std::vector<int> parent(vars_.size());
    for (std::size_t v = 0; v < vars_.size(); ++v) parent[v] = static_cast<int>(v);
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) {
        parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        x = parent[static_cast<std::size_t>(x)];
      }
      return x;
    };
    bool any = false;
    for (const Edge& e : edges) {
      const int va = var_of_[static_cast<std::size_t>(e.a)];
      const int vb = var_of_[static_cast<std::size_t>(e.b)];
      if (va < 0 || vb < 0) continue;
      const double d = std::abs(u[static_cast<std::size_t>(e.a)] - u[static_cast<std::size_t>(e.b)]);
      if (d > 0.0 && d <= tie) {
        parent[static_cast<std::size_t>(find(va))] = find(vb);
        any = true;
      }
    }
    if (!any) return;
    std::vector<double> sum(vars_.size(), 0.0), floor(vars_.size(), -std::numeric_limits<double>::infinity());
    std::vector<int> count(vars_.size(), 0);
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      const auto r = static_cast<std::size_t>(find(static_cast<int>(v)));
      const auto i = static_cast<std::size_t>(vars_[v]);
      sum[r] += u[i];
      floor[r] = std::max(floor[r], prob_.lower[i]);
      ++count[r];
    }
    trial = u;
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      const auto r = static_cast<std::size_t>(find(static_cast<int>(v)));
      if (count[r] > 1) trial[static_cast<std::size_t>(vars_[v])] = std::max(floor[r], sum[r] / count[r]);
    }
    const double e_new = objective(trial, p);
    if (e_new <= energy) {
      u.swap(trial);
      energy = e_new;
    }
  }

  /// Second-derivative factor of t -> t^p at slope t, with scale-aware floors.
  static double curvature(double t, double scale, double p) {
    if (p == 2.0) return 1.0;
    if (p < 2.0) return std::pow(std::max(t, kFloorSmallP * scale), p - 2.0);
    const double rel = std::pow(t / scale, p - 2.0);
    return std::max(rel, kFloorLargeP) * std::pow(scale, p - 2.0);
  }

  double energy_reference(double p) const {
    const auto edges = space_.edges();
    double s = 0.0;
    for (const auto& e : edges) s += e.conductance * std::pow(range_ / e.length, p);
    if (!prob_.mass.empty()) {
      for (double m : prob_.mass) s += m * std::pow(range_, p);
    }
    return s;
  }

  void build_pattern() {
    const auto edges = space_.edges();
    const int m = static_cast<int>(vars_.size());
    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(static_cast<std::size_t>(m) + edges.size());
    for (int v = 0; v < m; ++v) trip.emplace_back(v, v, 1.0);
    for (const Edge& e : edges) {
      const int va = var_of_[static_cast<std::size_t>(e.a)];
      const int vb = var_of_[static_cast<std::size_t>(e.b)];
      if (va >= 0 && vb >= 0) trip.emplace_back(std::max(va, vb), std::min(va, vb), 0.0);
    }
    matrix_.resize(m, m);
    matrix_.setFromTriplets(trip.begin(), trip.end());
    matrix_.makeCompressed();
    auto slot = [&](int row, int col) {
      const int* inner = matrix_.innerIndexPtr();
      const int* outer = matrix_.outerIndexPtr();
      const int* it = std::lower_bound(inner + outer[col], inner + outer[col + 1], row);
      return static_cast<int>(it - inner);
    };
    diag_slot_.resize(static_cast<std::size_t>(m));
    for (int v = 0; v < m; ++v) diag_slot_[static_cast<std::size_t>(v)] = slot(v, v);
    edge_slot_.assign(edges.size(), -1);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const int va = var_of_[static_cast<std::size_t>(edges[k].a)];
      const int vb = var_of_[static_cast<std::size_t>(edges[k].b)];
      if (va >= 0 && vb >= 0) edge_slot_[k] = slot(std::max(va, vb), std::min(va, vb));
    }
    if (m > 0) solver_.analyzePattern(matrix_);
  }

  Eigen::VectorXd newton_direction(const std::vector<std::uint8_t>& active, Eigen::VectorXd& rhs) {
    const auto edges = space_.edges();
    double* val = matrix_.valuePtr();
    std::fill(val, val + matrix_.nonZeros(), 0.0);
    for (std::size_t v = 0; v < vars_.size(); ++v) {
      val[diag_slot_[v]] = diag_[v];
      rhs[static_cast<Eigen::Index>(v)] = -grad_[v];
    }
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (edge_slot_[k] < 0) continue;
      const auto va = static_cast<std::size_t>(var_of_[static_cast<std::size_t>(edges[k].a)]);
      const auto vb = static_cast<std::size_t>(var_of_[static_cast<std::size_t>(edges[k].b)]);
      if (!active[va] && !active[vb]) val[edge_slot_[k]] -= weight_[k];  // parallel edges share a slot
    }
    solver_.factorize(matrix_);
    double shift = 1e-12;
    while (solver_.info() != Eigen::Success || (solver_.vectorD().array() <= 0.0).any()) {
      require(shift < 1.0, ErrorCode::Infeasible, "Newton system could not be factorized");
      for (std::size_t v = 0; v < vars_.size(); ++v) val[diag_slot_[v]] = diag_[v] * (1.0 + shift);
      solver_.factorize(matrix_);
      shift *= 100.0;
    }
    return solver_.solve(rhs);
  }

  bool try_step(ScalarField& u, ScalarField& trial, const Eigen::VectorXd& dir,
                const std::vector<std::uint8_t>& active, double p, double& energy, double min_alpha) {
    double alpha = 1.0;
    while (alpha >= min_alpha) {
      double predicted = 0.0;
      for (std::size_t v = 0; v < vars_.size(); ++v) {
        const auto i = static_cast<std::size_t>(vars_[v]);
        const double moved = std::max(prob_.lower[i], u[i] + alpha * dir[static_cast<Eigen::Index>(v)]);
        trial[i] = moved;
        if (active[v]) {
          predicted += grad_[v] * (u[i] - moved);
        } else {
          predicted += -alpha * grad_[v] * dir[static_cast<Eigen::Index>(v)];
        }
      }
      const double e_new = objective(trial, p);
      const double slack = 1e-15 * std::abs(energy);
      if (energy - e_new >= kArmijo * predicted - slack && e_new <= energy + slack && predicted > 0.0) {
        const bool moved = e_new < energy || trial != u;
        for (auto i : vars_) u[static_cast<std::size_t>(i)] = trial[static_cast<std::size_t>(i)];
        energy = e_new;
        return moved;
      }
      alpha *= kBacktrack;
    }
    return false;
  }

  const WeightedGraphSpace& space_;
  const BoxProblem& prob_;
  double lo_;
  double hi_;
  double range_;
  std::vector<int> var_of_;
  std::vector<NodeIndex> vars_;
  std::vector<double> weight_;
  std::vector<double> grad_;
  std::vector<double> diag_;
  SparseMatrix matrix_;
  std::vector<int> diag_slot_;
  std::vector<int> edge_slot_;
  Factorization solver_;
};

/// Exponents visited on the way from 2 to p; (p - 1) changes by at most 2x per step.
std::vector<double> continuation_path(double p) {
  std::vector<double> path;
  double q = 2.0;
  while (q != p) {
    const double ratio = (p - 1.0) / (q - 1.0);
    q = ratio > 2.0 ? 1.0 + 2.0 * (q - 1.0) : ratio < 0.5 ? 1.0 + 0.5 * (q - 1.0) : p;
    path.push_back(q);
  }
  return path;
}

}  // namespace

double box_objective(const WeightedGraphSpace& space, const BoxProblem& prob, const ScalarField& u) {
  double e = p_energy(space, u, prob.p);
  if (!prob.mass.empty()) {
    for (std::size_t i = 0; i < u.size(); ++i) e += prob.mass[i] * std::pow(std::abs(u[i]), prob.p);
  }
  return e;
}

SolveResult solve_box_problem(const WeightedGraphSpace& space, const BoxProblem& prob, const SolverOptions& opts) {
  check_exponent(prob.p);
  require(opts.tol > 0.0, ErrorCode::InvalidArgument, "tolerance must be positive");
  const std::size_t n = space.size();
  require(prob.free.size() == n && prob.fixed_value.size() == n && prob.lower.size() == n,
          ErrorCode::InvalidArgument, "problem arrays must match the space size");
  require(prob.mass.empty() || prob.mass.size() == n, ErrorCode::InvalidArgument, "mass array size mismatch");

  bool any_fixed = false;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  if (!prob.mass.empty()) {
    lo = 0.0;
    hi = 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (prob.free[i]) {
      require(!std::isnan(prob.lower[i]), ErrorCode::InvalidArgument, "obstacle value is NaN");
      require(prob.lower[i] < std::numeric_limits<double>::infinity(), ErrorCode::Infeasible,
              "obstacle is +inf at node " + std::to_string(space.id(static_cast<NodeIndex>(i))));
      if (std::isfinite(prob.lower[i])) hi = std::max(hi, prob.lower[i]);
    } else {
      require(std::isfinite(prob.fixed_value[i]), ErrorCode::Infeasible,
              "boundary value is not finite at node " + std::to_string(space.id(static_cast<NodeIndex>(i))));
      any_fixed = true;
      lo = std::min(lo, prob.fixed_value[i]);
      hi = std::max(hi, prob.fixed_value[i]);
    }
  }
  require(any_fixed || !prob.mass.empty(), ErrorCode::Infeasible,
          "the domain must not be the whole space");
  if (!std::isfinite(lo)) lo = hi;

  SolveResult res;
  res.field.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!prob.free[i]) {
      res.field[i] = prob.fixed_value[i];
    } else {
      const double floor = std::max(prob.lower[i], lo);
      double start = floor;
      if (opts.initial && std::isfinite((*opts.initial)[i])) start = std::clamp((*opts.initial)[i], floor, std::max(floor, hi));
      res.field[i] = start;
    }
  }

  NewtonRun run(space, prob, lo, hi);
  if (run.var_count() == 0) {
    res.energy = p_energy(space, res.field, prob.p);
    res.converged = true;
    return res;
  }

  double residual = 0.0;
  double energy = 0.0;
  int iterations = 0;
  const double warm_tol = std::max(opts.tol, 1e-6);
  if (!opts.initial && prob.p != 2.0) {
    iterations += run.iterate(res.field, 2.0, warm_tol, opts.max_iterations, residual, energy);
    for (double q : continuation_path(prob.p)) {
      const double t = q == prob.p ? opts.tol : warm_tol;
      iterations += run.iterate(res.field, q, t, opts.max_iterations, residual, energy);
    }
  } else {
    iterations += run.iterate(res.field, prob.p, opts.tol, opts.max_iterations, residual, energy);
  }

  res.energy = p_energy(space, res.field, prob.p);
  res.kkt_residual = residual;
  res.iterations = iterations;
  res.converged = residual <= opts.tol;
  const double range = hi > lo ? hi - lo : 1.0;
  std::vector<NodeIndex> act;
  for (std::size_t i = 0; i < n; ++i) {
    if (prob.free[i] && std::isfinite(prob.lower[i]) && res.field[i] <= prob.lower[i] + 1e-10 * range) {
      act.push_back(static_cast<NodeIndex>(i));
    }
  }
  res.active_set = Region(std::move(act));
  return res;
}

SolveResult solve_obstacle(const WeightedGraphSpace& space, const ObstacleSpec& spec, const SolverOptions& opts) {
  const std::size_t n = space.size();
  require(spec.obstacle.empty() || spec.obstacle.size() == n, ErrorCode::InvalidArgument,
          "obstacle size does not match the space");
  require(spec.boundary.empty() || spec.boundary.size() == n, ErrorCode::InvalidArgument,
          "boundary size does not match the space");
  require(spec.domain.size() < n, ErrorCode::Infeasible, "the domain must not be the whole space");
  for (auto i : spec.domain.nodes()) {
    require(i >= 0 && static_cast<std::size_t>(i) < n, ErrorCode::UnknownNode, "domain node out of range");
  }
  BoxProblem prob;
  prob.p = spec.p;
  prob.free = spec.domain.mask(n);
  prob.fixed_value = spec.boundary.empty() ? ScalarField(n, 0.0) : spec.boundary;
  prob.lower = spec.obstacle.empty() ? ScalarField(n, kUnconstrained) : spec.obstacle;
  for (std::size_t i = 0; i < n; ++i) {
    if (!prob.free[i]) prob.lower[i] = kUnconstrained;
  }
  return solve_box_problem(space, prob, opts);
}

SolveResult solve_obstacle(const WeightedGraphSpace& space, const ObstacleSpec& spec, double tol) {
  SolverOptions o;
  o.tol = tol;
  return solve_obstacle(space, spec, o);
}

SolveResult harmonic_solution(const WeightedGraphSpace& space, const Region& domain, const ScalarField& boundary,
                              double p, double tol) {
  ObstacleSpec spec;
  spec.domain = domain;
  spec.boundary = boundary;
  spec.p = p;
  return solve_obstacle(space, spec, tol);
}

SuperminimizerReport check_superminimizer(const WeightedGraphSpace& space, const ScalarField& field,
                                          const Region& domain, double p, int trials, std::uint64_t rng_seed,
                                          double tol) {
  require(p > 1.0, ErrorCode::InvalidArgument, "exponent p must exceed 1");
  require(field.size() == space.size(), ErrorCode::InvalidArgument, "field size does not match the space");
  SuperminimizerReport rep;
  if (domain.empty() || trials <= 0) return rep;
  for (auto i : domain.nodes()) {
    require(std::isfinite(field[static_cast<std::size_t>(i)]), ErrorCode::InfiniteEnergyInput,
            "field must be finite on the domain");
  }
  double fmin = field[static_cast<std::size_t>(domain.nodes().front())];
  double fmax = fmin;
  for (auto i : domain.nodes()) {
    fmin = std::min(fmin, field[static_cast<std::size_t>(i)]);
    fmax = std::max(fmax, field[static_cast<std::size_t>(i)]);
  }
  const double scale = fmax > fmin ? fmax - fmin : 1.0;
  const double base = p_energy(space, field, p);
  const auto edges = space.edges();
  Rng rng(rng_seed);
  ScalarField phi(space.size(), 0.0);
  rep.worst_margin = std::numeric_limits<double>::infinity();

  // Energy change from adding phi, summed only over edges touching its support.
  auto margin = [&](const std::vector<NodeIndex>& support) {
    std::vector<std::int32_t> touched;
    for (auto i : support) {
      for (auto e : space.incident(i)) touched.push_back(e);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    double before = 0.0;
    double after = 0.0;
    for (auto e : touched) {
      const Edge& ed = edges[static_cast<std::size_t>(e)];
      const auto a = static_cast<std::size_t>(ed.a);
      const auto b = static_cast<std::size_t>(ed.b);
      before += ed.conductance * std::pow(std::abs(field[a] - field[b]) / ed.length, p);
      after += ed.conductance * std::pow(std::abs(field[a] + phi[a] - field[b] - phi[b]) / ed.length, p);
    }
    return after - before;
  };

  const auto& nodes = domain.nodes();
  const double diam = space.diameter();
  for (int t = 0; t < trials; ++t) {
    std::vector<NodeIndex> support;
    const NodeIndex c = nodes[static_cast<std::size_t>(rng.below(nodes.size()))];
    const double amp = scale * std::pow(10.0, rng.uniform(-4.0, -1.0));
    if (t % 2 == 0) {
      support.push_back(c);
      phi[static_cast<std::size_t>(c)] = amp;
    } else {
      const double rad = diam * std::pow(10.0, rng.uniform(-2.5, -0.5));
      const auto d = space.distances_from(c);
      for (auto i : nodes) {
        const double w = 1.0 - (*d)[static_cast<std::size_t>(i)] / rad;
        if (w > 0.0) {
          phi[static_cast<std::size_t>(i)] = amp * w;
          support.push_back(i);
        }
      }
    }
    const double m = margin(support);
    rep.worst_margin = std::min(rep.worst_margin, m);
    for (auto i : support) phi[static_cast<std::size_t>(i)] = 0.0;
    ++rep.trials;
  }
  rep.is_violated = rep.worst_margin < -tol * std::max(1.0, base);
  return rep;
}

}  // namespace finelab
