#pragma once
// Random obstacle problems shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "finelab/solver.hpp"
#include "oracles.hpp"

namespace testing_support {

using namespace finelab;

/// Energy tolerance for solves whose fields are compared node by node.
inline constexpr double kFieldSolveTol = 1e-12;

struct Instance {
  SpacePtr space;
  ObstacleSpec spec;
};

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Domain: random nonempty proper subset. Obstacle: random values on about
/// half of the nodes, unconstrained elsewhere. Boundary: random values.
inline ObstacleSpec random_spec(const WeightedGraphSpace& s, std::mt19937_64& rng, double p) {
  const std::size_t n = s.size();
  std::vector<std::uint8_t> mask(n, 0);
  for (auto& m : mask) m = unit(rng) < 0.7;
  mask[static_cast<std::size_t>(rng() % n)] = 0;
  bool any = false;
  for (auto m : mask) any = any || m;
  if (!any) mask[(static_cast<std::size_t>(rng() % n))] = 1;
  std::size_t outside = 0;
  for (auto m : mask) outside += m == 0;
  if (outside == 0) mask[0] = 0;
  ObstacleSpec spec;
  spec.domain = Region::from_mask(mask);
  spec.p = p;
  spec.obstacle.assign(n, kUnconstrained);
  spec.boundary.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (unit(rng) < 0.5) spec.obstacle[i] = -1.0 + 2.0 * unit(rng);
    spec.boundary[i] = -1.0 + 2.0 * unit(rng);
  }
  return spec;
}

/// The same obstacle problem in the form the brute-force oracle takes.
inline oracle::Problem oracle_problem(const WeightedGraphSpace& s, const ObstacleSpec& spec) {
  auto pr = oracle::from_space(s, spec.p);
  const auto inside = spec.domain.mask(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    pr.free[i] = inside[i] != 0;
    pr.value[i] = spec.boundary.empty() ? 0.0 : spec.boundary[i];
    if (pr.free[i] && !spec.obstacle.empty()) pr.lower[i] = spec.obstacle[i];
  }
  return pr;
}

inline double random_p(std::mt19937_64& rng) { return 1.3 + 2.7 * unit(rng); }

inline Instance random_obstacle_instance(std::mt19937_64& rng, int nodes) {
  auto s = oracle::random_graph(nodes, rng);
  auto spec = random_spec(*s, rng, random_p(rng));
  return {s, spec};
}

/// Random 1-D or 2-D grid instance.
inline Instance random_grid_instance(std::mt19937_64& rng) {
  SpacePtr s;
  if (rng() % 2 == 0) {
    GridOptions g;
    g.dim = 1;
    g.lo = {0.0};
    g.hi = {1.0};
    g.h = 1.0 / static_cast<double>(12 + rng() % 20);
    g.h = 1.0 / std::round(1.0 / g.h);
    s = build_grid(g);
  } else {
    s = build_cube_grid(2, 1.0, 1.0 / static_cast<double>(3 + rng() % 4));
  }
  auto spec = random_spec(*s, rng, random_p(rng));
  return {s, spec};
}

/// Two specs on the same space and domain with psi1 <= psi2 and f1 <= f2.
inline std::pair<Instance, Instance> random_ordered_pair(std::mt19937_64& rng) {
  Instance a = rng() % 3 == 0 ? random_obstacle_instance(rng, 3 + static_cast<int>(rng() % 8)) : random_grid_instance(rng);
  Instance b = a;
  for (std::size_t i = 0; i < a.space->size(); ++i) {
    double& lo = a.spec.obstacle[i];
    double& hi = b.spec.obstacle[i];
    if (std::isfinite(lo)) {
      hi = lo + 0.5 * unit(rng);
    } else if (unit(rng) < 0.3) {
      hi = -1.0 + 2.0 * unit(rng);
    }
    b.spec.boundary[i] = a.spec.boundary[i] + 0.5 * unit(rng);
  }
  return {a, b};
}

/// Random nonempty subset of the domain.
inline Region random_subregion(const Region& domain, std::mt19937_64& rng) {
  std::vector<NodeIndex> keep;
  for (auto i : domain.nodes()) {
    if (unit(rng) < 0.6) keep.push_back(i);
  }
  if (keep.empty()) keep.push_back(domain.nodes()[rng() % domain.size()]);
  return Region(keep);
}

}  // namespace testing_support
