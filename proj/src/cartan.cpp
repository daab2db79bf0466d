#include "finelab/cartan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "finelab/error.hpp"
#include "finelab/parallel.hpp"
#include "finelab/rng.hpp"

namespace finelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double smallest_edge(const WeightedGraphSpace& s) {
  double h = kInf;
  for (const auto& e : s.edges()) h = std::min(h, e.length);
  return h;
}

double value_at(const ScalarField& u, NodeIndex i) { return u[static_cast<std::size_t>(i)]; }

/// Index j of the shell 2 sigma^-(j+1) r < d < sigma^-j r / 2 containing d, or -1.
int shell_index(double d, double r, double sigma) {
  if (d <= 0.0 || d >= 0.5 * r) return -1;
  const int j = static_cast<int>(std::floor(std::log(r / d) / std::log(sigma)));
  for (int k = std::max(0, j - 1); k <= j + 1; ++k) {
    const double hi = 0.5 * std::pow(sigma, -k) * r;
    const double lo = 2.0 * std::pow(sigma, -(k + 1)) * r;
    if (d > lo && d < hi) return k;
  }
  return -1;
}

int resolvable(double rho, double sigma, double h_min) {
  int count = 0;
  while (2.0 * std::pow(sigma, -(count + 1)) * rho >= h_min && count < 64) ++count;
  return count;
}

Region shell_region(const WeightedGraphSpace& space, const Region& E, const Point& x0, double r, double sigma,
                    std::vector<AnnulusInfo>& info) {
  const auto d = space.distances_from_point(x0);
  std::vector<NodeIndex> keep;
  for (auto i : E.nodes()) {
    const int j = shell_index(d[static_cast<std::size_t>(i)], r, sigma);
    if (j < 0) continue;
    keep.push_back(i);
    if (info.size() <= static_cast<std::size_t>(j)) {
      const auto old = info.size();
      info.resize(static_cast<std::size_t>(j) + 1);
      for (auto k = old; k < info.size(); ++k) {
        info[k].j = static_cast<int>(k);
        info[k].r_in = 2.0 * std::pow(sigma, -static_cast<double>(k + 1)) * r;
        info[k].r_out = 0.5 * std::pow(sigma, -static_cast<double>(k)) * r;
      }
    }
    ++info[static_cast<std::size_t>(j)].nodes;
  }
  return Region(std::move(keep));
}

}  // namespace

SpacePtr build_scale_grid(const Point& x0, double radius, double depth, int resolution) {
  require(radius > 0.0 && depth > 0.0 && depth <= radius, ErrorCode::InvalidArgument,
          "scale grid needs 0 < depth <= radius");
  require(resolution >= 16, ErrorCode::InvalidArgument, "scale grid resolution must be at least 16");
  GradedGridOptions g;
  g.dim = static_cast<int>(x0.size());
  g.center = x0;
  for (double c : x0) {
    g.lo.push_back(c - radius);
    g.hi.push_back(c + radius);
  }
  g.h_max = radius / resolution;
  g.growth = 1.0 + 16.0 / resolution;
  g.h_min = std::min(g.h_max, (g.growth - 1.0) * depth);
  return build_graded_grid(g);
}

AnalyticSet annular_part(const Point& x0, double r, double sigma, int count) {
  AnalyticSet out = AnalyticSet::empty();
  for (int j = 0; j < count; ++j) {
    const double hi = 0.5 * std::pow(sigma, -j) * r;
    const double lo = 2.0 * std::pow(sigma, -(j + 1)) * r;
    out = out.unite(AnalyticSet::ball(x0, hi).minus(AnalyticSet::ball(x0, lo, true)));
  }
  return out;
}

// ---------------------------------------------------------------------------

CartanCertificate weak_cartan(const AnalyticSet& E, const Point& x0, double r, const WeakCartanOptions& o) {
  require(r > 0.0, ErrorCode::InvalidArgument, "radius must be positive");
  require(o.sigma > 20.0, ErrorCode::InvalidArgument, "sigma must exceed 20 for the two shell families to cover E");
  require(o.levels >= 1, ErrorCode::InvalidArgument, "levels must be positive");
  require(o.margin >= 0.0 && o.coverage_tol >= 0.0, ErrorCode::InvalidArgument, "tolerances must be nonnegative");
  check_exponent(o.p);
  require(!E.contains(x0), ErrorCode::PreconditionViolated, "x0 must not belong to E");

  CartanCertificate cert;
  cert.sigma = o.sigma;
  const double rp = r / 5.0;
  cert.B0 = {x0, r};
  cert.B = {x0, rp / 2.0};
  cert.space = build_scale_grid(x0, r, 2.0 * std::pow(o.sigma, -o.levels) * rp, o.resolution);
  const WeightedGraphSpace& space = *cert.space;
  const double h_min = smallest_edge(space);
  cert.resolvable_annuli = std::min(resolvable(r, o.sigma, h_min), resolvable(rp, o.sigma, h_min));
  require(cert.resolvable_annuli >= 3, ErrorCode::ScaleUnderflow,
          "only " + std::to_string(cert.resolvable_annuli) + " annuli are resolvable");

  const Region set = region_from_descriptor(space, E);
  const Region e0 = shell_region(space, set, x0, r, o.sigma, cert.annuli);
  const Region e0p = shell_region(space, set, x0, rp, o.sigma, cert.annuli_prime);
  const Region ball0 = point_ball(space, x0, r);
  const Region ballp = point_ball(space, x0, rp);

  cert.u_solve = capacitary_potential(space, e0.intersect(ball0), ball0, o.p, o.tol);
  cert.uprime_solve = capacitary_potential(space, e0p.intersect(ballp), ballp, o.p, o.tol);
  cert.u = cert.u_solve.field;
  cert.u_prime = cert.uprime_solve.field;
  cert.v.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) cert.v[i] = std::max(cert.u[i], cert.u_prime[i]);

  const NodeIndex c = space.nearest_node(x0);
  cert.u_at_x0 = value_at(cert.u, c);
  cert.uprime_at_x0 = value_at(cert.u_prime, c);

  const Region inner = point_ball(space, x0, cert.B.radius);
  for (auto i : inner.nodes()) {
    const bool f = value_at(cert.u, i) >= 1.0 - o.coverage_tol;
    const bool fp = value_at(cert.u_prime, i) >= 1.0 - o.coverage_tol;
    cert.level_set_F += f ? 1 : 0;
    cert.level_set_F_prime += fp ? 1 : 0;
  }
  const Region covered = set.intersect(inner);
  cert.covered_nodes = covered.size();
  for (auto i : covered.nodes()) {
    if (value_at(cert.u, i) < 1.0 - o.coverage_tol && value_at(cert.u_prime, i) < 1.0 - o.coverage_tol) {
      cert.coverage_violations.push_back(space.id(i));
    }
  }
  cert.valid = cert.u_at_x0 < 1.0 - o.margin && cert.uprime_at_x0 < 1.0 - o.margin &&
               cert.coverage_violations.empty();
  if (o.classify) {
    const WienerReport w = wiener_terms(E, x0, o.wiener);
    cert.verdict = classify_thin(w).verdict;
    cert.expected_invalid = *cert.verdict != Verdict::Thin;
  }
  return cert;
}

// ---------------------------------------------------------------------------

void evaluate_products(BoundsReport& rep, double Cprime, double c) {
  const std::size_t J = rep.quotients.size();
  rep.Cprime_used = Cprime;
  rep.fitted_c = c;
  rep.a.assign(J, 0.0);
  rep.upper_products.assign(J, 1.0);
  rep.lower_products.assign(J, 1.0);
  double b = 1.0;
  double bl = 1.0;
  double asum = 0.0;
  rep.partial_product_holds = true;
  for (std::size_t j = 0; j < J; ++j) {
    rep.a[j] = std::min(1.0, Cprime * rep.quotients[j]);
    b *= 1.0 - rep.a[j];
    bl *= 1.0 - c * rep.a[j];
    asum += rep.a[j];
    rep.upper_products[j] = b;
    rep.lower_products[j] = bl;
    if (1.0 - b > asum * (1.0 + 1e-12) + 1e-15) rep.partial_product_holds = false;
  }
  rep.upper_bound = 1.0 - b;
  rep.lower_bound = 1.0 - bl;
  constexpr double slack = 1e-12;
  rep.bounds_hold = rep.lower_bound <= rep.u_at_x0 + slack && rep.u_at_x0 <= rep.upper_bound + slack;
  rep.wolff_holds = rep.u_at_x0 <= Cprime * rep.wolff_sum + slack;
}

namespace {

double upper_for(const std::vector<double>& q, double C) {
  double b = 1.0;
  for (double v : q) b *= 1.0 - std::min(1.0, C * v);
  return 1.0 - b;
}

double lower_for(const std::vector<double>& a, double c) {
  double b = 1.0;
  for (double v : a) b *= 1.0 - c * v;
  return 1.0 - b;
}

/// Smallest C' with 1 - prod(1 - min(1, C' q_j)) >= u.
double fit_Cprime(const std::vector<double>& q, double u) {
  if (u <= 0.0) return 0.0;
  u = std::min(u, 1.0);  // roundoff above the truncation level
  double qmin = kInf;
  for (double v : q) {
    if (v > 0.0) qmin = std::min(qmin, v);
  }
  if (!std::isfinite(qmin)) return kInf;
  double lo = 0.0;
  double hi = 1.0 / qmin;
  if (upper_for(q, hi) < u) return kInf;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (upper_for(q, mid) >= u ? hi : lo) = mid;
  }
  return hi;
}

/// Largest c in [0, 1] with 1 - prod(1 - c a_j) <= u.
double fit_c(const std::vector<double>& a, double u) {
  if (lower_for(a, 1.0) <= u) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (lower_for(a, mid) <= u ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

BoundsReport potential_product_bounds(const AnalyticSet& E, const Point& x0, double r, const BoundsOptions& o) {
  require(r > 0.0, ErrorCode::InvalidArgument, "radius must be positive");
  require(o.sigma > 4.0, ErrorCode::InvalidArgument, "sigma must exceed 4 so that the shells are nonempty");
  require(o.scales >= 1, ErrorCode::InvalidArgument, "need at least one scale");
  require(o.gap_limit >= 0.0 && o.gap_limit <= 1.0, ErrorCode::InvalidArgument, "gap_limit must lie in [0, 1]");
  require(!o.Cprime || *o.Cprime >= 0.0, ErrorCode::InvalidArgument, "C' must be nonnegative");
  check_exponent(o.p);
  const int J = o.scales;
  const auto space = build_scale_grid(x0, r, std::pow(o.sigma, -J) * r, o.resolution);
  const Region set = region_from_descriptor(*space, E);

  // Gap condition: keep only the open shells of scales 0..J-1.
  const Region base = set.intersect(point_ball(*space, x0, 0.5 * r))
                          .minus(point_ball(*space, x0, 2.0 * std::pow(o.sigma, -J) * r, true));
  const Region used = region_from_descriptor(*space, annular_part(x0, r, o.sigma, J)).intersect(set);
  BoundsReport rep;
  rep.removed_fraction = base.empty() ? 0.0 : 1.0 - static_cast<double>(used.size()) / static_cast<double>(base.size());
  require(rep.removed_fraction <= o.gap_limit, ErrorCode::HypothesisViolated,
          "the gap condition removes " + std::to_string(rep.removed_fraction) + " of E's nodes");

  std::vector<Region> balls(static_cast<std::size_t>(J) + 1);
  for (int j = 0; j <= J; ++j) balls[static_cast<std::size_t>(j)] = point_ball(*space, x0, std::pow(o.sigma, -j) * r);
  rep.quotients.assign(static_cast<std::size_t>(J), 0.0);
  double u0 = 0.0;
  parallel_for(static_cast<std::size_t>(J) + 1, [&](std::size_t k) {
    if (k == static_cast<std::size_t>(J)) {
      const SolveResult u = capacitary_potential(*space, used, balls[0], o.p, o.tol);
      u0 = value_at(u.field, space->nearest_node(x0));
      return;
    }
    const Region half = point_ball(*space, x0, 0.5 * std::pow(o.sigma, -static_cast<double>(k)) * r);
    const double num = variational_capacity(*space, used.intersect(half), balls[k], o.p, o.tol).value;
    const double den = variational_capacity(*space, balls[k + 1], balls[k], o.p, o.tol).value;
    rep.quotients[k] = den > 0.0 ? std::pow(num / den, 1.0 / (o.p - 1.0)) : 1.0;
  });
  rep.u_at_x0 = u0;
  rep.wolff_sum = std::accumulate(rep.quotients.begin(), rep.quotients.end(), 0.0);
  rep.fitted_Cprime = fit_Cprime(rep.quotients, rep.u_at_x0);
  rep.Cprime_supplied = o.Cprime.has_value();
  const double C = o.Cprime ? *o.Cprime : rep.fitted_Cprime;
  std::vector<double> a(rep.quotients.size());
  for (std::size_t j = 0; j < a.size(); ++j) a[j] = std::min(1.0, C * rep.quotients[j]);
  const double c = std::isfinite(C) ? fit_c(a, rep.u_at_x0) : 0.0;
  evaluate_products(rep, C, c);
  return rep;
}

// ---------------------------------------------------------------------------

BoundaryReport boundary_estimate_check(const AnalyticSet& E, const PointBall& B, const PointBall& B0,
                                       const BoundaryOptions& o) {
  check_exponent(o.p);
  require(B.radius > 0.0 && B0.radius > 0.0, ErrorCode::InvalidArgument, "radii must be positive");
  require(B.center.size() == B0.center.size(), ErrorCode::InvalidArgument, "ball dimensions differ");
  require(o.resolution >= 4, ErrorCode::InvalidArgument, "resolution must be at least 4");
  GridOptions g;
  g.dim = static_cast<int>(B0.center.size());
  g.h = B0.radius / o.resolution;
  for (double c : B0.center) {
    g.lo.push_back(c - B0.radius);
    g.hi.push_back(c + B0.radius);
  }
  const auto space = build_grid(g);
  const double lambda = space->meta().poincare_dilation;
  BoundaryReport rep;
  rep.relaxation = o.relaxation;
  rep.relaxed = o.relaxation < 50.0;
  double offset = 0.0;
  for (std::size_t k = 0; k < B.center.size(); ++k) offset += std::pow(B.center[k] - B0.center[k], 2);
  offset = std::sqrt(offset);
  require(offset + o.relaxation * lambda * B.radius <= B0.radius * (1.0 + 1e-12), ErrorCode::GeometryViolation,
          "the dilated ball must lie inside B0");

  const Region set = region_from_descriptor(*space, E);
  const auto d0 = space->distances_from_point(B0.center);
  const auto d = space->distances_from_point(B.center);
  for (auto i : set.nodes()) {
    require(d0[static_cast<std::size_t>(i)] < 0.5 * B0.radius, ErrorCode::GeometryViolation,
            "E must lie inside half of B0");
    const double di = d[static_cast<std::size_t>(i)];
    require(!(di < 2.0 * B.radius && di >= 0.5 * B.radius), ErrorCode::HypothesisViolated,
            "E meets the annulus 2B minus B/2");
  }
  const Region ball0 = point_ball(*space, B0.center, B0.radius);
  const Region ball = point_ball(*space, B.center, B.radius);
  SolveResult u;
  double capB = 0.0;
  parallel_for(2, [&](std::size_t k) {
    if (k == 0) {
      u = capacitary_potential(*space, set, ball0, o.p, o.tol);
    } else {
      capB = variational_capacity(*space, ball, ball0, o.p, o.tol).value;
    }
  });
  rep.cap_E = u.energy;
  rep.cap_B = capB;
  rep.sup_on_sphere = 0.0;
  rep.inf_on_sphere = kInf;
  for (std::size_t i = 0; i < space->size(); ++i) {
    if (d[i] >= B.radius - g.h && d[i] < B.radius) {
      rep.sup_on_sphere = std::max(rep.sup_on_sphere, u.field[i]);
      rep.inf_on_sphere = std::min(rep.inf_on_sphere, u.field[i]);
      ++rep.sphere_nodes;
    }
  }
  require(rep.sphere_nodes > 0, ErrorCode::GeometryViolation, "the sphere of B contains no nodes");
  rep.inf_on_ball = kInf;
  for (auto i : ball.nodes()) rep.inf_on_ball = std::min(rep.inf_on_ball, u.field[static_cast<std::size_t>(i)]);
  rep.quotient_rhs = capB > 0.0 ? std::pow(rep.cap_E / capB, 1.0 / (o.p - 1.0)) : 0.0;
  if (rep.quotient_rhs > 0.0) {
    rep.implied_Cprime = rep.sup_on_sphere / rep.quotient_rhs;
    rep.implied_Cdoubleprime = rep.inf_on_sphere / rep.quotient_rhs;
  }
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  double radius = 0.0;
  Region set;
};

StrongCartanResult strong_core(const SpacePtr& space, const Region& E, NodeIndex x0, const Region& B,
                               const std::vector<Candidate>& cands, const StrongCartanOptions& o) {
  check_exponent(o.p);
  require(o.scales >= 1, ErrorCode::InvalidArgument, "need at least one scale");
  require(!E.contains(x0), ErrorCode::PreconditionViolated, "x0 must not belong to E");
  require(B.contains(x0), ErrorCode::PreconditionViolated, "B must contain x0");
  StrongCartanResult res;
  res.space = space;
  const std::size_t n = space->size();
  if (E.empty()) {
    res.v.assign(n, 0.0);
    res.u.assign(n, 0.0);
    res.valid = true;
    return res;
  }
  // Capacities are nonincreasing along the nested candidates, so each radius is
  // found by bisection and only a few capacities are ever computed.
  std::vector<double> caps(cands.size(), -1.0);
  auto cap_at = [&](std::size_t k) {
    if (caps[k] < 0.0) caps[k] = variational_capacity(*space, cands[k].set, B, o.p, o.tol).value;
    return caps[k];
  };
  require(!cands.empty(), ErrorCode::ShrinkTooSlow, "no resolvable radius meets E");
  const std::size_t last = cands.size() - 1;
  std::size_t from = 0;
  std::vector<std::size_t> chosen;
  for (int j = 1; j <= o.scales; ++j) {
    const double budget = std::pow(2.0, -j * o.p);
    if (!(cap_at(last) < budget)) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "capacity near x0 stays at %.6g >= 2^-%dp = %.6g down to radius %.6g", caps[last], j,
                    budget, cands[last].radius);
      fail(ErrorCode::ShrinkTooSlow, msg);
    }
    std::size_t lo = from;
    std::size_t hi = last;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (cap_at(mid) < budget) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    chosen.push_back(lo);
    res.radii.push_back(cands[lo].radius);
    res.shell_capacity.push_back(caps[lo]);
    res.budgets.push_back(budget);
    res.shell_sizes.push_back(cands[lo].set.size());
    from = lo;
  }
  std::vector<ScalarField> shells(chosen.size());
  parallel_for(chosen.size(), [&](std::size_t j) {
    shells[j] = capacitary_potential(*space, cands[chosen[j]].set, B, o.p, o.tol).field;
  });
  res.v.assign(n, 0.0);
  for (const auto& s : shells) {
    for (std::size_t i = 0; i < n; ++i) res.v[i] += s[i];
  }
  ObstacleSpec spec;
  spec.domain = B;
  spec.obstacle = res.v;
  spec.p = o.p;
  const SolveResult u = solve_obstacle(*space, spec, o.tol);
  res.u = u.field;
  res.u_at_x0 = value_at(res.u, x0);
  bool increasing = true;
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    double m = kInf;
    for (auto i : cands[chosen[j]].set.nodes()) m = std::min(m, value_at(res.u, i));
    res.min_on_E_near_x0.push_back(m);
    const double level = static_cast<double>(j + 1);
    if (m < level - o.tol * std::max(1.0, level)) res.levels_hold = false;
    if (j > 0 && m < res.min_on_E_near_x0[j - 1]) increasing = false;
  }
  res.valid = std::isfinite(res.u_at_x0) && res.levels_hold && increasing &&
              res.min_on_E_near_x0.back() > res.u_at_x0 + 1.0;
  return res;
}

}  // namespace

StrongCartanResult strong_cartan_positive_cap(const AnalyticSet& E, const Point& x0, double R,
                                              const StrongCartanOptions& o) {
  require(R > 0.0, ErrorCode::InvalidArgument, "radius must be positive");
  require(o.max_halvings >= 1, ErrorCode::InvalidArgument, "max_halvings must be positive");
  require(!E.contains(x0), ErrorCode::PreconditionViolated, "x0 must not belong to E");
  const auto space = build_scale_grid(x0, R, R * std::pow(2.0, -o.max_halvings), o.resolution);
  const Region B = point_ball(*space, x0, R);
  const Region set = region_from_descriptor(*space, E).intersect(B);
  const double h_min = smallest_edge(*space);
  std::vector<Candidate> cands;
  for (int k = 1; k <= o.max_halvings; ++k) {
    const double rho = R * std::pow(2.0, -k);
    if (rho < 2.0 * h_min) break;
    Region s = set.intersect(point_ball(*space, x0, rho));
    if (s.empty()) break;
    cands.push_back({rho, std::move(s)});
  }
  return strong_core(space, set, space->nearest_node(x0), B, cands, o);
}

StrongCartanResult strong_cartan_positive_cap(const SpacePtr& space, const Region& E, NodeIndex x0, const Region& B,
                                              const StrongCartanOptions& o) {
  require(E.subset_of(B), ErrorCode::EnotInA, "E must lie inside B");
  const auto d = space->distances_from(x0);
  std::vector<double> radii;
  for (auto i : E.nodes()) radii.push_back((*d)[static_cast<std::size_t>(i)]);
  std::sort(radii.begin(), radii.end(), std::greater<>());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  std::vector<Candidate> cands;
  for (double rho : radii) {
    std::vector<NodeIndex> s;
    for (auto i : E.nodes()) {
      if ((*d)[static_cast<std::size_t>(i)] <= rho) s.push_back(i);
    }
    cands.push_back({rho, Region(std::move(s))});
  }
  return strong_core(space, E, x0, B, cands, o);
}

// ---------------------------------------------------------------------------

std::string to_string(HarnackFamily f) {
  switch (f) {
    case HarnackFamily::Constant:
      return "constant";
    case HarnackFamily::Harmonic:
      return "harmonic";
    default:
      return "capacitary_far_disk";
  }
}

HarnackFamily parse_family(const std::string& text) {
  if (text == "constant") return HarnackFamily::Constant;
  if (text == "harmonic") return HarnackFamily::Harmonic;
  if (text == "capacitary_far_disk") return HarnackFamily::CapacitaryFarDisk;
  fail(ErrorCode::InvalidArgument, "unknown Harnack family '" + text + "'");
}

HarnackReport harnack_check(const WeightedGraphSpace& space, const Ball& B, const HarnackOptions& o) {
  check_exponent(o.p);
  require(o.q > 0.0, ErrorCode::InvalidArgument, "q must be positive");
  require(o.samples >= 1, ErrorCode::InvalidArgument, "need at least one sample");
  require(B.radius > 0.0, ErrorCode::InvalidArgument, "ball radius must be positive");
  require(o.relaxation >= 2.0, ErrorCode::InvalidArgument, "relaxation must be at least 2");
  const double lambda = space.meta().poincare_dilation;
  const double omega_radius = o.relaxation * lambda * B.radius;
  const Region omega = metric_ball(space, B.center, omega_radius);
  require(omega.size() < space.size(), ErrorCode::GeometryViolation, "the dilated ball must not cover the space");
  const Region ball = metric_ball(space, B.center, B.radius);
  const Region twice = metric_ball(space, B.center, 2.0 * B.radius);
  const auto dist = space.distances_from(B.center);
  const std::size_t n = space.size();

  HarnackReport rep;
  rep.q = o.q;
  rep.function_family = to_string(o.family);

  // Draw every random parameter up front so the solves can run in any order.
  Rng rng(o.rng_seed);
  std::vector<std::vector<double>> coeffs(static_cast<std::size_t>(o.samples));
  std::vector<NodeIndex> disk_centres(static_cast<std::size_t>(o.samples), B.center);
  std::vector<double> disk_radii(static_cast<std::size_t>(o.samples), 0.0);
  std::vector<NodeIndex> far;
  for (std::size_t i = 0; i < n; ++i) {
    if ((*dist)[i] >= 3.0 * B.radius && (*dist)[i] <= std::min(6.0 * B.radius, 0.75 * omega_radius)) {
      far.push_back(static_cast<NodeIndex>(i));
    }
  }
  const int dim = space.has_positions() ? space.dim() : 1;
  for (int s = 0; s < o.samples; ++s) {
    auto& c = coeffs[static_cast<std::size_t>(s)];
    for (int k = 0; k < dim + dim * dim; ++k) c.push_back(rng.uniform(-1.0, 1.0));
    if (!far.empty()) disk_centres[static_cast<std::size_t>(s)] = far[static_cast<std::size_t>(rng.below(far.size()))];
    disk_radii[static_cast<std::size_t>(s)] = B.radius * rng.uniform(0.2, 0.5);
  }
  if (o.family == HarnackFamily::CapacitaryFarDisk) {
    require(!far.empty(), ErrorCode::GeometryViolation, "no room for a far disk inside the domain");
  }

  std::vector<ScalarField> fields(static_cast<std::size_t>(o.samples));
  parallel_for(static_cast<std::size_t>(o.samples), [&](std::size_t s) {
    switch (o.family) {
      case HarnackFamily::Constant:
        fields[s].assign(n, 1.0);
        break;
      case HarnackFamily::Harmonic: {
        ScalarField f(n, 0.0);
        const auto& c = coeffs[s];
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<double> y(static_cast<std::size_t>(dim));
          if (space.has_positions()) {
            const auto x = space.position(static_cast<NodeIndex>(i));
            const auto xc = space.position(B.center);
            for (int k = 0; k < dim; ++k) y[static_cast<std::size_t>(k)] = (x[static_cast<std::size_t>(k)] - xc[static_cast<std::size_t>(k)]) / omega_radius;
          } else {
            y[0] = (*dist)[i] / omega_radius;
          }
          double e = 0.0;
          for (int k = 0; k < dim; ++k) e += c[static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(k)];
          for (int k = 0; k < dim; ++k) {
            for (int l = 0; l < dim; ++l) {
              e += 0.5 * c[static_cast<std::size_t>(dim + k * dim + l)] * y[static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(l)];
            }
          }
          f[i] = std::exp(e);
        }
        fields[s] = harmonic_solution(space, omega, f, o.p, o.tol).field;
        break;
      }
      case HarnackFamily::CapacitaryFarDisk: {
        const Region disk = metric_ball(space, disk_centres[s], disk_radii[s], true).intersect(omega);
        fields[s] = capacitary_potential(space, disk, omega, o.p, o.tol).field;
        break;
      }
    }
  });

  const double mu2 = twice.measure(space);
  for (const auto& u : fields) {
    double mean = 0.0;
    for (auto i : twice.nodes()) mean += space.mu(i) * std::pow(std::max(u[static_cast<std::size_t>(i)], 0.0), o.q);
    const double qmean = std::pow(mean / mu2, 1.0 / o.q);
    double sup = -kInf;
    double inf = kInf;
    for (auto i : ball.nodes()) {
      sup = std::max(sup, u[static_cast<std::size_t>(i)]);
      inf = std::min(inf, u[static_cast<std::size_t>(i)]);
    }
    if (o.form != HarnackForm::Super) {
      rep.sub_ratios.push_back(qmean > 0.0 ? sup / qmean : (sup <= 0.0 ? 1.0 : kInf));
    }
    if (o.form != HarnackForm::Sub) {
      rep.super_ratios.push_back(inf > 0.0 ? qmean / inf : (qmean == 0.0 ? 1.0 : kInf));
    }
  }
  for (double r : rep.sub_ratios) rep.max_ratio = std::max(rep.max_ratio, r);
  for (double r : rep.super_ratios) rep.max_ratio = std::max(rep.max_ratio, r);
  return rep;
}

}  // namespace finelab
