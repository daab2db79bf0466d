#include "finelab/fine.hpp"

#include <algorithm>
#include <cmath>

#include "finelab/error.hpp"
#include "finelab/parallel.hpp"

namespace finelab {

std::string to_string(WienerMode mode) { return mode == WienerMode::Rescaled ? "rescaled" : "global"; }

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Thin:
      return "Thin";
    case Verdict::Thick:
      return "Thick";
    default:
      return "Inconclusive";
  }
}

WienerMode parse_mode(const std::string& text) {
  if (text == "rescaled") return WienerMode::Rescaled;
  if (text == "global") return WienerMode::Global;
  fail(ErrorCode::InvalidArgument, "unknown Wiener mode '" + text + "'");
}

namespace {

void check_options(const WienerOptions& o, const Point& x0) {
  require(o.sigma > 1.0, ErrorCode::InvalidArgument, "sigma must exceed 1");
  require(o.r0 > 0.0, ErrorCode::InvalidArgument, "r0 must be positive");
  require(o.scales >= 1, ErrorCode::InvalidArgument, "need at least one scale");
  require(o.resolution >= 2, ErrorCode::InvalidArgument, "resolution must be at least 2");
  require(o.tol > 0.0, ErrorCode::InvalidArgument, "tolerance must be positive");
  require(x0.size() >= 1 && x0.size() <= 3, ErrorCode::InvalidArgument, "x0 must have 1 to 3 coordinates");
  check_exponent(o.p);
}

double quotient_term(double num, double den, double p, bool& convention) {
  convention = den == 0.0;
  if (convention) return 1.0;
  return std::pow(num / den, 1.0 / (p - 1.0));
}

void finish(WienerReport& rep, int tail_window) {
  double s = 0.0;
  rep.terms.clear();
  rep.partial_sums.clear();
  for (const auto& d : rep.scales) {
    rep.terms.push_back(d.term);
    s += d.term;
    rep.partial_sums.push_back(s);
    rep.max_term = std::max(rep.max_term, d.term);
    if (d.convention) ++rep.convention_hits;
    if (d.above_one) rep.flagged = true;
  }
  rep.decay_ratio = fit_decay_ratio(rep.terms, tail_window);
}

}  // namespace

double fit_decay_ratio(const std::vector<double>& terms, int tail_window) {
  if (terms.empty()) return 0.0;
  const auto n = terms.size();
  const auto w = static_cast<std::size_t>(std::max(1, tail_window));
  if (n >= w && std::all_of(terms.end() - static_cast<std::ptrdiff_t>(w), terms.end(), [](double t) { return t == 0.0; })) {
    return 0.0;
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (terms[j] <= 0.0) continue;
    const double x = static_cast<double>(j + 1);
    const double y = std::log(terms[j]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) return terms.back() == 0.0 ? 0.0 : 1.0;
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return std::exp(slope);
}

WienerReport wiener_terms(const AnalyticSet& descriptor, const Point& x0, const WienerOptions& o) {
  check_options(o, x0);
  const int dim = static_cast<int>(x0.size());
  WienerReport rep;
  rep.descriptor = descriptor;
  rep.x0 = x0;
  rep.options = o;
  const double scaling_exponent = dim + o.weight_exponent - o.p;

  if (o.mode == WienerMode::Rescaled) {
    require(descriptor.dilatable(), ErrorCode::DescriptorNotDilatable,
            "rescaled mode needs a descriptor that can be pulled back");
    const bool centred = std::all_of(x0.begin(), x0.end(), [](double v) { return v == 0.0; });
    require(o.weight_exponent == 0.0 || centred, ErrorCode::PreconditionViolated,
            "rescaled mode needs an unweighted space or a weight centred at x0");
    const auto grid = build_cube_grid(dim, 1.0, 1.0 / o.resolution, o.weight_exponent);
    const Point origin(static_cast<std::size_t>(dim), 0.0);
    const Region outer = point_ball(*grid, origin, 1.0);
    const Region inner = point_ball(*grid, origin, 1.0 / o.sigma);
    const CapacityResult den = variational_capacity(*grid, inner, outer, o.p, o.tol);
    rep.scales.resize(static_cast<std::size_t>(o.scales));
    parallel_for(static_cast<std::size_t>(o.scales), [&](std::size_t k) {
      const int j = static_cast<int>(k) + 1;
      const double rho_out = std::pow(o.sigma, 1 - j) * o.r0;
      const Region set = region_from_descriptor(*grid, descriptor.pullback(x0, rho_out)).intersect(inner);
      const CapacityResult num = variational_capacity(*grid, set, outer, o.p, o.tol);
      ScaleDiagnostics d;
      d.j = j;
      d.r_j = rho_out / o.sigma;
      const double physical = std::pow(rho_out, scaling_exponent);
      d.cap_num = num.value * physical;
      d.cap_den = den.value * physical;
      d.term = quotient_term(num.value, den.value, o.p, d.convention);
      d.above_one = d.term > 1.05;
      d.kkt_residual = std::max(num.diagnostics.kkt_residual, den.diagnostics.kkt_residual);
      d.iterations = num.diagnostics.iterations + den.diagnostics.iterations;
      d.converged = num.diagnostics.converged && den.diagnostics.converged;
      rep.scales[k] = d;
    });
  } else {
    GridOptions g;
    g.dim = dim;
    g.h = o.r0 / o.resolution;
    g.weight_exponent = o.weight_exponent;
    for (double c : x0) {
      g.lo.push_back(c - o.r0);
      g.hi.push_back(c + o.r0);
    }
    const auto grid = build_grid(g);
    const Region full = region_from_descriptor(*grid, descriptor);
    std::vector<int> used;
    for (int j = 1; j <= o.scales; ++j) {
      if (std::pow(o.sigma, -j) * o.r0 < 8.0 * g.h) {
        rep.skipped_scales.push_back(j);
      } else {
        used.push_back(j);
      }
    }
    require(!used.empty(), ErrorCode::ScaleUnderflow, "every scale is below eight grid cells");
    rep.scales.resize(used.size());
    parallel_for(used.size(), [&](std::size_t k) {
      const int j = used[k];
      const double r_in = std::pow(o.sigma, -j) * o.r0;
      const Region outer = point_ball(*grid, x0, o.sigma * r_in);
      const Region inner = point_ball(*grid, x0, r_in);
      const CapacityResult den = variational_capacity(*grid, inner, outer, o.p, o.tol);
      const CapacityResult num = variational_capacity(*grid, full.intersect(inner), outer, o.p, o.tol);
      ScaleDiagnostics d;
      d.j = j;
      d.r_j = r_in;
      d.cap_num = num.value;
      d.cap_den = den.value;
      d.term = quotient_term(num.value, den.value, o.p, d.convention);
      d.above_one = d.term > 1.05;
      d.kkt_residual = std::max(num.diagnostics.kkt_residual, den.diagnostics.kkt_residual);
      d.iterations = num.diagnostics.iterations + den.diagnostics.iterations;
      d.converged = num.diagnostics.converged && den.diagnostics.converged;
      rep.scales[k] = d;
    });
  }
  finish(rep, ClassificationPolicy{}.K);
  return rep;
}

Classification classify_terms(const std::vector<double>& terms, const ClassificationPolicy& policy) {
  require(policy.K >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
  require(static_cast<int>(terms.size()) >= policy.K, ErrorCode::PreconditionViolated,
          "report has fewer than K terms");
  Classification c;
  c.scales_used = static_cast<int>(terms.size());
  c.decay_ratio = fit_decay_ratio(terms, policy.K);
  const double last = terms.back();
  c.tail_estimate = c.decay_ratio < 1.0 ? last * c.decay_ratio / (1.0 - c.decay_ratio)
                                        : std::numeric_limits<double>::infinity();
  if (last == 0.0) c.tail_estimate = 0.0;
  c.floor_estimate = *std::min_element(terms.end() - policy.K, terms.end());
  if (c.decay_ratio <= policy.rho_max && c.tail_estimate <= policy.eps_tail) {
    c.verdict = Verdict::Thin;
  } else if (c.floor_estimate >= policy.tau_floor && c.decay_ratio > policy.rho_max) {
    c.verdict = Verdict::Thick;
  } else {
    c.verdict = Verdict::Inconclusive;
  }
  return c;
}

Classification classify_thin(const WienerReport& report, const ClassificationPolicy& policy) {
  return classify_terms(report.terms, policy);
}

ShrinkProfile capacity_shrink_profile(const WeightedGraphSpace& space, const Region& E, const Point& x0,
                                      const Region& B, const std::vector<double>& radii, double p, double tol) {
  check_exponent(p);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    require(radii[k] > 0.0, ErrorCode::InvalidArgument, "radii must be positive");
    require(k == 0 || radii[k] < radii[k - 1], ErrorCode::InvalidArgument, "radii must be strictly decreasing");
  }
  ShrinkProfile prof;
  prof.points.resize(radii.size());
  std::vector<Region> sets(radii.size());
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const Region ball = point_ball(space, x0, radii[k]);
    require(ball.subset_of(B), ErrorCode::GeometryViolation, "ball B(x0, rho) must lie inside B");
    sets[k] = E.intersect(ball);
  }
  parallel_for(radii.size(), [&](std::size_t k) {
    const CapacityResult c = variational_capacity(space, sets[k], B, p, tol);
    prof.points[k] = {radii[k], c.value, c.diagnostics};
  });
  for (std::size_t k = 1; k < radii.size(); ++k) {
    if (prof.points[k].capacity > prof.points[k - 1].capacity * (1.0 + 2.0 * tol)) prof.monotone = false;
  }
  return prof;
}

ThinUnionResult thin_union_radii(const std::vector<WienerReport>& reports, double budget,
                                 const ClassificationPolicy& policy) {
  require(!reports.empty(), ErrorCode::InvalidArgument, "need at least one report");
  require(budget > 0.0, ErrorCode::InvalidArgument, "budget must be positive");
  const WienerReport& first = reports.front();
  ThinUnionResult res;
  AnalyticSet uni = AnalyticSet::empty();
  for (std::size_t idx = 0; idx < reports.size(); ++idx) {
    const WienerReport& r = reports[idx];
    require(r.x0 == first.x0 && r.options.sigma == first.options.sigma && r.options.r0 == first.options.r0,
            ErrorCode::PreconditionViolated, "reports must share x0, sigma and r0");
    const Classification c = classify_thin(r, policy);
    require(c.verdict == Verdict::Thin, ErrorCode::PreconditionViolated,
            "report " + std::to_string(idx + 1) + " is not classified Thin");
    const double share = budget * std::pow(2.0, -static_cast<double>(idx + 1));
    const auto J = static_cast<int>(r.terms.size());
    // Tail beyond scale m: the remaining computed terms plus the geometric extrapolation.
    int chosen = -1;
    double tail = 0.0;
    for (int m = 0; m <= J; ++m) {
      double t = c.tail_estimate;
      for (int k = m; k < J; ++k) t += r.terms[static_cast<std::size_t>(k)];
      if (t <= share) {
        chosen = m;
        tail = t;
        break;
      }
    }
    require(chosen >= 0, ErrorCode::BudgetInfeasible,
            "report " + std::to_string(idx + 1) + " never meets its share of the budget");
    const double radius = std::pow(r.options.sigma, -chosen) * r.options.r0;
    res.truncation.push_back(chosen);
    res.radii.push_back(radius);
    res.tails.push_back(tail);
    res.parts_sum += r.partial_sums.empty() ? 0.0 : r.partial_sums.back();
    uni = uni.unite(r.descriptor.intersect(AnalyticSet::ball(r.x0, radius)));
  }
  res.union_descriptor = uni;
  res.combined = wiener_terms(uni, first.x0, first.options);
  res.classification = classify_thin(res.combined, policy);
  return res;
}

}  // namespace finelab
