#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "finelab/cartan.hpp"
#include "finelab/error.hpp"

using namespace finelab;

namespace {

const Point kOrigin{0.0, 0.0};

AnalyticSet chain() { return AnalyticSet::thin_disk_chain(kOrigin, 0.6, 2.0, 12, 0.2, 0.3); }
AnalyticSet narrow_sector() { return AnalyticSet::sector(kOrigin, std::numbers::pi / 6); }
AnalyticSet punctured(double radius) { return AnalyticSet::annulus(kOrigin, 1e-9, radius); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

WeakCartanOptions weak_options(int resolution) {
  WeakCartanOptions o;
  o.resolution = resolution;
  return o;
}

BoundsOptions bounds_options(int resolution) {
  BoundsOptions o;
  o.resolution = resolution;
  return o;
}

void check_certificate_soundness(const CartanCertificate& c, const AnalyticSet& E, const WeakCartanOptions& o) {
  for (std::size_t i = 0; i < c.u.size(); ++i) {
    CHECK(c.u[i] >= -o.tol);
    CHECK(c.u[i] <= 1.0 + o.tol);
    CHECK(c.u_prime[i] <= 1.0 + o.tol);
    CHECK(c.v[i] == std::max(c.u[i], c.u_prime[i]));
  }
  if (!c.valid) return;
  const NodeIndex x0 = c.space->nearest_node(c.B.center);
  CHECK(c.v[static_cast<std::size_t>(x0)] <= 1.0 - o.margin);
  const Region near = region_from_descriptor(*c.space, E).intersect(point_ball(*c.space, c.B.center, c.B.radius));
  for (auto i : near.nodes()) CHECK(c.v[static_cast<std::size_t>(i)] >= 1.0 - o.coverage_tol);
}

}  // namespace

TEST_CASE("weak Cartan: empty set") {
  auto o = weak_options(32);
  auto c = weak_cartan(AnalyticSet::empty(), kOrigin, 1.0, o);
  CHECK(c.valid);
  CHECK(c.u_at_x0 == 0.0);
  CHECK(c.uprime_at_x0 == 0.0);
  CHECK(c.coverage_violations.empty());
  CHECK(c.covered_nodes == 0);
  for (double v : c.v) CHECK(v == 0.0);
  CHECK(c.B.radius == doctest::Approx(0.1));
  CHECK(c.resolvable_annuli >= 3);
}

TEST_CASE("weak Cartan: thin and thick sets") {
  for (int res : {32, 64}) {
    auto o = weak_options(res);
    auto thin = weak_cartan(chain(), kOrigin, 1.0, o);
    CHECK(thin.valid);
    CHECK(thin.u_at_x0 <= 0.9);
    CHECK(thin.uprime_at_x0 <= 0.9);
    check_certificate_soundness(thin, chain(), o);

    o.classify = true;
    o.wiener.scales = 6;
    o.wiener.resolution = 32;
    auto thick = weak_cartan(narrow_sector(), kOrigin, 1.0, o);
    CHECK(thick.u_at_x0 >= 0.99);
    CHECK(!thick.valid);
    REQUIRE(thick.verdict.has_value());
    CHECK(*thick.verdict == Verdict::Thick);
    CHECK(thick.expected_invalid);
    check_certificate_soundness(thick, narrow_sector(), o);
  }
}

TEST_CASE("weak Cartan: preconditions") {
  CHECK(code_of([] { weak_cartan(AnalyticSet::ball(kOrigin, 0.5), kOrigin, 1.0, weak_options(32)); }) ==
        ErrorCode::PreconditionViolated);
  auto o = weak_options(16);
  o.levels = 1;
  CHECK(code_of([&] { weak_cartan(chain(), kOrigin, 1.0, o); }) == ErrorCode::ScaleUnderflow);
}

TEST_CASE("product bounds: empty and fully occupied") {
  auto empty = potential_product_bounds(AnalyticSet::empty(), kOrigin, 1.0, bounds_options(32));
  for (double a : empty.a) CHECK(a == 0.0);
  for (double b : empty.upper_products) CHECK(b == 1.0);
  for (double b : empty.lower_products) CHECK(b == 1.0);
  CHECK(empty.u_at_x0 == 0.0);
  CHECK(empty.upper_bound == 0.0);
  CHECK(empty.lower_bound == 0.0);
  CHECK(empty.bounds_hold);

  for (int res : {32, 64}) {
    auto full = potential_product_bounds(punctured(2.0), kOrigin, 1.0, bounds_options(res));
    CHECK(full.u_at_x0 >= 0.99);
    for (double q : full.quotients) CHECK(q >= 1.0);
    CHECK(std::isfinite(full.fitted_Cprime));
    CHECK(full.bounds_hold);
    CHECK(full.upper_products.back() <= 0.01);
    CHECK(full.removed_fraction > 0.0);
  }
}

TEST_CASE("product bounds: 1-D scale invariance") {
  auto o = bounds_options(1024);
  o.scales = 3;
  auto rep = potential_product_bounds(AnalyticSet::annulus({0.0}, 1e-9, 2.0), {0.0}, 1.0, o);
  // cap([-a/2, a/2], (-a, a)) / cap([-a/s, a/s], (-a, a)) = 2 (1 - 1/s) for p = 2
  for (double q : rep.quotients) CHECK(q == doctest::Approx(2.0 * (1.0 - 1.0 / o.sigma)).epsilon(0.02));
  CHECK(rep.u_at_x0 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.lower_products.back() < 1.0);
  // a singleton at x0 lies inside the innermost ball, which no shell reaches
  auto single = potential_product_bounds(AnalyticSet::singleton({0.0}), {0.0}, 1.0, o);
  for (double q : single.quotients) CHECK(q == 0.0);
  CHECK(single.u_at_x0 == 0.0);
}

TEST_CASE("product bounds: thin set and supplied constant") {
  auto rep = potential_product_bounds(chain(), kOrigin, 1.0, bounds_options(32));
  CHECK(rep.bounds_hold);
  CHECK(rep.wolff_holds);
  CHECK(rep.partial_product_holds);
  CHECK(rep.u_at_x0 > 0.0);
  CHECK(rep.upper_bound >= rep.u_at_x0 - 1e-12);
  auto o = bounds_options(32);
  o.Cprime = 2.0 * rep.fitted_Cprime;
  auto sup = potential_product_bounds(chain(), kOrigin, 1.0, o);
  CHECK(sup.Cprime_supplied);
  CHECK(sup.Cprime_used == o.Cprime.value());
  CHECK(sup.upper_bound >= rep.upper_bound);
}

TEST_CASE("property: product sequences") {
  BoundsReport rep;
  rep.quotients = {0.3, 0.0, 1.2, 0.05, 0.7};
  for (double C : {0.1, 0.5, 1.0, 3.0}) {
    for (double c : {0.2, 1.0}) {
      evaluate_products(rep, C, c);
      CHECK(rep.partial_product_holds);
      double asum = 0.0;
      for (std::size_t k = 0; k < rep.a.size(); ++k) {
        asum += rep.a[k];
        CHECK(rep.upper_products[k] >= 0.0);
        CHECK(rep.upper_products[k] <= 1.0);
        CHECK(rep.lower_products[k] >= rep.upper_products[k]);
        CHECK(1.0 - rep.upper_products[k] <= asum + 1e-15);
        if (k > 0) {
          CHECK(rep.upper_products[k] <= rep.upper_products[k - 1]);
          CHECK(rep.lower_products[k] <= rep.lower_products[k - 1]);
        }
      }
    }
  }
}

TEST_CASE("boundary estimate") {
  const PointBall B{kOrigin, 0.1};
  const PointBall B0{kOrigin, 1.0};
  BoundaryOptions o;
  auto empty = boundary_estimate_check(AnalyticSet::empty(), B, B0, o);
  CHECK(empty.sup_on_sphere == 0.0);
  CHECK(empty.implied_Cprime == 0.0);
  CHECK(empty.cap_E == 0.0);

  std::vector<double> cprime;
  for (int res : {32, 64}) {
    o.resolution = res;
    auto rep = boundary_estimate_check(AnalyticSet::ball({0.4, 0.0}, 0.03, true), B, B0, o);
    CHECK(std::isfinite(rep.implied_Cprime));
    CHECK(rep.implied_Cprime > 0.0);
    CHECK(rep.inf_on_sphere <= rep.sup_on_sphere);
    CHECK(rep.sup_on_sphere <= 1.0);
    CHECK(rep.inf_on_sphere >= 0.0);
    CHECK(rep.sphere_nodes > 0);
    CHECK(rep.relaxed);
    cprime.push_back(rep.implied_Cprime);
  }
  CHECK(std::max(cprime[0], cprime[1]) <= 2.0 * std::min(cprime[0], cprime[1]));

  CHECK(code_of([&] { boundary_estimate_check(AnalyticSet::ball(kOrigin, 0.1), B, B0, o); }) ==
        ErrorCode::HypothesisViolated);
  CHECK(code_of([&] { boundary_estimate_check(AnalyticSet::empty(), {kOrigin, 0.2}, B0, o); }) ==
        ErrorCode::GeometryViolation);
}

TEST_CASE("strong Cartan") {
  SUBCASE("empty set") {
    auto r = strong_cartan_positive_cap(AnalyticSet::empty(), kOrigin, 1.0);
    CHECK(r.valid);
    CHECK(r.u_at_x0 == 0.0);
    for (double v : r.u) CHECK(v == 0.0);
  }
  SUBCASE("thick sector") {
    StrongCartanOptions o;
    o.resolution = 32;
    CHECK(code_of([&] { strong_cartan_positive_cap(narrow_sector(), kOrigin, 1.0, o); }) == ErrorCode::ShrinkTooSlow);
  }
  SUBCASE("1-D geometric point sequence") {
    GridOptions g;
    g.dim = 1;
    g.lo = {-1.0};
    g.hi = {1.0};
    g.h = 1.0 / 1024;
    auto s = build_grid(g);
    std::vector<NodeIndex> pts;
    for (int k = 1; k <= 9; ++k) pts.push_back(s->nearest_node(Point{std::pow(2.0, -k)}));
    std::sort(pts.begin(), pts.end());
    const Region B = point_ball(*s, Point{0.0}, 1.0);
    CHECK(code_of([&] { strong_cartan_positive_cap(s, Region(pts), s->nearest_node(Point{0.0}), B); }) ==
          ErrorCode::ShrinkTooSlow);
  }
  SUBCASE("sparse points in the plane, p = 1.5") {
    auto s = build_scale_grid(kOrigin, 1.0, std::pow(2.0, -24), 16);
    std::vector<NodeIndex> pts;
    for (int k = 1; k <= 22; ++k) pts.push_back(s->nearest_node(Point{std::pow(2.0, -k), 0.0}));
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    StrongCartanOptions o;
    o.p = 1.5;
    o.scales = 6;
    auto r = strong_cartan_positive_cap(s, Region(pts), s->nearest_node(kOrigin), point_ball(*s, kOrigin, 1.0), o);
    CHECK(r.levels_hold);
    CHECK(r.valid);
    CHECK(std::isfinite(r.u_at_x0));
    CHECK(r.min_on_E_near_x0.back() > r.u_at_x0 + 1.0);
    for (std::size_t j = 0; j < r.radii.size(); ++j) {
      CHECK(r.shell_capacity[j] < r.budgets[j]);
      if (j > 0) CHECK(r.radii[j] < r.radii[j - 1]);
    }
    for (double v : r.u) CHECK(v >= 0.0);
  }
}

TEST_CASE("property: a node of E at x0 forces u(x0) = 1") {
  auto s = build_cube_grid(2, 1.0, 1.0 / 16);
  for (double p : {1.5, 2.0, 4.0}) {
    for (double radius : {0.3, 0.7}) {
      const NodeIndex c = s->nearest_node(kOrigin);
      auto u = capacitary_potential(*s, Region({c}), point_ball(*s, kOrigin, radius), p);
      CHECK(u.field[static_cast<std::size_t>(c)] == 1.0);
    }
  }
}

TEST_CASE("Harnack harness") {
  auto s = build_cube_grid(2, 1.0, 1.0 / 32);
  const Ball B{s->nearest_node(kOrigin), 0.1, false};
  SUBCASE("constants give ratio one") {
    HarnackOptions o;
    o.family = HarnackFamily::Constant;
    o.samples = 4;
    auto rep = harnack_check(*s, B, o);
    for (double r : rep.sub_ratios) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
    for (double r : rep.super_ratios) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.max_ratio == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("harmonic samples") {
    HarnackOptions o;
    o.samples = 8;
    auto rep = harnack_check(*s, B, o);
    CHECK(rep.sub_ratios.size() + rep.super_ratios.size() > 0);
    CHECK(std::isfinite(rep.max_ratio));
    CHECK(rep.max_ratio >= 1.0);
    for (double r : rep.sub_ratios) CHECK(r > 0.0);
    auto again = harnack_check(*s, B, o);
    CHECK(again.max_ratio == rep.max_ratio);
  }
  SUBCASE("far disk potential, super form") {
    HarnackOptions o;
    o.family = HarnackFamily::CapacitaryFarDisk;
    o.form = HarnackForm::Super;
    o.q = 0.5;
    o.samples = 4;
    auto rep = harnack_check(*s, B, o);
    CHECK(rep.sub_ratios.empty());
    CHECK(!rep.super_ratios.empty());
    CHECK(std::isfinite(rep.max_ratio));
    CHECK(rep.max_ratio > 0.0);
  }
  SUBCASE("errors") {
    HarnackOptions o;
    o.q = 0.0;
    CHECK(code_of([&] { harnack_check(*s, B, o); }) == ErrorCode::InvalidArgument);
    HarnackOptions big;
    big.relaxation = 50.0;
    CHECK(code_of([&] { harnack_check(*s, B, big); }) == ErrorCode::GeometryViolation);
  }
}
