#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "finelab/error.hpp"
#include "finelab/space.hpp"
#include "oracles.hpp"

using namespace finelab;

namespace {

SpacePtr line(double lo, double hi, double h) {
  GridOptions g;
  g.dim = 1;
  g.lo = {lo};
  g.hi = {hi};
  g.h = h;
  return build_grid(g);
}

NodeIndex at(const WeightedGraphSpace& s, Point x) { return s.nearest_node(x); }

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("1-D grid uses half cells at the ends") {
  auto s = line(-1, 1, 0.5);
  REQUIRE(s->size() == 5);
  CHECK(s->edges().size() == 4);
  CHECK(s->mu(at(*s, {-1.0})) == doctest::Approx(0.25));
  CHECK(s->mu(at(*s, {1.0})) == doctest::Approx(0.25));
  CHECK(s->mu(at(*s, {0.0})) == doctest::Approx(0.5));
  CHECK(s->total_measure() == doctest::Approx(2.0));
}

TEST_CASE("2-D grid node and edge counts") {
  auto s = build_cube_grid(2, 1.0, 1.0);
  CHECK(s->size() == 9);
  CHECK(s->edges().size() == 12);
  auto fine = build_cube_grid(2, 1.0, 1.0 / 128);
  CHECK(fine->size() == 257u * 257u);
  CHECK(fine->total_measure() == doctest::Approx(4.0));
}

TEST_CASE("grid errors") {
  GridOptions g;
  g.dim = 2;
  g.lo = {0, 0};
  g.hi = {0, 1};
  g.h = 0.1;
  CHECK(code_of([&] { build_grid(g); }) == ErrorCode::DegenerateExtent);
  g.hi = {1, 1};
  g.weight_exponent = -2.0;
  CHECK(code_of([&] { build_grid(g); }) == ErrorCode::InvalidArgument);
  g.weight_exponent = 0.0;
  g.h = 1e-4;
  g.max_nodes = 1000;
  CHECK(code_of([&] { build_grid(g); }) == ErrorCode::NodeBudgetExceeded);
}

TEST_CASE("weighted grid measures follow the density") {
  GridOptions g;
  g.dim = 1;
  g.lo = {0.0};
  g.hi = {1.0};
  g.h = 1.0 / 64;
  g.weight_exponent = 1.0;
  auto s = build_grid(g);
  // integral of x over [0,1]
  CHECK(s->total_measure() == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("radial path graph") {
  RadialOptions o;
  o.n = 1;
  o.rmin = 0.0;
  o.rmax = 1.0;
  o.h = 0.25;
  auto s = build_radial(o);
  REQUIRE(s->size() == 5);
  const double w0 = unit_sphere_area(1);
  CHECK(w0 == doctest::Approx(2.0));
  CHECK(s->mu(0) == doctest::Approx(w0 * 0.125));
  CHECK(s->mu(2) == doctest::Approx(w0 * 0.25));
  CHECK(s->mu(4) == doctest::Approx(w0 * 0.125));
  o.rmin = 2.0;
  CHECK(code_of([&] { build_radial(o); }) == ErrorCode::DegenerateExtent);
  o.rmin = -1.0;
  CHECK(code_of([&] { build_radial(o); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("radial measures integrate the shell volume") {
  RadialOptions o;
  o.n = 3;
  o.rmin = 0.5;
  o.rmax = 1.0;
  o.h = 1.0 / 64;
  auto s = build_radial(o);
  const double exact = 4.0 / 3.0 * std::numbers::pi * (1.0 - 0.125);
  CHECK(s->total_measure() == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("space text format") {
  auto s = parse_space("space dim=0\n# path\nn 1 1.0\nn 2 1.0\nn 3 2.0\ne 1 2 1.0 1.0\ne 2 3 0.5 2.0\n");
  CHECK(s->size() == 3);
  CHECK(s->distance(s->index_of(1), s->index_of(3)) == doctest::Approx(1.5));
  CHECK(code_of([] { parse_space("space dim=0\nn 1 1.0\nn 2 1.0\ne 1 7 1.0 1.0\n"); }) == ErrorCode::UnknownNode);
  CHECK(code_of([] { parse_space("space dim=0\nn 1 1.0\nn 2 1.0\ne 1 2 1.0 0\n"); }) ==
        ErrorCode::NonpositiveWeight);
  CHECK(code_of([] { parse_space("space dim=0\nn 1 1.0\nn 2 1.0\nn 3 1.0\ne 1 2 1.0 1.0\n"); }) ==
        ErrorCode::Disconnected);
  CHECK(code_of([] { parse_space("space dim=0\nn 1 1.0\nbogus\n"); }) == ErrorCode::ParseError);
  try {
    parse_space("space dim=0\nn 1 1.0\nn 2 x\n");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("save and load round trip") {
  auto s = build_cube_grid(2, 1.0, 0.25, 0.5);
  const auto path = std::filesystem::temp_directory_path() / "finelab_space_roundtrip.txt";
  save_space(*s, path);
  auto t = load_space(path);
  std::filesystem::remove(path);
  REQUIRE(t->size() == s->size());
  for (std::size_t i = 0; i < s->size(); ++i) {
    const auto k = static_cast<NodeIndex>(i);
    CHECK(t->mu(k) == s->mu(k));
    CHECK(t->position(k)[0] == s->position(k)[0]);
  }
  CHECK(format_space(*t) == format_space(*s));
}

TEST_CASE("metric balls are open by default") {
  auto s = line(-1, 1, 0.5);
  const auto c = at(*s, {0.0});
  auto b = metric_ball(*s, c, 0.6);
  CHECK(b.size() == 3);
  CHECK(b.contains(at(*s, {-0.5})));
  CHECK(b.contains(at(*s, {0.5})));
  CHECK(metric_ball(*s, c, 0.5).size() == 1);
  CHECK(metric_ball(*s, c, 0.5, true).size() == 3);
  CHECK(metric_ball(*s, c, 0.1).size() == 1);
  CHECK(metric_ball(*s, c, 10.0).size() == s->size());
}

TEST_CASE("abstract graphs use path distance") {
  auto s = parse_space("space dim=0\nn 1 1\nn 2 1\nn 3 1\ne 1 2 1 1\ne 2 3 1 1\ne 1 3 5 1\n");
  CHECK(s->distance(s->index_of(1), s->index_of(3)) == doctest::Approx(2.0));
  CHECK(metric_ball(*s, s->index_of(1), 2.0).size() == 2);
  CHECK(code_of([&] { region_from_descriptor(*s, AnalyticSet::ball({0.0, 0.0}, 1.0)); }) == ErrorCode::NoPositions);
}

TEST_CASE("grid path distance within sqrt(dim) of Euclidean") {
  auto s = build_cube_grid(2, 1.0, 0.125);
  SpaceMeta meta = s->meta();
  std::vector<NodeId> ids(s->ids().begin(), s->ids().end());
  std::vector<double> mu(s->measures().begin(), s->measures().end());
  std::vector<Edge> edges(s->edges().begin(), s->edges().end());
  WeightedGraphSpace abstract(0, ids, mu, {}, edges, meta);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto i = static_cast<NodeIndex>(rng() % s->size());
    const auto j = static_cast<NodeIndex>(rng() % s->size());
    const double e = s->distance(i, j);
    const double g = abstract.distance(i, j);
    CHECK(g >= e - 1e-12);
    CHECK(g <= std::sqrt(2.0) * e + 1e-12);
  }
}

TEST_CASE("descriptor regions") {
  auto s = build_cube_grid(2, 1.0, 1.0 / 128);
  SUBCASE("sector") {
    auto E = region_from_descriptor(*s, AnalyticSet::sector({0.0, 0.0}, std::numbers::pi / 6));
    for (auto i : E.nodes()) {
      const auto x = s->position(i);
      const double a = std::atan2(x[1], x[0]);
      CHECK(a >= -1e-12);
      CHECK(a <= std::numbers::pi / 6 + 1e-12);
    }
    CHECK(!E.contains(at(*s, {0.0, 0.0})));
    CHECK(E.contains(at(*s, {0.5, 0.1})));
  }
  SUBCASE("cusp column at x = 1/4") {
    auto E = region_from_descriptor(*s, AnalyticSet::exp_cusp({0.0, 0.0}));
    int column = 0;
    for (auto i : E.nodes()) {
      if (std::abs(s->position(i)[0] - 0.25) < 1e-12) ++column;
    }
    int expected = 0;
    for (int k = -128; k <= 128; ++k) {
      if (std::abs(k / 128.0) <= std::exp(-4.0)) ++expected;
    }
    CHECK(expected == 5);
    CHECK(column == expected);
  }
  SUBCASE("singleton maps to the nearest node") {
    auto E = region_from_descriptor(*s, AnalyticSet::singleton({0.3001, -0.2}));
    REQUIRE(E.size() == 1);
    CHECK(E.nodes()[0] == at(*s, {0.3001, -0.2}));
  }
  SUBCASE("set algebra on descriptors") {
    auto a = AnalyticSet::ball({0.0, 0.0}, 0.5);
    auto b = AnalyticSet::ball({0.25, 0.0}, 0.5);
    auto ra = region_from_descriptor(*s, a);
    auto rb = region_from_descriptor(*s, b);
    CHECK(region_from_descriptor(*s, a.unite(b)) == ra.unite(rb));
    CHECK(region_from_descriptor(*s, a.intersect(b)) == ra.intersect(rb));
    CHECK(region_from_descriptor(*s, a.minus(b)) == ra.minus(rb));
  }
}

TEST_CASE("descriptor JSON and short forms round trip") {
  for (const char* text : {"sector:angle=0.5", "cusp:length=0.8", "ball:r=0.3,x=0.1", "annulus:rin=0.1,rout=0.4",
                           "diskchain:count=4", "disk:cx=0.4,r=0.05", "empty", "singleton:x=0.2"}) {
    auto d = AnalyticSet::parse(text, 2);
    auto back = AnalyticSet::from_json(d.to_json());
    CHECK(back.to_json() == d.to_json());
  }
  CHECK(code_of([] { AnalyticSet::parse("blob:r=1", 2); }) == ErrorCode::ParseError);
}

TEST_CASE("geometry report") {
  GeometryOptions o;
  o.sample_count = 32;
  o.min_radius_cells = 4;
  auto one = line(-1, 1, 1.0 / 256);
  auto r1 = geometry_report(*one, o);
  CHECK(r1.doubling_constant_empirical >= 1.0);
  // O(h / r) excess from the lattice; sampled radii are at least 4 cells.
  CHECK(r1.doubling_constant_empirical <= 2.0 + 4.0 / o.min_radius_cells);
  auto two = build_cube_grid(2, 1.0, 1.0 / 64);
  auto r2 = geometry_report(*two, o);
  CHECK(r2.poincare_constant_empirical >= 0.0);
  CHECK(std::isfinite(r2.poincare_constant_empirical));
  // Interior balls have area ratio 4; balls cut by the boundary can exceed it.
  CHECK(r2.doubling_constant_empirical >= 3.6);
  CHECK(r2.doubling_constant_empirical <= 4.0 * 1.1 * 2.0);
  auto again = geometry_report(*two, o);
  CHECK(again.doubling_constant_empirical == r2.doubling_constant_empirical);
  CHECK(again.poincare_constant_empirical == r2.poincare_constant_empirical);
}

TEST_CASE("property: ball monotonicity") {
  std::mt19937_64 rng(11);
  auto s = build_cube_grid(2, 1.0, 1.0 / 16);
  auto g = oracle::random_graph(10, rng);
  for (const auto& sp : {s, g}) {
    for (int k = 0; k < 40; ++k) {
      const auto c = static_cast<NodeIndex>(rng() % sp->size());
      const double r1 = 0.05 + 2.0 * static_cast<double>(rng() % 1000) / 1000.0;
      const double r2 = r1 + static_cast<double>(rng() % 1000) / 1000.0;
      CHECK(metric_ball(*sp, c, r1).subset_of(metric_ball(*sp, c, r2)));
      CHECK(metric_ball(*sp, c, r1).subset_of(metric_ball(*sp, c, r1, true)));
    }
  }
}

TEST_CASE("property: measure additivity is exact") {
  std::mt19937_64 rng(5);
  GridOptions g;
  g.dim = 2;
  g.lo = {-1, -1};
  g.hi = {1, 1};
  g.h = 1.0 / 32;
  g.weight_exponent = 0.7;
  auto s = build_grid(g);
  for (int k = 0; k < 30; ++k) {
    std::vector<std::uint8_t> ma(s->size()), mb(s->size());
    for (auto& x : ma) x = rng() % 3 == 0;
    for (auto& x : mb) x = rng() % 2 == 0;
    auto A = Region::from_mask(ma), B = Region::from_mask(mb);
    const double lhs = A.unite(B).measure(*s) + A.intersect(B).measure(*s);
    const double rhs = A.measure(*s) + B.measure(*s);
    CHECK(std::abs(lhs - rhs) <= 1e-13 * rhs);
  }
}

TEST_CASE("property: rescaling consistency") {
  auto big = build_cube_grid(2, 1.0, 1.0 / 32);
  auto small = build_cube_grid(2, 0.5, 1.0 / 64);
  REQUIRE(big->size() == small->size());
  for (const auto& d : {AnalyticSet::sector({0.0, 0.0}, 0.7), AnalyticSet::ball({0.1, 0.05}, 0.2),
                        AnalyticSet::exp_cusp({0.0, 0.0}), AnalyticSet::annulus({0.0, 0.0}, 0.1, 0.3)}) {
    auto on_small = region_from_descriptor(*small, d);
    auto on_big = region_from_descriptor(*big, d.pullback({0.0, 0.0}, 0.5));
    REQUIRE(on_small.size() == on_big.size());
    for (std::size_t k = 0; k < on_small.size(); ++k) {
      const auto ys = small->position(on_small.nodes()[k]);
      const auto yb = big->position(on_big.nodes()[k]);
      CHECK(yb[0] == 2.0 * ys[0]);
      CHECK(yb[1] == 2.0 * ys[1]);
    }
  }
}

TEST_CASE("property: geometry report is deterministic per seed") {
  auto s = build_cube_grid(2, 1.0, 1.0 / 32);
  GeometryOptions o;
  o.sample_count = 8;
  o.rng_seed = 99;
  o.min_radius_cells = 2;
  auto a = geometry_report(*s, o), b = geometry_report(*s, o);
  CHECK(a.doubling_constant_empirical == b.doubling_constant_empirical);
  CHECK(a.poincare_constant_empirical == b.poincare_constant_empirical);
  CHECK(a.failures == b.failures);
}
