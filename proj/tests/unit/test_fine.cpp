#include <doctest.h>

#include <cmath>
#include <numbers>

#include "finelab/error.hpp"
#include "finelab/fine.hpp"

using namespace finelab;

namespace {

const Point kOrigin{0.0, 0.0};

AnalyticSet chain() { return AnalyticSet::thin_disk_chain(kOrigin, 0.6, 2.0, 12, 0.2, 0.3); }
AnalyticSet narrow_sector() { return AnalyticSet::sector(kOrigin, std::numbers::pi / 6); }

WienerOptions options(int scales, int resolution = 64, double sigma = 2.0) {
  WienerOptions o;
  o.scales = scales;
  o.resolution = resolution;
  o.sigma = sigma;
  return o;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

std::vector<double> geometric(double q, int n) {
  std::vector<double> t;
  for (int j = 1; j <= n; ++j) t.push_back(std::pow(q, j));
  return t;
}

}  // namespace

TEST_CASE("Wiener terms: empty set and full ball") {
  auto empty = wiener_terms(AnalyticSet::empty(), kOrigin, options(6));
  for (double t : empty.terms) CHECK(t == 0.0);
  CHECK(empty.partial_sums.back() == 0.0);
  CHECK(classify_thin(empty).verdict == Verdict::Thin);

  auto full = wiener_terms(AnalyticSet::ball(kOrigin, 1.5), kOrigin, options(6));
  for (double t : full.terms) CHECK(t == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(full.partial_sums.back() == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(classify_thin(full).verdict == Verdict::Thick);
  CHECK(!full.flagged);
}

TEST_CASE("Wiener terms: 1-D singleton") {
  // cap({0}, (-s a, s a)) / cap([-a, a], (-s a, s a)) = (s - 1)/s for p = 2
  for (double sigma : {2.0, 4.0}) {
    auto o = options(5, 1024, sigma);
    auto rep = wiener_terms(AnalyticSet::singleton({0.0}), {0.0}, o);
    for (double t : rep.terms) CHECK(t == doctest::Approx((sigma - 1.0) / sigma).epsilon(0.01));
    CHECK(classify_thin(rep).verdict == Verdict::Thick);
  }
}

TEST_CASE("Wiener terms: sector is scale invariant and thick") {
  auto rep = wiener_terms(narrow_sector(), kOrigin, options(8));
  for (double t : rep.terms) CHECK(t == doctest::Approx(rep.terms.front()).epsilon(0.03));
  CHECK(rep.terms.front() > 0.05);
  CHECK(classify_thin(rep).verdict == Verdict::Thick);
}

TEST_CASE("Wiener report structure") {
  auto rep = wiener_terms(chain(), kOrigin, options(6));
  REQUIRE(rep.terms.size() == 6);
  REQUIRE(rep.scales.size() == 6);
  double sum = 0.0;
  for (std::size_t k = 0; k < rep.terms.size(); ++k) {
    sum += rep.terms[k];
    CHECK(rep.partial_sums[k] == doctest::Approx(sum));
    CHECK(rep.scales[k].j == static_cast<int>(k) + 1);
    CHECK(rep.scales[k].r_j == doctest::Approx(std::pow(2.0, -static_cast<double>(k + 1))));
    CHECK(rep.terms[k] >= 0.0);
    if (k > 0) CHECK(rep.partial_sums[k] >= rep.partial_sums[k - 1]);
  }
  CHECK(classify_thin(rep).verdict == Verdict::Thin);
  CHECK(code_of([] { wiener_terms(AnalyticSet::node_list({1, 2}), kOrigin, options(3)); }) ==
        ErrorCode::DescriptorNotDilatable);
  CHECK(code_of([] { wiener_terms(chain(), kOrigin, options(3, 64, 1.0)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("Wiener terms: global mode") {
  auto o = options(8, 64);
  o.mode = WienerMode::Global;
  auto rep = wiener_terms(narrow_sector(), kOrigin, o);
  CHECK(!rep.skipped_scales.empty());
  CHECK(rep.terms.size() + rep.skipped_scales.size() == 8);
  for (double t : rep.terms) CHECK(t == doctest::Approx(0.4243).epsilon(0.1));
  o.resolution = 12;
  CHECK(code_of([&] { wiener_terms(narrow_sector(), kOrigin, o); }) == ErrorCode::ScaleUnderflow);
}

TEST_CASE("classification policy examples") {
  CHECK(classify_terms(std::vector<double>(12, 1.0)).verdict == Verdict::Thick);
  auto half = classify_terms(geometric(0.5, 12));
  CHECK(half.verdict == Verdict::Thin);
  CHECK(half.decay_ratio == doctest::Approx(0.5));
  CHECK(half.tail_estimate == doctest::Approx(std::pow(0.5, 12)));
  std::vector<double> harmonic;
  for (int j = 1; j <= 12; ++j) harmonic.push_back(1.0 / j);
  CHECK(classify_terms(harmonic).verdict == Verdict::Inconclusive);
  CHECK(code_of([] { classify_terms({1.0, 1.0}); }) == ErrorCode::PreconditionViolated);
  CHECK(fit_decay_ratio(geometric(0.3, 10), 4) == doctest::Approx(0.3));
}

TEST_CASE("capacity shrink profiles") {
  auto s = build_cube_grid(2, 1.0, 1.0 / 64);
  const Region B = point_ball(*s, kOrigin, 1.0);
  const std::vector<double> radii{0.9, 0.6, 0.4, 0.25, 0.1, 0.05, 0.01};
  SUBCASE("thin disk chain decays") {
    auto prof = capacity_shrink_profile(*s, region_from_descriptor(*s, chain()), kOrigin, B, radii, 2.0, 1e-10);
    CHECK(prof.monotone);
    CHECK(prof.points.back().capacity <= 0.1 * prof.points.front().capacity);
  }
  SUBCASE("full ball keeps the capacity of the centre node") {
    auto E = region_from_descriptor(*s, AnalyticSet::ball(kOrigin, 0.95));
    auto prof = capacity_shrink_profile(*s, E, kOrigin, B, radii, 2.0, 1e-10);
    CHECK(prof.monotone);
    const double centre = variational_capacity(*s, Region({s->nearest_node(kOrigin)}), B, 2.0, 1e-10).value;
    CHECK(centre > 0.0);
    CHECK(prof.points.back().capacity == doctest::Approx(centre).epsilon(1e-6));
  }
  SUBCASE("empty set") {
    auto prof = capacity_shrink_profile(*s, Region{}, kOrigin, B, radii, 3.0);
    for (const auto& pt : prof.points) CHECK(pt.capacity == 0.0);
  }
  SUBCASE("errors") {
    CHECK(code_of([&] { capacity_shrink_profile(*s, Region{}, kOrigin, B, {0.5, 0.6}, 2.0); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([&] { capacity_shrink_profile(*s, Region{}, kOrigin, B, {1.2, 0.6}, 2.0); }) ==
          ErrorCode::GeometryViolation);
  }
}

TEST_CASE("thin unions") {
  auto o = options(6);
  auto rep = wiener_terms(chain(), kOrigin, o);
  SUBCASE("two copies of a thin set") {
    const double budget = 0.1;
    auto u = thin_union_radii({rep, rep}, budget);
    CHECK(u.radii.size() == 2);
    CHECK(u.classification.verdict == Verdict::Thin);
    CHECK(u.combined.partial_sums.back() <= u.parts_sum + budget);
    for (std::size_t k = 0; k < u.tails.size(); ++k) CHECK(u.tails[k] <= budget * std::pow(2.0, -double(k + 1)));
  }
  SUBCASE("large budget keeps the original set") {
    auto u = thin_union_radii({rep}, 100.0);
    CHECK(u.radii.front() == o.r0);
    CHECK(u.truncation.front() == 0);
    for (std::size_t k = 0; k < rep.terms.size(); ++k) {
      CHECK(u.combined.terms[k] == doctest::Approx(rep.terms[k]).epsilon(1e-6));
    }
  }
  SUBCASE("thick input is rejected") {
    auto thick = wiener_terms(narrow_sector(), kOrigin, o);
    CHECK(code_of([&] { thin_union_radii({rep, thick}, 0.1); }) == ErrorCode::PreconditionViolated);
  }
}

TEST_CASE("property: terms are stable under refinement") {
  for (const auto& d : {narrow_sector(), AnalyticSet::sector(kOrigin, std::numbers::pi / 3), chain()}) {
    auto coarse = wiener_terms(d, kOrigin, options(3, 64));
    auto fine = wiener_terms(d, kOrigin, options(3, 128));
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(coarse.terms[k] - fine.terms[k]) <= 0.05 * std::max(fine.terms[k], 1e-12));
    }
  }
}

TEST_CASE("property: set monotonicity of terms") {
  const double tol = 1e-6;
  auto narrow = wiener_terms(narrow_sector(), kOrigin, options(4));
  auto wide = wiener_terms(AnalyticSet::sector(kOrigin, std::numbers::pi / 3), kOrigin, options(4));
  auto more = wiener_terms(narrow_sector().unite(chain()), kOrigin, options(4));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(narrow.terms[k] <= wide.terms[k] + tol);
    CHECK(narrow.terms[k] <= more.terms[k] + tol);
  }
}

TEST_CASE("property: verdicts do not depend on sigma") {
  for (const auto& d : {AnalyticSet::empty(), narrow_sector(), chain(), AnalyticSet::ball(kOrigin, 2.0)}) {
    auto two = classify_thin(wiener_terms(d, kOrigin, options(6, 64, 2.0)));
    auto four = classify_thin(wiener_terms(d, kOrigin, options(6, 64, 4.0)));
    CHECK(two.verdict == four.verdict);
    CHECK(two.verdict != Verdict::Inconclusive);
  }
}
