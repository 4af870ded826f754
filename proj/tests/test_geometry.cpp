#include <doctest.h>

#include <random>

#include "nakano/errors.hpp"
#include "nakano/geometry.hpp"

using namespace nakano;

namespace {
std::vector<double> v(std::initializer_list<double> xs) { return xs; }

// |t| + |x| <= 1 inside [-1,1]^2.
Domain diamond() {
  HalfspaceConvex h;
  h.a = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  h.b = {1, 1, 1, 1};
  h.bounds = Box{{-1, -1}, {1, 1}};
  h.interior = v({0, 0});
  return h;
}
}  // namespace

TEST_CASE("contains") {
  CHECK(contains(Box{{-1}, {1}}, v({0})));
  CHECK(contains(ReinhardtAnnulus{{1}, {2}}, v({1.5, 0})));
  CHECK_FALSE(contains(ReinhardtAnnulus{{1}, {2}}, v({0.5, 0.5})));
  HalfspaceConvex half{{{1}}, {0}, Box{{-5}, {5}}, v({-1})};
  CHECK_FALSE(contains(half, v({1})));
  CHECK(contains(half, v({-1})));
  CHECK_THROWS_AS(contains(Box{{-1}, {1}}, v({0, 0})), DomainError);
  const Domain tube = TubeOverBase{make_domain(Box{{0}, {1}})};
  CHECK(contains(tube, v({0.5, 1e6})));
  CHECK_FALSE(contains(tube, v({1.5, 0})));
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(Domain(ReinhardtAnnulus{{2}, {1}}), ConfigError);
  CHECK_THROWS_AS(Domain(ReinhardtAnnulus{{0}, {1}}), ConfigError);
  CHECK_THROWS_AS(Domain(Box{{1}, {0}}), ConfigError);
  HalfspaceConvex bad{{{1}}, {0}, Box{{-1}, {1}}, v({0.5})};
  CHECK_THROWS_AS(Domain(std::move(bad)), ConfigError);
}

TEST_CASE("fiber slices") {
  const Fibered square{make_domain(Box{{-1}, {1}}), Fibered::Rule::Slice, make_domain(Box{{-1, -1}, {1, 1}})};
  const Domain f0 = fiber(square, v({0}));
  REQUIRE(f0.as<Box>());
  CHECK(f0.as<Box>()->lo == v({-1}));
  CHECK(f0.as<Box>()->hi == v({1}));

  const Fibered simplex{make_domain(Box{{-1}, {1}}), Fibered::Rule::Slice, make_domain(diamond())};
  const Domain half = fiber(simplex, v({0.5}));
  REQUIRE(half.as<Box>());
  CHECK(half.as<Box>()->lo[0] == doctest::Approx(-0.5));
  CHECK(half.as<Box>()->hi[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(fiber(simplex, v({2.0})), DomainError);

  const DomainPtr u = make_domain(Box{{0}, {1}});
  const Fibered tube{make_domain(Box{{-1}, {1}}), Fibered::Rule::Product, make_domain(TubeOverBase{u})};
  const Domain ut = fiber(tube, v({0.3}));
  REQUIRE(ut.as<Box>());
  CHECK(ut.as<Box>()->hi == v({1}));
  CHECK(fibers_independent_of_base(tube));
  CHECK_FALSE(fibers_independent_of_base(simplex));
}

TEST_CASE("sample_grid") {
  const SampleGrid g = sample_grid(Box{{0}, {1}}, 3);
  REQUIRE(g.points.size() == 3);
  CHECK(g.points[0][0] == 0.0);
  CHECK(g.points[1][0] == 0.5);
  CHECK(g.points[2][0] == 1.0);

  const Domain annulus = ReinhardtAnnulus{{1}, {2}};
  const SampleGrid a = sample_grid(annulus, 8);
  CHECK(a.points.size() < 64);
  CHECK_FALSE(a.points.empty());
  for (const auto& p : a.points) CHECK(contains(annulus, p));

  // The slice at t = 1 is the single point x = 0; a membership-filtered grid on
  // an empty slice must fail loudly.
  HalfspaceConvex thin = *diamond().as<HalfspaceConvex>();
  thin.b = {0.5, 0.5, 0.5, 0.5};
  const Fibered f{make_domain(Box{{-0.5}, {0.5}}), Fibered::Rule::Slice, make_domain(thin)};
  const Domain edge = fiber_domain(f, v({0.5}), false);
  CHECK(sample_grid(edge, 5).points.size() == 1);
  CHECK_THROWS_AS(fiber_domain(f, v({0.75}), false), DomainError);

  // Last axis fastest.
  const SampleGrid b = sample_grid(Box{{0, 0}, {1, 1}}, 2);
  CHECK(b.points[1] == v({0, 1}));
  CHECK(b.points[2] == v({1, 0}));
}

TEST_CASE("property: fiber grids are projection consistent") {
  const Domain total = diamond();
  const Fibered f{make_domain(Box{{-0.9}, {0.9}}), Fibered::Rule::Slice, make_domain(total)};
  for (double t : {-0.9, -0.3, 0.0, 0.45, 0.9}) {
    const SampleGrid g = sample_grid(fiber(f, v({t})), 9);
    for (const auto& q : g.points) CHECK(contains(total, v({t, q[0]})));
  }
  const Domain annulus = ReinhardtAnnulus{{0.5, 1.0}, {1.0, 2.0}};
  const Fibered prod{make_domain(Box{{0}, {1}}), Fibered::Rule::Product, make_domain(annulus)};
  const SampleGrid g = sample_grid(fiber(prod, v({0.5})), 5);
  for (const auto& q : g.points) CHECK(contains(annulus, q));
}

TEST_CASE("property: halfspace domains are convex") {
  const Domain d = diamond();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  int pairs = 0;
  while (pairs < 200) {
    const auto p = v({u(rng), u(rng)});
    const auto q = v({u(rng), u(rng)});
    if (!contains(d, p) || !contains(d, q)) continue;
    CHECK(contains(d, v({(p[0] + q[0]) / 2, (p[1] + q[1]) / 2})));
    ++pairs;
  }
}
