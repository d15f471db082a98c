#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "splap/grid.hpp"

using namespace splap;
using std::numbers::pi;

TEST_CASE("build_grid 1D nodes and distance") {
  auto g = build_grid_1d(1.0, 5);
  REQUIRE(g->size() == 5);
  const double xs[] = {0, .25, .5, .75, 1};
  const double ds[] = {0, .25, .5, .25, 0};
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(g->coord(k, 0) == doctest::Approx(xs[k]));
    CHECK(g->dist()[k] == doctest::Approx(ds[k]));
  }
  CHECK(g->on_boundary(0));
  CHECK(g->on_boundary(4));
  CHECK(g->interior().size() == 3);
}

TEST_CASE("build_grid midpoint distance on [0,2]") {
  auto g = build_grid_1d(2.0, 9);
  CHECK(g->max_dist() == doctest::Approx(1.0));
  CHECK(g->coord(4, 0) == doctest::Approx(1.0));
  CHECK(g->dist()[4] == doctest::Approx(1.0));
}

TEST_CASE("build_grid 2D distance is nearest face") {
  auto g = build_grid_2d(1.0, 1.0, 11, 11);
  const std::size_t k = g->index(3, 5);
  CHECK(g->coord(k, 0) == doctest::Approx(0.3));
  CHECK(g->coord(k, 1) == doctest::Approx(0.5));
  CHECK(g->dist()[k] == doctest::Approx(0.3));
  for (std::size_t node = 0; node < g->size(); ++node) {
    CHECK(g->dist()[node] >= 0.0);
    CHECK((g->dist()[node] == 0.0) == g->on_boundary(node));
  }
}

TEST_CASE("build_grid rejects bad input") {
  CHECK_THROWS_AS(build_grid_1d(1.0, 2), InvalidArgument);
  CHECK_THROWS_AS(build_grid_1d(0.0, 5), InvalidArgument);
  CHECK_THROWS_AS(build_grid_1d(-1.0, 5), InvalidArgument);
  CHECK_THROWS_AS(build_grid_2d(1.0, 1.0, 5, 2), InvalidArgument);
  CHECK_THROWS_AS(build_grid(3, {1.0, 1.0}, {5, 5}), InvalidArgument);
}

TEST_CASE("distance field is 1-Lipschitz between neighbours") {
  auto g = build_grid_2d(1.0, 0.6, 13, 9);
  for (std::size_t j = 0; j < g->n(1); ++j) {
    for (std::size_t i = 0; i + 1 < g->n(0); ++i) {
      const double d = std::abs(g->dist()[g->index(i, j)] - g->dist()[g->index(i + 1, j)]);
      CHECK(d <= g->h(0) + 1e-15);
    }
  }
  for (std::size_t j = 0; j + 1 < g->n(1); ++j)
    for (std::size_t i = 0; i < g->n(0); ++i)
      CHECK(std::abs(g->dist()[g->index(i, j)] - g->dist()[g->index(i, j + 1)]) <= g->h(1) + 1e-15);
}

TEST_CASE("integrate examples") {
  auto g = build_grid_1d(1.0, 11);
  CHECK(integrate(GridFunction(g, 1.0, false)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(integrate(GridFunction::from(g, [](double x, double) { return x; }, false)) ==
        doctest::Approx(0.5).epsilon(1e-14));
  auto g401 = build_grid_1d(1.0, 401);
  const double s = integrate(GridFunction::from(g401, [](double x, double) { return std::sin(pi * x); }));
  CHECK(std::abs(s - 2.0 / pi) < 1e-4);
}

TEST_CASE("integrate is exact for affine fields") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng);
    auto g1 = build_grid_1d(1.7, 7 + trial);
    CHECK(integrate(GridFunction::from(g1, [&](double x, double) { return a + b * x; }, false)) ==
          doctest::Approx(1.7 * a + b * 1.7 * 1.7 / 2).epsilon(1e-13));
    auto g2 = build_grid_2d(1.3, 0.7, 5 + trial, 6);
    const double exact = a * 1.3 * 0.7 + b * 0.7 * 1.3 * 1.3 / 2 + c * 1.3 * 0.7 * 0.7 / 2;
    CHECK(integrate(GridFunction::from(g2, [&](double x, double y) { return a + b * x + c * y; }, false)) ==
          doctest::Approx(exact).epsilon(1e-13));
  }
}

TEST_CASE("norms examples") {
  auto g = build_grid_1d(1.0, 101);
  auto parab = GridFunction::from(g, [](double x, double) { return x * (1 - x); });
  CHECK(norm_Linf(parab) == doctest::Approx(0.25));
  auto lin = GridFunction::from(g, [](double x, double) { return x; }, false);
  CHECK(seminorm_W1p(lin, 2.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(norm_Lq(GridFunction(g, 2.0, false), 3.0) == doctest::Approx(2.0).epsilon(1e-13));
  auto g401 = build_grid_1d(1.0, 401);
  auto s = GridFunction::from(g401, [](double x, double) { return std::sin(pi * x); });
  const double sn = seminorm_W1p(s, 2.0);
  CHECK(std::abs(sn * sn - pi * pi / 2) <= 1e-3 * pi * pi / 2);
  CHECK_THROWS_AS(norm_Lq(s, 0.5), InvalidArgument);
  CHECK_THROWS_AS(seminorm_W1p(s, 1.0), InvalidArgument);
}

TEST_CASE("refinement order of quadrature and seminorm is at least one") {
  // f = exp(x) sin(pi x): int f and int |f'|^2 have closed forms.
  const double a = pi;
  const double exact_int = a * (1 + std::exp(1.0)) / (1 + a * a);
  // f' = e^x (sin + pi cos); int_0^1 f'^2 dx evaluated by high-order Simpson as the oracle.
  auto fp = [&](double x) { return std::exp(x) * (std::sin(a * x) + a * std::cos(a * x)); };
  double exact_dir = 0.0;
  const int m = 200000;
  for (int k = 0; k <= m; ++k) {
    const double x = static_cast<double>(k) / m;
    const double wgt = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    exact_dir += wgt * fp(x) * fp(x);
  }
  exact_dir /= 3.0 * m;
  double e_int[3], e_dir[3];
  const std::size_t ns[] = {41, 81, 161};
  for (int i = 0; i < 3; ++i) {
    auto g = build_grid_1d(1.0, ns[i]);
    auto f = GridFunction::from(g, [&](double x, double) { return std::exp(x) * std::sin(a * x); });
    e_int[i] = std::abs(integrate(f) - exact_int);
    const double s = seminorm_W1p(f, 2.0);
    e_dir[i] = std::abs(s * s - exact_dir);
  }
  for (int i = 0; i + 1 < 3; ++i) {
    CHECK(std::log2(e_int[i] / e_int[i + 1]) >= 0.9);
    CHECK(std::log2(e_dir[i] / e_dir[i + 1]) >= 0.9);
  }
}

TEST_CASE("grid function CSV round trip and Dirichlet tag") {
  auto g = build_grid_2d(1.0, 2.0, 4, 5);
  auto f = GridFunction::from(g, [](double x, double y) { return x * y * (1 - x) * (2 - y) + 0.1; });
  CHECK(f.dirichlet());
  for (std::size_t k = 0; k < g->size(); ++k)
    if (g->on_boundary(k)) CHECK(f[k] == 0.0);
  std::stringstream ss;
  write_csv(ss, f);
  const std::string text = ss.str();
  CHECK(text.rfind("node_index,x,y,value\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
  auto back = read_csv(ss, g);
  CHECK(max_abs_diff(back, f) == 0.0);
  CHECK(back.dirichlet());
}
