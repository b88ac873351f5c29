#include <catch2/catch_amalgamated.hpp>

#include "vdwlab/lattice.hpp"

using namespace vdwlab;

TEST_CASE("grid spacing and endpoints") {
  Grid g = build_grid(401, -20.0, 20.0);
  CHECK(g.spacing() == Catch::Approx(0.1).margin(1e-15));
  CHECK(g.point(0) == Catch::Approx(-20.0));
  CHECK(g.point(400) == Catch::Approx(20.0));

  Grid g2 = build_grid(2, 0.0, 1.0);
  CHECK(g2.spacing() == Catch::Approx(1.0));

  Grid g5 = build_grid(5, -1.0, 1.0);
  Vector p = g5.points();
  for (int i = 0; i < 5; ++i) CHECK(p[i] == Catch::Approx(-1.0 + 0.5 * i).margin(1e-15));
}

TEST_CASE("grid guards") {
  CHECK_THROWS_AS(build_grid(1, 0.0, 1.0), Error);
  CHECK_THROWS_AS(build_grid(10, 1.0, 1.0), Error);
  CHECK_THROWS_AS(build_grid(10, 2.0, 1.0), Error);
}

TEST_CASE("smoothed cutoff profile") {
  Grid g = build_grid(2001, -10.0, 10.0);
  CutoffFn chi = smoothed_cutoff(4.0, 1.0, g);
  CHECK(chi.value(0.0) == 1.0);
  CHECK(chi.value(4.0) == 0.0);
  CHECK(chi.value(-4.5) == 0.0);
  CHECK(chi.value(2.9) == 1.0);

  // pointwise range, symmetry, monotone transition
  for (int i = 0; i < g.points_per_axis; ++i) {
    CHECK(chi.samples[i] >= 0.0);
    CHECK(chi.samples[i] <= 1.0);
  }
  for (double z = 0.0; z < 9.0; z += 0.37) CHECK(chi.value(z) == Catch::Approx(chi.value(-z)));
  for (double z = 3.0; z < 3.95; z += 0.01) CHECK(chi.value(z + 0.01) <= chi.value(z) + 1e-14);

  // max finite-difference derivative below 4 / width (scan of the samples)
  double h = g.spacing();
  double max_d1 = 0.0, max_d2 = 0.0;
  for (int i = 1; i + 1 < g.points_per_axis; ++i) {
    max_d1 = std::max(max_d1, std::abs(chi.samples[i + 1] - chi.samples[i]) / h);
    max_d2 = std::max(max_d2,
                      std::abs(chi.samples[i + 1] - 2 * chi.samples[i] + chi.samples[i - 1]) / (h * h));
  }
  CHECK(max_d1 <= 4.0 / chi.transition_width);
  CHECK(max_d2 <= 8.0 / (chi.transition_width * chi.transition_width));
}

TEST_CASE("cutoff guards") {
  Grid g = build_grid(101, -5.0, 5.0);
  CHECK_THROWS_AS(smoothed_cutoff(6.0, 1.0, g), Error);
  CHECK_THROWS_AS(smoothed_cutoff(2.0, 3.0, g), Error);
}

TEST_CASE("potential kernels") {
  PotentialSpec p;
  p.kind = PotentialKind::soft_coulomb;
  p.softening = 1.0;
  CHECK(p.kernel(0.0) == Catch::Approx(1.0));
  CHECK(p.kernel(3.0) == Catch::Approx(1.0 / std::sqrt(10.0)));
  CHECK(p.kernel(-3.0) == p.kernel(3.0));

  PotentialSpec tab;
  tab.kind = PotentialKind::custom_table;
  tab.table_x = {0.0, 1.0, 2.0};
  tab.table_v = {1.0, 0.5, 0.25};
  tab.validate();
  CHECK(tab.kernel(0.5) == Catch::Approx(0.75));
  CHECK(tab.kernel(5.0) == Catch::Approx(0.25));
  CHECK(tab.kernel(-1.0) == Catch::Approx(0.5));
}

TEST_CASE("potential table io") {
  const char* path = "/tmp/vdwlab_test_table.txt";
  {
    std::ofstream out(path);
    out << "# position value\n0.0 2.0\n1.0 1.0\n2.0 0.5\n";
  }
  PotentialSpec p = load_potential_table(path);
  CHECK(p.kind == PotentialKind::custom_table);
  CHECK(p.kernel(1.5) == Catch::Approx(0.75));
}

TEST_CASE("quadrature converges at second order under refinement") {
  // smooth integrand sampled on nested grids: trapezoid error ~ spacing^2
  PotentialSpec p;
  p.softening = 1.0;
  auto integrate = [&](int n) {
    Grid g = build_grid(n, 0.0, 4.0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      acc += w * p.kernel(g.point(i)) * g.spacing();
    }
    return acc;
  };
  double exact = std::asinh(4.0);
  double e1 = std::abs(integrate(101) - exact);
  double e2 = std::abs(integrate(201) - exact);
  CHECK(e2 <= 0.3 * e1);
  CHECK(e2 >= 0.2 * e1);  // genuinely second order, not spectral
}
