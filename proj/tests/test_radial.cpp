#include <catch2/catch_amalgamated.hpp>

#include "vdwlab/radial.hpp"

using namespace vdwlab;

TEST_CASE("radial hydrogen levels") {
  RadialGrid grid{2000, 40.0};
  RadialHamiltonian h0 = radial_hamiltonian(grid, 0, 1.0);
  EigenPair g = radial_ground_state(h0);
  CHECK(g.value == Catch::Approx(-0.5).margin(2e-4));
  CHECK(g.residual <= 1e-10);

  RadialHamiltonian h1 = radial_hamiltonian(grid, 1, 1.0);
  RadialSpectrum s1 = radial_spectrum(h1);
  CHECK(s1.eigenvalues[0] == Catch::Approx(-0.125).margin(2e-4));  // 2p level
}

TEST_CASE("newton screening for spherical densities") {
  RadialGrid grid{1500, 6.0};
  RadialDensity ball = uniform_ball_density(grid, 3.0);
  CHECK(ball.total() == Catch::Approx(1.0).margin(1e-12));
  CHECK(newton_screening_residual(ball, 5.0) <= 1e-8);

  RadialGrid grid2{2000, 5.0};
  RadialDensity gauss = truncated_gaussian_density(grid2, 0.8, 4.0);
  CHECK(newton_screening_residual(gauss, 10.0) <= 1e-8);

  CHECK_THROWS_AS(newton_screening_residual(ball, 2.0), Error);
}

TEST_CASE("screening fails for a dipole-distorted density") {
  RadialGrid grid{1200, 5.0};
  RadialDensity base = truncated_gaussian_density(grid, 0.8, 4.0);
  const double beta = 0.5, y = 10.0;
  Density3D distorted = dipole_distorted_density(base, beta);

  double resid = screening_residual_quadrature(distorted, y);
  CHECK(resid > 1e-4);
  // leading failure is the dipole term d / y^2
  double dipole = 0.0;
  for (int i = 0; i < grid.n; ++i) {
    double r = grid.r(i);
    // int rho (1 + beta ct) r ct over angles: beta <ct^2> = beta/3
    dipole += base.values[i] * r * r * r * grid.h();
  }
  dipole *= 4.0 * M_PI * beta / 3.0;
  CHECK(resid == Catch::Approx(std::abs(dipole) / (y * y)).epsilon(0.05));

  // spherical control through the same quadrature stays tiny
  Density3D plain = dipole_distorted_density(base, 0.0);
  CHECK(screening_residual_quadrature(plain, y) <= 1e-8);
}

TEST_CASE("spherical symmetry diagnostics") {
  RadialGrid grid{800, 30.0};
  RadialHamiltonian h0 = radial_hamiltonian(grid, 0, 1.0);
  EigenPair g = radial_ground_state(h0);
  Vector u0 = g.vector;
  const double h = grid.h();

  auto radial_lookup = [grid, u0, h](double r) {
    if (r <= 0.0 || r >= grid.r_max) return 0.0;
    int i = std::min(std::max(static_cast<int>(r / h + 0.5) - 1, 0), grid.n - 1);
    return u0[i] * u0[i] / h / (4.0 * M_PI * r * r);
  };

  // s-state density built radially is isotropic by construction
  Density3D s_density;
  s_density.support_radius = 25.0;
  s_density.value = [radial_lookup](const Eigen::Vector3d& z) { return radial_lookup(z.norm()); };
  CHECK(spherical_symmetry_check(s_density) <= 1e-10);

  // single p orbital: cos^2 factor, anisotropy order one
  RadialHamiltonian h1 = radial_hamiltonian(grid, 1, 1.0);
  RadialSpectrum s1 = radial_spectrum(h1);
  Vector u1 = s1.eigenvectors.col(0);
  auto radial_p = [grid, u1, h](double r) {
    if (r <= 0.0 || r >= grid.r_max) return 0.0;
    int i = std::min(std::max(static_cast<int>(r / h + 0.5) - 1, 0), grid.n - 1);
    return u1[i] * u1[i] / h / (4.0 * M_PI * r * r);
  };
  Density3D pz;
  pz.support_radius = 25.0;
  pz.value = [radial_p](const Eigen::Vector3d& z) {
    double r = z.norm();
    if (r <= 0.0) return 0.0;
    double ct = z[2] / r;
    return 3.0 * radial_p(r) * ct * ct;
  };
  CHECK(spherical_symmetry_check(pz) > 0.1);

  // the closed p multiplet sums to an isotropic density
  Density3D shell;
  shell.support_radius = 25.0;
  shell.value = [radial_p](const Eigen::Vector3d& z) {
    double r = z.norm();
    if (r <= 0.0) return 0.0;
    // |p_x|^2 + |p_y|^2 + |p_z|^2 has constant angular factor
    return 3.0 * radial_p(r) * (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]) / (r * r);
  };
  CHECK(spherical_symmetry_check(shell) <= 1e-8);
}

TEST_CASE("neutral pair trace cancels for spherical densities") {
  RadialGrid grid{1600, 4.0};
  RadialDensity rho1 = truncated_gaussian_density(grid, 0.7, 3.5);
  RadialDensity rho2 = uniform_ball_density(grid, 3.0);
  for (double y : {10.0, 14.0, 20.0})
    CHECK(std::abs(neutral_pair_trace_radial(rho1, rho2, y)) <= 1e-8);
  CHECK_THROWS_AS(neutral_pair_trace_radial(rho1, rho2, 6.0), Error);
}
