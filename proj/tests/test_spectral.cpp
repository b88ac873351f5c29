#include <catch2/catch_amalgamated.hpp>

#include "vdwlab/manybody.hpp"
#include "vdwlab/spectral.hpp"

using namespace vdwlab;

namespace {

SystemSpec soft_atom(int n, double half_width) {
  SystemSpec spec;
  spec.nuclei = {Nucleus{0.0, 1, 1836.15267, 0.0}};
  spec.electron_count = 1;
  spec.potential.softening = 1.0;
  spec.grid = build_grid(n, -half_width, half_width);
  return spec;
}

}  // namespace

TEST_CASE("soft atom spectrum against the dense oracle") {
  SystemSpec spec = soft_atom(801, 40.0);
  ManyBodyOperator h = assemble_full(spec);
  SpectralResult res = low_spectrum(h, 2);

  // dense oracle on the same grid
  Matrix dense(h.matrix);
  Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
  CHECK(res.eigenvalues[0] == Catch::Approx(es.eigenvalues()[0]).margin(1e-12));
  CHECK(res.eigenvalues[1] == Catch::Approx(es.eigenvalues()[1]).margin(1e-12));

  CHECK(res.eigenvalues[0] == Catch::Approx(-0.6698).margin(2e-4));
  CHECK(res.eigenvalues[1] == Catch::Approx(-0.2749).margin(2e-4));
  for (double r : res.residuals) CHECK(r <= 1e-9);
  CHECK(std::abs(res.eigenvectors[0].dot(res.eigenvectors[1])) <= 1e-10);
}

TEST_CASE("iterative path matches a dense oracle above the fallback size") {
  // two electrons on 48 points: dim 2304 forces the iterative solver
  SystemSpec spec;
  spec.nuclei = {Nucleus{0.0, 2, 1836.15267, 0.0}};
  spec.electron_count = 2;
  spec.potential.softening = 1.0;
  spec.grid = build_grid(48, -9.0, 9.0);
  Decomposition a;
  a.clusters = 1;
  a.assign = {0, 0};
  ManyBodyOperator h = assemble_cluster(spec, a);
  REQUIRE(h.dim() > dense_fallback_dim);

  SpectralResult res = low_spectrum(h, 2, 1e-10, 4);
  Matrix dense(h.matrix);
  Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
  CHECK(res.eigenvalues[0] == Catch::Approx(es.eigenvalues()[0]).margin(1e-9));
  CHECK(res.eigenvalues[1] == Catch::Approx(es.eigenvalues()[1]).margin(1e-9));
  CHECK(std::abs(res.eigenvectors[0].dot(res.eigenvectors[1])) <= 1e-10);
}

TEST_CASE("harmonic well through a custom table") {
  SystemSpec spec;
  spec.nuclei = {Nucleus{0.0, 1, 1836.15267, 0.0}};
  spec.electron_count = 1;
  spec.potential.kind = PotentialKind::custom_table;
  const int m = 6001;
  for (int i = 0; i < m; ++i) {
    double t = 30.0 * i / (m - 1);
    spec.potential.table_x.push_back(t);
    spec.potential.table_v.push_back(-0.5 * t * t);  // attraction sign flips it positive
  }
  spec.grid = build_grid(601, -12.0, 12.0);
  ManyBodyOperator h = assemble_full(spec);
  SpectralResult res = low_spectrum(h, 3);
  CHECK(res.eigenvalues[0] == Catch::Approx(0.5).margin(2e-3));
  CHECK(res.eigenvalues[1] == Catch::Approx(1.5).margin(5e-3));
  CHECK(res.eigenvalues[2] == Catch::Approx(2.5).margin(1e-2));
}

TEST_CASE("diagonal matrix identity case") {
  ManyBodyOperator h;
  h.space = TensorSpace{3, 1};
  h.grid_spacing = 1.0;
  std::vector<Eigen::Triplet<double>> trip{{0, 0, 1.0}, {1, 1, 2.0}, {2, 2, 3.0}};
  h.matrix.resize(3, 3);
  h.matrix.setFromTriplets(trip.begin(), trip.end());
  SpectralResult res = low_spectrum(h, 2);
  CHECK(res.eigenvalues[0] == 1.0);
  CHECK(res.eigenvalues[1] == 2.0);
}

TEST_CASE("ground-state energy converges under grid refinement") {
  double e1 = low_spectrum(assemble_full(soft_atom(201, 30.0)), 1).eigenvalues[0];
  double e2 = low_spectrum(assemble_full(soft_atom(401, 30.0)), 1).eigenvalues[0];
  double e3 = low_spectrum(assemble_full(soft_atom(801, 30.0)), 1).eigenvalues[0];
  CHECK(std::abs(e3 - e2) < std::abs(e2 - e1));
  CHECK(std::abs(e3 - e2) / std::abs(e2 - e1) < 0.35);  // near the h^2 factor 1/4
}

TEST_CASE("decay diagnostics") {
  SystemSpec spec = soft_atom(801, 40.0);
  ManyBodyOperator h = assemble_full(spec);
  SpectralResult res = low_spectrum(h, 1);

  DecayCheck ok = decay_check(res.eigenvectors[0], spec.grid, 0.0, 0.5);
  CHECK(ok.passed);
  // the kernel's long tail lowers the local slope below sqrt(2 |E0|)
  CHECK(ok.measured_rate > 1.0);
  CHECK(ok.measured_rate < 1.2);

  // delocalized box mode has no exponential tail
  Vector sine(spec.grid.points_per_axis);
  for (int i = 0; i < spec.grid.points_per_axis; ++i)
    sine[i] = std::sin(M_PI * (i + 1) / (spec.grid.points_per_axis + 1));
  sine.normalize();
  DecayCheck bad = decay_check(sine, spec.grid, 0.0, 0.5);
  CHECK_FALSE(bad.passed);

  // super-exponential gaussian passes any finite trial rate on a window
  Vector gauss(spec.grid.points_per_axis);
  for (int i = 0; i < spec.grid.points_per_axis; ++i)
    gauss[i] = std::exp(-spec.grid.point(i) * spec.grid.point(i));
  gauss.normalize();
  DecayCheck g = decay_check(gauss, spec.grid, 0.0, 3.0);
  CHECK(g.passed);
  CHECK(g.truncated_fit);  // tails drop under the floating floor
}

TEST_CASE("one-electron densities") {
  Grid g = build_grid(31, -5.0, 5.0);
  SystemSpec spec = soft_atom(31, 5.0);
  Matrix h = Matrix(single_particle_hamiltonian(spec, 0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  Vector phi0 = es.eigenvectors().col(0), phi1 = es.eigenvectors().col(1);

  // single electron: rho = |phi|^2 / spacing
  TensorSpace one{31, 1};
  DensityProfile rho1 = one_electron_density({phi0}, one, g.spacing());
  CHECK(rho1.total() == Catch::Approx(1.0).margin(1e-12));
  for (int i = 0; i < 31; ++i)
    CHECK(rho1.values[i] == Catch::Approx(phi0[i] * phi0[i] / g.spacing()).margin(1e-14));

  // product state marginalizes to the one-body density
  TensorSpace two{31, 2};
  Vector prod(two.dim());
  for (int a = 0; a < 31; ++a)
    for (int b = 0; b < 31; ++b) prod[a * 31 + b] = phi0[a] * phi0[b];
  DensityProfile rho2 = one_electron_density({prod}, two, g.spacing());
  CHECK(rho2.total() == Catch::Approx(1.0).margin(1e-12));
  for (int i = 0; i < 31; ++i)
    CHECK(rho2.values[i] == Catch::Approx(rho1.values[i]).margin(1e-12));

  // rank-2 basis sums the orbital densities; oracle is the direct marginal
  Vector v01(two.dim()), v10(two.dim());
  for (int a = 0; a < 31; ++a)
    for (int b = 0; b < 31; ++b) {
      v01[a * 31 + b] = phi0[a] * phi1[b];
      v10[a * 31 + b] = phi1[a] * phi0[b];
    }
  DensityProfile rho3 = one_electron_density({v01, v10}, two, g.spacing());
  CHECK(rho3.total() == Catch::Approx(2.0).margin(1e-12));
  for (int i = 0; i < 31; ++i) {
    double direct = 0.0;  // explicit marginal quadrature over the second axis
    for (int b = 0; b < 31; ++b)
      direct += v01[i * 31 + b] * v01[i * 31 + b] + v10[i * 31 + b] * v10[i * 31 + b];
    CHECK(rho3.values[i] == Catch::Approx(direct / g.spacing()).margin(1e-13));
  }

  CHECK_THROWS_AS(one_electron_density({phi0, phi0}, one, g.spacing()), Error);
}

TEST_CASE("degenerate clustering") {
  auto blocks = cluster_degenerate({1.0, 1.0 + 1e-10, 2.0, 3.0, 3.0 + 5e-9}, 1e-8);
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[0] == std::pair<int, int>{0, 1});
  CHECK(blocks[1] == std::pair<int, int>{2, 2});
  CHECK(blocks[2] == std::pair<int, int>{3, 4});
}

TEST_CASE("spectrum export") {
  SystemSpec spec = soft_atom(201, 20.0);
  SpectralResult res = low_spectrum(assemble_full(spec), 3);
  const char* path = "/tmp/vdwlab_spectrum.csv";
  write_spectrum_csv(res, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "index,energy,residual");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
}
