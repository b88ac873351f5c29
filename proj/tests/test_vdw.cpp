#include <catch2/catch_amalgamated.hpp>

#include "vdwlab/spectral.hpp"
#include "vdwlab/vdw.hpp"

using namespace vdwlab;

TEST_CASE("pair multipole data") {
  SystemSpec spec = make_pair_system(PairSystemParams{}, 14.0);
  spec.coupling = CouplingModel::full_coulomb;

  std::vector<double> rs{10.0, 14.0, 20.0};
  std::vector<double> scaled;
  for (double R : rs) {
    MultipoleExpansion mp = multipole_expand(spec, R, 1.0 / 3.0);
    // symbolic second derivative of the soft kernel as the oracle
    double a2 = spec.potential.softening * spec.potential.softening;
    double vpp = (2.0 * R * R - a2) / std::pow(R * R + a2, 2.5);
    CHECK(mp.dipole_coefficient == Catch::Approx(-vpp).epsilon(1e-5));
    CHECK(mp.dipole_asymptotic == Catch::Approx(-2.0 / (R * R * R)).margin(1e-15));
    CHECK(mp.dipole_coefficient == Catch::Approx(mp.dipole_asymptotic).epsilon(3.5 / (R * R)));
    scaled.push_back(mp.remainder_scaled);
  }
  // remainder * R^4 / zmax^3 stays bounded across separations
  double lo = *std::min_element(scaled.begin(), scaled.end());
  double hi = *std::max_element(scaled.begin(), scaled.end());
  CHECK(hi / lo <= 2.0);

  CHECK_THROWS_AS(multipole_expand(spec, 14.0, 0.5), Error);
}

TEST_CASE("three-dimensional dipole bilinear form") {
  for (const Eigen::Vector3d& y :
       {Eigen::Vector3d(8.0, 0.0, 0.0), Eigen::Vector3d(3.0, 4.0, 5.0)}) {
    Matrix b = dipole_bilinear_3d(y);
    Eigen::Vector3d yhat = y.normalized();
    double r3 = std::pow(y.norm(), 3);
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) {
        double expect = ((k == l ? 1.0 : 0.0) - 3.0 * yhat[k] * yhat[l]) / r3;
        CHECK(b(k, l) == Catch::Approx(expect).margin(1e-6 / r3));
      }
  }
}

TEST_CASE("pair dispersion constant against a state-sum oracle") {
  SystemSpec spec = make_pair_system(PairSystemParams{}, 16.0);
  C6Result c6 = c6_pair_1d(spec, 0, 1);
  CHECK(c6.sigma > 0.0);
  CHECK(c6.deflation_residual <= 1e-8);

  // independent oracle: dense eigendecomposition of both atoms and the
  // double sum over intermediate product states
  Matrix h0 = Matrix(single_particle_hamiltonian(spec, 0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(h0);
  const int n = spec.grid.points_per_axis;
  Vector z0(n);
  for (int i = 0; i < n; ++i) z0[i] = spec.grid.point(i) - spec.nuclei[0].position;
  Vector z1(n);
  for (int i = 0; i < n; ++i) z1[i] = spec.grid.point(i) - spec.nuclei[1].position;
  Matrix h1 = Matrix(single_particle_hamiltonian(spec, 1));
  Eigen::SelfAdjointEigenSolver<Matrix> es1(h1);
  Vector d0 = es.eigenvectors().transpose() * z0.cwiseProduct(es.eigenvectors().col(0));
  Vector d1 = es1.eigenvectors().transpose() * z1.cwiseProduct(es1.eigenvectors().col(0));
  double oracle = 0.0;
  for (int a = 1; a < n; ++a)
    for (int b = 1; b < n; ++b) {
      double den = es.eigenvalues()[a] - es.eigenvalues()[0] + es1.eigenvalues()[b] -
                   es1.eigenvalues()[0];
      oracle += 4.0 * d0[a] * d0[a] * d1[b] * d1[b] / den;
    }
  CHECK(c6.sigma == Catch::Approx(oracle).epsilon(1e-7));

  // the reference soft-coulomb atom pair lands near the converged value
  SystemSpec fine = make_pair_system(PairSystemParams{1.0, 1.0, CouplingModel::dipole_pair, 901,
                                                      22.0, 0.0, 0.0, 0.0},
                                     16.0);
  C6Result conv = c6_pair_1d(fine, 0, 1);
  CHECK(conv.sigma == Catch::Approx(6.8935).epsilon(0.002));
}

TEST_CASE("hydrogen channel dispersion against its state-sum oracle") {
  RadialGrid grid{900, 35.0};
  C6Radial c6 = c6_hydrogen_channel(grid);
  double oracle = c6_sum_over_states_oracle(grid);
  CHECK(c6.c6 == Catch::Approx(oracle).epsilon(1e-6));
  CHECK(c6.c6 == Catch::Approx(6.499).epsilon(0.01));
}

TEST_CASE("rotation invariance of the dispersion coefficient") {
  // the radial factor of every Cartesian channel is shared, so the
  // direction dependence reduces to the squared bilinear weight, which is
  // rotation invariant; verify on sampled directions
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double R = 9.0;
  double reference = -1.0;
  for (int k = 0; k < 5; ++k) {
    Eigen::Vector3d y(nd(gen), nd(gen), nd(gen));
    y = y.normalized() * R;
    Matrix b = dipole_bilinear_3d(y);
    double weight = (b.array() * b.array()).sum() * std::pow(R, 6);
    if (reference < 0) reference = weight;
    CHECK(weight == Catch::Approx(6.0).epsilon(1e-5));
    CHECK(weight == Catch::Approx(reference).epsilon(1e-6));
  }
}

TEST_CASE("cross-pair couplings vanish by parity") {
  // three independent atoms, each on its own centered window, so every
  // factor hamiltonian commutes with its own parity exactly:
  // <f_01 Phi, R f_02 Phi> = 0 and <f_01 Phi, R f_12 Phi> = 0
  const int n = 31;
  Grid g = build_grid(n, -10.0, 10.0);
  SystemSpec atom;
  atom.nuclei = {Nucleus{0.0, 1, 1836.15267, 0.0}};
  atom.electron_count = 1;
  atom.potential.softening = 1.0;
  atom.grid = g;
  SparseMatrix h1 = single_particle_hamiltonian(atom, 0);
  Matrix h1d(h1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h1d);
  const double e0 = es.eigenvalues()[0];
  Vector phi = es.eigenvectors().col(0);

  const Eigen::Index dim = static_cast<Eigen::Index>(n) * n * n;
  LinearOperator op{dim, [&](const Vector& x, Vector& y) {
                      y.setZero(x.size());
                      std::vector<int> c(3);
                      // apply the one-atom hamiltonian on each slot
                      for (Eigen::Index idx = 0; idx < dim; ++idx) {
                        int i0 = static_cast<int>(idx / (n * n));
                        int i1 = static_cast<int>((idx / n) % n);
                        int i2 = static_cast<int>(idx % n);
                        (void)c;
                        double acc = 0.0;
                        for (SparseMatrix::InnerIterator it(h1, i0); it; ++it)
                          acc += it.value() * x[it.row() * n * n + i1 * n + i2];
                        for (SparseMatrix::InnerIterator it(h1, i1); it; ++it)
                          acc += it.value() * x[i0 * n * n + it.row() * n + i2];
                        for (SparseMatrix::InnerIterator it(h1, i2); it; ++it)
                          acc += it.value() * x[i0 * n * n + i1 * n + it.row()];
                        y[idx] = acc;
                      }
                    }};

  Vector ground(dim);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int cidx = 0; cidx < n; ++cidx)
        ground[a * n * n + b * n + cidx] = phi[a] * phi[b] * phi[cidx];

  auto pair_coupling = [&](int i, int j) {
    Vector d(dim);
    for (Eigen::Index idx = 0; idx < dim; ++idx) {
      int iv[3] = {static_cast<int>(idx / (n * n)), static_cast<int>((idx / n) % n),
                   static_cast<int>(idx % n)};
      d[idx] = -2.0 * g.point(iv[i]) * g.point(iv[j]) * ground[idx];
    }
    return d;
  };
  Vector f01 = pair_coupling(0, 1);
  Vector f02 = pair_coupling(0, 2);
  Vector f12 = pair_coupling(1, 2);
  double same = second_order_pair_term(op, 3.0 * e0, {ground}, f01, f01);
  double cross1 = second_order_pair_term(op, 3.0 * e0, {ground}, f01, f02);
  double cross2 = second_order_pair_term(op, 3.0 * e0, {ground}, f01, f12);
  CHECK(same > 0.0);
  CHECK(std::abs(cross1) <= 1e-10 * same);
  CHECK(std::abs(cross2) <= 1e-10 * same);
}

TEST_CASE("power-law fits") {
  std::vector<double> rs, ws;
  for (double R = 10.0; R <= 30.0; R += 2.0) {
    rs.push_back(R);
    ws.push_back(-5.0 / std::pow(R, 6));
  }
  PowerLawFit fit = fit_power_law(rs, ws, 10.0, 30.0);
  CHECK(fit.exponent == Catch::Approx(-6.0).margin(1e-10));
  CHECK(fit.coefficient == Catch::Approx(5.0).margin(1e-9));
  CHECK(fit.max_log_residual <= 1e-12);

  // sign change and short windows are refused
  auto flip = ws;
  flip[3] = -flip[3];
  CHECK_THROWS_AS(fit_power_law(rs, flip, 10.0, 30.0), Error);
  CHECK_THROWS_AS(fit_power_law(rs, ws, 10.0, 14.0), Error);
}

TEST_CASE("small interaction sweep with both methods") {
  PairSystemParams params;
  params.grid_points = 141;
  params.pad = 10.0;
  SweepOptions opt;
  opt.method = SweepMethod::both;
  VdwReport rep = interaction_sweep(params, {12.0, 16.0}, opt);
  for (const auto& p : rep.points) {
    CHECK(p.w_disp_direct < 0.0);
    CHECK(std::abs(p.w_disp_direct - p.w_disp_feshbach) <= 1e-7);
    CHECK(p.w_disp_direct == Catch::Approx(p.predicted).epsilon(0.05));
    CHECK(p.electrostatic == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("degenerate-well rigging") {
  RiggedPair rig = rig_degenerate_wells(3.0, 321, 16.0, 0);
  CHECK(std::abs(rig.tie_gap) <= 1e-6);
  CHECK(rig.e_atom_shallow == Catch::Approx(rig.e_two_electron - rig.e_atom_deep).margin(1e-6));
  CHECK(rig.params.nucleus2_softening > 1.0);

  // the unrigged neutral pair refuses the experiment
  PairSystemParams plain;
  plain.coupling = CouplingModel::full_coulomb;
  plain.grid_points = 161;
  plain.pad = 10.0;
  CHECK_THROWS_AS(necessity_experiment(plain, {10.0, 12.0, 14.0, 16.0}), Error);
}

TEST_CASE("neutral stability margins for the model wells") {
  Grid g = build_grid(201, -12.0, 12.0);
  NeutralStabilityNumeric num = neutral_stability_numeric(g, 1.0, 1.0, false, 0);
  CHECK(num.e_one == Catch::Approx(-0.6698).margin(1e-3));
  CHECK(num.margin_two > 0.0);
  CHECK(num.margin_two >= num.repulsion_expectation - 1e-9);
  CHECK(num.repulsion_expectation > 0.0);
  CHECK(num.holds);
  CHECK(num.margin_two == Catch::Approx(0.6088).margin(5e-3));
}

TEST_CASE("ionization table mode") {
  auto table = load_ion_table("data/ionization_table.csv");
  REQUIRE(table.size() == 25);
  CHECK(table[0].element == "H");
  CHECK(table[0].ionization_kcal == Catch::Approx(313.5));
  REQUIRE(table[0].affinity_kcal.has_value());
  CHECK(*table[0].affinity_kcal == Catch::Approx(17.3));
  CHECK_FALSE(table[1].affinity_kcal.has_value());  // the noble gas row
  CHECK(table[2].affinity_estimated);

  TableCheckReport rep = property_E_table_check(table);
  CHECK(rep.all_ok);
  CHECK(rep.skipped > 0);
  bool found_h = false, found_fcl = false, found_clf = false;
  for (const auto& p : rep.pairs) {
    if (p.acceptor == "H") {
      CHECK(p.ionization_kcal > 17.3);
      found_h = true;
    }
    if (p.donor == "F" && p.acceptor == "Cl") {
      CHECK(p.ionization_kcal == Catch::Approx(401.8));
      CHECK(p.affinity_kcal == Catch::Approx(83.4));
      found_fcl = true;
    }
    if (p.donor == "Cl" && p.acceptor == "F") {
      CHECK(p.ionization_kcal == Catch::Approx(300.0));
      CHECK(p.affinity_kcal == Catch::Approx(79.5));
      found_clf = true;
    }
  }
  CHECK(found_h);
  CHECK(found_fcl);
  CHECK(found_clf);
}

TEST_CASE("nuclear-motion correction") {
  PairSystemParams params;
  params.grid_points = 81;
  params.pad = 8.0;
  SystemSpec spec = make_pair_system(params, 12.0);
  NuclearMotionCorrection corr = bo_correction(spec, 1e-3, 1e-10, 0);
  CHECK(corr.correction >= 0.0);
  REQUIRE(corr.per_nucleus.size() == 2);

  // the correction scales exactly like the reciprocal mass
  SystemSpec heavy = spec;
  for (auto& nuc : heavy.nuclei) nuc.mass *= 10.0;
  NuclearMotionCorrection corr10 = bo_correction(heavy, 1e-3, 1e-10, 0);
  CHECK(corr10.correction == Catch::Approx(corr.correction / 10.0).epsilon(1e-9));
}

TEST_CASE("sweep is deterministic across worker threads") {
  PairSystemParams params;
  params.grid_points = 101;
  params.pad = 8.0;
  SweepOptions one, two;
  one.method = two.method = SweepMethod::direct;
  one.threads = 1;
  two.threads = 2;
  std::vector<double> rs{12.0, 14.0, 16.0, 18.0};
  VdwReport a = interaction_sweep(params, rs, one);
  VdwReport b = interaction_sweep(params, rs, two);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].w_direct == b.points[i].w_direct);  // bitwise equal
    CHECK(a.points[i].sigma == b.points[i].sigma);
  }
  // attraction weakens with separation
  CHECK(std::abs(a.points.back().w_disp_direct) < std::abs(a.points.front().w_disp_direct));
}
