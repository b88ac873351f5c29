#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "vdwlab/errors.hpp"
#include "vdwlab/lattice.hpp"
#include "vdwlab/linalg.hpp"
#include "vdwlab/manybody.hpp"

namespace vdwlab {

struct SpectralResult {
  std::vector<double> eigenvalues;     // ascending
  std::vector<Vector> eigenvectors;    // orthonormal
  std::vector<double> residuals;
  std::vector<std::pair<int, int>> degenerate_blocks;  // [first, last] index ranges

  double gap() const {
    if (eigenvalues.size() < 2)
      throw Error(ErrorCode::validation, "gap needs at least two eigenvalues");
    return eigenvalues[1] - eigenvalues[0];
  }
};

// index, energy, residual rows
inline void write_spectrum_csv(const SpectralResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
  out << "index,energy,residual\n";
  out << std::setprecision(15) << std::scientific;
  for (std::size_t i = 0; i < res.eigenvalues.size(); ++i)
    out << i << "," << res.eigenvalues[i] << "," << res.residuals[i] << "\n";
}

inline std::vector<std::pair<int, int>> cluster_degenerate(const std::vector<double>& evs,
                                                           double tol = 1e-8) {
  std::vector<std::pair<int, int>> blocks;
  int start = 0;
  for (std::size_t i = 1; i <= evs.size(); ++i) {
    if (i == evs.size() || evs[i] - evs[i - 1] > tol) {
      blocks.emplace_back(start, static_cast<int>(i) - 1);
      start = static_cast<int>(i);
    }
  }
  return blocks;
}

constexpr Eigen::Index dense_fallback_dim = 2000;

// k lowest eigenpairs with residual certificates. Dense path below the
// fallback dimension doubles as the oracle for the iterative one.
inline SpectralResult low_spectrum(const ManyBodyOperator& op, int k, double tol = 1e-9,
                                   std::uint64_t seed = 0) {
  if (k < 1) throw Error(ErrorCode::validation, "need k >= 1");
  if (hermiticity_defect(op.matrix) > 1e-12 * std::max(1.0, one_norm(op.matrix)))
    throw Error(ErrorCode::invalid_system, "operator is not hermitian");
  SpectralResult out;
  const Eigen::Index dim = op.dim();
  if (dim <= dense_fallback_dim) {
    Matrix dense(op.matrix);
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
    for (int i = 0; i < k && i < dim; ++i) {
      out.eigenvalues.push_back(es.eigenvalues()[i]);
      out.eigenvectors.push_back(es.eigenvectors().col(i));
      Vector r = dense * out.eigenvectors.back() - out.eigenvalues.back() * out.eigenvectors.back();
      out.residuals.push_back(r.norm());
    }
  } else {
    LanczosOptions lopt;
    lopt.tol = tol;
    lopt.seed = seed;
    auto pairs = lowest_eigenpairs(op.op(), k, {}, lopt);
    double scale = one_norm(op.matrix);
    for (auto& p : pairs) {
      if (p.residual > 100 * tol * std::max(1.0, scale))
        throw Error(ErrorCode::convergence_failure,
                    "residual " + std::to_string(p.residual) + " at eigenvalue " +
                        std::to_string(p.value));
      out.eigenvalues.push_back(p.value);
      out.eigenvectors.push_back(std::move(p.vector));
      out.residuals.push_back(p.residual);
    }
    // keep ascending order even if deflation found them out of order
    std::vector<int> idx(out.eigenvalues.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return out.eigenvalues[a] < out.eigenvalues[b]; });
    SpectralResult sorted;
    for (int i : idx) {
      sorted.eigenvalues.push_back(out.eigenvalues[i]);
      sorted.eigenvectors.push_back(std::move(out.eigenvectors[i]));
      sorted.residuals.push_back(out.residuals[i]);
    }
    out = std::move(sorted);
  }
  out.degenerate_blocks = cluster_degenerate(out.eigenvalues);
  return out;
}

struct DecayCheck {
  bool passed = false;
  double measured_rate = 0.0;  // decay exponent, positive for decaying tails
  bool truncated_fit = false;
  int points_used = 0;
};

// Least-squares slope of log|psi| against distance from `center` over the
// tail region; passes when the measured decay beats theta_trial. The fit
// runs on the binned envelope so oscillatory states cannot fake a slope
// through their nodes.
inline DecayCheck decay_check(const Vector& state, const Grid& grid, double center,
                              double theta_trial) {
  const double norm = state.norm();
  if (std::abs(norm - 1.0) > 1e-8)
    throw Error(ErrorCode::invalid_basis, "state must be normalized");
  const double peak = state.cwiseAbs().maxCoeff();
  const double floor_level = 1e-13 * peak;
  const int bins = 16;
  const double d_lo = 3.0;  // skip the core region
  // usable tail range ends where the amplitude drops under the floor
  double d_max = d_lo;
  bool truncated = false;
  for (int i = 0; i < grid.points_per_axis; ++i) {
    double d = std::abs(grid.point(i) - center);
    double a = std::abs(state[i]);
    if (d < d_lo) continue;
    if (a <= floor_level)
      truncated = true;
    else
      d_max = std::max(d_max, d);
  }
  if (d_max <= d_lo + 1e-12) {
    DecayCheck out;
    out.truncated_fit = truncated;
    return out;
  }
  std::vector<double> env(bins, 0.0);
  for (int i = 0; i < grid.points_per_axis; ++i) {
    double d = std::abs(grid.point(i) - center);
    double a = std::abs(state[i]);
    if (d < d_lo || a <= floor_level) continue;
    int b = static_cast<int>((d - d_lo) / (d_max - d_lo) * bins);
    b = std::min(std::max(b, 0), bins - 1);
    env[b] = std::max(env[b], a);
  }
  std::vector<double> xs, ys;
  for (int b = 0; b < bins; ++b) {
    if (env[b] <= 0.0 || env[b] > 0.5 * peak) continue;
    xs.push_back(d_lo + (b + 0.5) * (d_max - d_lo) / bins);
    ys.push_back(std::log(env[b]));
  }
  DecayCheck out;
  out.truncated_fit = truncated;
  out.points_used = static_cast<int>(xs.size());
  if (xs.size() < 4) {
    out.passed = false;
    return out;
  }
  auto [intercept, slope] = line_fit(xs, ys);
  (void)intercept;
  out.measured_rate = -slope;
  out.passed = slope <= -theta_trial;
  return out;
}

// Marginal one-electron density of a set of orthonormal tensor-grid vectors.
struct DensityProfile {
  Vector values;
  double spacing = 0.0;

  double total() const { return values.sum() * spacing; }
};

inline DensityProfile one_electron_density(const std::vector<Vector>& basis,
                                           const TensorSpace& space, double spacing,
                                           int axis = 0) {
  if (basis.empty()) throw Error(ErrorCode::invalid_basis, "empty basis");
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t j = i; j < basis.size(); ++j) {
      double g = basis[i].dot(basis[j]);
      double want = i == j ? 1.0 : 0.0;
      if (std::abs(g - want) > 1e-8)
        throw Error(ErrorCode::invalid_basis, "basis not orthonormal (gram defect " +
                                                  std::to_string(std::abs(g - want)) + ")");
    }
  if (axis < 0 || axis >= space.electrons)
    throw Error(ErrorCode::validation, "axis out of range");
  DensityProfile rho;
  rho.spacing = spacing;
  rho.values = Vector::Zero(space.points);
  std::vector<int> c;
  for (const Vector& v : basis)
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      space.decode(i, c);
      rho.values[c[axis]] += v[i] * v[i];
    }
  rho.values /= spacing;
  return rho;
}

}  // namespace vdwlab
