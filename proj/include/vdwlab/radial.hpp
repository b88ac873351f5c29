#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "vdwlab/errors.hpp"
#include "vdwlab/linalg.hpp"

namespace vdwlab {

// Uniform radial grid r_i = (i+1) h on (0, r_max], u(0) = 0 boundary.
struct RadialGrid {
  int n = 0;
  double r_max = 0.0;

  double h() const { return r_max / n; }
  double r(int i) const { return h() * (i + 1); }

  Vector points() const {
    Vector p(n);
    for (int i = 0; i < n; ++i) p[i] = r(i);
    return p;
  }
};

// Reduced radial hamiltonian for fixed angular momentum l, acting on u(r)
// with psi = u(r)/r Y_lm. Tridiagonal: constant off-diagonal.
struct RadialHamiltonian {
  RadialGrid grid;
  Vector diag;
  double off = 0.0;

  LinearOperator op() const {
    return LinearOperator{grid.n, [this](const Vector& x, Vector& y) {
                            y.resize(grid.n);
                            for (int i = 0; i < grid.n; ++i) {
                              double acc = diag[i] * x[i];
                              if (i > 0) acc += off * x[i - 1];
                              if (i + 1 < grid.n) acc += off * x[i + 1];
                              y[i] = acc;
                            }
                          }};
  }
};

inline RadialHamiltonian radial_hamiltonian(const RadialGrid& grid, int ell, double charge,
                                            double e2 = 1.0) {
  RadialHamiltonian h;
  h.grid = grid;
  const double dr = grid.h();
  h.off = -0.5 / (dr * dr);
  h.diag.resize(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    double r = grid.r(i);
    h.diag[i] = 1.0 / (dr * dr) + 0.5 * ell * (ell + 1) / (r * r) - e2 * charge / r;
  }
  return h;
}

struct RadialSpectrum {
  Vector eigenvalues;
  Matrix eigenvectors;  // columns, l2-normalized
};

inline RadialSpectrum radial_spectrum(const RadialHamiltonian& h) {
  Vector sub = Vector::Constant(h.grid.n - 1, h.off);
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(h.diag, sub, Eigen::ComputeEigenvectors);
  return RadialSpectrum{es.eigenvalues(), es.eigenvectors()};
}

inline EigenPair radial_ground_state(const RadialHamiltonian& h) {
  Vector sub = Vector::Constant(h.grid.n - 1, h.off);
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(h.diag, sub, Eigen::ComputeEigenvectors);
  EigenPair p;
  p.value = es.eigenvalues()[0];
  p.vector = es.eigenvectors().col(0);
  Vector hv;
  h.op().apply(p.vector, hv);
  p.residual = (hv - p.value * p.vector).norm();
  return p;
}

// Spherically symmetric density: rho(r) sampled on a radial grid, normalized
// so that 4 pi int rho r^2 dr = total.
struct RadialDensity {
  RadialGrid grid;
  Vector values;
  double support_radius = 0.0;

  double total() const {
    double acc = 0.0;
    for (int i = 0; i < grid.n; ++i) acc += values[i] * grid.r(i) * grid.r(i);
    return 4.0 * M_PI * acc * grid.h();
  }
};

inline RadialDensity density_from_radial_state(const RadialGrid& grid, const Vector& u) {
  // |psi|^2 = u(r)^2 / (4 pi r^2) for an s state with l2-normalized u
  RadialDensity d;
  d.grid = grid;
  d.values.resize(grid.n);
  const double h = grid.h();
  for (int i = 0; i < grid.n; ++i) {
    double r = grid.r(i);
    d.values[i] = u[i] * u[i] / h / (4.0 * M_PI * r * r);
  }
  d.support_radius = grid.r_max;
  return d;
}

inline RadialDensity truncated_gaussian_density(const RadialGrid& grid, double width,
                                                double support) {
  RadialDensity d;
  d.grid = grid;
  d.values = Vector::Zero(grid.n);
  for (int i = 0; i < grid.n; ++i) {
    double r = grid.r(i);
    if (r <= support) d.values[i] = std::exp(-r * r / (2 * width * width));
  }
  d.support_radius = support;
  double norm = d.total();
  d.values /= norm;
  return d;
}

inline RadialDensity uniform_ball_density(const RadialGrid& grid, double radius) {
  RadialDensity d;
  d.grid = grid;
  d.values = Vector::Zero(grid.n);
  for (int i = 0; i < grid.n; ++i)
    if (grid.r(i) <= radius) d.values[i] = 1.0;
  d.support_radius = radius;
  double norm = d.total();
  d.values /= norm;
  return d;
}

// | int rho(z) / |y + z| dz - 1/y | for a unit spherical density whose
// support lies inside the ball of radius y. Shell average of the kernel over
// directions is 1/max(r, y).
inline double newton_screening_residual(const RadialDensity& rho, double y) {
  if (!(rho.support_radius < y))
    throw Error(ErrorCode::screening_inapplicable,
                "support radius " + std::to_string(rho.support_radius) +
                    " not inside evaluation distance " + std::to_string(y));
  double total = rho.total();
  if (std::abs(total - 1.0) > 1e-6)
    throw Error(ErrorCode::validation, "density not normalized: " + std::to_string(total));
  double acc = 0.0;
  for (int i = 0; i < rho.grid.n; ++i) {
    double r = rho.grid.r(i);
    acc += rho.values[i] * r * r / std::max(r, y);
  }
  acc *= 4.0 * M_PI * rho.grid.h();
  return std::abs(acc - 1.0 / y);
}

// Trace of the four-term neutral pair interaction against two spherical
// unit densities a distance y apart. Shell averaging reduces every term to
// a point-charge value once the supports stay inside the separation, so the
// result vanishes up to quadrature error.
inline double neutral_pair_trace_radial(const RadialDensity& rho1, const RadialDensity& rho2,
                                        double y) {
  if (!(rho1.support_radius + rho2.support_radius < y))
    throw Error(ErrorCode::screening_inapplicable, "supports overlap the separation");
  auto one_center = [&](const RadialDensity& rho) {
    double acc = 0.0;
    for (int i = 0; i < rho.grid.n; ++i) {
      double r = rho.grid.r(i);
      acc += rho.values[i] * r * r / std::max(r, y);
    }
    return acc * 4.0 * M_PI * rho.grid.h();
  };
  // electron-electron: average rho2 around each shell of rho1; the outer
  // shell sees a point charge at distance |y + z| >= y - r1 > supp rho2
  double ee = 0.0;
  for (int i = 0; i < rho1.grid.n; ++i) {
    double r1 = rho1.grid.r(i);
    if (rho1.values[i] == 0.0) continue;
    // average of 1/max(|y+z1|, r2)-type kernels: both radii stay inside the
    // separation, so the inner average is 1/|y+z1|, then shell-average again
    double inner = 1.0 / std::max(r1, y);  // = avg over z1 directions of 1/|y+z1|
    ee += rho1.values[i] * r1 * r1 * inner;
  }
  ee *= 4.0 * M_PI * rho1.grid.h();
  double term_nn = 1.0 / y;
  double term_1 = one_center(rho1);
  double term_2 = one_center(rho2);
  return -term_1 - term_2 + term_nn + ee;
}

// Axisymmetric density rho(r, cos t) = radial(r) * (1 + beta cos t) style
// profiles for the screening control experiments; evaluated pointwise.
struct Density3D {
  std::function<double(const Eigen::Vector3d&)> value;
  double support_radius = 0.0;
  double norm_hint = 1.0;
};

inline Density3D dipole_distorted_density(const RadialDensity& base, double beta) {
  RadialDensity copy = base;
  Density3D d;
  d.support_radius = base.support_radius;
  d.value = [copy, beta](const Eigen::Vector3d& z) {
    double r = z.norm();
    if (r >= copy.support_radius || r <= 0.0) return 0.0;
    int i = static_cast<int>(r / copy.grid.h() + 0.5) - 1;
    i = std::min(std::max(i, 0), copy.grid.n - 1);
    double ct = z[2] / r;
    return copy.values[i] * (1.0 + beta * ct);
  };
  return d;
}

// Direct quadrature of | int rho(z) / |y + z| dz - total/y | with y on the
// z axis; Gauss-Legendre in cos t, uniform in r and phi.
inline double screening_residual_quadrature(const Density3D& rho, double y, int nr = 400,
                                            int nt = 96) {
  if (!(rho.support_radius < y))
    throw Error(ErrorCode::screening_inapplicable, "support exceeds evaluation distance");
  // Gauss-Legendre nodes on [-1, 1] by Newton iteration on Legendre polynomials
  std::vector<double> xs(nt), ws(nt);
  for (int k = 0; k < nt; ++k) {
    double x = std::cos(M_PI * (k + 0.75) / (nt + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int l = 2; l <= nt; ++l) {
        double p2 = ((2 * l - 1) * x * p1 - (l - 1) * p0) / l;
        p0 = p1;
        p1 = p2;
      }
      double dp = nt * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int l = 2; l <= nt; ++l) {
      double p2 = ((2 * l - 1) * x * p1 - (l - 1) * p0) / l;
      p0 = p1;
      p1 = p2;
    }
    double dp = nt * (x * p1 - p0) / (x * x - 1.0);
    xs[k] = x;
    ws[k] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  const double hr = rho.support_radius / nr;
  double integral = 0.0, total = 0.0;
  for (int i = 0; i < nr; ++i) {
    double r = hr * (i + 0.5);
    for (int k = 0; k < nt; ++k) {
      double ct = xs[k], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
      Eigen::Vector3d z(r * st, 0.0, r * ct);  // axisymmetric profiles assumed
      double val = rho.value(z);
      double kern = 1.0 / std::sqrt(y * y + r * r + 2.0 * y * r * ct);
      integral += ws[k] * val * kern * r * r;
      total += ws[k] * val * r * r;
    }
  }
  integral *= 2.0 * M_PI * hr;
  total *= 2.0 * M_PI * hr;
  return std::abs(integral - total / y);
}

// Max relative change of a density under sampled rotations: the 24 proper
// rotations of the cube plus seeded random ones.
inline double spherical_symmetry_check(const Density3D& rho, std::uint64_t seed = 0,
                                       int random_rotations = 10, int sample_points = 500) {
  std::vector<Eigen::Matrix3d> rots;
  const int axes[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (const auto& za : axes)
    for (const auto& xa : axes) {
      Eigen::Vector3d z(za[0], za[1], za[2]), x(xa[0], xa[1], xa[2]);
      if (std::abs(z.dot(x)) > 0.5) continue;
      Eigen::Matrix3d m;
      m.col(0) = x;
      m.col(2) = z;
      m.col(1) = z.cross(x);
      if (m.determinant() > 0.5) rots.push_back(m);
    }
  std::mt19937_64 gen(seed ^ 0xabcdef1234ull);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int k = 0; k < random_rotations; ++k) {
    Eigen::Matrix3d a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = nd(gen);
    Eigen::HouseholderQR<Eigen::Matrix3d> qr(a);
    Eigen::Matrix3d q = qr.householderQ();
    if (q.determinant() < 0) q.col(0) *= -1.0;
    rots.push_back(q);
  }
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  std::vector<Eigen::Vector3d> pts;
  while (static_cast<int>(pts.size()) < sample_points) {
    Eigen::Vector3d p(ud(gen), ud(gen), ud(gen));
    if (p.norm() <= 1.0 && p.norm() > 1e-3)
      pts.push_back(p * (0.9 * rho.support_radius));
  }
  double base_norm = 0.0;
  std::vector<double> ref(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ref[i] = rho.value(pts[i]);
    base_norm += ref[i] * ref[i];
  }
  base_norm = std::sqrt(base_norm);
  if (base_norm == 0.0) return 0.0;
  double worst = 0.0;
  for (const auto& rot : rots) {
    double diff = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double v = rho.value(rot * pts[i]);
      diff += (v - ref[i]) * (v - ref[i]);
    }
    worst = std::max(worst, std::sqrt(diff) / base_norm);
  }
  return worst;
}

}  // namespace vdwlab
