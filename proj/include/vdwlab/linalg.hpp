#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "vdwlab/errors.hpp"

namespace vdwlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

// Matrix-free Hermitian operator: y = A x plus a dimension.
struct LinearOperator {
  Eigen::Index dim = 0;
  std::function<void(const Vector&, Vector&)> apply;

  Vector operator()(const Vector& x) const {
    Vector y(dim);
    apply(x, y);
    return y;
  }

  static LinearOperator from_sparse(const SparseMatrix& m) {
    return LinearOperator{m.rows(),
                          [&m](const Vector& x, Vector& y) { y.noalias() = m * x; }};
  }
};

// Deterministic start vectors. All iterative solvers seed through here.
inline Vector random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(gen);
  return v;
}

inline void orthogonalize_against(Vector& v, const std::vector<Vector>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const Vector& b : basis) v -= b.dot(v) * b;
}

struct EigenPair {
  double value = 0.0;
  Vector vector;
  double residual = 0.0;
};

namespace detail {

// One thick-restart Lanczos cycle for the lowest eigenpair of A restricted
// to the orthogonal complement of `deflate`. Full reorthogonalization; the
// basis never exceeds max_basis vectors.
inline EigenPair lanczos_lowest(const LinearOperator& A,
                                const std::vector<Vector>& deflate,
                                std::uint64_t seed, double tol, int max_basis,
                                int max_restarts, const Vector* start = nullptr) {
  const Eigen::Index n = A.dim;
  Vector q = start ? *start : random_vector(n, seed);
  orthogonalize_against(q, deflate);
  double qn = q.norm();
  if (qn < 1e-14)
    throw Error(ErrorCode::deflation_failure, "start vector annihilated by deflation");
  q /= qn;

  EigenPair best;
  best.value = std::numeric_limits<double>::max();
  double op_scale = 1.0;

  for (int restart = 0; restart < max_restarts; ++restart) {
    std::vector<Vector> basis{q};
    std::vector<double> alpha, beta;
    Vector w(n);
    for (int j = 0; j < max_basis; ++j) {
      A.apply(basis[j], w);
      op_scale = std::max(op_scale, w.norm());
      double a = basis[j].dot(w);
      alpha.push_back(a);
      w -= a * basis[j];
      if (j > 0) w -= beta[j - 1] * basis[j - 1];
      // full reorthogonalization keeps the certificate trustworthy
      orthogonalize_against(w, deflate);
      orthogonalize_against(w, basis);
      double b = w.norm();
      if (b < 1e-13 * op_scale) {
        beta.push_back(0.0);
        break;
      }
      beta.push_back(b);
      basis.push_back(w / b);
    }

    const int m = static_cast<int>(alpha.size());
    Eigen::Map<const Vector> ad(alpha.data(), m);
    Vector bd(std::max(m - 1, 0));
    for (int i = 0; i + 1 < m; ++i) bd[i] = beta[i];
    Eigen::SelfAdjointEigenSolver<Matrix> es;
    es.computeFromTridiagonal(ad, bd, Eigen::ComputeEigenvectors);

    Vector ritz = Vector::Zero(n);
    for (int i = 0; i < m; ++i) ritz += es.eigenvectors()(i, 0) * basis[i];
    ritz.normalize();
    Vector Ar(n);
    A.apply(ritz, Ar);
    double lam = ritz.dot(Ar);
    double res = (Ar - lam * ritz).norm();
    if (lam < best.value || res < best.residual) best = EigenPair{lam, ritz, res};
    if (res <= tol * op_scale) return best;
    q = ritz;  // restart from the current Ritz vector
  }
  return best;
}

}  // namespace detail

struct LanczosOptions {
  double tol = 1e-11;       // residual relative to an operator-norm estimate
  int max_basis = 220;
  int max_restarts = 60;
  std::uint64_t seed = 0;
};

// k lowest eigenpairs by successive deflation.
inline std::vector<EigenPair> lowest_eigenpairs(const LinearOperator& A, int k,
                                                const std::vector<Vector>& deflate = {},
                                                const LanczosOptions& opt = {}) {
  std::vector<EigenPair> out;
  std::vector<Vector> defl = deflate;
  for (int i = 0; i < k; ++i) {
    EigenPair p = detail::lanczos_lowest(A, defl, opt.seed + 7919 * i, opt.tol,
                                         opt.max_basis, opt.max_restarts);
    defl.push_back(p.vector);
    out.push_back(std::move(p));
  }
  return out;
}

struct CgOptions {
  double tol = 1e-10;   // relative residual
  int max_iter = 20000;
};

struct CgResult {
  Vector x;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Conjugate gradient on a positive definite operator, with explicit
// re-orthogonalization of iterates against `deflate` every step.
inline CgResult cg_solve(const LinearOperator& A, const Vector& rhs,
                         const std::vector<Vector>& deflate = {},
                         const CgOptions& opt = {}) {
  Vector b = rhs;
  orthogonalize_against(b, deflate);
  const double bnorm = b.norm();
  CgResult out;
  out.x = Vector::Zero(A.dim);
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  Vector r = b, p = b, Ap(A.dim);
  double rs = r.squaredNorm();
  for (int it = 0; it < opt.max_iter; ++it) {
    A.apply(p, Ap);
    orthogonalize_against(Ap, deflate);
    double denom = p.dot(Ap);
    if (denom <= 0.0)
      throw Error(ErrorCode::not_invertible,
                  "operator not positive definite in cg (p'Ap = " +
                      std::to_string(denom) + ")");
    double a = rs / denom;
    out.x += a * p;
    r -= a * Ap;
    double rs_new = r.squaredNorm();
    out.iterations = it + 1;
    if (std::sqrt(rs_new) <= opt.tol * bnorm) {
      orthogonalize_against(out.x, deflate);
      out.residual = std::sqrt(rs_new) / bnorm;
      out.converged = true;
      return out;
    }
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  out.residual = r.norm() / bnorm;
  throw Error(ErrorCode::convergence_failure,
              "cg stalled at relative residual " + std::to_string(out.residual));
}

// Operator-norm estimate of a Hermitian operator by power iteration on A^2
// (captures the extreme of either sign).
inline double operator_norm_estimate(const LinearOperator& A, std::uint64_t seed = 1,
                                     int iters = 60) {
  Vector v = random_vector(A.dim, seed).normalized();
  Vector w(A.dim);
  double nrm = 0.0;
  for (int i = 0; i < iters; ++i) {
    A.apply(v, w);
    nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    A.apply(w, v);
    double n2 = v.norm();
    if (n2 == 0.0) return nrm;
    v /= n2;
  }
  A.apply(v, w);
  return w.norm();
}

inline double one_norm(const SparseMatrix& m) {
  Vector colsum = Vector::Zero(m.cols());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      colsum[it.col()] += std::abs(it.value());
  return colsum.size() ? colsum.maxCoeff() : 0.0;
}

inline double hermiticity_defect(const SparseMatrix& m) {
  SparseMatrix d = SparseMatrix(m.transpose()) - m;
  double mx = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(d, k); it; ++it)
      mx = std::max(mx, std::abs(it.value()));
  return mx;
}

// Least-squares line fit y = a + b x.
inline std::pair<double, double> line_fit(const std::vector<double>& xs,
                                          const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  double a = (sy - b * sx) / n;
  return {a, b};
}

}  // namespace vdwlab
