#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vdwlab/errors.hpp"
#include "vdwlab/lattice.hpp"
#include "vdwlab/linalg.hpp"
#include "vdwlab/manybody.hpp"
#include "vdwlab/spectral.hpp"
#include "vdwlab/symmetry.hpp"

namespace vdwlab {

// ---------------------------------------------------------------------------
// Cut-off cluster ground states and the projection P
// ---------------------------------------------------------------------------

// Product of per-cluster vectors embedded into the full tensor space. Each
// entry pairs the member electron slots with a vector on points^|members|.
inline Vector embed_cluster_product(const TensorSpace& space,
                                    const std::vector<std::pair<std::vector<int>, Vector>>& parts) {
  Vector out(space.dim());
  std::vector<int> c;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    space.decode(i, c);
    double prod = 1.0;
    for (const auto& [members, vec] : parts) {
      Eigen::Index idx = 0;
      for (int m : members) idx = idx * space.points + c[m];
      prod *= vec[idx];
    }
    out[i] = prod;
  }
  return out;
}

struct PBlock {
  Decomposition a;
  InducedType alpha;          // per-cluster irrep labels when statistics are used
  bool has_alpha = false;
  std::vector<Vector> vectors;  // orthonormal cut-off cluster ground products
  double cluster_energy = 0.0;  // sum of (uncut) cluster ground energies
  double eigen_residual = 0.0;  // max ||H_a v - E_a v|| over the block
};

struct CutoffGroundBasis {
  std::vector<PBlock> blocks;
  double cut_radius = 0.0;
  double transition_width = 0.0;
  double max_pair_overlap = 0.0;  // support-product certificate across blocks
  double e_infinity = 0.0;        // min over blocks of the cluster energy

  int rank() const {
    int r = 0;
    for (const auto& b : blocks) r += static_cast<int>(b.vectors.size());
    return r;
  }

  std::vector<Vector> basis() const {
    std::vector<Vector> out;
    for (const auto& b : blocks)
      for (const Vector& v : b.vectors) out.push_back(v);
    return out;
  }

  void apply_projection(const Vector& in, Vector& out) const {
    out = Vector::Zero(in.size());
    for (const auto& b : blocks)
      for (const Vector& v : b.vectors) out += v.dot(in) * v;
  }

  Vector project_out(const Vector& in) const {
    Vector out = in;
    for (const auto& b : blocks)
      for (const Vector& v : b.vectors) out -= v.dot(in) * v;
    return out;
  }
};

namespace detail {

// Ground block of one cluster: lowest eigenvectors of the cluster
// hamiltonian on its own tensor factor, degenerate levels kept together.
struct ClusterGround {
  std::vector<Vector> states;
  double energy = 0.0;
};

inline ClusterGround cluster_ground_block(const SystemSpec& spec, int nucleus,
                                          int cluster_size, std::uint64_t seed) {
  SystemSpec sub = spec;
  sub.nuclei = {spec.nuclei[nucleus]};
  sub.electron_count = cluster_size;
  sub.coupling = CouplingModel::full_coulomb;
  Decomposition all_zero;
  all_zero.clusters = 1;
  all_zero.assign.assign(cluster_size, 0);
  ManyBodyOperator h = assemble_cluster(sub, all_zero);
  int want = cluster_size > 1 ? 3 : 2;
  SpectralResult res = low_spectrum(h, want, 1e-10, seed);
  ClusterGround out;
  out.energy = res.eigenvalues[0];
  auto [lo, hi] = res.degenerate_blocks.front();
  for (int i = lo; i <= hi; ++i) out.states.push_back(res.eigenvectors[i]);
  return out;
}

}  // namespace detail

struct BuildPOptions {
  double cut_fraction = default_cutoff_fraction;        // ball radius / min separation
  double transition_fraction = default_transition_fraction;  // width / radius
  std::uint64_t seed = 0;
};

// Orthogonal projection onto the span of cut-off cluster ground products,
// one block per decomposition in `decomps` (atomic set by default).
inline CutoffGroundBasis build_P(const SystemSpec& spec,
                                 const std::vector<Decomposition>& decomps,
                                 const BuildPOptions& opt = {}) {
  spec.validate();
  if (decomps.empty()) throw Error(ErrorCode::invalid_decomposition, "no decompositions given");
  double min_sep = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < spec.nuclei.size(); ++i)
    for (std::size_t j = i + 1; j < spec.nuclei.size(); ++j)
      min_sep = std::min(min_sep, std::abs(spec.nuclei[i].position - spec.nuclei[j].position));
  if (spec.nuclei.size() < 2) min_sep = 0.5 * (spec.grid.x_max - spec.grid.x_min);
  const double radius = opt.cut_fraction * min_sep;
  if (2.0 * radius > min_sep * (1.0 + 1e-12))
    throw Error(ErrorCode::geometry, "cut-off balls of radius " + std::to_string(radius) +
                                         " overlap at separation " + std::to_string(min_sep));
  const double width = opt.transition_fraction * radius;
  CutoffFn chi = smoothed_cutoff(radius, width, spec.grid);

  const TensorSpace space = spec.space();
  CutoffGroundBasis P;
  P.cut_radius = radius;
  P.transition_width = width;

  // ground blocks are shared between decompositions with equal cluster content
  std::map<std::pair<int, int>, detail::ClusterGround> cache;
  for (const Decomposition& a : decomps) {
    auto members = a.cluster_members();
    PBlock block;
    block.a = a;
    block.alpha.cluster_diagrams.resize(a.clusters);
    block.has_alpha = true;
    std::vector<std::vector<std::pair<std::vector<int>, Vector>>> products{{}};
    double energy = 0.0, residual = 0.0;
    for (int j = 0; j < a.clusters; ++j) {
      if (members[j].empty()) continue;
      auto key = std::make_pair(j, static_cast<int>(members[j].size()));
      if (!cache.count(key))
        cache[key] = detail::cluster_ground_block(spec, j, key.second, opt.seed);
      const detail::ClusterGround& g = cache[key];
      energy += g.energy;

      // stabilizer type of the cluster ground: a nondegenerate level is
      // either fully symmetric or fully antisymmetric under member swaps
      if (key.second == 1) {
        block.alpha.cluster_diagrams[j] = Partition{1};
      } else if (g.states.size() == 1) {
        TensorSpace cl{space.points, key.second};
        Permutation swap(key.second);
        std::iota(swap.begin(), swap.end(), 0);
        std::swap(swap[0], swap[1]);
        double parity = g.states[0].dot(PermutationAction{cl, swap}(g.states[0]));
        if (parity > 0.99)
          block.alpha.cluster_diagrams[j] = Partition{key.second};
        else if (parity < -0.99)
          block.alpha.cluster_diagrams[j] = Partition(key.second, 1);
        else
          block.has_alpha = false;
      } else {
        block.has_alpha = false;
      }

      // cut every member coordinate by the ball around the cluster nucleus
      TensorSpace sub{space.points, key.second};
      Vector cut = sampled_cutoff(chi, spec.grid, spec.nuclei[j].position);
      std::vector<Vector> cut_states;
      for (const Vector& s : g.states) {
        Vector cs(s.size());
        std::vector<int> c;
        for (Eigen::Index idx = 0; idx < s.size(); ++idx) {
          sub.decode(idx, c);
          double w = 1.0;
          for (int m : c) w *= cut[m];
          cs[idx] = s[idx] * w;
        }
        double nrm = cs.norm();
        if (nrm < 1e-8)
          throw Error(ErrorCode::cutoff_clipped, "cluster state annihilated by cut-off");
        cut_states.push_back(cs / nrm);
      }
      // orthonormalize inside degenerate blocks after cutting
      for (std::size_t i = 0; i < cut_states.size(); ++i) {
        for (std::size_t k = 0; k < i; ++k)
          cut_states[i] -= cut_states[k].dot(cut_states[i]) * cut_states[k];
        cut_states[i].normalize();
      }
      // residual against the cluster hamiltonian
      SystemSpec subspec = spec;
      subspec.nuclei = {spec.nuclei[j]};
      subspec.electron_count = key.second;
      subspec.coupling = CouplingModel::full_coulomb;
      Decomposition all_zero;
      all_zero.clusters = 1;
      all_zero.assign.assign(key.second, 0);
      ManyBodyOperator hsub = assemble_cluster(subspec, all_zero);
      for (const Vector& cs : cut_states)
        residual = std::max(residual, (hsub.matrix * cs - g.energy * cs).norm());

      std::vector<std::vector<std::pair<std::vector<int>, Vector>>> next;
      for (const auto& partial : products)
        for (const Vector& cs : cut_states) {
          auto ext = partial;
          ext.emplace_back(members[j], cs);
          next.push_back(ext);
        }
      products = std::move(next);
    }
    block.cluster_energy = energy;
    block.eigen_residual = residual;
    for (const auto& parts : products) block.vectors.push_back(embed_cluster_product(space, parts));
    // cross-cluster cuts leave the products orthonormal already; reassert
    for (std::size_t i = 0; i < block.vectors.size(); ++i) {
      for (std::size_t k = 0; k < i; ++k)
        block.vectors[i] -= block.vectors[k].dot(block.vectors[i]) * block.vectors[k];
      block.vectors[i].normalize();
    }
    P.blocks.push_back(std::move(block));
  }

  P.e_infinity = std::numeric_limits<double>::max();
  for (const auto& b : P.blocks) P.e_infinity = std::min(P.e_infinity, b.cluster_energy);

  for (std::size_t i = 0; i < P.blocks.size(); ++i)
    for (std::size_t j = i + 1; j < P.blocks.size(); ++j)
      for (const Vector& u : P.blocks[i].vectors)
        for (const Vector& v : P.blocks[j].vectors)
          P.max_pair_overlap =
              std::max(P.max_pair_overlap, u.cwiseAbs().dot(v.cwiseAbs()));
  return P;
}

inline CutoffGroundBasis build_P_atomic(const SystemSpec& spec, const BuildPOptions& opt = {}) {
  return build_P(spec, atomic_decompositions(spec), opt);
}

// Rank of Pi^sigma = Q^sigma P via the numeric rank of the projected basis.
inline std::vector<Vector> symmetry_restricted_basis(const CutoffGroundBasis& P,
                                                     const CharacterProjection& q,
                                                     double rank_tol = 1e-8) {
  std::vector<Vector> out;
  for (const Vector& b : P.basis()) {
    Vector v = q(b);
    for (const Vector& u : out) v -= u.dot(v) * u;
    double nrm = v.norm();
    if (nrm > rank_tol) out.push_back(v / nrm);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feshbach-Schur map
// ---------------------------------------------------------------------------

struct FeshbachResult {
  double lambda = 0.0;
  Matrix php;   // P H P on the span basis
  Matrix u;     // coupling through the complement at lambda
  Matrix f;     // php - u
  double hbot_bottom = 0.0;   // measured bottom of the complement operator
  double margin = 0.0;        // hbot_bottom - lambda
  double max_cg_residual = 0.0;
  int cg_iterations = 0;

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(f);
    return es.eigenvalues()[0];
  }

  Vector min_eigenvector() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(f);
    return es.eigenvectors().col(0);
  }
};

struct FeshbachOptions {
  double cg_tol = 1e-10;
  int cg_max_iter = 50000;
  double margin_floor = 1e-9;  // relative to operator scale
  std::uint64_t seed = 0;
};

// Lowest eigenvalue of the complement block P_perp H P_perp on Ran(P_perp).
inline EigenPair complement_bottom(const LinearOperator& H, const std::vector<Vector>& pbasis,
                                   double tol = 1e-9, std::uint64_t seed = 0,
                                   const CharacterProjection* symmetry = nullptr) {
  LinearOperator A = H;
  if (symmetry) {
    LinearOperator inner = H;
    A = LinearOperator{H.dim, [inner, symmetry](const Vector& x, Vector& y) {
                         Vector qx = (*symmetry)(x);
                         Vector hqx(qx.size());
                         inner.apply(qx, hqx);
                         y = (*symmetry)(hqx);
                       }};
  }
  EigenPair p = detail::lanczos_lowest(A, pbasis, seed + 17, tol, 200, 80);
  for (const Vector& b : pbasis) {
    double leak = std::abs(b.dot(p.vector));
    if (leak > 1e-8)
      throw Error(ErrorCode::deflation_failure,
                  "complement eigenvector leaks into Ran P by " + std::to_string(leak));
  }
  return p;
}

constexpr Eigen::Index feshbach_dense_dim = 600;

namespace detail {

// Orthonormal basis of the complement of span(pbasis), dense route.
inline Matrix complement_basis(const std::vector<Vector>& pbasis, Eigen::Index n) {
  const int k = static_cast<int>(pbasis.size());
  Matrix b(n, k);
  for (int j = 0; j < k; ++j) b.col(j) = pbasis[j];
  Eigen::HouseholderQR<Matrix> qr(b);
  Matrix q = qr.householderQ();
  return q.rightCols(n - k);
}

}  // namespace detail

inline FeshbachResult feshbach_map(const ManyBodyOperator& H, const std::vector<Vector>& pbasis,
                                   double lambda, const FeshbachOptions& opt = {},
                                   std::optional<double> known_bottom = std::nullopt) {
  const int k = static_cast<int>(pbasis.size());
  if (k == 0) throw Error(ErrorCode::invalid_basis, "empty projection basis");
  LinearOperator Hop = H.op();

  FeshbachResult out;
  out.lambda = lambda;

  if (H.dim() <= feshbach_dense_dim) {
    // dense route: exact complement block, direct solves
    Matrix hd(H.matrix);
    Matrix bp(H.dim(), k);
    for (int j = 0; j < k; ++j) bp.col(j) = pbasis[j];
    out.php = bp.transpose() * hd * bp;
    out.php = 0.5 * (out.php + out.php.transpose()).eval();
    Matrix c = detail::complement_basis(pbasis, H.dim());
    if (c.cols() == 0) {
      out.hbot_bottom = std::numeric_limits<double>::max();
      out.margin = out.hbot_bottom;
      out.u = Matrix::Zero(k, k);
      out.f = out.php;
      return out;
    }
    Matrix hbot = c.transpose() * hd * c;
    hbot = 0.5 * (hbot + hbot.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(hbot);
    out.hbot_bottom = es.eigenvalues()[0];
    out.margin = out.hbot_bottom - lambda;
    const double scale = std::max(1.0, std::abs(out.hbot_bottom));
    if (out.margin <= opt.margin_floor * scale)
      throw Error(ErrorCode::not_invertible,
                  "complement operator not safely invertible at lambda = " +
                      std::to_string(lambda) + " (margin " + std::to_string(out.margin) + ")");
    Matrix rhs = c.transpose() * (hd * bp);
    Matrix shifted = hbot - lambda * Matrix::Identity(hbot.rows(), hbot.cols());
    Matrix sol = shifted.llt().solve(rhs);
    out.u = rhs.transpose() * sol;
    out.u = 0.5 * (out.u + out.u.transpose()).eval();
    out.f = out.php - out.u;
    return out;
  }

  out.hbot_bottom = known_bottom ? *known_bottom
                                 : complement_bottom(Hop, pbasis, 1e-8, opt.seed).value;
  out.margin = out.hbot_bottom - lambda;
  const double scale = std::max(1.0, std::abs(out.hbot_bottom));
  if (out.margin <= opt.margin_floor * scale)
    throw Error(ErrorCode::not_invertible,
                "complement operator not safely invertible at lambda = " + std::to_string(lambda) +
                    " (margin " + std::to_string(out.margin) + ")");

  out.php.resize(k, k);
  std::vector<Vector> hb(k), w(k);
  for (int j = 0; j < k; ++j) {
    hb[j] = Hop(pbasis[j]);
    for (int i = 0; i < k; ++i) out.php(i, j) = pbasis[i].dot(hb[j]);
  }
  out.php = 0.5 * (out.php + out.php.transpose()).eval();

  // (H_perp - lambda) u_j = P_perp H b_j, solved with deflated cg; the
  // operator stays positive definite inside the margin window.
  LinearOperator shifted{Hop.dim, [&](const Vector& x, Vector& y) {
                           Hop.apply(x, y);
                           y -= lambda * x;
                         }};
  out.u.resize(k, k);
  CgOptions cgo;
  cgo.tol = opt.cg_tol;
  cgo.max_iter = opt.cg_max_iter;
  std::vector<Vector> u(k);
  for (int j = 0; j < k; ++j) {
    w[j] = hb[j];
    orthogonalize_against(w[j], pbasis);
    CgResult r = cg_solve(shifted, w[j], pbasis, cgo);
    u[j] = std::move(r.x);
    out.max_cg_residual = std::max(out.max_cg_residual, r.residual);
    out.cg_iterations += r.iterations;
  }
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) out.u(i, j) = w[i].dot(u[j]);
  out.u = 0.5 * (out.u + out.u.transpose()).eval();
  out.f = out.php - out.u;
  return out;
}

struct FixedPointResult {
  double energy = 0.0;
  Vector eigenvector;
  double fixed_point_residual = 0.0;
  double eigen_residual = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // lambda iterates
  FeshbachResult last_map;
};

struct FixedPointOptions {
  FeshbachOptions map;
  double tol = 1e-12;
  int max_iter = 60;
  double validate_tol = 1e-7;
};

// Self-consistent lowest eigenvalue of the Feshbach map. The map is
// decreasing in lambda, so a sign change of g(lambda) - lambda brackets the
// fixed point; damped iteration plus bisection refinement is robust even
// when the plain iteration over-shoots.
inline FixedPointResult solve_fixed_point(const ManyBodyOperator& H,
                                          const std::vector<Vector>& pbasis, double lambda0,
                                          const FixedPointOptions& opt = {}) {
  FixedPointResult out;
  const bool dense = H.dim() <= feshbach_dense_dim;
  double bottom;
  if (dense) {
    FeshbachResult first = feshbach_map(H, pbasis, lambda0, opt.map);
    bottom = first.hbot_bottom;
  } else {
    bottom = complement_bottom(H.op(), pbasis, 1e-8, opt.map.seed).value;
  }
  const double scale = std::max(1.0, std::abs(bottom));
  if (lambda0 >= bottom)
    throw Error(ErrorCode::not_invertible, "start energy above the complement bottom");
  const double window_edge = bottom - 10.0 * opt.map.margin_floor * scale;

  auto g = [&](double lam) {
    FeshbachResult r = feshbach_map(H, pbasis, lam, opt.map, bottom);
    out.last_map = std::move(r);
    return out.last_map.min_eigenvalue();
  };

  double lam = lambda0;
  double lo = std::numeric_limits<double>::quiet_NaN(), phi_lo = 0.0;
  double hi = std::numeric_limits<double>::quiet_NaN(), phi_hi = 0.0;
  double prev_step = 0.0;
  int last_side = 0;  // +1: lower bracket moved last, -1: upper moved last
  for (int it = 0; it < opt.max_iter; ++it) {
    ++out.iterations;
    double glam = g(lam);
    out.trace.push_back(lam);
    double step = glam - lam;  // g is nonincreasing, so this changes sign once
    if (step > 0) {
      if (std::isnan(lo) || lam > lo) {
        lo = lam;
        phi_lo = step;
      }
      if (last_side == 1) phi_hi *= 0.5;  // Illinois: undercut the stagnant end
      last_side = 1;
    } else {
      if (std::isnan(hi) || lam < hi) {
        hi = lam;
        phi_hi = step;
      }
      if (last_side == -1) phi_lo *= 0.5;
      last_side = -1;
    }
    out.energy = lam;
    out.fixed_point_residual = std::abs(step);
    if (std::abs(step) <= opt.tol * scale) break;
    double next;
    if (!std::isnan(lo) && !std::isnan(hi)) {
      if (hi - lo <= 64.0 * std::numeric_limits<double>::epsilon() * scale) {
        // the fixed point is pinned to machine resolution; for steep maps
        // the map residual cannot shrink further than the bracket allows
        out.energy = 0.5 * (lo + hi);
        out.fixed_point_residual = hi - lo;
        break;
      }
      // bracketed: weighted secant with the Illinois anti-stagnation scaling
      next = lo - phi_lo * (hi - lo) / (phi_hi - phi_lo);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    } else {
      next = glam;
      if (prev_step != 0.0 && step * prev_step < 0.0) next = lam + 0.5 * step;  // damp oscillation
      if (next >= window_edge) {
        // pull the iterate back inside the invertibility window
        next = 0.5 * (lam + window_edge);
        if (window_edge - lam <= opt.tol * scale)
          throw Error(ErrorCode::window_exit,
                      "no fixed point inside the invertibility window below " +
                          std::to_string(bottom));
      }
    }
    prev_step = step;
    lam = next;
  }
  if (out.fixed_point_residual > 1e-10 * scale)
    throw Error(ErrorCode::convergence_failure,
                "fixed point stalled with residual " + std::to_string(out.fixed_point_residual));

  // reconstruct the eigenvector through the complement
  Vector phi_p = out.last_map.min_eigenvector();
  Vector p = Vector::Zero(H.dim());
  for (int i = 0; i < static_cast<int>(pbasis.size()); ++i) p += phi_p[i] * pbasis[i];
  LinearOperator Hop = H.op();
  Vector hp = Hop(p);
  orthogonalize_against(hp, pbasis);
  Vector corr;
  if (dense) {
    Matrix hd(H.matrix);
    Matrix c = detail::complement_basis(pbasis, H.dim());
    Matrix hbot = c.transpose() * hd * c;
    hbot = 0.5 * (hbot + hbot.transpose()).eval();
    Matrix shifted = hbot - out.energy * Matrix::Identity(hbot.rows(), hbot.cols());
    corr = c * shifted.llt().solve(Vector(c.transpose() * hp));
  } else {
    LinearOperator shifted{Hop.dim, [&](const Vector& x, Vector& y) {
                             Hop.apply(x, y);
                             y -= out.energy * x;
                           }};
    CgOptions cgo;
    cgo.tol = opt.map.cg_tol;
    cgo.max_iter = opt.map.cg_max_iter;
    corr = cg_solve(shifted, hp, pbasis, cgo).x;
  }
  Vector psi = p - corr;
  psi.normalize();
  out.eigenvector = psi;
  out.eigen_residual = (Hop(psi) - out.energy * psi).norm();
  if (out.eigen_residual > opt.validate_tol)
    throw Error(ErrorCode::convergence_failure,
                "reconstructed eigenvector residual " + std::to_string(out.eigen_residual));
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics on P H P
// ---------------------------------------------------------------------------

struct PhpBlockReport {
  Decomposition a;
  double diagonal = 0.0;             // mean <psi, I_a psi> over the block
  double predicted_coulomb_tail = 0.0;  // sum of q_i q_j e^2 / |y_ij| over cluster pairs
  bool ionic = false;
};

struct PhpReport {
  double php_deviation_norm = 0.0;  // || P H P - Einf P || on the span
  double e_infinity = 0.0;
  std::vector<PhpBlockReport> blocks;
};

inline PhpReport php_diagnostics(const SystemSpec& spec, const ManyBodyOperator& H,
                                 const CutoffGroundBasis& P) {
  PhpReport rep;
  rep.e_infinity = P.e_infinity;
  auto basis = P.basis();
  const int k = static_cast<int>(basis.size());
  Matrix php(k, k);
  LinearOperator Hop = H.op();
  for (int j = 0; j < k; ++j) {
    Vector hb = Hop(basis[j]);
    for (int i = 0; i < k; ++i) php(i, j) = basis[i].dot(hb);
  }
  Matrix dev = php - rep.e_infinity * Matrix::Identity(k, k);
  rep.php_deviation_norm = dev.operatorNorm();

  std::vector<int> charges;
  for (const auto& nuc : spec.nuclei) charges.push_back(nuc.charge);
  for (const auto& block : P.blocks) {
    PhpBlockReport br;
    br.a = block.a;
    ManyBodyOperator ia = intercluster(spec, block.a);
    double acc = 0.0;
    for (const Vector& v : block.vectors) acc += v.dot(ia.matrix * v);
    br.diagonal = acc / static_cast<double>(block.vectors.size());
    auto sizes = block.a.cluster_sizes();
    for (int i = 0; i < block.a.clusters; ++i)
      for (int j = i + 1; j < block.a.clusters; ++j) {
        double qi = charges[i] - sizes[i], qj = charges[j] - sizes[j];
        br.predicted_coulomb_tail +=
            spec.e2 * qi * qj / std::abs(spec.nuclei[i].position - spec.nuclei[j].position);
      }
    br.ionic = !block.a.is_atomic(charges);
    rep.blocks.push_back(std::move(br));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Boosted resolvent diagnostics
// ---------------------------------------------------------------------------

struct BoostOptions {
  double cg_tol = 1e-10;
  int cg_max_iter = 200000;
  int inverse_iterations = 60;
  std::uint64_t seed = 0;
  double norm_cap = 1e8;
};

struct BoostReport {
  double resolvent_norm = 0.0;   // reciprocal of the smallest singular value
  double smallest_singular = 0.0;
  double grad_inf = 0.0;
  double lap_inf = 0.0;
  double delta_threshold = 0.0;
  double margin = 0.0;
};

// || (e^{-delta phi} P_perp H P_perp e^{delta phi} - E)^{-1} || estimated by
// inverse iteration on the normal operator; phi is a diagonal weight on the
// tensor grid with bounded discrete first and second differences.
inline BoostReport boosted_resolvent_norm(const ManyBodyOperator& H,
                                          const CutoffGroundBasis& P, const Vector& phi,
                                          double delta, double energy,
                                          const BoostOptions& opt = {}) {
  const TensorSpace space = H.space;
  const double h = H.grid_spacing;
  BoostReport rep;

  // discrete derivative bounds of the weight
  std::vector<int> c, d;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    space.decode(i, c);
    for (int e = 0; e < space.electrons; ++e) {
      if (c[e] + 1 >= space.points) continue;
      d = c;
      d[e] += 1;
      double up = phi[space.encode(d)];
      rep.grad_inf = std::max(rep.grad_inf, std::abs(up - phi[i]) / h);
      if (c[e] > 0) {
        d[e] -= 2;
        double down = phi[space.encode(d)];
        rep.lap_inf = std::max(rep.lap_inf, std::abs(up - 2 * phi[i] + down) / (h * h));
      }
    }
  }

  auto pbasis = P.basis();
  EigenPair bottom = complement_bottom(H.op(), pbasis, 1e-9, opt.seed);
  rep.margin = bottom.value - energy;
  if (rep.margin <= 0)
    throw Error(ErrorCode::not_invertible, "energy above the complement bottom");

  // perturbation estimate of the boost terms against the spectral margin;
  // the momentum scale of the bound states is of order sqrt(2 |E|)
  const double p_scale = std::sqrt(2.0 * std::max(1.0, std::abs(energy)));
  auto pert = [&](double del) {
    return del * (rep.grad_inf * p_scale + 0.5 * rep.lap_inf + 0.5 * del * rep.grad_inf * rep.grad_inf);
  };
  {
    double lo = 0.0, hi = 1.0;
    while (pert(hi) < rep.margin && hi < 1e6) hi *= 2;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (pert(mid) < rep.margin ? lo : hi) = mid;
    }
    rep.delta_threshold = lo;
  }
  if (delta > rep.delta_threshold)
    throw Error(ErrorCode::boost_too_large,
                "delta " + std::to_string(delta) + " above stability threshold " +
                    std::to_string(rep.delta_threshold));

  if (delta == 0.0) {
    rep.smallest_singular = rep.margin;
    rep.resolvent_norm = 1.0 / rep.margin;
    return rep;
  }

  Vector boost_plus = (delta * phi.array()).exp();
  Vector boost_minus = (-delta * phi.array()).exp();
  LinearOperator Hop = H.op();
  auto apply_A = [&](const Vector& x, Vector& y, bool adjoint) {
    const Vector& bp = adjoint ? boost_minus : boost_plus;
    const Vector& bm = adjoint ? boost_plus : boost_minus;
    Vector w = bp.cwiseProduct(x);
    orthogonalize_against(w, pbasis);
    Vector hw = Hop(w);
    hw -= energy * w;
    orthogonalize_against(hw, pbasis);
    y = bm.cwiseProduct(hw);
  };

  // kernel of A is the boosted image of Ran P; deflate it explicitly
  std::vector<Vector> kernel;
  for (const Vector& b : pbasis) {
    Vector k = boost_minus.cwiseProduct(b);
    for (const Vector& u : kernel) k -= u.dot(k) * u;
    k.normalize();
    kernel.push_back(k);
  }

  LinearOperator normal{Hop.dim, [&](const Vector& x, Vector& y) {
                          Vector ax(x.size());
                          apply_A(x, ax, false);
                          apply_A(ax, y, true);
                        }};

  // inverse iteration in Krylov form: a short orthogonal basis of the
  // inverse normal operator handles clustered smallest singular values
  CgOptions cgo;
  cgo.tol = opt.cg_tol;
  cgo.max_iter = opt.cg_max_iter;
  Vector q = random_vector(Hop.dim, opt.seed + 23);
  orthogonalize_against(q, kernel);
  q.normalize();
  std::vector<Vector> basis{q};
  std::vector<double> alpha, beta;
  double lam_prev = 0.0;
  for (int it = 0; it < opt.inverse_iterations; ++it) {
    CgResult r = cg_solve(normal, basis[it], kernel, cgo);
    Vector w = r.x;
    if (w.norm() > opt.norm_cap * opt.norm_cap)
      throw Error(ErrorCode::boost_too_large, "inverse iteration diverged");
    double a = basis[it].dot(w);
    alpha.push_back(a);
    w -= a * basis[it];
    if (it > 0) w -= beta[it - 1] * basis[it - 1];
    orthogonalize_against(w, kernel);
    orthogonalize_against(w, basis);
    double b = w.norm();
    // largest eigenvalue of the tridiagonal section = 1 / sigma_min^2
    const int m = static_cast<int>(alpha.size());
    Eigen::Map<const Vector> ad(alpha.data(), m);
    Vector bd(std::max(m - 1, 0));
    for (int i = 0; i + 1 < m; ++i) bd[i] = beta[i];
    Eigen::SelfAdjointEigenSolver<Matrix> es;
    es.computeFromTridiagonal(ad, bd, Eigen::EigenvaluesOnly);
    double lam = es.eigenvalues()[m - 1];
    if (it > 2 && std::abs(lam - lam_prev) <= 1e-10 * lam) {
      lam_prev = lam;
      break;
    }
    lam_prev = lam;
    if (b < 1e-12) break;
    beta.push_back(b);
    basis.push_back(w / b);
  }
  if (lam_prev <= 0)
    throw Error(ErrorCode::boost_too_large, "inverse iteration failed to resolve the margin");
  rep.smallest_singular = 1.0 / std::sqrt(lam_prev);
  if (1.0 / rep.smallest_singular > opt.norm_cap)
    throw Error(ErrorCode::boost_too_large, "resolvent norm estimate exceeded cap");
  rep.resolvent_norm = 1.0 / rep.smallest_singular;
  return rep;
}

}  // namespace vdwlab
