#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <vector>

#include "vdwlab/errors.hpp"
#include "vdwlab/feshbach.hpp"
#include "vdwlab/lattice.hpp"
#include "vdwlab/linalg.hpp"
#include "vdwlab/manybody.hpp"

namespace vdwlab {

// Partition of unity over decompositions: J_a supported where every electron
// keeps distance ~R from all foreign nuclei, with sum_a J_a^2 = 1 pointwise.
struct PartitionOfUnity {
  struct Member {
    Decomposition a;
    Vector values;  // diagonal on the tensor grid
  };
  std::vector<Member> members;
  TensorSpace space;
  double scale_R = 0.0;
  double grid_spacing = 0.0;
  double gradient_bound_C = 0.0;  // measured sup |DJ| * R

  double sum_sq_defect() const {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < members.front().values.size(); ++i) {
      double s = 0.0;
      for (const auto& m : members) s += m.values[i] * m.values[i];
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }
};

struct PartitionOptions {
  double inner_fraction = 0.2;   // profile reaches 0 below this distance / R
  double outer_fraction = 0.4;   // profile reaches 1 beyond this distance / R
  std::size_t truncate_above = 64;  // keep near-atomic decompositions when |A| explodes
};

namespace detail {

inline double foreign_profile(double dist, double R, const PartitionOptions& opt) {
  return smooth_step((dist - opt.inner_fraction * R) / ((opt.outer_fraction - opt.inner_fraction) * R));
}

}  // namespace detail

inline std::vector<Decomposition> near_atomic_subset(const SystemSpec& spec,
                                                     std::vector<Decomposition> all,
                                                     std::size_t cap) {
  if (all.size() <= cap) return all;
  std::vector<int> charges;
  for (const auto& nuc : spec.nuclei) charges.push_back(nuc.charge);
  std::vector<Decomposition> kept;
  for (const auto& a : all) {
    int transfer = 0;
    auto sizes = a.cluster_sizes();
    for (int j = 0; j < a.clusters; ++j) transfer += std::abs(sizes[j] - charges[j]);
    if (transfer <= 2) kept.push_back(a);
  }
  return kept;
}

inline PartitionOfUnity build_partition(const SystemSpec& spec,
                                        std::vector<Decomposition> decomps, double R,
                                        const PartitionOptions& opt = {}) {
  spec.validate();
  const double h = spec.grid.spacing();
  if (h > 0.05 * R)
    throw Error(ErrorCode::resolution, "grid spacing " + std::to_string(h) +
                                           " too coarse for mollifier scale " + std::to_string(0.1 * R));
  decomps = near_atomic_subset(spec, std::move(decomps), opt.truncate_above);
  const TensorSpace space = spec.space();

  PartitionOfUnity part;
  part.space = space;
  part.scale_R = R;
  part.grid_spacing = h;

  // F_a factorizes over electrons: product over foreign nuclei of a radial
  // ramp in the distance to that nucleus.
  std::vector<Vector> raw;
  for (const auto& a : decomps) {
    Matrix per_electron(space.points, spec.electron_count);
    for (int e = 0; e < spec.electron_count; ++e)
      for (int i = 0; i < space.points; ++i) {
        double f = 1.0;
        for (int j = 0; j < spec.nuclei_count(); ++j) {
          if (a.assign[e] == j) continue;
          f *= detail::foreign_profile(std::abs(spec.grid.point(i) - spec.nuclei[j].position), R, opt);
        }
        per_electron(i, e) = f;
      }
    Vector fa(space.dim());
    std::vector<int> c;
    for (Eigen::Index i = 0; i < fa.size(); ++i) {
      space.decode(i, c);
      double prod = 1.0;
      for (int e = 0; e < spec.electron_count; ++e) prod *= per_electron(c[e], e);
      fa[i] = prod;
    }
    raw.push_back(std::move(fa));
  }

  Vector norm = Vector::Zero(space.dim());
  for (const Vector& f : raw) norm += f.cwiseProduct(f);
  for (Eigen::Index i = 0; i < norm.size(); ++i) {
    if (norm[i] <= 0.0)
      throw Error(ErrorCode::geometry, "partition does not cover the grid");
    norm[i] = std::sqrt(norm[i]);
  }
  for (std::size_t k = 0; k < raw.size(); ++k) {
    PartitionOfUnity::Member m;
    m.a = decomps[k];
    m.values = raw[k].cwiseQuotient(norm);
    part.members.push_back(std::move(m));
  }

  // measured gradient bound sup |DJ| <= C / R
  double grad = 0.0;
  std::vector<int> c, d;
  for (const auto& m : part.members)
    for (Eigen::Index i = 0; i < m.values.size(); ++i) {
      space.decode(i, c);
      for (int e = 0; e < spec.electron_count; ++e) {
        if (c[e] + 1 >= space.points) continue;
        d = c;
        d[e] += 1;
        grad = std::max(grad, std::abs(m.values[space.encode(d)] - m.values[i]) / h);
      }
    }
  part.gradient_bound_C = grad * R;
  return part;
}

// Per-axis profiles through the grid for inspection: every member sampled
// along one electron axis with the other electrons held at the grid middle.
inline void write_partition_csv(const PartitionOfUnity& part, const Grid& grid, int axis,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
  out << "x";
  for (std::size_t k = 0; k < part.members.size(); ++k) out << ",J" << k;
  out << "\n";
  out << std::setprecision(12) << std::scientific;
  std::vector<int> c(part.space.electrons, part.space.points / 2);
  for (int i = 0; i < part.space.points; ++i) {
    c[axis] = i;
    Eigen::Index idx = part.space.encode(c);
    out << grid.point(i);
    for (const auto& m : part.members) out << "," << m.values[idx];
    out << "\n";
  }
}

// Discrete localization correction: the bond-weighted operator B with
//   H = sum_a J_a H J_a - B
// exactly for the 3-point kinetic stencil. Off-diagonal entries along axis e
// are sum_a (J_a(I+e) - J_a(I))^2 / (4 h^2); B plays the |grad J|^2 role.
struct ImsReport {
  double residual_norm = 0.0;      // power-iteration norm of H - sum JHJ + B
  double operator_scale = 0.0;     // norm estimate of H
  double localization_inf = 0.0;   // sup over points of sum_a |DJ_a|^2
  double gradient_bound_C = 0.0;
};

namespace detail {

// y += B x with the bond weights from the partition.
inline void apply_bond_term(const PartitionOfUnity& part, const Vector& x, Vector& y) {
  const TensorSpace& space = part.space;
  const double inv4h2 = 1.0 / (4.0 * part.grid_spacing * part.grid_spacing);
  std::vector<int> c, d;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    space.decode(i, c);
    for (int e = 0; e < space.electrons; ++e) {
      if (c[e] + 1 >= space.points) continue;
      d = c;
      d[e] += 1;
      Eigen::Index up = space.encode(d);
      double w = 0.0;
      for (const auto& m : part.members) {
        double diff = m.values[up] - m.values[i];
        w += diff * diff;
      }
      w *= inv4h2;
      y[i] += w * x[up];
      y[up] += w * x[i];
    }
  }
}

}  // namespace detail

inline ImsReport ims_residual(const ManyBodyOperator& H, const PartitionOfUnity& part,
                              std::uint64_t seed = 0) {
  if (H.dim() != part.members.front().values.size())
    throw Error(ErrorCode::validation, "partition grid does not match the operator");
  LinearOperator Hop = H.op();
  LinearOperator resid{Hop.dim, [&](const Vector& x, Vector& y) {
                         Hop.apply(x, y);  // y = H x
                         Vector tmp(x.size()), tmp2(x.size());
                         for (const auto& m : part.members) {
                           tmp = m.values.cwiseProduct(x);
                           Hop.apply(tmp, tmp2);
                           y -= m.values.cwiseProduct(tmp2);
                         }
                         detail::apply_bond_term(part, x, y);
                       }};
  ImsReport rep;
  rep.residual_norm = operator_norm_estimate(resid, seed + 3, 40);
  rep.operator_scale = operator_norm_estimate(Hop, seed + 5, 40);
  rep.gradient_bound_C = part.gradient_bound_C;

  const TensorSpace& space = part.space;
  const double h = part.grid_spacing;
  std::vector<int> c, d;
  for (Eigen::Index i = 0; i < part.members.front().values.size(); ++i) {
    space.decode(i, c);
    double acc = 0.0;
    for (int e = 0; e < space.electrons; ++e) {
      if (c[e] + 1 >= space.points) continue;
      d = c;
      d[e] += 1;
      Eigen::Index up = space.encode(d);
      for (const auto& m : part.members) {
        double diff = (m.values[up] - m.values[i]) / h;
        acc += diff * diff;
      }
    }
    rep.localization_inf = std::max(rep.localization_inf, acc);
  }
  return rep;
}

// Deflated bottom of the complement block against the lower bound
// Einf + gamma0 / 2; reports fail (not error) when the bound is violated.
struct StabilityReport {
  double measured_bottom = 0.0;
  double predicted_floor = 0.0;  // Einf + gamma0 / 2
  double e_infinity = 0.0;
  double gamma0 = 0.0;
  bool passed = false;
};

inline StabilityReport stability_bound(const ManyBodyOperator& H, const CutoffGroundBasis& P,
                                       double gamma0, std::uint64_t seed = 0,
                                       const CharacterProjection* symmetry = nullptr) {
  StabilityReport rep;
  rep.e_infinity = P.e_infinity;
  rep.gamma0 = gamma0;
  rep.predicted_floor = P.e_infinity + 0.5 * gamma0;
  std::vector<Vector> basis =
      symmetry ? symmetry_restricted_basis(P, *symmetry) : P.basis();
  EigenPair bottom = complement_bottom(H.op(), basis, 1e-9, seed, symmetry);
  rep.measured_bottom = bottom.value;
  rep.passed = rep.measured_bottom >= rep.predicted_floor;
  return rep;
}

}  // namespace vdwlab
