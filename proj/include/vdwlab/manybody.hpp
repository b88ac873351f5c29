#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vdwlab/errors.hpp"
#include "vdwlab/lattice.hpp"
#include "vdwlab/linalg.hpp"
#include "vdwlab/symmetry.hpp"

namespace vdwlab {

struct Nucleus {
  double position = 0.0;
  int charge = 1;
  double mass = 1836.15267;     // nuclear mass, used only beyond clamped-nuclei work
  double softening = 0.0;       // per-nucleus kernel scale; 0 = inherit potential
};

enum class SystemMode { manybody_1d, radial_3d };

// Interaction content of the assembled operator. full_coulomb carries every
// pair term with the shared kernel; dipole_pair keeps the cluster
// hamiltonians and couples one electron per nucleus through the leading
// product term -2 e^2 z z' / R^3 of the pair kernel.
enum class CouplingModel { full_coulomb, dipole_pair };

struct SystemSpec {
  std::vector<Nucleus> nuclei;
  int electron_count = 0;
  PotentialSpec potential;
  double e2 = 1.0;  // coupling constant (electron charge squared)
  SystemMode mode = SystemMode::manybody_1d;
  CouplingModel coupling = CouplingModel::full_coulomb;
  Grid grid;
  double ee_softening = 0.0;  // electron-electron kernel scale; 0 = inherit
  double nn_softening = 0.0;  // nucleus-nucleus kernel scale; 0 = inherit
  std::int64_t nonzero_cap = 20000000;

  int nuclei_count() const { return static_cast<int>(nuclei.size()); }

  bool neutral() const {
    int z = 0;
    for (const auto& nuc : nuclei) z += nuc.charge;
    return z == electron_count;
  }

  double nucleus_softening(int j) const {
    double s = nuclei[j].softening;
    return s > 0.0 ? s : potential.softening;
  }

  double kernel_with(double t, double soft) const {
    if (potential.kind == PotentialKind::soft_coulomb)
      return 1.0 / std::sqrt(t * t + soft * soft);
    return potential.kernel(t);
  }

  double attraction_kernel(double t, int j) const { return kernel_with(t, nucleus_softening(j)); }
  double ee_kernel(double t) const {
    return kernel_with(t, ee_softening > 0.0 ? ee_softening : potential.softening);
  }
  double nn_kernel(double t) const {
    return kernel_with(t, nn_softening > 0.0 ? nn_softening : potential.softening);
  }

  double nuclear_repulsion() const {
    double c = 0.0;
    for (std::size_t i = 0; i < nuclei.size(); ++i)
      for (std::size_t j = i + 1; j < nuclei.size(); ++j)
        c += e2 * nuclei[i].charge * nuclei[j].charge *
             nn_kernel(nuclei[i].position - nuclei[j].position);
    return c;
  }

  TensorSpace space() const { return TensorSpace{grid.points_per_axis, electron_count}; }

  void validate() const {
    if (mode == SystemMode::radial_3d)
      throw Error(ErrorCode::invalid_system,
                  "radial systems are handled by the radial machinery, not tensor assembly");
    if (electron_count < 1) throw Error(ErrorCode::invalid_system, "need at least one electron");
    if (nuclei.empty()) throw Error(ErrorCode::invalid_system, "need at least one nucleus");
    for (const auto& nuc : nuclei)
      if (nuc.charge < 1) throw Error(ErrorCode::invalid_system, "nuclear charges are positive integers");
    for (std::size_t i = 0; i < nuclei.size(); ++i)
      for (std::size_t j = i + 1; j < nuclei.size(); ++j)
        if (nuclei[i].position == nuclei[j].position)
          throw Error(ErrorCode::invalid_system, "coincident nuclei");
    potential.validate();
    if (coupling == CouplingModel::dipole_pair) {
      if (electron_count != nuclei_count())
        throw Error(ErrorCode::invalid_system, "dipole_pair couples one electron per nucleus");
      for (const auto& nuc : nuclei)
        if (nuc.charge != 1)
          throw Error(ErrorCode::invalid_system, "dipole_pair requires unit charges");
    }
  }

  void check_budget() const {
    Eigen::Index dim = space().dim();
    std::int64_t nnz = static_cast<std::int64_t>(dim) * (1 + 2 * electron_count);
    if (nnz > nonzero_cap)
      throw Error(ErrorCode::resource_limit,
                  "estimated " + std::to_string(nnz) + " nonzeros exceeds cap " +
                      std::to_string(nonzero_cap));
  }
};

// Hermitian operator on the tensor-product grid space.
struct ManyBodyOperator {
  SparseMatrix matrix;
  TensorSpace space;
  double grid_spacing = 0.0;
  double nuclear_constant = 0.0;
  std::string terms;  // which pieces were assembled

  Eigen::Index dim() const { return matrix.rows(); }

  LinearOperator op() const { return LinearOperator::from_sparse(matrix); }
};

namespace detail {

inline SparseMatrix kinetic_1d(int n, double h) {
  SparseMatrix t(n, n);
  std::vector<Eigen::Triplet<double>> trip;
  const double diag = 1.0 / (h * h), off = -0.5 / (h * h);
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(i, i, diag);
    if (i + 1 < n) {
      trip.emplace_back(i, i + 1, off);
      trip.emplace_back(i + 1, i, off);
    }
  }
  t.setFromTriplets(trip.begin(), trip.end());
  return t;
}

inline SparseMatrix identity(Eigen::Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

// A acting on electron slot e of an N-fold tensor space (slot 0 slowest).
inline SparseMatrix lift_to_slot(const SparseMatrix& a, int slot, const TensorSpace& space) {
  Eigen::Index left = 1, right = 1;
  for (int e = 0; e < slot; ++e) left *= space.points;
  for (int e = slot + 1; e < space.electrons; ++e) right *= space.points;
  SparseMatrix out(left * a.rows() * right, left * a.rows() * right);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(a.nonZeros()) * left * right);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it)
      for (Eigen::Index l = 0; l < left; ++l)
        for (Eigen::Index r = 0; r < right; ++r) {
          Eigen::Index row = (l * a.rows() + it.row()) * right + r;
          Eigen::Index col = (l * a.cols() + it.col()) * right + r;
          trip.emplace_back(row, col, it.value());
        }
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

inline SparseMatrix diagonal_matrix(const Vector& d) {
  SparseMatrix m(d.size(), d.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] != 0.0) trip.emplace_back(i, i, d[i]);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

// Diagonal of a pair potential v(x_e - x_f) over the tensor grid.
template <typename Kernel>
Vector pair_diagonal(const TensorSpace& space, const Grid& grid, int e, int f, Kernel&& v) {
  Vector d(space.dim());
  std::vector<int> c;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    space.decode(i, c);
    d[i] = v(grid.point(c[e]) - grid.point(c[f]));
  }
  return d;
}

template <typename Fn>
Vector single_diagonal(const TensorSpace& space, const Grid& grid, int e, Fn&& fn) {
  Vector d(space.dim());
  std::vector<int> c;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    space.decode(i, c);
    d[i] = fn(grid.point(c[e]));
  }
  return d;
}

}  // namespace detail

// One-electron hamiltonian of the atom/ion sitting at nucleus j.
inline SparseMatrix single_particle_hamiltonian(const SystemSpec& spec, int j) {
  const Grid& g = spec.grid;
  SparseMatrix h = detail::kinetic_1d(g.points_per_axis, g.spacing());
  Vector V(g.points_per_axis);
  for (int i = 0; i < g.points_per_axis; ++i)
    V[i] = -spec.e2 * spec.nuclei[j].charge *
           spec.attraction_kernel(g.point(i) - spec.nuclei[j].position, j);
  return h + detail::diagonal_matrix(V);
}

inline Decomposition identity_decomposition(const SystemSpec& spec) {
  Decomposition a;
  a.clusters = spec.nuclei_count();
  a.assign.resize(spec.electron_count);
  for (int e = 0; e < spec.electron_count; ++e) a.assign[e] = e % spec.nuclei_count();
  return a;
}

inline ManyBodyOperator assemble_cluster(const SystemSpec& spec, const Decomposition& a) {
  spec.validate();
  spec.check_budget();
  if (a.electrons() != spec.electron_count || a.clusters != spec.nuclei_count())
    throw Error(ErrorCode::invalid_decomposition, "decomposition does not match the system");
  for (int c : a.assign)
    if (c < 0 || c >= spec.nuclei_count())
      throw Error(ErrorCode::invalid_decomposition, "cluster label out of range");
  if (spec.coupling == CouplingModel::dipole_pair && !(a == identity_decomposition(spec)))
    throw Error(ErrorCode::invalid_decomposition,
                "dipole_pair model is defined for its reference assignment only");

  const TensorSpace space = spec.space();
  ManyBodyOperator out;
  out.space = space;
  out.grid_spacing = spec.grid.spacing();
  out.terms = "kinetic+own_attraction+intra_repulsion";
  SparseMatrix kin1 = detail::kinetic_1d(spec.grid.points_per_axis, spec.grid.spacing());

  SparseMatrix H(space.dim(), space.dim());
  for (int e = 0; e < spec.electron_count; ++e) H += detail::lift_to_slot(kin1, e, space);

  Vector diag = Vector::Zero(space.dim());
  for (int e = 0; e < spec.electron_count; ++e) {
    const int j = a.assign[e];
    diag += detail::single_diagonal(space, spec.grid, e, [&](double x) {
      return -spec.e2 * spec.nuclei[j].charge * spec.attraction_kernel(x - spec.nuclei[j].position, j);
    });
  }
  for (int e = 0; e < spec.electron_count; ++e)
    for (int f = e + 1; f < spec.electron_count; ++f)
      if (a.assign[e] == a.assign[f])
        diag += detail::pair_diagonal(space, spec.grid, e, f,
                                      [&](double t) { return spec.e2 * spec.ee_kernel(t); });
  H += detail::diagonal_matrix(diag);
  out.matrix = H;
  return out;
}

inline ManyBodyOperator intercluster(const SystemSpec& spec, const Decomposition& a) {
  spec.validate();
  spec.check_budget();
  const TensorSpace space = spec.space();
  ManyBodyOperator out;
  out.space = space;
  out.grid_spacing = spec.grid.spacing();
  out.nuclear_constant = 0.0;

  if (spec.coupling == CouplingModel::dipole_pair) {
    if (!(a == identity_decomposition(spec)))
      throw Error(ErrorCode::invalid_decomposition,
                  "dipole_pair model is defined for its reference assignment only");
    out.terms = "dipole_coupling";
    Vector diag = Vector::Zero(space.dim());
    for (int i = 0; i < spec.nuclei_count(); ++i)
      for (int j = i + 1; j < spec.nuclei_count(); ++j) {
        const double Rij = std::abs(spec.nuclei[i].position - spec.nuclei[j].position);
        const double coeff = -2.0 * spec.e2 / (Rij * Rij * Rij);
        std::vector<int> c;
        Vector term(space.dim());
        for (Eigen::Index idx = 0; idx < term.size(); ++idx) {
          space.decode(idx, c);
          double zi = spec.grid.point(c[i]) - spec.nuclei[i].position;
          double zj = spec.grid.point(c[j]) - spec.nuclei[j].position;
          term[idx] = coeff * zi * zj;
        }
        diag += term;
      }
    out.matrix = detail::diagonal_matrix(diag);
    return out;
  }

  out.terms = "cross_attraction+cross_repulsion+nn_constant";
  Vector diag = Vector::Zero(space.dim());
  for (int e = 0; e < spec.electron_count; ++e)
    for (int j = 0; j < spec.nuclei_count(); ++j) {
      if (a.assign[e] == j) continue;
      diag += detail::single_diagonal(space, spec.grid, e, [&](double x) {
        return -spec.e2 * spec.nuclei[j].charge * spec.attraction_kernel(x - spec.nuclei[j].position, j);
      });
    }
  for (int e = 0; e < spec.electron_count; ++e)
    for (int f = e + 1; f < spec.electron_count; ++f)
      if (a.assign[e] != a.assign[f])
        diag += detail::pair_diagonal(space, spec.grid, e, f,
                                      [&](double t) { return spec.e2 * spec.ee_kernel(t); });
  out.nuclear_constant = spec.nuclear_repulsion();
  diag.array() += out.nuclear_constant;
  out.matrix = detail::diagonal_matrix(diag);
  return out;
}

inline ManyBodyOperator assemble_full(const SystemSpec& spec) {
  spec.validate();
  spec.check_budget();
  Decomposition ref = identity_decomposition(spec);
  ManyBodyOperator ha = assemble_cluster(spec, ref);
  ManyBodyOperator ia = intercluster(spec, ref);
  ManyBodyOperator out;
  out.space = ha.space;
  out.grid_spacing = ha.grid_spacing;
  out.matrix = ha.matrix + ia.matrix;
  out.nuclear_constant = ia.nuclear_constant;
  out.terms = "kinetic+attraction+repulsion+nn_constant";
  return out;
}

// All M^N electron-label assignments.
inline std::vector<Decomposition> enumerate_decompositions(int electrons, int clusters,
                                                           std::int64_t cap = 1 << 20) {
  if (electrons < 1 || clusters < 1)
    throw Error(ErrorCode::invalid_decomposition, "need electrons >= 1 and clusters >= 1");
  double total = std::pow(static_cast<double>(clusters), electrons);
  if (total > static_cast<double>(cap))
    throw Error(ErrorCode::resource_limit, "too many decompositions");
  std::vector<Decomposition> out;
  Decomposition a;
  a.clusters = clusters;
  a.assign.assign(electrons, 0);
  while (true) {
    out.push_back(a);
    int e = electrons - 1;
    while (e >= 0 && a.assign[e] == clusters - 1) a.assign[e--] = 0;
    if (e < 0) break;
    ++a.assign[e];
  }
  return out;
}

inline std::vector<Decomposition> atomic_decompositions(const SystemSpec& spec) {
  std::vector<int> charges;
  for (const auto& nuc : spec.nuclei) charges.push_back(nuc.charge);
  std::vector<Decomposition> out;
  for (const auto& a : enumerate_decompositions(spec.electron_count, spec.nuclei_count()))
    if (a.is_atomic(charges)) out.push_back(a);
  return out;
}

}  // namespace vdwlab
