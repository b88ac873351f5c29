#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "vdwlab/errors.hpp"
#include "vdwlab/linalg.hpp"

namespace vdwlab {

using Partition = std::vector<int>;    // weakly decreasing positive parts
using Permutation = std::vector<int>;  // images: pi[i] = pi(i), 0-based

constexpr int max_symmetric_group = 6;  // factorial guard for character work

// ---------------------------------------------------------------------------
// Partitions, permutations, conjugacy classes
// ---------------------------------------------------------------------------

inline std::vector<Partition> partitions_of(int n) {
  std::vector<Partition> out;
  Partition cur;
  // descending-parts backtracking
  auto rec = [&](auto&& self, int rest, int maxpart) -> void {
    if (rest == 0) {
      out.push_back(cur);
      return;
    }
    for (int p = std::min(rest, maxpart); p >= 1; --p) {
      cur.push_back(p);
      self(self, rest - p, p);
      cur.pop_back();
    }
  };
  rec(rec, n, n);
  return out;
}

inline std::int64_t factorial(int n) {
  std::int64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline int hook_length_dimension(const Partition& lam) {
  int n = std::accumulate(lam.begin(), lam.end(), 0);
  std::int64_t prod = 1;
  const int rows = static_cast<int>(lam.size());
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < lam[i]; ++j) {
      int arm = lam[i] - j - 1;
      int leg = 0;
      for (int k = i + 1; k < rows; ++k)
        if (lam[k] > j) ++leg;
      prod *= (arm + leg + 1);
    }
  return static_cast<int>(factorial(n) / prod);
}

inline Partition cycle_type(const Permutation& pi) {
  const int n = static_cast<int>(pi.size());
  std::vector<bool> seen(n, false);
  Partition type;
  for (int i = 0; i < n; ++i) {
    if (seen[i]) continue;
    int len = 0, j = i;
    while (!seen[j]) {
      seen[j] = true;
      j = pi[j];
      ++len;
    }
    type.push_back(len);
  }
  std::sort(type.rbegin(), type.rend());
  return type;
}

inline Permutation compose(const Permutation& pi, const Permutation& rho) {
  // (pi . rho)(i) = pi(rho(i))
  Permutation out(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) out[i] = pi[rho[i]];
  return out;
}

inline Permutation inverse(const Permutation& pi) {
  Permutation inv(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) inv[pi[i]] = static_cast<int>(i);
  return inv;
}

inline std::vector<Permutation> all_permutations(int n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<Permutation> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline std::int64_t conjugacy_class_size(const Partition& type, int n) {
  std::map<int, int> mult;
  for (int part : type) ++mult[part];
  std::int64_t denom = 1;
  for (auto [k, m] : mult) {
    for (int i = 0; i < m; ++i) denom *= k;
    denom *= factorial(m);
  }
  return factorial(n) / denom;
}

// ---------------------------------------------------------------------------
// Characters (Murnaghan-Nakayama, exact integer arithmetic)
// ---------------------------------------------------------------------------

namespace detail {

// beta-numbers representation: lam_i + (L - 1 - i) for i = 0..L-1, strictly
// decreasing; removing a border strip of length t moves one beta down by t.
inline std::vector<int> beta_numbers(const Partition& lam, int L) {
  std::vector<int> beta(L, 0);
  for (int i = 0; i < L; ++i) {
    int part = i < static_cast<int>(lam.size()) ? lam[i] : 0;
    beta[i] = part + (L - 1 - i);
  }
  return beta;
}

inline std::int64_t mn_character(std::vector<int> beta, std::vector<int> cycles) {
  if (cycles.empty()) return 1;
  int t = cycles.back();
  cycles.pop_back();
  std::int64_t total = 0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    int target = beta[i] - t;
    if (target < 0) continue;
    if (std::find(beta.begin(), beta.end(), target) != beta.end()) continue;
    int height = 0;
    for (int b : beta)
      if (b > target && b < beta[i]) ++height;
    auto next = beta;
    next[i] = target;
    std::sort(next.rbegin(), next.rend());
    std::int64_t sub = mn_character(next, cycles);
    total += (height % 2 == 0) ? sub : -sub;
  }
  return total;
}

}  // namespace detail

inline std::int64_t character_value(const Partition& lam, const Partition& type) {
  int n = std::accumulate(lam.begin(), lam.end(), 0);
  std::vector<int> cycles(type.begin(), type.end());
  std::sort(cycles.begin(), cycles.end());  // peel small cycles last
  return detail::mn_character(detail::beta_numbers(lam, n), cycles);
}

// Young-diagram irrep label with its full character row.
struct SymmetryType {
  Partition diagram;
  int dimension = 0;                       // character at the identity
  std::vector<Partition> class_types;      // conjugacy classes of S_N
  std::vector<std::int64_t> class_sizes;
  std::vector<std::int64_t> characters;    // one per class
  bool two_column = false;                 // admissible for spin-1/2 fermions

  int n() const { return std::accumulate(diagram.begin(), diagram.end(), 0); }

  std::int64_t character(const Partition& type) const {
    for (std::size_t c = 0; c < class_types.size(); ++c)
      if (class_types[c] == type) return characters[c];
    throw Error(ErrorCode::validation, "unknown cycle type");
  }

  std::string name() const {
    std::string s = "(";
    for (std::size_t i = 0; i < diagram.size(); ++i)
      s += (i ? "," : "") + std::to_string(diagram[i]);
    return s + ")";
  }
};

inline std::vector<SymmetryType> irreps(int n) {
  if (n < 1) throw Error(ErrorCode::validation, "need n >= 1");
  if (n > max_symmetric_group)
    throw Error(ErrorCode::resource_limit,
                "character tables capped at N = " + std::to_string(max_symmetric_group));
  auto classes = partitions_of(n);
  std::vector<SymmetryType> out;
  for (const Partition& lam : partitions_of(n)) {
    SymmetryType t;
    t.diagram = lam;
    t.dimension = hook_length_dimension(lam);
    t.class_types = classes;
    for (const Partition& c : classes) {
      t.class_sizes.push_back(conjugacy_class_size(c, n));
      t.characters.push_back(character_value(lam, c));
    }
    t.two_column = std::all_of(lam.begin(), lam.end(), [](int p) { return p <= 2; });
    out.push_back(std::move(t));
  }
  return out;
}

// class index, cycle type, class size, one character column per irrep
inline void write_character_table_csv(const std::vector<SymmetryType>& reps,
                                      const std::string& path) {
  if (reps.empty()) throw Error(ErrorCode::validation, "empty table");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
  out << "class,cycle_type,size";
  for (const auto& r : reps) out << ",chi" << r.name();
  out << "\n";
  for (std::size_t c = 0; c < reps[0].class_types.size(); ++c) {
    out << c << ",";
    for (std::size_t i = 0; i < reps[0].class_types[c].size(); ++i)
      out << (i ? "+" : "") << reps[0].class_types[c][i];
    out << "," << reps[0].class_sizes[c];
    for (const auto& r : reps) out << "," << r.characters[c];
    out << "\n";
  }
}

inline const SymmetryType& trivial_type(const std::vector<SymmetryType>& reps) {
  for (const auto& r : reps)
    if (r.diagram.size() == 1) return r;
  throw Error(ErrorCode::validation, "no one-row type");
}

inline const SymmetryType& sign_type(const std::vector<SymmetryType>& reps) {
  for (const auto& r : reps)
    if (r.dimension == 1 && r.diagram.size() == static_cast<std::size_t>(r.n())) return r;
  throw Error(ErrorCode::validation, "no one-column type");
}

// ---------------------------------------------------------------------------
// Coordinate-permutation action on tensor-product grid vectors
// ---------------------------------------------------------------------------

// N identical one-particle factors of n points each; index i encodes the
// tuple (i_1, ..., i_N) with i_1 slowest, matching Kronecker assembly order.
struct TensorSpace {
  int points = 0;
  int electrons = 0;

  Eigen::Index dim() const {
    Eigen::Index d = 1;
    for (int e = 0; e < electrons; ++e) {
      if (d > (Eigen::Index(1) << 46) / points)
        throw Error(ErrorCode::resource_limit, "tensor space overflow");
      d *= points;
    }
    return d;
  }

  void decode(Eigen::Index idx, std::vector<int>& coord) const {
    coord.resize(electrons);
    for (int e = electrons - 1; e >= 0; --e) {
      coord[e] = static_cast<int>(idx % points);
      idx /= points;
    }
  }

  Eigen::Index encode(const std::vector<int>& coord) const {
    Eigen::Index idx = 0;
    for (int e = 0; e < electrons; ++e) idx = idx * points + coord[e];
    return idx;
  }
};

// Unitary T_pi with (T_pi f)(x_1..x_N) = f evaluated with coordinate slots
// permuted; composition satisfies T_pi T_rho = T_{pi rho}.
struct PermutationAction {
  TensorSpace space;
  Permutation pi;

  void apply(const Vector& in, Vector& out) const {
    out.resize(in.size());
    std::vector<int> c, d(space.electrons);
    for (Eigen::Index i = 0; i < in.size(); ++i) {
      space.decode(i, c);
      for (int k = 0; k < space.electrons; ++k) d[k] = c[pi[k]];
      out[i] = in[space.encode(d)];
    }
  }

  Vector operator()(const Vector& v) const {
    Vector out;
    apply(v, out);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Cluster decompositions of electron labels
// ---------------------------------------------------------------------------

// Assignment of electron labels {0..N-1} to M clusters (possibly empty).
struct Decomposition {
  std::vector<int> assign;  // assign[e] = cluster of electron e
  int clusters = 0;

  int electrons() const { return static_cast<int>(assign.size()); }

  std::vector<std::vector<int>> cluster_members() const {
    std::vector<std::vector<int>> m(clusters);
    for (int e = 0; e < electrons(); ++e) m[assign[e]].push_back(e);
    return m;
  }

  std::vector<int> cluster_sizes() const {
    std::vector<int> s(clusters, 0);
    for (int c : assign) ++s[c];
    return s;
  }

  bool is_atomic(const std::vector<int>& charges) const {
    auto sizes = cluster_sizes();
    for (int j = 0; j < clusters; ++j)
      if (sizes[j] != charges[j]) return false;
    return true;
  }

  // |S(a)| = product of cluster factorials
  std::int64_t stabilizer_order() const {
    std::int64_t o = 1;
    for (int s : cluster_sizes()) o *= factorial(s);
    return o;
  }

  bool operator==(const Decomposition& o) const {
    return clusters == o.clusters && assign == o.assign;
  }
};

inline Decomposition permuted_decomposition(const Permutation& pi, const Decomposition& a) {
  // electron pi(e) joins the cluster e belonged to
  Decomposition b;
  b.clusters = a.clusters;
  b.assign.resize(a.assign.size());
  for (std::size_t e = 0; e < a.assign.size(); ++e) b.assign[pi[e]] = a.assign[e];
  return b;
}

// Elements of S(a): permutations moving labels only within clusters.
inline std::vector<Permutation> stabilizer_elements(const Decomposition& a) {
  auto members = a.cluster_members();
  std::vector<Permutation> out;
  Permutation base(a.electrons());
  std::iota(base.begin(), base.end(), 0);
  out.push_back(base);
  for (const auto& cluster : members) {
    if (cluster.size() < 2) continue;
    std::vector<Permutation> next;
    std::vector<int> perm = cluster;
    std::sort(perm.begin(), perm.end());
    do {
      for (const Permutation& g : out) {
        Permutation h = g;
        for (std::size_t k = 0; k < cluster.size(); ++k) h[cluster[k]] = perm[k];
        next.push_back(h);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    out = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Character-sum projections (matrix-free)
// ---------------------------------------------------------------------------

// Q = sum_g w_g T_g over a list of group elements; covers both the full-group
// type projections and the cluster-stabilizer ones.
struct CharacterProjection {
  TensorSpace space;
  std::vector<Permutation> elements;
  std::vector<double> weights;

  void apply(const Vector& in, Vector& out) const {
    out = Vector::Zero(in.size());
    Vector tmp;
    for (std::size_t g = 0; g < elements.size(); ++g) {
      PermutationAction{space, elements[g]}.apply(in, tmp);
      out += weights[g] * tmp;
    }
  }

  Vector operator()(const Vector& v) const {
    Vector out;
    apply(v, out);
    return out;
  }

  LinearOperator as_operator() const {
    return LinearOperator{space.dim(), [this](const Vector& x, Vector& y) { apply(x, y); }};
  }
};

// Q^sigma = (chi_id / N!) sum_pi chi(pi^-1) T_pi on the N-electron space.
inline CharacterProjection projector(const SymmetryType& sigma, const TensorSpace& space) {
  if (space.electrons != sigma.n())
    throw Error(ErrorCode::validation, "type/space electron count mismatch");
  CharacterProjection q;
  q.space = space;
  const double pref = static_cast<double>(sigma.dimension) / static_cast<double>(factorial(sigma.n()));
  for (const Permutation& pi : all_permutations(space.electrons)) {
    q.elements.push_back(pi);
    q.weights.push_back(pref * static_cast<double>(sigma.character(cycle_type(inverse(pi)))));
  }
  return q;
}

// Induced-type label: one irrep per cluster (trivial for empty/singleton).
struct InducedType {
  std::vector<Partition> cluster_diagrams;  // diagram per cluster, sorted by cluster

  int dimension() const {
    int d = 1;
    for (const Partition& p : cluster_diagrams)
      if (!p.empty()) d *= hook_length_dimension(p);
    return d;
  }

  bool operator==(const InducedType& o) const { return cluster_diagrams == o.cluster_diagrams; }

  std::string name() const {
    std::string s;
    for (std::size_t j = 0; j < cluster_diagrams.size(); ++j) {
      if (j) s += "x";
      s += "(";
      for (std::size_t i = 0; i < cluster_diagrams[j].size(); ++i)
        s += (i ? "," : "") + std::to_string(cluster_diagrams[j][i]);
      s += ")";
    }
    return s;
  }
};

inline std::vector<InducedType> induced_type_candidates(const Decomposition& a) {
  std::vector<std::vector<Partition>> per_cluster;
  for (int s : a.cluster_sizes())
    per_cluster.push_back(s == 0 ? std::vector<Partition>{{}} : partitions_of(s));
  std::vector<InducedType> out{{std::vector<Partition>(a.clusters)}};
  for (int j = 0; j < a.clusters; ++j) {
    std::vector<InducedType> next;
    for (const InducedType& t : out)
      for (const Partition& p : per_cluster[j]) {
        InducedType u = t;
        u.cluster_diagrams[j] = p;
        next.push_back(u);
      }
    out = std::move(next);
  }
  return out;
}

// Character of alpha at g in S(a): product over clusters of the cluster
// cycle-type characters.
inline std::int64_t induced_character(const InducedType& alpha, const Decomposition& a,
                                      const Permutation& g) {
  auto members = a.cluster_members();
  std::int64_t chi = 1;
  for (int j = 0; j < a.clusters; ++j) {
    if (members[j].empty()) continue;
    // cycle type of g restricted to cluster j
    std::vector<int> local(members[j].size());
    std::map<int, int> pos;
    for (std::size_t k = 0; k < members[j].size(); ++k) pos[members[j][k]] = static_cast<int>(k);
    for (std::size_t k = 0; k < members[j].size(); ++k) local[k] = pos.at(g[members[j][k]]);
    chi *= character_value(alpha.cluster_diagrams[j], cycle_type(local));
  }
  return chi;
}

// Q_a^alpha = (chi_id^alpha / |S(a)|) sum_{g in S(a)} chi^alpha(g^-1) T_g.
inline CharacterProjection subgroup_projector(const Decomposition& a, const InducedType& alpha,
                                              const TensorSpace& space) {
  if (static_cast<int>(alpha.cluster_diagrams.size()) != a.clusters)
    throw Error(ErrorCode::invalid_induced_type, "one diagram per cluster required");
  auto sizes = a.cluster_sizes();
  for (int j = 0; j < a.clusters; ++j) {
    int sum = std::accumulate(alpha.cluster_diagrams[j].begin(), alpha.cluster_diagrams[j].end(), 0);
    if (sum != sizes[j])
      throw Error(ErrorCode::invalid_induced_type,
                  "cluster " + std::to_string(j) + " diagram does not match its size");
  }
  CharacterProjection q;
  q.space = space;
  auto elems = stabilizer_elements(a);
  const double pref = static_cast<double>(alpha.dimension()) / static_cast<double>(elems.size());
  for (const Permutation& g : elems) {
    q.elements.push_back(g);
    q.weights.push_back(pref * static_cast<double>(induced_character(alpha, a, inverse(g))));
  }
  return q;
}

// Branching of sigma restricted to S(a): multiplicity of each induced type by
// the class-weighted character inner product over S(a). When cluster ground
// energies are supplied, the minimizers within tol are flagged.
struct BranchingEntry {
  InducedType alpha;
  int multiplicity = 0;
  bool lowest = false;  // energy-minimizing induced type
};

inline std::vector<BranchingEntry> induced_types(
    const SymmetryType& sigma, const Decomposition& a,
    const std::map<std::string, double>* cluster_energies = nullptr,
    bool flag_lowest = false, double energy_tol = 1e-8) {
  auto elems = stabilizer_elements(a);
  std::vector<BranchingEntry> out;
  for (const InducedType& alpha : induced_type_candidates(a)) {
    std::int64_t acc = 0;
    for (const Permutation& g : elems)
      acc += sigma.character(cycle_type(g)) * induced_character(alpha, a, inverse(g));
    if (acc % static_cast<std::int64_t>(elems.size()) != 0)
      throw Error(ErrorCode::validation, "non-integral branching multiplicity");
    int mult = static_cast<int>(acc / static_cast<std::int64_t>(elems.size()));
    if (mult > 0) out.push_back({alpha, mult, false});
  }
  if (flag_lowest) {
    if (!cluster_energies)
      throw Error(ErrorCode::dependency_missing,
                  "lowest-type flags require cluster ground energies");
    double emin = std::numeric_limits<double>::max();
    std::vector<double> es;
    for (const auto& e : out) {
      auto it = cluster_energies->find(e.alpha.name());
      if (it == cluster_energies->end())
        throw Error(ErrorCode::dependency_missing, "missing energy for " + e.alpha.name());
      es.push_back(it->second);
      emin = std::min(emin, it->second);
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].lowest = es[i] <= emin + energy_tol;
  }
  return out;
}

// Computed ||Q^sigma Psi||^2 next to its closed-form prediction for a vector
// whose translates T_pi Psi, pi outside S(a), are orthogonal to Psi.
struct ProjectedNorm {
  double computed = 0.0;
  double predicted = 0.0;
};

inline ProjectedNorm norm_after_projection(const Vector& psi, const SymmetryType& sigma,
                                           const Decomposition& a, const InducedType& alpha,
                                           const TensorSpace& space,
                                           double overlap_tol = 1e-8) {
  auto stab = stabilizer_elements(a);
  auto in_stab = [&](const Permutation& pi) {
    return std::find(stab.begin(), stab.end(), pi) != stab.end();
  };
  Vector tmp;
  for (const Permutation& pi : all_permutations(space.electrons)) {
    if (in_stab(pi)) continue;
    PermutationAction{space, pi}.apply(psi, tmp);
    double ov = std::abs(psi.dot(tmp));
    if (ov > overlap_tol)
      throw Error(ErrorCode::support_overlap,
                  "translate overlap " + std::to_string(ov) + " exceeds tolerance");
  }
  CharacterProjection q = projector(sigma, space);
  ProjectedNorm out;
  out.computed = q(psi).squaredNorm() / psi.squaredNorm();
  int mult = 0;
  for (const auto& e : induced_types(sigma, a))
    if (e.alpha == alpha) mult = e.multiplicity;
  out.predicted = static_cast<double>(mult) * static_cast<double>(sigma.dimension) /
                  static_cast<double>(factorial(sigma.n())) * static_cast<double>(stab.size()) /
                  static_cast<double>(alpha.dimension());
  return out;
}

}  // namespace vdwlab
