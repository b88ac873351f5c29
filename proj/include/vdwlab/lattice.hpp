#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vdwlab/errors.hpp"
#include "vdwlab/linalg.hpp"

namespace vdwlab {

// Uniform one-dimensional grid including both endpoints.
struct Grid {
  int points_per_axis = 0;
  double x_min = 0.0;
  double x_max = 0.0;

  double spacing() const { return (x_max - x_min) / (points_per_axis - 1); }
  double point(int i) const { return x_min + spacing() * i; }

  Vector points() const {
    Vector p(points_per_axis);
    for (int i = 0; i < points_per_axis; ++i) p[i] = point(i);
    return p;
  }
};

inline Grid build_grid(int n, double x_min, double x_max) {
  if (n < 2) throw Error(ErrorCode::invalid_grid, "need at least 2 points, got " + std::to_string(n));
  if (!(x_max > x_min))
    throw Error(ErrorCode::invalid_extent,
                "degenerate extent [" + std::to_string(x_min) + ", " + std::to_string(x_max) + "]");
  return Grid{n, x_min, x_max};
}

enum class PotentialKind { soft_coulomb, coulomb_radial, custom_table };

// Pair interaction kernel v(t). The same kernel is used for every charge
// pair of a system, so neutral-cluster cancellations hold at assembly level.
// Attraction signs are applied at assembly, never stored here.
struct PotentialSpec {
  PotentialKind kind = PotentialKind::soft_coulomb;
  double softening = 1.0;       // soft_coulomb regularization scale a > 0
  int angular_momentum = 0;     // coulomb_radial fixed l
  double strength = 1.0;        // energy*length scale (role of e^2 Z)
  std::vector<double> table_x;  // custom_table abscissae (ascending)
  std::vector<double> table_v;

  double kernel(double t) const {
    switch (kind) {
      case PotentialKind::soft_coulomb:
        return 1.0 / std::sqrt(t * t + softening * softening);
      case PotentialKind::coulomb_radial:
        return 1.0 / std::abs(t);
      case PotentialKind::custom_table: {
        double a = std::abs(t);
        if (table_x.empty()) throw Error(ErrorCode::validation, "empty potential table");
        if (a <= table_x.front()) return table_v.front();
        if (a >= table_x.back()) return table_v.back();
        auto hi = std::upper_bound(table_x.begin(), table_x.end(), a);
        auto i = static_cast<std::size_t>(hi - table_x.begin());
        double w = (a - table_x[i - 1]) / (table_x[i] - table_x[i - 1]);
        return (1.0 - w) * table_v[i - 1] + w * table_v[i];
      }
    }
    return 0.0;
  }

  void validate() const {
    if (kind == PotentialKind::soft_coulomb && !(softening > 0.0))
      throw Error(ErrorCode::validation, "soft_coulomb needs softening > 0");
    if (!std::isfinite(strength)) throw Error(ErrorCode::validation, "non-finite strength");
    if (kind == PotentialKind::custom_table) {
      if (table_x.size() != table_v.size() || table_x.size() < 2)
        throw Error(ErrorCode::validation, "potential table needs >= 2 rows");
      if (!std::is_sorted(table_x.begin(), table_x.end()))
        throw Error(ErrorCode::validation, "potential table abscissae must ascend");
    }
  }
};

// Two-column text table: position value. Lines starting with '#' skipped.
inline PotentialSpec load_potential_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open potential table " + path);
  PotentialSpec spec;
  spec.kind = PotentialKind::custom_table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double x, v;
    if (ss >> x >> v) {
      spec.table_x.push_back(x);
      spec.table_v.push_back(v);
    }
  }
  spec.validate();
  return spec;
}

namespace detail {
// C^2 transition profile: the integral of the bump 30 t^2 (1-t)^2, i.e. the
// result of convolving a sharp edge with that bump. Monotone, value and
// first two derivatives vanish at t=0 and match the plateau at t=1.
inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
}  // namespace detail

// Smoothed characteristic function of the ball of given radius: 1 on
// |z| <= radius - transition_width, 0 on |z| >= radius, monotone between.
struct CutoffFn {
  double radius = 0.0;
  double transition_width = 0.0;
  Grid grid;
  Vector samples;

  double value(double z) const {
    double a = std::abs(z);
    if (a >= radius) return 0.0;
    if (a <= radius - transition_width) return 1.0;
    return detail::smooth_step((radius - a) / transition_width);
  }
};

inline CutoffFn smoothed_cutoff(double radius, double width, const Grid& grid) {
  if (!(width > 0.0) || !(width < radius))
    throw Error(ErrorCode::validation, "need 0 < width < radius");
  if (radius > std::max(std::abs(grid.x_min), std::abs(grid.x_max)))
    throw Error(ErrorCode::cutoff_clipped,
                "cutoff radius " + std::to_string(radius) + " exceeds grid extent");
  CutoffFn f;
  f.radius = radius;
  f.transition_width = width;
  f.grid = grid;
  f.samples.resize(grid.points_per_axis);
  for (int i = 0; i < grid.points_per_axis; ++i) f.samples[i] = f.value(grid.point(i));
  return f;
}

// Cut-off centered away from the origin (cluster balls around nuclei).
inline Vector sampled_cutoff(const CutoffFn& f, const Grid& grid, double center) {
  Vector s(grid.points_per_axis);
  for (int i = 0; i < grid.points_per_axis; ++i) s[i] = f.value(grid.point(i) - center);
  return s;
}

constexpr double default_cutoff_fraction = 1.0 / 3.0;  // ball radius as a fraction of R
constexpr double default_transition_fraction = 0.25;   // width as a fraction of the radius

}  // namespace vdwlab
