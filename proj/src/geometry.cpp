#include "towlab/geometry.hpp"

#include <cmath>
#include <limits>

namespace towlab::geometry {

namespace {

Eigen::VectorXd resolve_center(int n, const Eigen::VectorXd& center) {
  if (center.size() == 0) return Eigen::VectorXd::Zero(n);
  if (center.size() != n) throw DimensionMismatch("domain center has wrong dimension");
  return center;
}

}  // namespace

DomainDescriptor DomainDescriptor::ball(int n, double radius) {
  return ball(n, radius, Eigen::VectorXd::Zero(n));
}

DomainDescriptor DomainDescriptor::ball(int n, double radius, Eigen::VectorXd center) {
  if (n < 1) throw DegenerateDomain("dimension must be >= 1");
  if (!(radius > 0)) throw DegenerateDomain("ball radius must be positive");
  DomainDescriptor d;
  d.shape = Shape::Ball;
  d.n = n;
  d.size = radius;
  d.center = resolve_center(n, center);
  return d;
}

DomainDescriptor DomainDescriptor::box(int n, double halfwidth) {
  return box(n, halfwidth, Eigen::VectorXd::Zero(n));
}

DomainDescriptor DomainDescriptor::box(int n, double halfwidth, Eigen::VectorXd center) {
  if (n < 1) throw DegenerateDomain("dimension must be >= 1");
  if (!(halfwidth > 0)) throw DegenerateDomain("box halfwidth must be positive");
  DomainDescriptor d;
  d.shape = Shape::Box;
  d.n = n;
  d.size = halfwidth;
  d.center = resolve_center(n, center);
  return d;
}

bool DomainDescriptor::contains(const Eigen::VectorXd& x) const {
  if (x.size() != n) throw DimensionMismatch("point has wrong dimension");
  if (shape == Shape::Ball) return (x - center).norm() < size;
  return ((x - center).cwiseAbs().array() < size).all();
}

double DomainDescriptor::distance(const Eigen::VectorXd& x) const {
  if (x.size() != n) throw DimensionMismatch("point has wrong dimension");
  if (shape == Shape::Ball) {
    const double d = (x - center).norm() - size;
    return d > 0 ? d : 0.0;
  }
  const Eigen::ArrayXd excess = ((x - center).cwiseAbs().array() - size).max(0.0);
  return std::sqrt((excess * excess).sum());
}

GameParams GameParams::make(int n, double p, double epsilon) {
  if (n < 1) throw DegenerateDomain("dimension must be >= 1");
  if (!(epsilon > 0)) throw DegenerateDomain("epsilon must be positive");
  GameParams g;
  g.n = n;
  g.p = p;
  g.epsilon = epsilon;
  if (std::isinf(p)) {
    g.alpha = 1.0;
    g.beta = 0.0;
  } else if (p == 2.0) {
    g.alpha = 0.0;
    g.beta = 1.0;
  } else if (p > 2.0) {
    g.alpha = (p - 2.0) / (p + n);
    g.beta = 1.0 - g.alpha;
  } else {
    throw BadExponent("p must lie in [2, infinity]");
  }
  return g;
}

bool GameParams::is_infinity() const { return std::isinf(p); }

int GridDomain::node_at(const Eigen::VectorXi& c) const {
  if (c.size() != n()) throw DimensionMismatch("coordinate has wrong dimension");
  std::int64_t cell = 0;
  for (int i = 0; i < n(); ++i) {
    if (c[i] < box_lo_[i] || c[i] > box_hi_[i]) return -1;
    cell += static_cast<std::int64_t>(c[i] - box_lo_[i]) * strides_[i];
  }
  return cell_node_[cell];
}

int GridDomain::nearest_node(const Eigen::VectorXd& x) const {
  if (x.size() != n()) throw DimensionMismatch("point has wrong dimension");
  Eigen::VectorXi c(n());
  for (int i = 0; i < n(); ++i) c[i] = static_cast<int>(std::llround(x[i] / spacing_));
  return node_at(c);
}

std::pair<std::vector<int>, double> GridDomain::ball_neighborhood(int id) const {
  if (!is_interior(id)) throw NotInterior("ball_neighborhood requires an interior node");
  std::vector<int> out;
  out.reserve(stencil_deltas_.size());
  const std::int64_t base = node_cell_[id];
  for (const std::int64_t delta : stencil_deltas_) {
    const int nb = cell_node_[base + delta];
    out.push_back(nb);
  }
  return {std::move(out), 1.0 / static_cast<double>(out.size())};
}

GridDomain build_grid(const DomainDescriptor& omega, double epsilon, double spacing) {
  if (!(epsilon > 0)) throw DegenerateDomain("epsilon must be positive");
  if (!(spacing > 0)) throw DegenerateDomain("spacing must be positive");
  if (spacing > epsilon / 4.0)
    throw SpacingTooCoarse("spacing must satisfy spacing <= epsilon/4");
  const bool degenerate = omega.shape == DomainDescriptor::Shape::Ball
                              ? !(omega.size > 2.0 * epsilon)
                              : !(2.0 * omega.size > 2.0 * epsilon);
  if (degenerate) throw DegenerateDomain("domain too small relative to epsilon");

  GridDomain g;
  g.omega_ = omega;
  g.spacing_ = spacing;
  g.epsilon_ = epsilon;

  const int n = omega.n;
  g.box_lo_.resize(n);
  g.box_hi_.resize(n);
  for (int i = 0; i < n; ++i) {
    g.box_lo_[i] = static_cast<int>(std::floor((omega.center[i] - omega.size - epsilon) / spacing)) - 1;
    g.box_hi_[i] = static_cast<int>(std::ceil((omega.center[i] + omega.size + epsilon) / spacing)) + 1;
  }
  g.strides_.assign(n, 1);
  for (int i = n - 2; i >= 0; --i)
    g.strides_[i] = g.strides_[i + 1] * (g.box_hi_[i + 1] - g.box_lo_[i + 1] + 1);
  const std::int64_t cells =
      g.strides_[0] * (g.box_hi_[0] - g.box_lo_[0] + 1);
  g.cell_node_.assign(cells, -1);

  // Two classification passes keep interior node ids in front; scan order is
  // lexicographic in the lattice coordinates, so ids are reproducible.
  const double strip_tol = 1e-12 * std::max(1.0, epsilon);
  std::vector<Eigen::VectorXi> strip_coords;
  Eigen::VectorXi c = g.box_lo_;
  Eigen::VectorXd x(n);
  for (;;) {
    for (int i = 0; i < n; ++i) x[i] = c[i] * spacing;
    if (omega.contains(x)) {
      g.coords_.push_back(c);
    } else if (omega.distance(x) <= epsilon + strip_tol) {
      strip_coords.push_back(c);
    }
    int axis = n - 1;
    while (axis >= 0 && ++c[axis] > g.box_hi_[axis]) {
      c[axis] = g.box_lo_[axis];
      --axis;
    }
    if (axis < 0) break;
  }
  g.interior_count_ = static_cast<int>(g.coords_.size());
  if (g.interior_count_ == 0) throw DegenerateDomain("no interior lattice nodes");
  g.coords_.insert(g.coords_.end(), strip_coords.begin(), strip_coords.end());

  g.node_cell_.resize(g.coords_.size());
  for (int id = 0; id < static_cast<int>(g.coords_.size()); ++id) {
    std::int64_t cell = 0;
    for (int i = 0; i < n; ++i)
      cell += static_cast<std::int64_t>(g.coords_[id][i] - g.box_lo_[i]) * g.strides_[i];
    g.node_cell_[id] = cell;
    g.cell_node_[cell] = id;
  }

  // Offset stencil for the open ball. Squared radii are compared in integer
  // units; a tie |y - x| == epsilon is excluded deterministically.
  const long double ratio = static_cast<long double>(epsilon) / static_cast<long double>(spacing);
  const long double r2 = ratio * ratio;
  std::int64_t max_sq = static_cast<std::int64_t>(std::floor(static_cast<double>(r2)));
  if (static_cast<long double>(max_sq) >= r2 * (1.0L - 1e-9L)) --max_sq;
  const int reach = static_cast<int>(std::ceil(static_cast<double>(ratio)));
  Eigen::VectorXi d = Eigen::VectorXi::Constant(n, -reach);
  for (;;) {
    const std::int64_t sq = d.cast<std::int64_t>().squaredNorm();
    if (sq <= max_sq) {
      g.stencil_offsets_.push_back(d);
      std::int64_t delta = 0;
      for (int i = 0; i < n; ++i) delta += static_cast<std::int64_t>(d[i]) * g.strides_[i];
      g.stencil_deltas_.push_back(delta);
    }
    int axis = n - 1;
    while (axis >= 0 && ++d[axis] > reach) {
      d[axis] = -reach;
      --axis;
    }
    if (axis < 0) break;
  }
  return g;
}

}  // namespace towlab::geometry
