#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "towlab/common.hpp"

namespace towlab::geometry {

// Analytic domain: an open ball or open axis-aligned cube.
struct DomainDescriptor {
  enum class Shape { Ball, Box };

  Shape shape = Shape::Ball;
  int n = 1;
  double size = 1.0;       // ball radius or box halfwidth
  Eigen::VectorXd center;  // defaults to the origin

  static DomainDescriptor ball(int n, double radius);
  static DomainDescriptor ball(int n, double radius, Eigen::VectorXd center);
  static DomainDescriptor box(int n, double halfwidth);
  static DomainDescriptor box(int n, double halfwidth, Eigen::VectorXd center);

  bool contains(const Eigen::VectorXd& x) const;    // open set membership
  double distance(const Eigen::VectorXd& x) const;  // distance to the closure, 0 inside
};

// Game parameters with the step-distribution weights. For finite p > 2,
// alpha = (p-2)/(p+n) and beta = (n+2)/(p+n); p = 2 is the pure random walk
// (alpha, beta) = (0, 1) and p = infinity the pure tug-of-war (1, 0).
struct GameParams {
  int n = 1;
  double p = 2.0;
  double epsilon = 0.1;
  double alpha = 0.0;
  double beta = 1.0;

  static GameParams make(int n, double p, double epsilon);
  bool is_infinity() const;
};

// Lattice discretization of a domain. Nodes are lattice points h*Z^n that are
// either interior (inside omega) or strip (outside with dist <= epsilon).
// Interior nodes come first in the id order. The epsilon-ball neighborhood is
// translation invariant on the lattice, so it is stored once as an offset
// stencil; every lattice point inside B_eps(x) of an interior x is itself a
// node, which makes the stencil valid at every interior node.
class GridDomain {
 public:
  int n() const { return omega_.n; }
  double spacing() const { return spacing_; }
  double epsilon() const { return epsilon_; }
  const DomainDescriptor& omega() const { return omega_; }

  int node_count() const { return static_cast<int>(coords_.size()); }
  int interior_count() const { return interior_count_; }
  bool is_interior(int id) const { return id >= 0 && id < interior_count_; }

  const Eigen::VectorXi& coord(int id) const { return coords_[id]; }
  Eigen::VectorXd position(int id) const { return coords_[id].cast<double>() * spacing_; }

  // Node at exact lattice coordinates, -1 if absent.
  int node_at(const Eigen::VectorXi& c) const;
  // Node at the lattice point nearest to x, -1 if absent.
  int nearest_node(const Eigen::VectorXd& x) const;

  // All lattice nodes strictly inside B_eps(x) and the uniform weight
  // 1/count. Throws NotInterior for strip nodes (they are absorbing).
  std::pair<std::vector<int>, double> ball_neighborhood(int id) const;

  int stencil_size() const { return static_cast<int>(stencil_offsets_.size()); }
  const std::vector<Eigen::VectorXi>& stencil_offsets() const { return stencil_offsets_; }

  // Dense cell indexing over the bounding box, for sweep kernels: the cell of
  // any neighbor of an interior node is cell_of_node(id) + delta with delta
  // from stencil_cell_deltas().
  std::int64_t cell_count() const { return static_cast<std::int64_t>(cell_node_.size()); }
  std::int64_t cell_of_node(int id) const { return node_cell_[id]; }
  int node_in_cell(std::int64_t cell) const { return cell_node_[cell]; }
  const std::vector<std::int64_t>& stencil_cell_deltas() const { return stencil_deltas_; }

  friend GridDomain build_grid(const DomainDescriptor& omega, double epsilon, double spacing);

 private:
  DomainDescriptor omega_;
  double spacing_ = 0.0;
  double epsilon_ = 0.0;
  int interior_count_ = 0;
  Eigen::VectorXi box_lo_, box_hi_;
  std::vector<std::int64_t> strides_;
  std::vector<Eigen::VectorXi> coords_;
  std::vector<std::int64_t> node_cell_;
  std::vector<int> cell_node_;
  std::vector<Eigen::VectorXi> stencil_offsets_;
  std::vector<std::int64_t> stencil_deltas_;
};

GridDomain build_grid(const DomainDescriptor& omega, double epsilon, double spacing);

}  // namespace towlab::geometry
