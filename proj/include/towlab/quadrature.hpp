#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace towlab::quadrature {

using Fn = std::function<double(const Eigen::VectorXd&)>;

// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(int k, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights);

struct BallQuadSpec {
  int radial = 64;    // Gauss-Legendre points in the radius
  int angular = 256;  // angular samples per sphere slice
};

// Mean of f over the ball B_radius(0), n in {1, 2, 3}. Gauss-Legendre in the
// radius combined with periodic trapezoid rules on the sphere; spectrally
// accurate for smooth integrands.
double ball_average(const Fn& f, int n, double radius, const BallQuadSpec& spec = {});

// Mean over the ball approximated by equal weights on midpoint tensor-grid
// cells whose centers fall strictly inside the ball.
double ball_average_tensor(const Fn& f, int n, double radius, int points_per_axis);

struct McResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::int64_t n_samples = 0;
};
McResult ball_average_mc(const Fn& f, int n, double radius, std::int64_t n_samples,
                         std::uint64_t seed);

// Max of f over the sphere |h| = radius (dense angular scan plus local
// refinement). With a nonvanishing gradient inside the ball this is the
// supremum of f over the closed ball.
double sphere_max(const Fn& f, int n, double radius, int angular = 2048);

}  // namespace towlab::quadrature
