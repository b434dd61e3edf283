#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "towlab/geometry.hpp"
#include "towlab/quadrature.hpp"

namespace towlab::dpp {

using geometry::GameParams;
using geometry::GridDomain;

// Step-distribution weights alpha = (p-2)/(p+n), beta = (n+2)/(p+n) for
// finite p > 2. The endpoint games p = 2 and p = infinity use the fixed
// constants handled by GameParams::make, not this formula.
std::pair<double, double> alpha_beta(double p, int n);

// Boundary payoff: an analytic function evaluable anywhere, or a table of
// strip-node values.
struct Payoff {
  std::function<double(const Eigen::VectorXd&)> fn;
  std::unordered_map<int, double> table;

  bool analytic() const { return static_cast<bool>(fn); }
  double at(const GridDomain& dom, int node) const;

  static Payoff coordinate(int axis = 0);
  static Payoff quadratic();
  // |z|^((p-n)/(p-1)), the radial solution of the normalized p-Laplace
  // equation away from the origin.
  static Payoff radial_pharmonic(double p, int n);
  static Payoff custom(std::function<double(const Eigen::VectorXd&)> f);
  static Payoff custom_table(std::unordered_map<int, double> t);
};

struct ValueField {
  const GridDomain* domain = nullptr;
  Eigen::VectorXd values;  // indexed by node id
  double residual = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
};

// One step of the dynamic programming operator:
//   v(x) = (alpha/2)[max_N u + min_N u] + beta * mean_N u  on interior nodes,
// strip values copied unchanged. Monotone and nonexpansive in the sup norm.
ValueField dpp_apply(const ValueField& u, const GameParams& params, int threads = 1);

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 200000;  // mandatory cap; p = infinity has no convergence guarantee
  double damping = 1.0;   // relaxation factor in (0, 1]
  int threads = 1;
};

// Jacobi fixed-point iteration of dpp_apply from the payoff-based initial
// guess. Returns with converged = false (NotConverged flag) when the
// iteration cap is reached.
ValueField dpp_solve(const GridDomain& domain, const Payoff& F, const GameParams& params,
                     const SolveOptions& opt = {},
                     std::vector<double>* residual_history = nullptr);

struct FdOptions {
  double step_scale = 1e-4;      // fd step = step_scale * max(1, |x|)
  double gradient_floor = 1e-8;  // below this |Du| the operator is undefined
};

// Gradient and Hessian of u at x by central finite differences.
void fd_derivatives(const std::function<double(const Eigen::VectorXd&)>& u,
                    const Eigen::VectorXd& x, double step, Eigen::VectorXd& grad,
                    Eigen::MatrixXd& hess);

// Normalized p-Laplacian tr{(I + (p-2) eta eta^T) D^2u} with eta = Du/|Du|
// for finite p, and <D^2u eta, eta> for p = infinity.
double p_laplacian_eval(const std::function<double(const Eigen::VectorXd&)>& u,
                        const Eigen::VectorXd& x, double p, const FdOptions& fd = {});

struct ExpansionRow {
  double eps = 0.0;
  double remainder = 0.0;           // (alpha/2)(sup+inf) + beta*mean - u(x)
  double remainder_over_eps2 = 0.0;
};

struct ExpansionResult {
  std::vector<ExpansionRow> rows;
  // beta/(2(n+2)) * [Laplacian + (p-2) * infinity-Laplacian] at x; for
  // p = infinity this is half the infinity-Laplacian.
  double predicted_limit = 0.0;
};

// Continuum one-step expansion residual of the DPP at x over a list of ball
// radii, by dense quadrature.
ExpansionResult expansion_check(const std::function<double(const Eigen::VectorXd&)>& u,
                                const Eigen::VectorXd& x, const GameParams& params,
                                const std::vector<double>& eps_list,
                                const quadrature::BallQuadSpec& quad = {},
                                const FdOptions& fd = {});

}  // namespace towlab::dpp
