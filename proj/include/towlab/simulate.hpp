#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "towlab/dpp.hpp"
#include "towlab/geometry.hpp"
#include "towlab/rng.hpp"

namespace towlab::simulate {

using geometry::GameParams;
using geometry::GridDomain;

// Isometry of B_eps(0) applied to the second walker's noise step.
struct CouplingRule {
  enum class Kind { Reflection, Identity, FixedOrthogonal };

  Kind kind = Kind::Reflection;
  Eigen::MatrixXd Q;  // FixedOrthogonal only

  static CouplingRule reflection();
  static CouplingRule identity();
  static CouplingRule fixed_orthogonal(Eigen::MatrixXd Q);  // throws NotOrthogonal

  // eta is the unit separation direction (x-y)/|x-y|, used by Reflection.
  Eigen::VectorXd apply(const Eigen::VectorXd& h, const Eigen::VectorXd& eta) const;
};

enum class CoupledStatus { Running, HitDiagonal, Exited };

struct CoupledState {
  Eigen::VectorXd x, y;
  std::int64_t steps = 0;
  CoupledStatus status = CoupledStatus::Running;
};

// Joint player moves on the product state. The defaults pull the pair apart
// (maximizer) or together (minimizer) along the separation direction with
// step length eps*(1 - 1e-6), staying inside the open step ball.
struct CoupledStrategies {
  std::function<void(Eigen::VectorXd&, Eigen::VectorXd&, double)> maximizer;
  std::function<void(Eigen::VectorXd&, Eigen::VectorXd&, double)> minimizer;
  static CoupledStrategies pull_apart_together();
};

// Status from the stopping rules: the diagonal |x-y| <= diag_tol is checked
// first, then exit of either marginal from the open unit ball.
CoupledStatus coupled_status(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double diag_tol);

// One transition of the coupled process: with probability beta a common noise
// draw h with the rule applied on the y side, otherwise a fair coin between
// the two players' joint moves.
CoupledState coupled_step(const CoupledState& s, const CouplingRule& rule,
                          const GameParams& params, const CoupledStrategies& strategies,
                          rng::Stream& stream, double diag_tol);

struct PathRecord {
  std::int64_t path_id = 0;
  std::int64_t steps = 0;
  std::string outcome;  // "hit_diagonal" | "exited" | "discarded"
  double payoff = 0.0;
};

struct CoupleOptions {
  double payoff_cap = 1.0;  // payoff on exit; 0 on the diagonal
  std::int64_t n_samples = 10000;
  std::uint64_t seed = 0;
  std::int64_t step_cap = 1000000;
  double diag_tol = -1.0;  // < 0 selects the default 2*epsilon
  int threads = 1;
};

struct CoupleReport {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double p_hit_diagonal = 0.0;
  std::int64_t n_samples = 0;
  std::int64_t discarded = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo bound estimate for the coupled process started at (x0, y0):
// payoff 0 on hitting the diagonal, payoff_cap on exiting. Paths use
// independent substreams keyed by path index, so the report is a
// deterministic function of the inputs and the seed, whatever the thread
// count. Paths exceeding step_cap are discarded and counted.
CoupleReport coupling_bound_estimate(const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                                     const CouplingRule& rule, const GameParams& params,
                                     const CoupleOptions& opt,
                                     std::vector<PathRecord>* paths = nullptr);

// Single-token strategy on the grid: maps an interior node to the neighbor
// the player moves to.
struct Strategy {
  std::shared_ptr<const std::vector<int>> targets;
  int target(int node) const { return (*targets)[node]; }
};

// Greedy argmax/argmin extraction from a solved field. Ties resolve to the
// lexicographically smallest node.
std::pair<Strategy, Strategy> greedy_strategies_from_value(const dpp::ValueField& u);

struct SimOptions {
  std::int64_t n_samples = 10000;
  std::uint64_t seed = 0;
  std::int64_t step_cap = 1000000;
  int threads = 1;
};

struct SimReport {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::int64_t n_samples = 0;
  std::int64_t discarded = 0;
  std::uint64_t seed = 0;
};

// Monte Carlo value estimate of the single game on the grid from x0: with
// probability alpha a fair coin picks the moving player, with probability
// beta a uniform step in the discrete eps-ball; absorption on the strip pays
// F there.
SimReport simulate_game(const GridDomain& dom, int x0_node, const GameParams& params,
                        const Strategy& strategy_max, const Strategy& strategy_min,
                        const dpp::Payoff& F, const SimOptions& opt,
                        std::vector<PathRecord>* paths = nullptr);

}  // namespace towlab::simulate
