#include "towlab/simulate.hpp"

#include <cmath>

#include "towlab/common.hpp"

namespace towlab::simulate {

CouplingRule CouplingRule::reflection() {
  CouplingRule r;
  r.kind = Kind::Reflection;
  return r;
}

CouplingRule CouplingRule::identity() {
  CouplingRule r;
  r.kind = Kind::Identity;
  return r;
}

CouplingRule CouplingRule::fixed_orthogonal(Eigen::MatrixXd Q) {
  if (Q.rows() != Q.cols()) throw NotOrthogonal("Q must be square");
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(Q.rows(), Q.cols());
  if ((Q.transpose() * Q - I).cwiseAbs().maxCoeff() > 1e-10)
    throw NotOrthogonal("Q^T Q must equal I");
  CouplingRule r;
  r.kind = Kind::FixedOrthogonal;
  r.Q = std::move(Q);
  return r;
}

Eigen::VectorXd CouplingRule::apply(const Eigen::VectorXd& h, const Eigen::VectorXd& eta) const {
  switch (kind) {
    case Kind::Identity:
      return h;
    case Kind::FixedOrthogonal:
      return Q * h;
    case Kind::Reflection:
    default:
      return h - 2.0 * eta.dot(h) * eta;
  }
}

CoupledStrategies CoupledStrategies::pull_apart_together() {
  CoupledStrategies s;
  s.maximizer = [](Eigen::VectorXd& x, Eigen::VectorXd& y, double eps) {
    const Eigen::VectorXd d = x - y;
    const Eigen::VectorXd step = (eps * (1.0 - 1e-6) / d.norm()) * d;
    x += step;
    y -= step;
  };
  s.minimizer = [](Eigen::VectorXd& x, Eigen::VectorXd& y, double eps) {
    const Eigen::VectorXd d = x - y;
    const Eigen::VectorXd step = (eps * (1.0 - 1e-6) / d.norm()) * d;
    x -= step;
    y += step;
  };
  return s;
}

CoupledStatus coupled_status(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double diag_tol) {
  if ((x - y).norm() <= diag_tol) return CoupledStatus::HitDiagonal;
  if (x.norm() >= 1.0 || y.norm() >= 1.0) return CoupledStatus::Exited;
  return CoupledStatus::Running;
}

CoupledState coupled_step(const CoupledState& s, const CouplingRule& rule,
                          const GameParams& params, const CoupledStrategies& strategies,
                          rng::Stream& stream, double diag_tol) {
  if (s.status != CoupledStatus::Running) throw Error("coupled_step on a stopped state");
  const double sep = (s.x - s.y).norm();
  if (rule.kind == CouplingRule::Kind::Reflection && sep <= diag_tol)
    throw DegenerateReflection("reflection undefined this close to the diagonal");

  CoupledState next = s;
  const double u = stream.next_double();
  if (u < params.beta) {
    const Eigen::VectorXd h = stream.uniform_in_ball(params.n, params.epsilon);
    const Eigen::VectorXd eta = (s.x - s.y) / sep;
    next.x += h;
    next.y += rule.apply(h, eta);
  } else if (stream.next_double() < 0.5) {
    strategies.maximizer(next.x, next.y, params.epsilon);
  } else {
    strategies.minimizer(next.x, next.y, params.epsilon);
  }
  ++next.steps;
  next.status = coupled_status(next.x, next.y, diag_tol);
  return next;
}

CoupleReport coupling_bound_estimate(const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                                     const CouplingRule& rule, const GameParams& params,
                                     const CoupleOptions& opt, std::vector<PathRecord>* paths) {
  if (x0.size() != params.n || y0.size() != params.n)
    throw DimensionMismatch("start points must have dimension n");
  if (x0.norm() >= 1.0 || y0.norm() >= 1.0) throw Error("start points must lie in the unit ball");
  const double diag_tol = opt.diag_tol >= 0.0 ? opt.diag_tol : 2.0 * params.epsilon;
  const CoupledStrategies strategies = CoupledStrategies::pull_apart_together();

  std::vector<double> payoff(opt.n_samples, 0.0);
  std::vector<std::int8_t> outcome(opt.n_samples, 0);  // 0 diag, 1 exit, 2 discarded
  std::vector<std::int64_t> steps(opt.n_samples, 0);

  parallel_chunks(0, opt.n_samples, opt.threads, [&](int, std::int64_t i0, std::int64_t i1) {
    for (std::int64_t i = i0; i < i1; ++i) {
      rng::Stream stream(opt.seed, static_cast<std::uint64_t>(i));
      CoupledState state{x0, y0, 0, coupled_status(x0, y0, diag_tol)};
      while (state.status == CoupledStatus::Running && state.steps < opt.step_cap)
        state = coupled_step(state, rule, params, strategies, stream, diag_tol);
      steps[i] = state.steps;
      if (state.status == CoupledStatus::HitDiagonal) {
        outcome[i] = 0;
        payoff[i] = 0.0;
      } else if (state.status == CoupledStatus::Exited) {
        outcome[i] = 1;
        payoff[i] = opt.payoff_cap;
      } else {
        outcome[i] = 2;
      }
    }
  });

  CoupleReport report;
  report.seed = opt.seed;
  report.n_samples = opt.n_samples;
  KahanSum sum, sum2;
  std::int64_t kept = 0, hit = 0;
  for (std::int64_t i = 0; i < opt.n_samples; ++i) {
    if (paths) {
      const char* name = outcome[i] == 0 ? "hit_diagonal" : outcome[i] == 1 ? "exited" : "discarded";
      paths->push_back({i, steps[i], name, payoff[i]});
    }
    if (outcome[i] == 2) {
      ++report.discarded;
      continue;
    }
    ++kept;
    if (outcome[i] == 0) ++hit;
    sum.add(payoff[i]);
    sum2.add(payoff[i] * payoff[i]);
  }
  if (kept > 0) {
    report.estimate = sum.value() / kept;
    const double var = std::max(0.0, sum2.value() / kept - report.estimate * report.estimate);
    report.stderr_ = std::sqrt(var / kept);
    report.p_hit_diagonal = static_cast<double>(hit) / static_cast<double>(kept);
  }
  return report;
}

std::pair<Strategy, Strategy> greedy_strategies_from_value(const dpp::ValueField& u) {
  if (u.domain == nullptr) throw Error("ValueField has no domain");
  const GridDomain& dom = *u.domain;
  auto up = std::make_shared<std::vector<int>>(dom.interior_count(), -1);
  auto down = std::make_shared<std::vector<int>>(dom.interior_count(), -1);
  for (int id = 0; id < dom.interior_count(); ++id) {
    const std::int64_t base = dom.cell_of_node(id);
    int arg_hi = -1, arg_lo = -1;
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    // Stencil offsets are in lexicographic order, so keeping the first
    // extremum implements the lexicographic tie-break.
    for (const std::int64_t d : dom.stencil_cell_deltas()) {
      const int nb = dom.node_in_cell(base + d);
      const double v = u.values[nb];
      if (v > hi) {
        hi = v;
        arg_hi = nb;
      }
      if (v < lo) {
        lo = v;
        arg_lo = nb;
      }
    }
    (*up)[id] = arg_hi;
    (*down)[id] = arg_lo;
  }
  return {Strategy{std::move(up)}, Strategy{std::move(down)}};
}

SimReport simulate_game(const GridDomain& dom, int x0_node, const GameParams& params,
                        const Strategy& strategy_max, const Strategy& strategy_min,
                        const dpp::Payoff& F, const SimOptions& opt,
                        std::vector<PathRecord>* paths) {
  if (!dom.is_interior(x0_node)) throw NotInterior("start node must be interior");
  const int stencil = dom.stencil_size();

  std::vector<double> payoff(opt.n_samples, 0.0);
  std::vector<std::int8_t> discarded(opt.n_samples, 0);
  std::vector<std::int64_t> steps(opt.n_samples, 0);

  parallel_chunks(0, opt.n_samples, opt.threads, [&](int, std::int64_t i0, std::int64_t i1) {
    for (std::int64_t i = i0; i < i1; ++i) {
      rng::Stream stream(opt.seed, static_cast<std::uint64_t>(i));
      int node = x0_node;
      std::int64_t k = 0;
      for (; k < opt.step_cap && dom.is_interior(node); ++k) {
        if (stream.next_double() < params.beta) {
          const std::int64_t pick = static_cast<std::int64_t>(stream.next_below(stencil));
          node = dom.node_in_cell(dom.cell_of_node(node) + dom.stencil_cell_deltas()[pick]);
        } else if (stream.next_double() < 0.5) {
          node = strategy_max.target(node);
        } else {
          node = strategy_min.target(node);
        }
      }
      steps[i] = k;
      if (dom.is_interior(node)) {
        discarded[i] = 1;  // still running at the cap
      } else {
        payoff[i] = F.at(dom, node);
      }
    }
  });

  SimReport report;
  report.seed = opt.seed;
  report.n_samples = opt.n_samples;
  KahanSum sum, sum2;
  std::int64_t kept = 0;
  for (std::int64_t i = 0; i < opt.n_samples; ++i) {
    if (paths)
      paths->push_back({i, steps[i], discarded[i] ? "discarded" : "exited", payoff[i]});
    if (discarded[i]) {
      ++report.discarded;
      continue;
    }
    ++kept;
    sum.add(payoff[i]);
    sum2.add(payoff[i] * payoff[i]);
  }
  if (kept > 0) {
    report.estimate = sum.value() / kept;
    const double var = std::max(0.0, sum2.value() / kept - report.estimate * report.estimate);
    report.stderr_ = std::sqrt(var / kept);
  }
  return report;
}

}  // namespace towlab::simulate
