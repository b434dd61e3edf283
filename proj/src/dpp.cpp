#include "towlab/dpp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "towlab/common.hpp"

namespace towlab::dpp {

std::pair<double, double> alpha_beta(double p, int n) {
  if (n < 1) throw DegenerateDomain("dimension must be >= 1");
  if (std::isinf(p) || !(p > 2.0)) throw BadExponent("alpha_beta requires finite p > 2");
  const double alpha = (p - 2.0) / (p + n);
  return {alpha, 1.0 - alpha};
}

double Payoff::at(const GridDomain& dom, int node) const {
  if (fn) return fn(dom.position(node));
  const auto it = table.find(node);
  if (it == table.end()) throw MissingBoundaryData("no payoff value for node");
  return it->second;
}

Payoff Payoff::coordinate(int axis) {
  Payoff f;
  f.fn = [axis](const Eigen::VectorXd& z) { return z[axis]; };
  return f;
}

Payoff Payoff::quadratic() {
  Payoff f;
  f.fn = [](const Eigen::VectorXd& z) { return z.squaredNorm(); };
  return f;
}

Payoff Payoff::radial_pharmonic(double p, int n) {
  if (std::isinf(p) || !(p > 1.0)) throw BadExponent("radial_pharmonic requires finite p > 1");
  const double exponent = (p - n) / (p - 1.0);
  Payoff f;
  f.fn = [exponent](const Eigen::VectorXd& z) { return std::pow(z.norm(), exponent); };
  return f;
}

Payoff Payoff::custom(std::function<double(const Eigen::VectorXd&)> f) {
  Payoff out;
  out.fn = std::move(f);
  return out;
}

Payoff Payoff::custom_table(std::unordered_map<int, double> t) {
  Payoff out;
  out.table = std::move(t);
  return out;
}

namespace {

// One Jacobi sweep over the interior on the dense cell arrays. Node updates
// are independent, so the result does not depend on the chunking; the
// residual is a max-reduction combined in chunk order.
template <bool NeedMean, bool NeedMinMax>
double sweep(const GridDomain& dom, const std::vector<double>& in, std::vector<double>& out,
             double alpha, double beta, double damping, int threads) {
  const auto& deltas = dom.stencil_cell_deltas();
  const double inv_count = 1.0 / static_cast<double>(deltas.size());
  const int m = dom.interior_count();
  const int nchunks = std::max(1, threads);
  std::vector<double> chunk_residual(nchunks, 0.0);
  parallel_chunks(0, m, threads, [&](int chunk, std::int64_t i0, std::int64_t i1) {
    double res = 0.0;
    for (std::int64_t id = i0; id < i1; ++id) {
      const std::int64_t base = dom.cell_of_node(static_cast<int>(id));
      KahanSum sum;
      double hi = -std::numeric_limits<double>::infinity();
      double lo = std::numeric_limits<double>::infinity();
      for (const std::int64_t d : deltas) {
        const double v = in[base + d];
        if constexpr (NeedMean) sum.add(v);
        if constexpr (NeedMinMax) {
          hi = std::max(hi, v);
          lo = std::min(lo, v);
        }
      }
      double v = 0.0;
      if constexpr (NeedMinMax) v += 0.5 * alpha * (hi + lo);
      if constexpr (NeedMean) v += beta * sum.value() * inv_count;
      if (damping != 1.0) v = (1.0 - damping) * in[base] + damping * v;
      out[base] = v;
      res = std::max(res, std::abs(v - in[base]));
    }
    chunk_residual[chunk] = std::max(chunk_residual[chunk], res);
  });
  double residual = 0.0;
  for (const double r : chunk_residual) residual = std::max(residual, r);
  return residual;
}

double run_sweep(const GridDomain& dom, const std::vector<double>& in, std::vector<double>& out,
                 const GameParams& gp, double damping, int threads) {
  if (gp.beta == 0.0) return sweep<false, true>(dom, in, out, gp.alpha, gp.beta, damping, threads);
  if (gp.alpha == 0.0) return sweep<true, false>(dom, in, out, gp.alpha, gp.beta, damping, threads);
  return sweep<true, true>(dom, in, out, gp.alpha, gp.beta, damping, threads);
}

void check_params(const GridDomain& dom, const GameParams& gp) {
  if (gp.n != dom.n()) throw DimensionMismatch("GameParams dimension does not match grid");
  if (std::abs(gp.epsilon - dom.epsilon()) > 1e-12 * std::max(1.0, dom.epsilon()))
    throw Error("GameParams epsilon does not match grid epsilon");
}

std::vector<double> to_cells(const GridDomain& dom, const Eigen::VectorXd& values) {
  std::vector<double> cells(dom.cell_count(), 0.0);
  for (int id = 0; id < dom.node_count(); ++id) cells[dom.cell_of_node(id)] = values[id];
  return cells;
}

void from_cells(const GridDomain& dom, const std::vector<double>& cells, Eigen::VectorXd& values) {
  values.resize(dom.node_count());
  for (int id = 0; id < dom.node_count(); ++id) values[id] = cells[dom.cell_of_node(id)];
}

}  // namespace

ValueField dpp_apply(const ValueField& u, const GameParams& params, int threads) {
  if (u.domain == nullptr) throw Error("ValueField has no domain");
  const GridDomain& dom = *u.domain;
  check_params(dom, params);
  for (int id = dom.interior_count(); id < dom.node_count(); ++id)
    if (!std::isfinite(u.values[id])) throw MissingBoundaryData("strip node has no finite value");

  std::vector<double> in = to_cells(dom, u.values);
  std::vector<double> out = in;
  ValueField v;
  v.domain = u.domain;
  v.residual = run_sweep(dom, in, out, params, 1.0, threads);
  v.iterations = 1;
  v.converged = true;
  from_cells(dom, out, v.values);
  return v;
}

ValueField dpp_solve(const GridDomain& domain, const Payoff& F, const GameParams& params,
                     const SolveOptions& opt, std::vector<double>* residual_history) {
  check_params(domain, params);
  if (!(opt.tol > 0)) throw Error("tol must be positive");
  if (opt.max_iter < 1) throw Error("max_iter must be >= 1");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw Error("damping must be in (0,1]");

  Eigen::VectorXd values(domain.node_count());
  KahanSum strip_sum;
  for (int id = domain.interior_count(); id < domain.node_count(); ++id) {
    const double v = F.at(domain, id);
    if (!std::isfinite(v)) throw MissingBoundaryData("payoff is not finite on the strip");
    values[id] = v;
    strip_sum.add(v);
  }
  const int strip_count = domain.node_count() - domain.interior_count();
  const double strip_mean = strip_count > 0 ? strip_sum.value() / strip_count : 0.0;
  for (int id = 0; id < domain.interior_count(); ++id)
    values[id] = F.analytic() ? F.fn(domain.position(id)) : strip_mean;

  std::vector<double> in = to_cells(domain, values);
  std::vector<double> out = in;
  ValueField field;
  field.domain = &domain;
  if (residual_history) residual_history->clear();

  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    const double res = run_sweep(domain, in, out, params, opt.damping, opt.threads);
    std::swap(in, out);
    field.iterations = iter;
    field.residual = res;
    if (residual_history) residual_history->push_back(res);
    if (res <= opt.tol) {
      field.converged = true;
      break;
    }
  }
  from_cells(domain, in, field.values);
  return field;
}

void fd_derivatives(const std::function<double(const Eigen::VectorXd&)>& u,
                    const Eigen::VectorXd& x, double step, Eigen::VectorXd& grad,
                    Eigen::MatrixXd& hess) {
  const int n = static_cast<int>(x.size());
  grad.resize(n);
  hess.resize(n, n);
  const double u0 = u(x);
  Eigen::VectorXd z = x;
  for (int i = 0; i < n; ++i) {
    z[i] = x[i] + step;
    const double up = u(z);
    z[i] = x[i] - step;
    const double um = u(z);
    z[i] = x[i];
    grad[i] = (up - um) / (2.0 * step);
    hess(i, i) = (up - 2.0 * u0 + um) / (step * step);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      z[i] = x[i] + step;
      z[j] = x[j] + step;
      const double upp = u(z);
      z[j] = x[j] - step;
      const double upm = u(z);
      z[i] = x[i] - step;
      const double umm = u(z);
      z[j] = x[j] + step;
      const double ump = u(z);
      z[i] = x[i];
      z[j] = x[j];
      const double v = (upp - upm - ump + umm) / (4.0 * step * step);
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
}

double p_laplacian_eval(const std::function<double(const Eigen::VectorXd&)>& u,
                        const Eigen::VectorXd& x, double p, const FdOptions& fd) {
  if (!(p > 1.0)) throw BadExponent("p_laplacian_eval requires p in (1, infinity]");
  const double step = fd.step_scale * std::max(1.0, x.norm());
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  fd_derivatives(u, x, step, grad, hess);
  const double gn = grad.norm();
  if (gn < fd.gradient_floor) throw VanishingGradient("|Du| below gradient_floor");
  const Eigen::VectorXd eta = grad / gn;
  const double dir = eta.dot(hess * eta);
  if (std::isinf(p)) return dir;
  return hess.trace() + (p - 2.0) * dir;
}

ExpansionResult expansion_check(const std::function<double(const Eigen::VectorXd&)>& u,
                                const Eigen::VectorXd& x, const GameParams& params,
                                const std::vector<double>& eps_list,
                                const quadrature::BallQuadSpec& quad, const FdOptions& fd) {
  const int n = static_cast<int>(x.size());
  if (n != params.n) throw DimensionMismatch("point dimension does not match GameParams");
  const double u0 = u(x);

  ExpansionResult result;
  for (const double eps : eps_list) {
    ExpansionRow row;
    row.eps = eps;
    double acc = -u0;
    if (params.alpha > 0.0) {
      const double sup = quadrature::sphere_max([&](const Eigen::VectorXd& h) { return u(x + h); },
                                                n, eps, quad.angular);
      const double inf = -quadrature::sphere_max([&](const Eigen::VectorXd& h) { return -u(x + h); },
                                                 n, eps, quad.angular);
      acc += 0.5 * params.alpha * (sup + inf);
    }
    if (params.beta > 0.0) {
      const double mean = quadrature::ball_average(
          [&](const Eigen::VectorXd& h) { return u(x + h); }, n, eps, quad);
      acc += params.beta * mean;
    }
    row.remainder = acc;
    row.remainder_over_eps2 = acc / (eps * eps);
    result.rows.push_back(row);
  }

  const double step = fd.step_scale * std::max(1.0, x.norm());
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  fd_derivatives(u, x, step, grad, hess);
  const double gn = grad.norm();
  if (gn < fd.gradient_floor) throw VanishingGradient("|Du| below gradient_floor");
  const Eigen::VectorXd eta = grad / gn;
  const double lap = hess.trace();
  const double inf_lap = eta.dot(hess * eta);
  result.predicted_limit = 0.5 * params.alpha * inf_lap + params.beta / (2.0 * (n + 2)) * lap;
  return result;
}

}  // namespace towlab::dpp
