#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "towlab/dpp.hpp"
#include "towlab/geometry.hpp"
#include "towlab/rng.hpp"

using namespace towlab;
using geometry::build_grid;
using geometry::DomainDescriptor;
using geometry::GameParams;
using geometry::GridDomain;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

dpp::ValueField field_from(const GridDomain& dom,
                           const std::function<double(const Eigen::VectorXd&)>& f) {
  dpp::ValueField u;
  u.domain = &dom;
  u.values.resize(dom.node_count());
  for (int id = 0; id < dom.node_count(); ++id) u.values[id] = f(dom.position(id));
  return u;
}

}  // namespace

TEST_CASE("alpha_beta closed form") {
  const auto [a4, b4] = dpp::alpha_beta(4.0, 2);
  CHECK(a4 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(b4 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const auto [a10, b10] = dpp::alpha_beta(10.0, 2);
  CHECK(a10 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(b10 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const auto [a2, b2] = dpp::alpha_beta(2.0 + 1e-9, 2);
  CHECK(a2 < 1e-9);
  CHECK(b2 > 1.0 - 1e-9);
  CHECK(a4 + b4 == 1.0);
  CHECK_THROWS_AS(dpp::alpha_beta(2.0, 2), BadExponent);
  CHECK_THROWS_AS(dpp::alpha_beta(1.5, 2), BadExponent);
  CHECK_THROWS_AS(dpp::alpha_beta(kInf, 2), BadExponent);
}

TEST_CASE("dpp_apply is exact on affine fields") {
  const auto dom = build_grid(DomainDescriptor::ball(2, 1.0), 0.2, 0.05);
  Eigen::VectorXd a(2);
  a << 0.8, -0.6;
  const auto u = field_from(dom, [&](const Eigen::VectorXd& z) { return a.dot(z) + 0.3; });
  for (const double p : {2.0, 4.0, kInf}) {
    const auto params = GameParams::make(2, p, 0.2);
    const auto v = dpp::dpp_apply(u, params);
    CHECK(v.residual <= 1e-14);
    CHECK((v.values - u.values).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("dpp_apply preserves constants and strip values") {
  const auto dom = build_grid(DomainDescriptor::ball(2, 1.0), 0.2, 0.05);
  const auto u = field_from(dom, [](const Eigen::VectorXd&) { return 0.7; });
  const auto v = dpp::dpp_apply(u, GameParams::make(2, 4.0, 0.2));
  CHECK(v.residual == 0.0);
  for (int id = dom.interior_count(); id < dom.node_count(); ++id)
    CHECK(v.values[id] == u.values[id]);
}

TEST_CASE("dpp_apply quadratic shift approaches eps^2 n/(n+2)") {
  const double eps = 0.2;
  double prev_err = 1e9;
  for (const double h : {0.05, 0.025}) {
    const auto dom = build_grid(DomainDescriptor::ball(2, 1.0), eps, h);
    const auto u = field_from(dom, [](const Eigen::VectorXd& z) { return z.squaredNorm(); });
    const auto v = dpp::dpp_apply(u, GameParams::make(2, 2.0, eps));
    const int center = dom.nearest_node(Eigen::VectorXd::Zero(2));
    const double shift = v.values[center] - u.values[center];
    const double exact = eps * eps * 2.0 / 4.0;  // analytic ball second moment
    const double err = std::abs(shift - exact);
    CHECK(err < prev_err);
    CHECK(err < 2.0 * h * h);  // O(h^2)
    prev_err = err;
  }
}

TEST_CASE("dpp_apply is monotone and nonexpansive") {
  const auto dom = build_grid(DomainDescriptor::ball(1, 1.0), 0.2, 0.05);
  const auto params = GameParams::make(1, 4.0, 0.2);
  rng::Stream rng(31, 0);
  for (int trial = 0; trial < 25; ++trial) {
    dpp::ValueField u, w;
    u.domain = &dom;
    w.domain = &dom;
    u.values.resize(dom.node_count());
    w.values.resize(dom.node_count());
    for (int id = 0; id < dom.node_count(); ++id) {
      u.values[id] = 2.0 * rng.next_double() - 1.0;
      w.values[id] = u.values[id] + rng.next_double();  // w >= u
    }
    const auto Tu = dpp::dpp_apply(u, params);
    const auto Tw = dpp::dpp_apply(w, params);
    CHECK((Tw.values - Tu.values).minCoeff() >= -1e-15);
    CHECK((Tw.values - Tu.values).cwiseAbs().maxCoeff() <=
          (w.values - u.values).cwiseAbs().maxCoeff() + 1e-15);
  }
}

TEST_CASE("missing boundary data is rejected") {
  const auto dom = build_grid(DomainDescriptor::ball(1, 1.0), 0.2, 0.05);
  dpp::ValueField u = field_from(dom, [](const Eigen::VectorXd& z) { return z[0]; });
  u.values[dom.interior_count()] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(dpp::dpp_apply(u, GameParams::make(1, 2.0, 0.2)), MissingBoundaryData);

  std::unordered_map<int, double> partial;  // one strip node missing
  for (int id = dom.interior_count() + 1; id < dom.node_count(); ++id) partial[id] = 0.0;
  CHECK_THROWS_AS(dpp::dpp_solve(dom, dpp::Payoff::custom_table(partial),
                                 GameParams::make(1, 2.0, 0.2)),
                  MissingBoundaryData);
}

TEST_CASE("affine payoff solves in one sweep") {
  const auto dom = build_grid(DomainDescriptor::ball(2, 1.0), 0.2, 0.05);
  for (const double p : {2.0, 4.0, kInf}) {
    dpp::SolveOptions opt;
    opt.tol = 1e-14;
    opt.max_iter = 50;
    const auto field =
        dpp::dpp_solve(dom, dpp::Payoff::coordinate(0), GameParams::make(2, p, 0.2), opt);
    CHECK(field.converged);
    CHECK(field.iterations == 1);
    CHECK(field.residual <= 1e-14);
  }
}

TEST_CASE("1-D ramp solution matches the dense linear-solve oracle") {
  Eigen::VectorXd c(1);
  c << 0.5;
  const auto dom = build_grid(DomainDescriptor::box(1, 0.5, c), 0.05, 0.0125);
  const auto ramp = dpp::Payoff::custom([](const Eigen::VectorXd& z) {
    return z[0] >= 0.5 ? 1.0 : 0.0;  // only read on strip nodes
  });
  dpp::SolveOptions opt;
  opt.tol = 1e-12;
  opt.max_iter = 200000;
  std::vector<double> residuals;
  const auto field = dpp::dpp_solve(dom, ramp, GameParams::make(1, 2.0, 0.05), opt, &residuals);
  CHECK(field.converged);
  CHECK(static_cast<int>(residuals.size()) == field.iterations);

  const Eigen::VectorXd direct = oracles::dense_dpp_solve_p2(dom, ramp);
  double max_diff = 0.0, max_dev = 0.0;
  for (int id = 0; id < dom.interior_count(); ++id) {
    max_diff = std::max(max_diff, std::abs(field.values[id] - direct[id]));
    max_dev = std::max(max_dev, std::abs(field.values[id] - dom.position(id)[0]));
  }
  CHECK(max_diff <= 1e-7);
  CHECK(max_dev <= 2.0 * 0.05);  // within 2 eps of the linear ramp

  // solved field is a fixed point to tolerance, and bounded by the payoff range
  const auto applied = dpp::dpp_apply(field, GameParams::make(1, 2.0, 0.05));
  CHECK((applied.values - field.values).cwiseAbs().maxCoeff() <= opt.tol);
  CHECK(field.values.minCoeff() >= 0.0 - 1e-15);
  CHECK(field.values.maxCoeff() <= 1.0 + 1e-15);
}

TEST_CASE("solve is comparison monotone in the payoff") {
  Eigen::VectorXd c(1);
  c << 0.5;
  const auto dom = build_grid(DomainDescriptor::box(1, 0.5, c), 0.05, 0.0125);
  const auto params = GameParams::make(1, 4.0, 0.05);
  dpp::SolveOptions opt;
  opt.tol = 1e-12;
  const auto f1 = dpp::Payoff::custom([](const Eigen::VectorXd& z) { return z[0] >= 0.5 ? 1.0 : 0.0; });
  const auto f2 = dpp::Payoff::custom([](const Eigen::VectorXd& z) { return z[0] >= 0.5 ? 1.3 : 0.1; });
  const auto u1 = dpp::dpp_solve(dom, f1, params, opt);
  const auto u2 = dpp::dpp_solve(dom, f2, params, opt);
  CHECK((u2.values - u1.values).minCoeff() >= -1e-10);
}

TEST_CASE("iteration cap raises the NotConverged flag") {
  Eigen::VectorXd c(1);
  c << 0.5;
  const auto dom = build_grid(DomainDescriptor::box(1, 0.5, c), 0.05, 0.0125);
  const auto ramp = dpp::Payoff::custom([](const Eigen::VectorXd& z) { return z[0] >= 0.5 ? 1.0 : 0.0; });
  dpp::SolveOptions opt;
  opt.tol = 1e-12;
  opt.max_iter = 3;
  const auto field = dpp::dpp_solve(dom, ramp, GameParams::make(1, kInf, 0.05), opt);
  CHECK(!field.converged);
  CHECK(field.iterations == 3);
}

TEST_CASE("damped sweeps converge to the same fixed point") {
  Eigen::VectorXd c(1);
  c << 0.5;
  const auto dom = build_grid(DomainDescriptor::box(1, 0.5, c), 0.05, 0.0125);
  const auto ramp = dpp::Payoff::custom([](const Eigen::VectorXd& z) { return z[0] >= 0.5 ? 1.0 : 0.0; });
  dpp::SolveOptions opt;
  opt.tol = 1e-11;
  const auto u1 = dpp::dpp_solve(dom, ramp, GameParams::make(1, 2.0, 0.05), opt);
  opt.damping = 0.7;
  opt.tol = 0.7e-11;  // residual scales with the damping factor
  const auto u2 = dpp::dpp_solve(dom, ramp, GameParams::make(1, 2.0, 0.05), opt);
  CHECK((u1.values - u2.values).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("p_laplacian_eval on reference functions") {
  Eigen::VectorXd x(2);
  x << 0.5, 0.0;
  const auto affine = [](const Eigen::VectorXd& z) { return 3.0 * z[0] - z[1] + 1.0; };
  CHECK(std::abs(dpp::p_laplacian_eval(affine, x, 7.0)) <= 1e-6);
  CHECK(std::abs(dpp::p_laplacian_eval(affine, x, kInf)) <= 1e-6);

  const auto quad = [](const Eigen::VectorXd& z) { return z.squaredNorm(); };
  CHECK(dpp::p_laplacian_eval(quad, x, 2.0) == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(dpp::p_laplacian_eval(quad, x, kInf) == doctest::Approx(2.0).epsilon(1e-6));

  // radial solution |z|^((p-n)/(p-1)) for n=2, p=4: the operator vanishes
  // away from the origin, and the finite-difference value shrinks with step
  const auto radial = [](const Eigen::VectorXd& z) { return std::pow(z.norm(), 2.0 / 3.0); };
  dpp::FdOptions coarse, fine;
  coarse.step_scale = 1e-3;
  fine.step_scale = 1e-4;
  const double v_coarse = std::abs(dpp::p_laplacian_eval(radial, x, 4.0, coarse));
  const double v_fine = std::abs(dpp::p_laplacian_eval(radial, x, 4.0, fine));
  CHECK(v_coarse <= 1e-4);
  CHECK(v_fine <= v_coarse);

  Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(dpp::p_laplacian_eval(quad, origin, 2.0), VanishingGradient);
  CHECK_THROWS_AS(dpp::p_laplacian_eval(quad, x, 1.0), BadExponent);
}

TEST_CASE("expansion residual vanishes for affine functions") {
  Eigen::VectorXd x(2);
  x << 0.3, -0.2;
  const auto affine = [](const Eigen::VectorXd& z) { return 2.0 * z[0] + z[1] - 0.4; };
  const auto result = dpp::expansion_check(affine, x, GameParams::make(2, 4.0, 1.0),
                                           {0.1, 0.05, 0.025});
  for (const auto& row : result.rows) CHECK(std::abs(row.remainder) <= 1e-13);
  CHECK(std::abs(result.predicted_limit) <= 1e-6);
}

TEST_CASE("expansion residual of |z|^2") {
  Eigen::VectorXd x(2);
  x << 0.5, 0.0;
  const auto quad = [](const Eigen::VectorXd& z) { return z.squaredNorm(); };

  // pure tug-of-war: r/eps^2 = 1 exactly for the quadratic
  const auto inf_result =
      dpp::expansion_check(quad, x, GameParams::make(2, kInf, 1.0), {0.1, 0.05});
  for (const auto& row : inf_result.rows)
    CHECK(row.remainder_over_eps2 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(inf_result.predicted_limit == doctest::Approx(1.0).epsilon(1e-6));

  // random walk: r/eps^2 = Delta u / (2(n+2)) = 1/2
  const auto walk_result =
      dpp::expansion_check(quad, x, GameParams::make(2, 2.0, 1.0), {0.1, 0.05});
  for (const auto& row : walk_result.rows)
    CHECK(row.remainder_over_eps2 == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(walk_result.predicted_limit == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("expansion residual of the radial p-harmonic function decays") {
  Eigen::VectorXd x(2);
  x << 0.5, 0.0;
  const auto radial = [](const Eigen::VectorXd& z) { return std::pow(z.norm(), 2.0 / 3.0); };
  const auto result =
      dpp::expansion_check(radial, x, GameParams::make(2, 4.0, 1.0), {0.08, 0.04, 0.02});
  CHECK(std::abs(result.rows[1].remainder_over_eps2) <
        0.5 * std::abs(result.rows[0].remainder_over_eps2));
  CHECK(std::abs(result.rows[2].remainder_over_eps2) <
        0.5 * std::abs(result.rows[1].remainder_over_eps2));
  CHECK(std::abs(result.predicted_limit) <= 1e-4);
}
