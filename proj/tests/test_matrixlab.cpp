#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "towlab/dpp.hpp"
#include "towlab/matrixlab.hpp"
#include "towlab/rng.hpp"

using namespace towlab;
using namespace towlab::matrixlab;

namespace {

Eigen::VectorXd random_unit(rng::Stream& s, int n) {
  Eigen::VectorXd v(n);
  for (;;) {
    for (int i = 0; i < n; ++i) v[i] = 2.0 * s.next_double() - 1.0;
    const double norm = v.norm();
    if (norm > 1e-3) return v / norm;
  }
}

}  // namespace

TEST_CASE("projection matrix") {
  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(2, 0);
  const Eigen::MatrixXd P = projection_matrix(e1);
  CHECK(P(0, 0) == 1.0);
  CHECK(P(0, 1) == 0.0);
  CHECK(P(1, 0) == 0.0);
  CHECK(P(1, 1) == 0.0);

  Eigen::VectorXd diag(2);
  diag << 1.0, 1.0;
  diag /= std::sqrt(2.0);
  const Eigen::MatrixXd Pd = projection_matrix(diag);
  CHECK((Pd.array() - 0.5).abs().maxCoeff() <= 1e-15);

  rng::Stream s(5, 0);
  for (const int n : {1, 2, 3}) {
    const Eigen::VectorXd eta = random_unit(s, n);
    const Eigen::MatrixXd Pr = projection_matrix(eta);
    CHECK((Pr * Pr - Pr).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((Pr * eta - eta).norm() <= 1e-14);
    if (n > 1) {
      Eigen::VectorXd v = random_unit(s, n);
      v -= eta.dot(v) * eta;  // orthogonal component
      CHECK((Pr * v).norm() <= 1e-13);
    }
  }
  CHECK_THROWS_AS(projection_matrix(2.0 * e1), NotUnit);
}

TEST_CASE("reflection matrix") {
  Eigen::VectorXd one(1);
  one << 1.0;
  CHECK(reflection_matrix(one)(0, 0) == -1.0);

  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(2, 0);
  const Eigen::MatrixXd R = reflection_matrix(e1);
  Eigen::VectorXd h(2);
  h << 0.3, 0.4;
  const Eigen::VectorXd rh = R * h;
  CHECK(rh[0] == doctest::Approx(-0.3));
  CHECK(rh[1] == doctest::Approx(0.4));
  CHECK(rh.norm() == doctest::Approx(0.5));

  rng::Stream s(6, 0);
  for (const int n : {1, 2, 3}) {
    const Eigen::VectorXd eta = random_unit(s, n);
    const Eigen::MatrixXd Rr = reflection_matrix(eta);
    CHECK((Rr * Rr - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((Rr * eta + eta).norm() <= 1e-14);
    CHECK(Rr.determinant() == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("coupling coefficient matrix") {
  Eigen::VectorXd one(1);
  one << 1.0;
  const Eigen::MatrixXd A1 = coefficient_matrix_A(one, 2.0);
  CHECK(A1(0, 0) == 1.0);
  CHECK(A1(0, 1) == -1.0);
  CHECK(A1(1, 0) == -1.0);
  CHECK(A1(1, 1) == 1.0);

  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(2, 0);
  const Eigen::MatrixXd A3 = coefficient_matrix_A(e1, 3.0);
  CHECK(A3(0, 0) == doctest::Approx(2.0));
  CHECK(A3(0, 2) == doctest::Approx(-2.0));
  CHECK(A3(1, 3) == doctest::Approx(1.0));

  rng::Stream s(7, 0);
  for (const int n : {1, 2, 3}) {
    for (const double p : {1.5, 2.0, 3.0, 10.0}) {
      const Eigen::VectorXd eta = random_unit(s, n);
      const Eigen::MatrixXd A = coefficient_matrix_A(eta, p);
      Eigen::VectorXd kernel(2 * n);
      kernel << eta, eta;
      CHECK((A * kernel).norm() <= 1e-12);
      CHECK((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0);
      // p = 2 equals the reflection block form exactly
      if (p == 2.0) {
        const Eigen::MatrixXd R = reflection_matrix(eta);
        CHECK((A.topRightCorner(n, n) - R).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK((A.topLeftCorner(n, n) - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() ==
              0.0);
      }
    }
  }
  CHECK_THROWS_AS(coefficient_matrix_A(e1, 1.0), BadExponent);
  CHECK_THROWS_AS(coefficient_matrix_A(0.9 * e1, 2.0), NotUnit);
}

TEST_CASE("spectral analysis of the coefficient matrix") {
  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(2, 0);
  const auto r2 = spectral_analysis(coefficient_matrix_A(e1, 2.0));
  const Eigen::Vector4d expect2(0.0, 0.0, 2.0, 2.0);
  CHECK((r2.eigenvalues - expect2).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(r2.psd);

  const auto r3 = spectral_analysis(coefficient_matrix_A(e1, 3.0));
  const Eigen::Vector4d expect3(0.0, 0.0, 2.0, 4.0);
  CHECK((r3.eigenvalues - expect3).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(r3.max_residual <= 1e-10 * r3.norm);

  const auto rid = spectral_analysis(Eigen::MatrixXd::Identity(4, 4));
  CHECK((rid.eigenvalues.array() - 1.0).abs().maxCoeff() <= 1e-14);

  // kernel directions (eta, eta) and (xi, -xi) for xi orthogonal to eta
  rng::Stream s(8, 0);
  for (const double p : {1.5, 3.0, 10.0}) {
    const Eigen::VectorXd eta = random_unit(s, 3);
    const Eigen::MatrixXd A = coefficient_matrix_A(eta, p);
    Eigen::VectorXd xi = random_unit(s, 3);
    xi -= eta.dot(xi) * eta;
    xi.normalize();
    Eigen::VectorXd v(6);
    v << xi, -xi;
    CHECK((A * v).norm() <= 1e-12);
    CHECK(spectral_analysis(A).psd);
  }

  Eigen::MatrixXd asym = Eigen::MatrixXd::Zero(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(spectral_analysis(asym), NotSymmetric);
}

TEST_CASE("comparison Hessian blocks") {
  Eigen::VectorXd x(2), y(2);
  x << 1.0, 0.0;
  y << 0.0, 0.0;
  const auto cf = ComparisonFn::make(1.0, 0.5);
  const auto blocks = comparison_hessian(x, y, cf);

  // H annihilates (v, v) for every v
  rng::Stream s(9, 0);
  for (int k = 0; k < 10; ++k) {
    Eigen::VectorXd v = random_unit(s, 2);
    Eigen::VectorXd vv(4);
    vv << v, v;
    CHECK((blocks.H * vv).norm() <= 1e-14);
  }

  // eigenvalue C delta (delta - 1) on eta at |x-y| = 1
  const Eigen::VectorXd eta = (x - y).normalized();
  CHECK((blocks.M * eta + 0.25 * eta).norm() <= 1e-14);

  // finite differences of f on the product space reproduce H and the gradient
  const auto f = [&](const Eigen::VectorXd& xy) {
    return cf.value(xy.head(2), xy.tail(2));
  };
  Eigen::VectorXd xy(4);
  xy << 0.7, -0.2, 0.1, 0.3;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  dpp::fd_derivatives(f, xy, 1e-5, grad, hess);
  const auto b = comparison_hessian(xy.head(2), xy.tail(2), cf);
  CHECK((grad.head(2) - b.dx).norm() <= 1e-8);
  CHECK((grad.tail(2) - b.dy).norm() <= 1e-8);
  CHECK((hess - b.H).cwiseAbs().maxCoeff() <= 1e-5 * b.H.cwiseAbs().maxCoeff());

  CHECK_THROWS_AS(comparison_hessian(x, x, cf), CoincidentPoints);
}

TEST_CASE("M^2 closed form equals the matrix product") {
  rng::Stream s(10, 0);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + static_cast<int>(s.next_below(3));
    const double C = 0.1 + 9.9 * s.next_double();
    const double delta = 0.05 + 0.9 * s.next_double();
    Eigen::VectorXd x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = 2.0 * s.next_double() - 1.0;
      y[i] = 2.0 * s.next_double() - 1.0;
    }
    if ((x - y).norm() < 1e-3) continue;
    const auto cf = ComparisonFn::make(C, delta);
    const auto blocks = comparison_hessian(x, y, cf);
    const Eigen::MatrixXd closed = m_squared_formula(x, y, cf);
    const Eigen::MatrixXd product = blocks.M * blocks.M;
    CHECK((closed - product).cwiseAbs().maxCoeff() <=
          1e-12 * product.cwiseAbs().maxCoeff());

    // eta eigenvalue c^2 (delta-1)^2, since delta(delta-2) + 1 = (delta-1)^2
    const Eigen::VectorXd eta = (x - y).normalized();
    const double c = C * delta * std::pow((x - y).norm(), delta - 2.0);
    CHECK(eta.dot(closed * eta) ==
          doctest::Approx(c * c * (delta - 1.0) * (delta - 1.0)).epsilon(1e-10));
  }

  // the eta eigenvalue vanishes as delta -> 1
  Eigen::VectorXd x(2), y(2);
  x << 1.0, 0.0;
  y << 0.0, 0.0;
  const auto cf = ComparisonFn::make(1.0, 0.999);
  const Eigen::VectorXd eta = (x - y).normalized();
  CHECK(std::abs(eta.dot(m_squared_formula(x, y, cf) * eta)) <= 1e-5);
}

TEST_CASE("trace identities") {
  Eigen::VectorXd x(2), y(2);
  x << 1.0, 0.0;
  y << 0.0, 0.0;
  const auto cf = ComparisonFn::make(1.0, 0.5);
  const auto blocks = comparison_hessian(x, y, cf);
  const Eigen::VectorXd eta = (x - y).normalized();

  CHECK(trace_product(coefficient_matrix_A(eta, 2.0), blocks.H) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(trace_product(Eigen::MatrixXd::Identity(4, 4), blocks.H) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(trace_product(infinity_coefficient_matrix(eta), blocks.H) ==
        doctest::Approx(-1.0).epsilon(1e-12));

  rng::Stream s(11, 0);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + static_cast<int>(s.next_below(3));
    const double p = 1.05 + 9.0 * s.next_double();
    const double C = 0.1 + 9.9 * s.next_double();
    const double delta = 0.05 + 0.9 * s.next_double();
    const double dist = 0.1 + 1.9 * s.next_double();
    const Eigen::VectorXd e = random_unit(s, n);
    const Eigen::VectorXd xx = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd yy = xx - dist * e;
    const auto cfk = ComparisonFn::make(C, delta);
    const auto bk = comparison_hessian(xx, yy, cfk);
    const double dense = trace_product(coefficient_matrix_A(e, p), bk.H);
    const double closed = trace_coeff_hessian_closed(p, C, delta, dist);
    CHECK(std::abs(dense - closed) <= 1e-10 * std::abs(closed));
    CHECK(closed < 0.0);
    const double dense_id = trace_product(Eigen::MatrixXd::Identity(2 * n, 2 * n), bk.H);
    const double closed_id = trace_identity_hessian_closed(n, C, delta, dist);
    CHECK(std::abs(dense_id - closed_id) <= 1e-10 * std::max(1.0, std::abs(closed_id)));
  }

  CHECK_THROWS_AS(trace_product(Eigen::MatrixXd::Identity(2, 2), blocks.H), DimensionMismatch);
}

TEST_CASE("quadratic mean-value identity") {
  const double eps = 0.3;
  const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);

  const auto diag = quadratic_mean_identity_grid(I2, I2, eps, 128);
  CHECK(diag.exact == doctest::Approx(eps * eps / 2.0).epsilon(1e-15));
  CHECK(diag.abs_error <= 1e-3 * diag.exact);

  // tr(I - 2P) = n - 2 = 0 in the plane
  const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(2, 0);
  const auto refl = quadratic_mean_identity_grid(I2, reflection_matrix(e1), eps, 128);
  CHECK(refl.exact == 0.0);
  CHECK(std::abs(refl.quadrature) <= 1e-3 * eps * eps);

  // skew-symmetric B: exact value 0, and the symmetric grid cancels exactly
  Eigen::MatrixXd skew(2, 2);
  skew << 0.0, 1.0, -1.0, 0.0;
  const auto sk = quadratic_mean_identity_grid(I2, skew, eps, 64);
  CHECK(sk.exact == 0.0);
  CHECK(std::abs(sk.quadrature) <= 1e-14);

  Eigen::MatrixXd A(2, 2), B(2, 2);
  A << 1.3, -0.4, 0.2, 0.9;
  B << 0.7, 0.5, -0.1, 1.4;
  const auto mc = quadratic_mean_identity_mc(A, B, eps, 200000, 123);
  CHECK(mc.abs_error <= 5.0 / std::sqrt(200000.0) * eps * eps * A.norm() * B.norm());

  // error decreases under grid refinement
  const auto coarse = quadratic_mean_identity_grid(A, B, eps, 32);
  const auto fine = quadratic_mean_identity_grid(A, B, eps, 256);
  CHECK(fine.abs_error < coarse.abs_error);
}

TEST_CASE("coupled test-function average is negative under reflection") {
  Eigen::VectorXd x0(2), y0(2);
  x0 << 0.5, 0.0;
  y0 << 0.0, 0.0;
  const auto cf = ComparisonFn::make(1.0, 0.5);
  const auto result = lemma_negativity_check(x0, y0, cf, {0.01}, {});
  const auto& row = result.rows[0];
  CHECK(row.negative);
  CHECK(std::abs(row.integral - row.taylor) <= 0.1 * std::abs(row.taylor));
  CHECK(std::abs(row.identity_integral) <= 1e-14);
  CHECK(row.point_reflection_integral > 0.0);

  // ratio tightens monotonically along a shrinking sweep
  const auto sweep = lemma_negativity_check(x0, y0, cf, {0.04, 0.02, 0.01}, {});
  double prev = std::abs(sweep.rows[0].ratio - 1.0);
  for (size_t k = 1; k < sweep.rows.size(); ++k) {
    const double cur = std::abs(sweep.rows[k].ratio - 1.0);
    CHECK(cur < prev);
    prev = cur;
  }

  // the (delta - 1) factor kills the prediction as delta -> 1
  const auto near1 = lemma_negativity_check(x0, y0, ComparisonFn::make(1.0, 0.999), {0.01}, {});
  CHECK(std::abs(near1.rows[0].integral) / (0.01 * 0.01) <= 1e-2);

  CHECK_THROWS_AS(lemma_negativity_check(x0, y0, cf, {0.2}, {}), PointsTooClose);
  CHECK_THROWS_AS(lemma_negativity_check(x0, x0, cf, {0.01}, {}), CoincidentPoints);
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(lemma_negativity_check(x0, y0, ComparisonFn::localized(1.0, 0.5, z0), {0.01}, {}),
                  Error);
}

TEST_CASE("comparison function value and localization") {
  Eigen::VectorXd x(2), y(2), z0(2);
  x << 0.5, 0.0;
  y << 0.1, 0.0;
  z0 << 0.0, 0.0;
  const auto plain = ComparisonFn::make(2.0, 0.5);
  CHECK(plain.value(x, y) == doctest::Approx(2.0 * std::pow(0.4, 0.5)));
  CHECK(plain.value(x, x) == 0.0);
  const auto loc = ComparisonFn::localized(2.0, 0.5, z0);
  CHECK(loc.loc_weight == 2.0);
  CHECK(loc.value(x, x) == doctest::Approx(2.0 * 0.25));
  CHECK_THROWS_AS(ComparisonFn::make(1.0, 1.5), BadExponent);
}
