#include "towlab/matrixlab.hpp"

#include <cmath>

#include "towlab/common.hpp"

namespace towlab::matrixlab {

namespace {

void check_unit(const Eigen::VectorXd& eta) {
  if (std::abs(eta.norm() - 1.0) > 1e-12) throw NotUnit("eta must be a unit vector");
}

}  // namespace

Eigen::MatrixXd projection_matrix(const Eigen::VectorXd& eta) {
  check_unit(eta);
  return eta * eta.transpose();
}

Eigen::MatrixXd reflection_matrix(const Eigen::VectorXd& eta) {
  check_unit(eta);
  const int n = static_cast<int>(eta.size());
  return Eigen::MatrixXd::Identity(n, n) - 2.0 * eta * eta.transpose();
}

Eigen::MatrixXd coefficient_matrix_A(const Eigen::VectorXd& eta, double p) {
  check_unit(eta);
  if (!(p > 1.0)) throw BadExponent("coefficient matrix requires p > 1");
  const int n = static_cast<int>(eta.size());
  const Eigen::MatrixXd P = eta * eta.transpose();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd A(2 * n, 2 * n);
  A.topLeftCorner(n, n) = I + (p - 2.0) * P;
  A.topRightCorner(n, n) = I - p * P;
  A.bottomLeftCorner(n, n) = I - p * P;
  A.bottomRightCorner(n, n) = I + (p - 2.0) * P;
  return A;
}

Eigen::MatrixXd infinity_coefficient_matrix(const Eigen::VectorXd& eta) {
  check_unit(eta);
  const int n = static_cast<int>(eta.size());
  const Eigen::MatrixXd P = eta * eta.transpose();
  Eigen::MatrixXd A(2 * n, 2 * n);
  A.topLeftCorner(n, n) = P;
  A.topRightCorner(n, n) = -P;
  A.bottomLeftCorner(n, n) = -P;
  A.bottomRightCorner(n, n) = P;
  return A;
}

SpectralReport spectral_analysis(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw DimensionMismatch("matrix must be square");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw NotSymmetric("matrix is not symmetric within 1e-12");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A);
  SpectralReport report;
  report.eigenvalues = solver.eigenvalues();
  report.eigenvectors = solver.eigenvectors();
  report.norm = report.eigenvalues.cwiseAbs().maxCoeff();
  report.psd_tol = 1e-10 * report.norm;
  report.psd = report.eigenvalues.minCoeff() >= -report.psd_tol;
  for (int i = 0; i < report.eigenvalues.size(); ++i) {
    const Eigen::VectorXd r =
        A * report.eigenvectors.col(i) - report.eigenvalues[i] * report.eigenvectors.col(i);
    report.max_residual = std::max(report.max_residual, r.norm());
  }
  return report;
}

ComparisonFn ComparisonFn::make(double C, double delta) {
  if (C < 0) throw Error("Hoelder constant must be nonnegative");
  // delta = 1 gives the Lipschitz ratio, admissible for seminorm work; the
  // lemma and certificate paths demand delta < 1 themselves.
  if (!(delta > 0.0 && delta <= 1.0)) throw BadExponent("delta must lie in (0,1]");
  ComparisonFn cf;
  cf.C = C;
  cf.delta = delta;
  return cf;
}

ComparisonFn ComparisonFn::localized(double C, double delta, Eigen::VectorXd z0, double weight) {
  ComparisonFn cf = make(C, delta);
  cf.z0 = std::move(z0);
  cf.loc_weight = weight;
  return cf;
}

double ComparisonFn::value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  double v = C * std::pow((x - y).norm(), delta);
  if (loc_weight != 0.0 && z0) v += loc_weight * (x - *z0).squaredNorm();
  return v;
}

HessianBlocks comparison_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                 const ComparisonFn& cf) {
  if (x.size() != y.size()) throw DimensionMismatch("points have different dimensions");
  const Eigen::VectorXd d = x - y;
  const double dist = d.norm();
  if (dist < 1e-12) throw CoincidentPoints("comparison Hessian needs x != y");
  const int n = static_cast<int>(x.size());
  const Eigen::VectorXd eta = d / dist;
  const double c = cf.C * cf.delta * std::pow(dist, cf.delta - 2.0);

  HessianBlocks out;
  out.dx = c * d;
  out.dy = -out.dx;
  out.M = c * ((cf.delta - 2.0) * (eta * eta.transpose()) + Eigen::MatrixXd::Identity(n, n));
  out.H.resize(2 * n, 2 * n);
  out.H.topLeftCorner(n, n) = out.M;
  out.H.topRightCorner(n, n) = -out.M;
  out.H.bottomLeftCorner(n, n) = -out.M;
  out.H.bottomRightCorner(n, n) = out.M;
  return out;
}

Eigen::MatrixXd m_squared_formula(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                  const ComparisonFn& cf) {
  if (x.size() != y.size()) throw DimensionMismatch("points have different dimensions");
  const Eigen::VectorXd d = x - y;
  const double dist = d.norm();
  if (dist < 1e-12) throw CoincidentPoints("M^2 formula needs x != y");
  const int n = static_cast<int>(x.size());
  const Eigen::VectorXd eta = d / dist;
  const double c2 = cf.C * cf.C * cf.delta * cf.delta * std::pow(dist, 2.0 * (cf.delta - 2.0));
  // (delta-2)^2 + 2(delta-2) collapses to delta(delta-2) on the eta direction.
  return c2 * (cf.delta * (cf.delta - 2.0) * (eta * eta.transpose()) +
               Eigen::MatrixXd::Identity(n, n));
}

double trace_product(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() != A.cols() || B.rows() != B.cols() || A.rows() != B.rows())
    throw DimensionMismatch("trace_product needs conformable square matrices");
  return A.cwiseProduct(B.transpose()).sum();
}

double trace_coeff_hessian_closed(double p, double C, double delta, double dist) {
  return 4.0 * (p - 1.0) * C * delta * std::pow(dist, delta - 2.0) * (delta - 1.0);
}

double trace_identity_hessian_closed(int n, double C, double delta, double dist) {
  return 2.0 * C * delta * std::pow(dist, delta - 2.0) * (delta - 2.0 + n);
}

double trace_infinity_hessian_closed(double C, double delta, double dist) {
  return 4.0 * C * delta * std::pow(dist, delta - 2.0) * (delta - 1.0);
}

namespace {

MeanIdentityResult finish_identity(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double eps,
                                   double quad_value) {
  MeanIdentityResult out;
  out.quadrature = quad_value;
  const int n = static_cast<int>(A.rows());
  out.exact = eps * eps / (n + 2.0) * B.cwiseProduct(A).sum();  // tr(B^T A)
  out.abs_error = std::abs(out.quadrature - out.exact);
  return out;
}

}  // namespace

MeanIdentityResult quadratic_mean_identity_grid(const Eigen::MatrixXd& A,
                                                const Eigen::MatrixXd& B, double eps,
                                                int points_per_axis) {
  if (A.rows() != B.rows() || A.cols() != B.cols() || A.rows() != A.cols())
    throw DimensionMismatch("A and B must be square of equal size");
  const auto g = [&](const Eigen::VectorXd& h) { return (A * h).dot(B * h); };
  const double v = quadrature::ball_average_tensor(g, static_cast<int>(A.rows()), eps,
                                                   points_per_axis);
  return finish_identity(A, B, eps, v);
}

MeanIdentityResult quadratic_mean_identity_mc(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                              double eps, std::int64_t n_mc, std::uint64_t seed) {
  if (A.rows() != B.rows() || A.cols() != B.cols() || A.rows() != A.cols())
    throw DimensionMismatch("A and B must be square of equal size");
  const auto g = [&](const Eigen::VectorXd& h) { return (A * h).dot(B * h); };
  const auto mc = quadrature::ball_average_mc(g, static_cast<int>(A.rows()), eps, n_mc, seed);
  return finish_identity(A, B, eps, mc.mean);
}

LemmaResult lemma_negativity_check(const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                                   const ComparisonFn& cf, const std::vector<double>& eps_list,
                                   const quadrature::BallQuadSpec& quad) {
  if (x0.size() != y0.size()) throw DimensionMismatch("points have different dimensions");
  if (cf.loc_weight != 0.0) throw Error("lemma check requires loc_weight = 0");
  if (!(cf.delta < 1.0)) throw BadExponent("lemma check requires delta < 1");
  const int n = static_cast<int>(x0.size());
  const Eigen::VectorXd d = x0 - y0;
  const double dist = d.norm();
  if (dist < 1e-12) throw CoincidentPoints("lemma check needs x0 != y0");
  const Eigen::VectorXd eta = d / dist;
  const Eigen::MatrixXd R = reflection_matrix(eta);
  const double f0 = cf.value(x0, y0);

  LemmaResult result;
  result.dist = dist;
  for (const double eps : eps_list) {
    if (eps > dist / 4.0) throw PointsTooClose("need eps <= |x0-y0|/4");
    LemmaRow row;
    row.eps = eps;
    row.integral = quadrature::ball_average(
                       [&](const Eigen::VectorXd& h) { return cf.value(x0 + h, y0 + R * h); }, n,
                       eps, quad) -
                   f0;
    row.taylor = eps * eps / (2.0 * (n + 2.0)) * 4.0 * cf.C * cf.delta *
                 std::pow(dist, cf.delta - 2.0) * (cf.delta - 1.0);
    row.ratio = row.integral / row.taylor;
    row.negative = row.integral < 0.0;
    row.identity_integral = quadrature::ball_average(
                                [&](const Eigen::VectorXd& h) { return cf.value(x0 + h, y0 + h); },
                                n, eps, quad) -
                            f0;
    row.point_reflection_integral =
        quadrature::ball_average(
            [&](const Eigen::VectorXd& h) { return cf.value(x0 + h, y0 - h); }, n, eps, quad) -
        f0;
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace towlab::matrixlab
