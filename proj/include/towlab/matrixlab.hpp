#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "towlab/quadrature.hpp"

namespace towlab::matrixlab {

// Rank-one projection eta (x) eta for a unit vector.
Eigen::MatrixXd projection_matrix(const Eigen::VectorXd& eta);

// Reflection I - 2 eta (x) eta across the hyperplane orthogonal to eta.
Eigen::MatrixXd reflection_matrix(const Eigen::VectorXd& eta);

// Coupling coefficient matrix
//   [[I + (p-2) P,  I - p P], [I - p P,  I + (p-2) P]],  P = eta (x) eta,
// positive semi-definite for p > 1 with spectrum {0 x n, 2 x (n-1), 2(p-1)}.
Eigen::MatrixXd coefficient_matrix_A(const Eigen::VectorXd& eta, double p);

// The p = infinity counterpart [[P, -P], [-P, P]].
Eigen::MatrixXd infinity_coefficient_matrix(const Eigen::VectorXd& eta);

struct SpectralReport {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns matching eigenvalues
  double norm = 0.0;             // spectral norm max|lambda|
  double psd_tol = 0.0;          // 1e-10 * norm
  bool psd = false;              // min eigenvalue >= -psd_tol
  double max_residual = 0.0;     // max_i |A v_i - lambda_i v_i|
};

SpectralReport spectral_analysis(const Eigen::MatrixXd& A);

// Comparison function C |x-y|^delta + loc_weight |x-z0|^2.
struct ComparisonFn {
  double C = 1.0;
  double delta = 0.5;
  std::optional<Eigen::VectorXd> z0;
  double loc_weight = 0.0;

  static ComparisonFn make(double C, double delta);
  static ComparisonFn localized(double C, double delta, Eigen::VectorXd z0, double weight = 2.0);
  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
};

struct HessianBlocks {
  Eigen::VectorXd dx, dy;  // gradient blocks of C|x-y|^delta
  Eigen::MatrixXd M;       // C delta |x-y|^(delta-2) ((delta-2) P + I)
  Eigen::MatrixXd H;       // [[M, -M], [-M, M]]
};

// Analytic derivatives of the Hoelder part C|x-y|^delta alone; the
// localization term contributes 4*loc/2... i.e. 2*loc_weight*I to the xx
// block and 2*loc_weight*(x - z0) to dx, added by the caller where needed.
HessianBlocks comparison_hessian(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                 const ComparisonFn& cf);

// Closed form of M*M:  C^2 delta^2 |x-y|^(2(delta-2)) (delta(delta-2) P + I).
Eigen::MatrixXd m_squared_formula(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                  const ComparisonFn& cf);

double trace_product(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// Closed forms for trace_product against the comparison Hessian H:
//   tr(A(eta,p) H)            = 4 (p-1) C delta d^(delta-2) (delta-1)
//   tr(I_2n H)                = 2 C delta d^(delta-2) (delta-2+n)
//   tr([[P,-P],[-P,P]] H)     = 4 C delta d^(delta-2) (delta-1)
double trace_coeff_hessian_closed(double p, double C, double delta, double dist);
double trace_identity_hessian_closed(int n, double C, double delta, double dist);
double trace_infinity_hessian_closed(double C, double delta, double dist);

struct MeanIdentityResult {
  double quadrature = 0.0;
  double exact = 0.0;  // eps^2/(n+2) tr(B^T A)
  double abs_error = 0.0;
};

// Ball average of <Ah, Bh> against the exact second-moment value, by
// midpoint tensor grid or by seeded Monte Carlo.
MeanIdentityResult quadratic_mean_identity_grid(const Eigen::MatrixXd& A,
                                                const Eigen::MatrixXd& B, double eps,
                                                int points_per_axis);
MeanIdentityResult quadratic_mean_identity_mc(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                              double eps, std::int64_t n_mc, std::uint64_t seed);

struct LemmaRow {
  double eps = 0.0;
  double integral = 0.0;          // reflection-coupled ball average minus f
  double taylor = 0.0;            // eps^2/(2(n+2)) * 4 C delta d^(delta-2) (delta-1)
  double ratio = 0.0;             // integral / taylor
  bool negative = false;
  double identity_integral = 0.0;  // identity coupling: exactly 0
  double point_reflection_integral = 0.0;  // h -> -h coupling: positive for n >= 2
};

struct LemmaResult {
  std::vector<LemmaRow> rows;
  double dist = 0.0;
};

// Averages f(x0+h, y0+R(h)) - f(x0,y0) over B_eps(0) with R the reflection
// across span(x0-y0)^perp, against the second-order prediction, for each eps.
// Identity and point-reflection couplings are evaluated for contrast.
LemmaResult lemma_negativity_check(const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                                   const ComparisonFn& cf, const std::vector<double>& eps_list,
                                   const quadrature::BallQuadSpec& quad = {});

}  // namespace towlab::matrixlab
