#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "towlab/dpp.hpp"
#include "towlab/matrixlab.hpp"

namespace towlab::regularity {

struct RegionSpec {
  Eigen::VectorXd center;
  double radius = 0.25;
};

struct HolderReport {
  double delta = 0.0;
  double seminorm = 0.0;  // sup over pairs of |u(x)-u(y)| / |x-y|^delta
  int node_i = -1, node_j = -1;
  std::int64_t pairs = 0;
  bool exact = true;  // full scan vs stratified sample
  std::uint64_t seed = 0;
};

HolderReport holder_seminorm(const dpp::ValueField& u, double delta, const RegionSpec& region,
                             std::int64_t pair_budget = 10000000, std::uint64_t seed = 0,
                             int threads = 1);

struct GapReport {
  double theta = 0.0;  // max over pairs of u(x) - u(y) - fbar(x,y)
  int node_i = -1, node_j = -1;
  std::int64_t pairs = 0;
  bool exact = true;
  std::uint64_t seed = 0;
};

// theta <= 0 certifies the discrete Hoelder bound with the comparison
// function's constant on this field and region.
GapReport comparison_gap_search(const dpp::ValueField& u, const matrixlab::ComparisonFn& cf,
                                const RegionSpec& region, std::int64_t pair_budget = 10000000,
                                std::uint64_t seed = 0, int threads = 1);

// Smallest C on a bisection grid with comparison_gap_search theta <= 0 at the
// given exponent (no localization). Throws NoBracket when theta > 0 persists
// at c_max.
double calibrate_C(const dpp::ValueField& u, double delta, const RegionSpec& region,
                   double c_max = 1e6, double bisect_tol = 1e-9,
                   std::int64_t pair_budget = 10000000, std::uint64_t seed = 0, int threads = 1);

struct CertificateCheck {
  std::string name;
  double value = 0.0;
  double bound = 0.0;   // the value is required to be <= bound
  double margin = 0.0;  // bound - value
  bool pass = false;
  double tol = 0.0;  // slack the comparison was judged with
};

struct CertificateReport {
  int n = 0;
  double p = 2.0;
  double C = 0.0;
  double delta = 0.5;
  Eigen::VectorXd x0, y0;
  std::optional<Eigen::VectorXd> z0;
  double dist = 0.0;
  double mu = 0.0;
  double minimal_C = 0.0;   // smallest C closing the final inequality
  double worst_dist = 0.0;  // separation maximizing the required C (finite-p route)
  double L = 0.0;           // constant in the T2 <= L |x0-y0|^{-1} collapse
  std::vector<CertificateCheck> checks;
  bool pass = true;
};

// Evaluates the test-function side of the doubling-of-variables estimate
// chain: the coefficient-matrix spectrum, trace identities, the mu choice,
// the directional T1 bounds, the |X| norm bound, the T2 collapse, the T3
// trace, and the final contradiction inequality with its minimal constant.
// p = 2 additionally runs the Laplacian-specific eigenvalue route; p =
// infinity replaces the coefficient matrix by [[P,-P],[-P,P]].
CertificateReport ishii_lions_certificate(int n, double p, double C, double delta,
                                          const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                                          const std::optional<Eigen::VectorXd>& z0 = {});

}  // namespace towlab::regularity
