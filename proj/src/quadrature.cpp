#include "towlab/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "towlab/common.hpp"
#include "towlab/rng.hpp"

namespace towlab::quadrature {

namespace {
constexpr double kPi = std::numbers::pi;
}

void gauss_legendre(int k, double a, double b, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  nodes.assign(k, 0.0);
  weights.assign(k, 0.0);
  const int half = (k + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Newton iteration on P_k from the Chebyshev initial guess.
    double x = std::cos(kPi * (i + 0.75) / (k + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= k; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = k * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= k; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = k * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = x;
    weights[i] = w;
    nodes[k - 1 - i] = -x;
    weights[k - 1 - i] = w;
  }
  const double mid = 0.5 * (a + b);
  const double halfw = 0.5 * (b - a);
  for (int i = 0; i < k; ++i) {
    nodes[i] = mid - halfw * nodes[i];  // ascending in [a, b]
    weights[i] *= halfw;
  }
}

double ball_average(const Fn& f, int n, double radius, const BallQuadSpec& spec) {
  if (n < 1 || n > 3) throw DimensionMismatch("ball_average supports n in {1,2,3}");
  std::vector<double> rn, rw;
  if (n == 1) {
    gauss_legendre(std::max(4, spec.radial), -radius, radius, rn, rw);
    KahanSum s;
    Eigen::VectorXd h(1);
    for (size_t i = 0; i < rn.size(); ++i) {
      h[0] = rn[i];
      s.add(rw[i] * f(h));
    }
    return s.value() / (2.0 * radius);
  }
  gauss_legendre(std::max(4, spec.radial), 0.0, radius, rn, rw);
  if (n == 2) {
    const int kth = std::max(8, spec.angular);
    KahanSum s;
    Eigen::VectorXd h(2);
    for (size_t i = 0; i < rn.size(); ++i) {
      const double r = rn[i];
      KahanSum ring;
      for (int j = 0; j < kth; ++j) {
        const double th = 2.0 * kPi * j / kth;
        h[0] = r * std::cos(th);
        h[1] = r * std::sin(th);
        ring.add(f(h));
      }
      s.add(rw[i] * r * ring.value() / kth);
    }
    // mean = (2/R^2) * int_0^R r * (sphere mean) dr
    return 2.0 * s.value() / (radius * radius);
  }
  // n == 3: Gauss-Legendre in u = cos(phi), trapezoid in theta.
  const int kth = std::max(8, spec.angular / 2);
  const int ku = std::max(8, spec.angular / 4);
  std::vector<double> un, uw;
  gauss_legendre(ku, -1.0, 1.0, un, uw);
  KahanSum s;
  Eigen::VectorXd h(3);
  for (size_t i = 0; i < rn.size(); ++i) {
    const double r = rn[i];
    KahanSum shell;
    for (int a = 0; a < ku; ++a) {
      const double u = un[a];
      const double rho = std::sqrt(std::max(0.0, 1.0 - u * u));
      KahanSum ring;
      for (int j = 0; j < kth; ++j) {
        const double th = 2.0 * kPi * j / kth;
        h[0] = r * rho * std::cos(th);
        h[1] = r * rho * std::sin(th);
        h[2] = r * u;
        ring.add(f(h));
      }
      shell.add(uw[a] * ring.value() / kth);
    }
    s.add(rw[i] * r * r * shell.value() / 2.0);
  }
  return 3.0 * s.value() / (radius * radius * radius);
}

double ball_average_tensor(const Fn& f, int n, double radius, int points_per_axis) {
  if (n < 1 || n > 3) throw DimensionMismatch("ball_average_tensor supports n in {1,2,3}");
  if (points_per_axis < 2) throw Error("points_per_axis must be >= 2");
  const double step = 2.0 * radius / points_per_axis;
  const double r2 = radius * radius;
  Eigen::VectorXi idx = Eigen::VectorXi::Zero(n);
  Eigen::VectorXd h(n);
  KahanSum s, wsum;
  for (;;) {
    double norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
      h[i] = -radius + (idx[i] + 0.5) * step;
      norm2 += h[i] * h[i];
    }
    // Cells fully inside carry weight 1; cells cut by the sphere carry their
    // inside-volume fraction (subsampled), so the boundary layer does not
    // bias the second moments.
    const double reach = 0.5 * step * std::sqrt(static_cast<double>(n));
    const double dist = std::sqrt(norm2);
    double w = 0.0;
    if (dist + reach < radius) {
      w = 1.0;
    } else if (dist - reach < radius) {
      const int sub = 8;
      Eigen::VectorXi si = Eigen::VectorXi::Zero(n);
      Eigen::VectorXd hs(n);
      int inside = 0, total = 0;
      for (;;) {
        double sn = 0.0;
        for (int i = 0; i < n; ++i) {
          hs[i] = h[i] + (-0.5 + (si[i] + 0.5) / sub) * step;
          sn += hs[i] * hs[i];
        }
        if (sn < r2) ++inside;
        ++total;
        int axis = n - 1;
        while (axis >= 0 && ++si[axis] >= sub) {
          si[axis] = 0;
          --axis;
        }
        if (axis < 0) break;
      }
      w = static_cast<double>(inside) / total;
    }
    if (w > 0.0) {
      s.add(w * f(h));
      wsum.add(w);
    }
    int axis = n - 1;
    while (axis >= 0 && ++idx[axis] >= points_per_axis) {
      idx[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  if (wsum.value() <= 0.0) throw Error("no tensor-grid cells inside the ball");
  return s.value() / wsum.value();
}

McResult ball_average_mc(const Fn& f, int n, double radius, std::int64_t n_samples,
                         std::uint64_t seed) {
  rng::Stream stream(seed, 0);
  KahanSum s, s2;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const double v = f(stream.uniform_in_ball(n, radius));
    s.add(v);
    s2.add(v * v);
  }
  McResult out;
  out.n_samples = n_samples;
  out.mean = s.value() / n_samples;
  const double var = std::max(0.0, s2.value() / n_samples - out.mean * out.mean);
  out.stderr_ = std::sqrt(var / n_samples);
  return out;
}

namespace {

// Golden-section refinement of a 1-D max bracketed by [lo, hi].
double golden_max(const std::function<double(double)>& g, double lo, double hi) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = g(x1), f2 = g(x2);
  for (int i = 0; i < 90; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = g(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = g(x1);
    }
  }
  return std::max(f1, f2);
}

}  // namespace

double sphere_max(const Fn& f, int n, double radius, int angular) {
  if (n < 1 || n > 3) throw DimensionMismatch("sphere_max supports n in {1,2,3}");
  if (n == 1) {
    Eigen::VectorXd h(1);
    h[0] = radius;
    const double a = f(h);
    h[0] = -radius;
    return std::max(a, f(h));
  }
  if (n == 2) {
    const int k = std::max(32, angular);
    Eigen::VectorXd h(2);
    auto eval = [&](double th) {
      h[0] = radius * std::cos(th);
      h[1] = radius * std::sin(th);
      return f(h);
    };
    int best = 0;
    double bestv = eval(0.0);
    for (int j = 1; j < k; ++j) {
      const double v = eval(2.0 * kPi * j / k);
      if (v > bestv) {
        bestv = v;
        best = j;
      }
    }
    const double th0 = 2.0 * kPi * (best - 1) / k;
    const double th1 = 2.0 * kPi * (best + 1) / k;
    return std::max(bestv, golden_max(eval, th0, th1));
  }
  // n == 3: lat-long scan followed by zoomed local grids.
  const int kth = std::max(32, angular / 8);
  const int kph = std::max(16, angular / 16);
  Eigen::VectorXd h(3);
  auto eval = [&](double th, double ph) {
    h[0] = radius * std::sin(ph) * std::cos(th);
    h[1] = radius * std::sin(ph) * std::sin(th);
    h[2] = radius * std::cos(ph);
    return f(h);
  };
  double bth = 0.0, bph = 0.0, bestv = eval(0.0, 0.0);
  for (int a = 0; a <= kph; ++a) {
    const double ph = kPi * a / kph;
    for (int j = 0; j < kth; ++j) {
      const double th = 2.0 * kPi * j / kth;
      const double v = eval(th, ph);
      if (v > bestv) {
        bestv = v;
        bth = th;
        bph = ph;
      }
    }
  }
  double wth = 2.0 * kPi / kth, wph = kPi / kph;
  for (int zoom = 0; zoom < 6; ++zoom) {
    double nbth = bth, nbph = bph;
    for (int a = -4; a <= 4; ++a) {
      for (int j = -4; j <= 4; ++j) {
        const double th = bth + j * wth / 4.0;
        const double ph = bph + a * wph / 4.0;
        const double v = eval(th, ph);
        if (v > bestv) {
          bestv = v;
          nbth = th;
          nbph = ph;
        }
      }
    }
    bth = nbth;
    bph = nbph;
    wth /= 4.0;
    wph /= 4.0;
  }
  return bestv;
}

}  // namespace towlab::quadrature
