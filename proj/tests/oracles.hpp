#pragma once

// Test-only oracles, independent of the hyper-dual evaluation path.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace nakano::testing {

using ScalarFn = std::function<double(const std::vector<double>&)>;

inline std::vector<double> shifted(std::vector<double> x, const std::vector<double>& u, double hu,
                                   const std::vector<double>& v, double hv) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += hu * u[i] + hv * v[i];
  return x;
}

/// Richardson-extrapolated central difference of the directional derivative along u.
inline double richardson_first(const ScalarFn& f, const std::vector<double>& x, const std::vector<double>& u,
                               double h = 1e-3) {
  const std::vector<double> zero(x.size(), 0.0);
  auto d = [&](double s) { return (f(shifted(x, u, s, zero, 0)) - f(shifted(x, u, -s, zero, 0))) / (2 * s); };
  return (4.0 * d(h / 2) - d(h)) / 3.0;
}

/// Richardson-extrapolated central difference of u^T ∇²f v.
inline double richardson_mixed(const ScalarFn& f, const std::vector<double>& x, const std::vector<double>& u,
                               const std::vector<double>& v, double h = 1e-2) {
  auto d = [&](double s) {
    return (f(shifted(x, u, s, v, s)) - f(shifted(x, u, s, v, -s)) - f(shifted(x, u, -s, v, s)) +
            f(shifted(x, u, -s, v, -s))) /
           (4 * s * s);
  };
  return (4.0 * d(h / 2) - d(h)) / 3.0;
}

/// Random smooth expressions over x1, x2 whose domain is all of R^2.
class ExprCorpus {
 public:
  explicit ExprCorpus(unsigned seed) : rng_(seed) {}

  std::string next(int depth = 3) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 11);
    switch (pick(rng_)) {
      case 0: return "x1";
      case 1: return "x2";
      case 2: return literal();
      case 3: return "(" + next(depth - 1) + " + " + next(depth - 1) + ")";
      case 4: return "(" + next(depth - 1) + " - " + next(depth - 1) + ")";
      case 5: return "(" + next(depth - 1) + " * " + next(depth - 1) + ")";
      case 6: return "(" + next(depth - 1) + ") / (1 + abs2(" + next(depth - 1) + "))";
      case 7: return "exp(0.3 * sin(" + next(depth - 1) + "))";
      case 8: return "cos(" + next(depth - 1) + ")";
      case 9: return "log(1 + abs2(" + next(depth - 1) + "))";
      case 10: return "sqrt(2 + sin(" + next(depth - 1) + "))";
      default: return "(" + next(depth - 1) + ")^" + std::to_string(2 + static_cast<int>(rng_() % 2));
    }
  }

 private:
  std::string literal() {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", std::abs(u(rng_)));
    return buf;
  }
  std::mt19937 rng_;
};

}  // namespace nakano::testing
