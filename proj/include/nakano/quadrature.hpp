#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nakano/geometry.hpp"

namespace nakano {

enum class RuleKind {
  /// Tensor Gauss–Legendre on boxes and intervals; Gauss–Legendre in radius
  /// times trapezoid in angle on annuli. Other fibers fall back to BoxIndicator.
  GaussLegendre,
  /// Tensor Gauss–Legendre on the bounding box times the membership indicator.
  BoxIndicator,
  /// Scrambling-free Sobol points on the bounding box times the membership indicator.
  QuasiMonteCarlo,
};

struct QuadratureRule {
  RuleKind kind = RuleKind::GaussLegendre;
  /// Points per axis (Gauss–Legendre) or total samples (quasi-Monte Carlo).
  int order = 32;
  /// Results whose doubling estimate exceeds this are refused.
  double max_relative_error = 1e-4;
  bool allow_inaccurate = false;
};

/// Nodes in the fiber's real coordinates. Tube fibers integrate over their real
/// base only; their nodes carry zero imaginary parts.
struct NodeSet {
  std::vector<std::vector<double>> nodes;
  std::vector<double> weights;
};

struct GaussLegendre {
  std::vector<double> x;
  std::vector<double> w;
};
/// Nodes and weights on [-1, 1].
const GaussLegendre& gauss_legendre(int n);

NodeSet integration_nodes(const Domain& fiber, RuleKind kind, int order);

struct Integral {
  Eigen::MatrixXcd value;
  double error_estimate = 0.0;
  int order = 0;
};

using MatrixIntegrand = std::function<Eigen::MatrixXcd(std::span<const double>)>;

/// Entrywise quadrature at `rule.order`; the error estimate compares against
/// half the order (half the samples for quasi-Monte Carlo). Throws
/// NumericalError when the estimate exceeds rule.max_relative_error unless
/// allow_inaccurate is set.
Integral integrate(const MatrixIntegrand& f, const Domain& fiber, const QuadratureRule& rule);

/// Sum of values[i] * weights[i] in fixed pairwise order.
Eigen::MatrixXcd weighted_sum(const std::vector<Eigen::MatrixXcd>& values, const std::vector<double>& weights);

}  // namespace nakano
