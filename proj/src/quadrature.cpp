#include "nakano/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <boost/math/special_functions/legendre.hpp>
#include <boost/random/sobol.hpp>

#include "nakano/errors.hpp"
#include "nakano/parallel.hpp"

namespace nakano {

const GaussLegendre& gauss_legendre(int n) {
  if (n < 1) throw ConfigError("Gauss-Legendre order must be positive");
  static std::mutex mu;
  static std::map<int, GaussLegendre> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  // Boost returns the non-negative zeros in increasing order.
  const auto zeros = boost::math::legendre_p_zeros<double>(n);
  GaussLegendre gl;
  auto weight = [n](double x) {
    const double dp = boost::math::legendre_p_prime<double>(n, x);
    return 2.0 / ((1.0 - x * x) * dp * dp);
  };
  for (auto z = zeros.rbegin(); z != zeros.rend(); ++z) {
    if (*z == 0.0) continue;
    gl.x.push_back(-*z);
    gl.w.push_back(weight(*z));
  }
  if (n % 2 == 1) {
    gl.x.push_back(0.0);
    gl.w.push_back(weight(0.0));
  }
  for (double z : zeros) {
    if (z == 0.0) continue;
    gl.x.push_back(z);
    gl.w.push_back(weight(z));
  }
  return cache.emplace(n, std::move(gl)).first->second;
}

namespace {

NodeSet tensor_box(const Box& box, int order, const Domain* indicator) {
  const std::size_t dim = box.lo.size();
  const auto& gl = gauss_legendre(order);
  NodeSet out;
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> p(dim);
  for (;;) {
    double w = 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double half = 0.5 * (box.hi[i] - box.lo[i]);
      p[i] = box.lo[i] + half * (gl.x[idx[i]] + 1.0);
      w *= half * gl.w[idx[i]];
    }
    if (indicator == nullptr || contains(*indicator, p)) {
      out.nodes.push_back(p);
      out.weights.push_back(w);
    }
    bool done = true;
    for (std::size_t i = dim; i-- > 0;) {
      if (++idx[i] < gl.x.size()) {
        done = false;
        break;
      }
      idx[i] = 0;
    }
    if (done) break;
  }
  return out;
}

NodeSet sobol_box(const Box& box, int samples, const Domain& indicator) {
  const std::size_t dim = box.lo.size();
  boost::random::sobol gen(static_cast<unsigned>(dim));
  double volume = 1.0;
  for (std::size_t i = 0; i < dim; ++i) volume *= box.hi[i] - box.lo[i];
  const double scale = 1.0 / static_cast<double>(gen.max() - gen.min()) ;
  NodeSet out;
  std::vector<double> p(dim);
  const double w = volume / samples;
  for (int s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double u = static_cast<double>(gen() - gen.min()) * scale;
      p[i] = box.lo[i] + u * (box.hi[i] - box.lo[i]);
    }
    if (contains(indicator, p)) {
      out.nodes.push_back(p);
      out.weights.push_back(w);
    }
  }
  return out;
}

NodeSet annulus_nodes(const ReinhardtAnnulus& ann, int order) {
  const std::size_t m = ann.r_inner.size();
  const auto& gl = gauss_legendre(order);
  const int angles = 2 * order;
  // Per-coordinate polar nodes, then tensor product across coordinates.
  std::vector<NodeSet> factors(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double half = 0.5 * (ann.r_outer[j] - ann.r_inner[j]);
    for (std::size_t a = 0; a < gl.x.size(); ++a) {
      const double r = ann.r_inner[j] + half * (gl.x[a] + 1.0);
      for (int k = 0; k < angles; ++k) {
        const double th = 2.0 * std::numbers::pi * k / angles;
        factors[j].nodes.push_back({r * std::cos(th), r * std::sin(th)});
        factors[j].weights.push_back(half * gl.w[a] * r * 2.0 * std::numbers::pi / angles);
      }
    }
  }
  NodeSet out{{{}}, {1.0}};
  for (const auto& f : factors) {
    NodeSet next;
    for (std::size_t a = 0; a < out.nodes.size(); ++a) {
      for (std::size_t b = 0; b < f.nodes.size(); ++b) {
        auto p = out.nodes[a];
        p.insert(p.end(), f.nodes[b].begin(), f.nodes[b].end());
        next.nodes.push_back(std::move(p));
        next.weights.push_back(out.weights[a] * f.weights[b]);
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

NodeSet integration_nodes(const Domain& fiber, RuleKind kind, int order) {
  if (order < 1) throw ConfigError("quadrature order must be positive");
  if (const auto* tube = fiber.as<TubeOverBase>()) {
    NodeSet base = integration_nodes(*tube->base, kind, order);
    for (auto& p : base.nodes) {
      std::vector<double> z(2 * p.size(), 0.0);
      for (std::size_t j = 0; j < p.size(); ++j) z[2 * j] = p[j];
      p = std::move(z);
    }
    return base;
  }
  if (fiber.as<Fibered>()) throw ConfigError("integration over a fibered domain requires its fibers");
  const Box box = bounding_box(fiber);
  if (kind == RuleKind::QuasiMonteCarlo) return sobol_box(box, order, fiber);
  if (kind == RuleKind::GaussLegendre) {
    if (fiber.as<Box>()) return tensor_box(box, order, nullptr);
    if (const auto* ann = fiber.as<ReinhardtAnnulus>()) return annulus_nodes(*ann, order);
  }
  return tensor_box(box, order, &fiber);
}

Eigen::MatrixXcd weighted_sum(const std::vector<Eigen::MatrixXcd>& values, const std::vector<double>& weights) {
  if (values.empty()) throw NumericalError("quadrature has no nodes inside the fiber");
  std::vector<Eigen::MatrixXcd> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) terms[i] = weights[i] * values[i];
  return pairwise_sum(terms);
}

Integral integrate(const MatrixIntegrand& f, const Domain& fiber, const QuadratureRule& rule) {
  auto run = [&](int order) {
    const NodeSet ns = integration_nodes(fiber, rule.kind, order);
    std::vector<Eigen::MatrixXcd> vals(ns.nodes.size());
    parallel_for(ns.nodes.size(), [&](std::size_t i) { vals[i] = f(ns.nodes[i]); });
    return weighted_sum(vals, ns.weights);
  };
  Integral out;
  out.order = rule.order;
  out.value = run(rule.order);
  const Eigen::MatrixXcd coarse = run(std::max(1, rule.order / 2));
  const double scale = std::max(out.value.norm(), 1e-300);
  out.error_estimate = (out.value - coarse).norm() / scale;
  if (!rule.allow_inaccurate && !(out.error_estimate <= rule.max_relative_error))
    throw NumericalError("quadrature did not converge: estimated relative error " +
                         std::to_string(out.error_estimate));
  return out;
}

}  // namespace nakano
