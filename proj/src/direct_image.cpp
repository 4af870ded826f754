#include "nakano/direct_image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nakano/errors.hpp"
#include "nakano/parallel.hpp"

namespace nakano {

namespace {

using Eigen::MatrixXcd;

std::vector<double> values_of(std::span<const HyperDual> t) {
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) v[i] = t[i].value;
  return v;
}

std::vector<HyperDual> joined(std::span<const HyperDual> t, std::span<const double> q) {
  std::vector<HyperDual> x(t.begin(), t.end());
  for (double v : q) x.emplace_back(v);
  return x;
}

/// Jet of a matrix-valued function of the base point from central differences,
/// composed with hyper-dual base coordinates by the second-order chain rule.
template <class F>
MatrixJet fd_jet(const F& value, std::span<const HyperDual> t) {
  const std::size_t k = t.size();
  std::vector<double> t0 = values_of(t);
  MatrixJet out;
  out.v = value(t0);
  const auto r = out.v.rows();
  out.d1 = out.d2 = out.d12 = MatrixXcd::Zero(r, r);

  std::vector<bool> active(k);
  bool any = false;
  for (std::size_t i = 0; i < k; ++i) {
    active[i] = t[i].d1 != 0.0 || t[i].d2 != 0.0 || t[i].d12 != 0.0;
    any = any || active[i];
  }
  if (!any) return out;

  const double base_step = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  std::vector<double> h(k);
  for (std::size_t i = 0; i < k; ++i) h[i] = base_step * std::max(1.0, std::abs(t0[i]));
  auto at = [&](std::size_t i, double si, std::size_t j, double sj) {
    std::vector<double> p = t0;
    p[i] += si * h[i];
    if (j < k) p[j] += sj * h[j];
    return value(p);
  };

  std::vector<MatrixXcd> grad(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!active[i]) continue;
    grad[i] = (at(i, 1.0, k, 0.0) - at(i, -1.0, k, 0.0)) / (2.0 * h[i]);
    out.d1 += t[i].d1 * grad[i];
    out.d2 += t[i].d2 * grad[i];
    out.d12 += t[i].d12 * grad[i];
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double w = t[i].d1 * t[j].d2 + (i == j ? 0.0 : t[j].d1 * t[i].d2);
      if (w == 0.0) continue;
      MatrixXcd hij;
      if (i == j) {
        hij = (at(i, 1.0, k, 0.0) - 2.0 * out.v + at(i, -1.0, k, 0.0)) / (h[i] * h[i]);
      } else {
        hij = (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0)) /
              (4.0 * h[i] * h[j]);
      }
      out.d12 += w * hij;
    }
  }
  return out;
}

DerivativeScheme resolve(DerivativeScheme requested, const Fibered& domain) {
  const bool independent = fibers_independent_of_base(domain);
  if (requested == DerivativeScheme::Auto)
    return independent ? DerivativeScheme::UnderIntegral : DerivativeScheme::FixedNodeFD;
  if (requested == DerivativeScheme::UnderIntegral && !independent)
    throw ConfigError("t-dependent fiber requested with under-integral scheme");
  return requested;
}

std::optional<NodeSet> shared_nodes_for(const Fibered& domain, const QuadratureRule& rule) {
  if (!fibers_independent_of_base(domain)) return std::nullopt;
  const std::vector<double> t = bounding_box(*domain.base).lo;
  return integration_nodes(fiber_domain(domain, t, false), rule.kind, rule.order);
}

void check_total_dims(const Coordinates& coords, const Fibered& domain) {
  if (coords.real_dim() != Domain(domain).dimension())
    throw ConfigError("field has " + std::to_string(coords.real_dim()) + " real coordinates but the domain has " +
                      std::to_string(Domain(domain).dimension()));
}

}  // namespace

Coordinates base_coordinates(const Coordinates& total, std::size_t base_dim) {
  std::vector<Axis> axes;
  std::size_t dim = 0;
  for (const auto& a : total.axes()) {
    if (dim == base_dim) break;
    axes.push_back(a);
    dim += a.kind == AxisKind::Complex ? 2 : 1;
  }
  if (dim != base_dim) throw ConfigError("base dimension does not align with the field's axes");
  return Coordinates(std::move(axes));
}

PushforwardMetric::PushforwardMetric(MetricPtr total, Fibered domain, QuadratureRule rule, DerivativeScheme scheme)
    : total_(std::move(total)),
      domain_(std::move(domain)),
      rule_(rule),
      scheme_(resolve(scheme, domain_)),
      base_coords_(base_coordinates(total_->coordinates(), base_dimension(domain_))) {
  check_total_dims(total_->coordinates(), domain_);
  shared_nodes_ = shared_nodes_for(domain_, rule_);
}

MatrixXcd PushforwardMetric::value_fixed_nodes(std::span<const double> t) const {
  const NodeSet ns = shared_nodes_ ? *shared_nodes_
                                   : integration_nodes(fiber_domain(domain_, t, false), rule_.kind, rule_.order);
  const auto tj = seed(t);
  std::vector<MatrixXcd> vals(ns.nodes.size());
  parallel_for(ns.nodes.size(), [&](std::size_t i) { vals[i] = total_->jet(joined(tj, ns.nodes[i])).v; });
  const MatrixXcd s = weighted_sum(vals, ns.weights);
  return 0.5 * (s + s.adjoint());
}

MatrixJet PushforwardMetric::jet(std::span<const HyperDual> t) const {
  if (t.size() != base_coords_.real_dim()) throw DomainError("base point dimension mismatch");
  if (scheme_ == DerivativeScheme::FixedNodeFD)
    return fd_jet([this](std::span<const double> p) { return value_fixed_nodes(p); }, t);

  const NodeSet ns = shared_nodes_ ? *shared_nodes_
                                   : integration_nodes(fiber_domain(domain_, values_of(t)), rule_.kind, rule_.order);
  if (ns.nodes.empty()) throw NumericalError("quadrature has no nodes inside the fiber");
  std::vector<MatrixJet> terms(ns.nodes.size());
  parallel_for(ns.nodes.size(), [&](std::size_t i) {
    terms[i] = total_->jet(joined(t, ns.nodes[i]));
    terms[i] *= ns.weights[i];
  });
  return pairwise_sum(terms);
}

Integral PushforwardMetric::value_with_error(std::span<const double> t) const {
  const Domain fib = fiber_domain(domain_, t);
  const auto tj = seed(t);
  Integral out = integrate([&](std::span<const double> q) { return total_->jet(joined(tj, q)).v; }, fib, rule_);
  out.value = 0.5 * (out.value + out.value.adjoint()).eval();
  return out;
}

Integral pushforward_metric(MetricPtr total, const Fibered& domain, std::span<const double> t,
                            const QuadratureRule& rule) {
  return PushforwardMetric(std::move(total), domain, rule).value_with_error(t);
}

MatrixXcd pushforward_derivatives(const PushforwardMetric& h, std::span<const double> t, std::size_t j,
                                  std::size_t k) {
  return second_derivative(h, t, j, k);
}

PushforwardScalar::PushforwardScalar(ScalarPtr phi, Fibered domain, QuadratureRule rule, DerivativeScheme scheme)
    : phi_(std::move(phi)),
      domain_(std::move(domain)),
      rule_(rule),
      scheme_(resolve(scheme, domain_)),
      base_coords_(base_coordinates(phi_->coordinates(), base_dimension(domain_))) {
  check_total_dims(phi_->coordinates(), domain_);
  shared_nodes_ = shared_nodes_for(domain_, rule_);
}

HyperDual PushforwardScalar::jet_at_nodes(std::span<const HyperDual> t, const NodeSet& ns) const {
  if (ns.nodes.empty()) throw NumericalError("quadrature has no nodes inside the fiber");
  std::vector<HyperDual> phis(ns.nodes.size());
  parallel_for(ns.nodes.size(), [&](std::size_t i) { phis[i] = phi_->jet(joined(t, ns.nodes[i])); });
  double shift = std::numeric_limits<double>::infinity();
  for (const auto& v : phis) shift = std::min(shift, v.value);
  std::vector<HyperDual> terms(phis.size());
  for (std::size_t i = 0; i < phis.size(); ++i) terms[i] = ns.weights[i] * exp(-(phis[i] - shift));
  const HyperDual s = pairwise_sum(terms);
  if (!(s.value > 0.0) || !std::isfinite(s.value)) throw NumericalError("fiber integral of e^{-phi} is not positive");
  return HyperDual(shift) - log(s);
}

HyperDual PushforwardScalar::jet(std::span<const HyperDual> t) const {
  if (t.size() != base_coords_.real_dim()) throw DomainError("base point dimension mismatch");
  if (scheme_ == DerivativeScheme::FixedNodeFD) {
    auto value = [this](std::span<const double> p) {
      const NodeSet ns = integration_nodes(fiber_domain(domain_, p, false), rule_.kind, rule_.order);
      MatrixXcd m(1, 1);
      m(0, 0) = jet_at_nodes(seed(p), ns).value;
      return m;
    };
    const MatrixJet j = fd_jet(value, t);
    return {j.v(0, 0).real(), j.d1(0, 0).real(), j.d2(0, 0).real(), j.d12(0, 0).real()};
  }
  const NodeSet ns = shared_nodes_ ? *shared_nodes_
                                   : integration_nodes(fiber_domain(domain_, values_of(t)), rule_.kind, rule_.order);
  return jet_at_nodes(t, ns);
}

double PushforwardScalar::error_estimate(std::span<const double> t) const {
  const Domain fib = fiber_domain(domain_, t);
  const auto tj = seed(t);
  const double fine = jet_at_nodes(tj, integration_nodes(fib, rule_.kind, rule_.order)).value;
  const double coarse = jet_at_nodes(tj, integration_nodes(fib, rule_.kind, std::max(1, rule_.order / 2))).value;
  return std::abs(std::expm1(fine - coarse));
}

double pushforward_scalar(ScalarPtr phi, const Fibered& domain, std::span<const double> t, const QuadratureRule& rule) {
  PushforwardScalar f(std::move(phi), domain, rule);
  const double err = f.error_estimate(t);
  if (!rule.allow_inaccurate && !(err <= rule.max_relative_error))
    throw NumericalError("quadrature did not converge: estimated relative error " + std::to_string(err));
  return f.value(t);
}

KiselmanResult kiselman_inf(const ScalarField& phi, const Fibered& domain, std::span<const double> t,
                            int grid_resolution, int steps) {
  const Domain raw = fiber_domain(domain, t);
  const bool tube = raw.as<TubeOverBase>() != nullptr;
  const Domain search = tube ? Domain(*raw.as<TubeOverBase>()->base) : raw;
  auto embed = [&](const std::vector<double>& q) {
    if (!tube) return q;
    std::vector<double> z(2 * q.size(), 0.0);
    for (std::size_t j = 0; j < q.size(); ++j) z[2 * j] = q[j];
    return z;
  };
  auto eval = [&](const std::vector<double>& q) {
    std::vector<double> p(t.begin(), t.end());
    const auto z = embed(q);
    p.insert(p.end(), z.begin(), z.end());
    return phi.value(p);
  };

  const SampleGrid grid = sample_grid(search, grid_resolution);
  std::vector<double> vals(grid.points.size());
  parallel_for(grid.points.size(), [&](std::size_t i) { vals[i] = eval(grid.points[i]); });
  const auto best_it = std::min_element(vals.begin(), vals.end());
  KiselmanResult out{*best_it, grid.points[static_cast<std::size_t>(best_it - vals.begin())]};

  const Box box = bounding_box(search);
  std::vector<double> step(box.lo.size());
  for (std::size_t i = 0; i < step.size(); ++i)
    step[i] = (box.hi[i] - box.lo[i]) / std::max(1, grid_resolution - 1);
  for (int s = 0; s < steps; ++s) {
    bool improved = false;
    for (std::size_t i = 0; i < step.size(); ++i) {
      if (step[i] == 0.0) continue;
      for (double dir : {1.0, -1.0}) {
        std::vector<double> q = out.location;
        q[i] += dir * step[i];
        if (!contains(search, q)) continue;
        const double v = eval(q);
        if (v < out.value) {
          out.value = v;
          out.location = std::move(q);
          improved = true;
          break;
        }
      }
    }
    if (!improved)
      for (double& h : step) h *= 0.5;
  }
  out.location = embed(out.location);
  return out;
}

KiselmanInf::KiselmanInf(ScalarPtr phi, Fibered domain, int grid_resolution, int steps)
    : phi_(std::move(phi)),
      domain_(std::move(domain)),
      resolution_(grid_resolution),
      steps_(steps),
      base_coords_(base_coordinates(phi_->coordinates(), base_dimension(domain_))) {
  check_total_dims(phi_->coordinates(), domain_);
}

HyperDual KiselmanInf::jet(std::span<const HyperDual> t) const {
  for (const auto& c : t)
    if (c.d1 != 0.0 || c.d2 != 0.0 || c.d12 != 0.0)
      throw NumericalError("fiberwise infimum provides values only; no derivatives available");
  return HyperDual(kiselman_inf(*phi_, domain_, values_of(t), resolution_, steps_).value);
}

ReinhardtAnnulus exp_image(const Box& base) {
  ReinhardtAnnulus out;
  for (std::size_t j = 0; j < base.lo.size(); ++j) {
    out.r_inner.push_back(std::exp(base.lo[j]));
    out.r_outer.push_back(std::exp(base.hi[j]));
  }
  return out;
}

FubiniResult fubini_consistency(MetricPtr total, const Fibered& domain, const std::vector<ScalarPtr>& u_re,
                                const std::vector<ScalarPtr>& u_im, ScalarPtr psi, const QuadratureRule& rule) {
  const std::size_t r = total->rank();
  if (u_re.size() != r || (!u_im.empty() && u_im.size() != r)) throw ConfigError("section length must equal the rank");
  const NodeSet base_nodes = integration_nodes(*domain.base, rule.kind, rule.order);
  if (base_nodes.nodes.empty()) throw NumericalError("base quadrature has no nodes");

  auto section = [&](std::span<const double> t) {
    Eigen::VectorXcd u(static_cast<Eigen::Index>(r));
    for (std::size_t l = 0; l < r; ++l)
      u(static_cast<Eigen::Index>(l)) = {u_re[l]->value(t), u_im.empty() ? 0.0 : u_im[l]->value(t)};
    return u;
  };
  auto weight = [&](std::span<const double> t) { return psi ? std::exp(-psi->value(t)) : 1.0; };

  // Joint sum over (t, q) at a fiber order distinct from the pushforward's.
  const int joint_order = rule.order + rule.order / 2;
  std::vector<double> lhs_terms;
  std::vector<double> rhs_terms(base_nodes.nodes.size());
  const PushforwardMetric h(total, domain, rule);
  for (std::size_t b = 0; b < base_nodes.nodes.size(); ++b) {
    const auto& t = base_nodes.nodes[b];
    const Eigen::VectorXcd u = section(t);
    const double wt = base_nodes.weights[b] * weight(t);
    const NodeSet fn = integration_nodes(fiber_domain(domain, t), rule.kind, joint_order);
    const auto tj = seed(t);
    for (std::size_t i = 0; i < fn.nodes.size(); ++i) {
      const MatrixXcd ht = total->jet(joined(tj, fn.nodes[i])).v;
      lhs_terms.push_back(wt * fn.weights[i] * std::real(u.dot(ht * u)));
    }
    rhs_terms[b] = wt * std::real(u.dot(metric_eval(h, t) * u));
  }
  if (lhs_terms.empty()) throw NumericalError("total-space quadrature has no nodes");
  return {pairwise_sum(lhs_terms), pairwise_sum(rhs_terms)};
}

}  // namespace nakano
