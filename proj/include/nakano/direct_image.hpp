#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "nakano/fields.hpp"
#include "nakano/geometry.hpp"
#include "nakano/quadrature.hpp"

namespace nakano {

enum class DerivativeScheme {
  /// UnderIntegral when fibers do not depend on t, FixedNodeFD otherwise.
  Auto,
  /// Hyper-dual derivatives of the integrand summed at the quadrature nodes.
  UnderIntegral,
  /// Central differences of pushforward values with reference nodes shared
  /// across the stencil; step (machine epsilon)^{1/4}·max(1, |t_i|).
  FixedNodeFD,
};

/// h(t) = ∫_{Ω_t} h̃(t, ·) dV as a metric field over the base coordinates.
/// The total-space field's leading axes are the base axes.
class PushforwardMetric final : public MetricField {
 public:
  PushforwardMetric(MetricPtr total, Fibered domain, QuadratureRule rule,
                    DerivativeScheme scheme = DerivativeScheme::Auto);

  std::size_t rank() const override { return total_->rank(); }
  const Coordinates& coordinates() const override { return base_coords_; }
  MatrixJet jet(std::span<const HyperDual> t) const override;

  DerivativeScheme scheme() const { return scheme_; }
  const QuadratureRule& rule() const { return rule_; }
  const Fibered& domain() const { return domain_; }

  /// Value at t with the order-doubling error estimate; throws NumericalError
  /// when the estimate exceeds the rule's threshold.
  Integral value_with_error(std::span<const double> t) const;

 private:
  Eigen::MatrixXcd value_fixed_nodes(std::span<const double> t) const;

  MetricPtr total_;
  Fibered domain_;
  QuadratureRule rule_;
  DerivativeScheme scheme_;
  Coordinates base_coords_;
  std::optional<NodeSet> shared_nodes_;
};

/// Splits total-space coordinates into the leading axes spanning `base_dim` real slots.
Coordinates base_coordinates(const Coordinates& total, std::size_t base_dim);

/// h(t), Hermitian-symmetrized, with its error estimate.
Integral pushforward_metric(MetricPtr total, const Fibered& domain, std::span<const double> t,
                            const QuadratureRule& rule);

/// ∂_j∂_k h(t) under the pushforward's derivative scheme.
Eigen::MatrixXcd pushforward_derivatives(const PushforwardMetric& h, std::span<const double> t, std::size_t j,
                                         std::size_t k);

/// φ̃(t) = −log ∫_{Ω_t} e^{−φ(t,·)} dV, computed as M − log ∫ e^{−(φ−M)} with
/// M the minimum of φ over the nodes.
class PushforwardScalar final : public ScalarField {
 public:
  PushforwardScalar(ScalarPtr phi, Fibered domain, QuadratureRule rule,
                    DerivativeScheme scheme = DerivativeScheme::Auto);
  const Coordinates& coordinates() const override { return base_coords_; }
  HyperDual jet(std::span<const HyperDual> t) const override;
  DerivativeScheme scheme() const { return scheme_; }
  /// Relative change of ∫e^{−φ} between the rule order and half of it.
  double error_estimate(std::span<const double> t) const;

 private:
  HyperDual jet_at_nodes(std::span<const HyperDual> t, const NodeSet& nodes) const;

  ScalarPtr phi_;
  Fibered domain_;
  QuadratureRule rule_;
  DerivativeScheme scheme_;
  Coordinates base_coords_;
  std::optional<NodeSet> shared_nodes_;
};

double pushforward_scalar(ScalarPtr phi, const Fibered& domain, std::span<const double> t, const QuadratureRule& rule);

struct KiselmanResult {
  double value = 0.0;
  std::vector<double> location;
};

/// min over the fiber grid, refined by `steps` coordinate-descent sweeps from
/// the best grid point. Tube fibers are searched over their real base.
KiselmanResult kiselman_inf(const ScalarField& phi, const Fibered& domain, std::span<const double> t,
                            int grid_resolution, int steps = 30);

/// φ*(t) as a value-only scalar field over the base.
class KiselmanInf final : public ScalarField {
 public:
  KiselmanInf(ScalarPtr phi, Fibered domain, int grid_resolution, int steps = 30);
  const Coordinates& coordinates() const override { return base_coords_; }
  HyperDual jet(std::span<const HyperDual> t) const override;
  bool differentiable() const override { return false; }

 private:
  ScalarPtr phi_;
  Fibered domain_;
  int resolution_;
  int steps_;
  Coordinates base_coords_;
};

/// Annulus e^{lo_j} <= |w_j| <= e^{hi_j}, the image of the tube over a box under w = e^z.
ReinhardtAnnulus exp_image(const Box& base);

struct FubiniResult {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// lhs = ∫_Ω |u|²_{h̃} e^{−ψ} over the total space in a single joint sum;
/// rhs = ∫_D |u|²_h e^{−ψ} with h the pushforward. u and ψ live on the base.
/// `psi` may be null (ψ = 0); `u_im` may be empty.
FubiniResult fubini_consistency(MetricPtr total, const Fibered& domain, const std::vector<ScalarPtr>& u_re,
                                const std::vector<ScalarPtr>& u_im, ScalarPtr psi, const QuadratureRule& rule);

}  // namespace nakano
