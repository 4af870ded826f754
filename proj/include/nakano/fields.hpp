#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nakano/expr.hpp"
#include "nakano/hyperdual.hpp"
#include "nakano/jet.hpp"

namespace nakano {

enum class AxisKind { Real, Complex };

struct Axis {
  std::string name;
  AxisKind kind = AxisKind::Real;
  bool operator==(const Axis&) const = default;
};

/// Ordered coordinate axes. A complex axis `z1` occupies two real slots that
/// expressions see as `z1_re` and `z1_im`.
class Coordinates {
 public:
  Coordinates() = default;
  explicit Coordinates(std::vector<Axis> axes);
  static Coordinates real(const std::vector<std::string>& names);
  static Coordinates complex(const std::vector<std::string>& names);

  const std::vector<Axis>& axes() const { return axes_; }
  std::size_t size() const { return axes_.size(); }
  std::size_t real_dim() const;
  /// First real slot of an axis.
  std::size_t slot(std::size_t axis) const;
  std::vector<std::string> slot_names() const;
  bool all_real() const;
  bool all_complex() const;

  Coordinates operator+(const Coordinates& tail) const;
  bool operator==(const Coordinates&) const = default;

 private:
  std::vector<Axis> axes_;
};

/// Hyper-dual coordinates (p_i, dir1_i, dir2_i, 0). Empty directions mean zero.
std::vector<HyperDual> seed(std::span<const double> p, std::span<const double> dir1 = {},
                            std::span<const double> dir2 = {});

std::vector<double> unit_vector(std::size_t dim, std::size_t i);

class ScalarField {
 public:
  virtual ~ScalarField() = default;
  virtual const Coordinates& coordinates() const = 0;
  virtual HyperDual jet(std::span<const HyperDual> x) const = 0;
  /// False for fields that only provide values (pointwise infima).
  virtual bool differentiable() const { return true; }

  double value(std::span<const double> p) const { return jet(seed(p)).value; }
};
using ScalarPtr = std::shared_ptr<const ScalarField>;

/// Throws ConfigError if the expression uses a variable the coordinates lack.
ScalarPtr expression_field(const Coordinates& coords, const Expr& e);
ScalarPtr expression_field(const Coordinates& coords, std::string_view text);
ScalarPtr sum_field(std::vector<ScalarPtr> terms);

Eigen::VectorXd gradient(const ScalarField& f, std::span<const double> p);
Eigen::MatrixXd real_hessian(const ScalarField& f, std::span<const double> p);
/// n×n matrix of ∂²f/∂z_j∂z̄_k; all axes must be complex.
Eigen::MatrixXcd complex_hessian(const ScalarField& f, std::span<const double> p);

/// Hermitian positive definite matrix field with exact jets.
class MetricField {
 public:
  virtual ~MetricField() = default;
  virtual std::size_t rank() const = 0;
  virtual const Coordinates& coordinates() const = 0;
  virtual MatrixJet jet(std::span<const HyperDual> x) const = 0;
};
using MetricPtr = std::shared_ptr<const MetricField>;

struct ComplexEntry {
  Expr re;
  std::optional<Expr> im;
};

/// Row-major r×r entries.
MetricPtr entrywise_metric(const Coordinates& coords, std::size_t rank, const std::vector<ComplexEntry>& entries);
MetricPtr constant_metric(const Coordinates& coords, const Eigen::MatrixXcd& value);
/// scale(p) · inner(p).
MetricPtr scaled_metric(ScalarPtr scale, MetricPtr inner);
/// exp(-Q(p)) for a Hermitian matrix of expressions Q.
MetricPtr mexp_metric(const Coordinates& coords, std::size_t rank, const std::vector<ComplexEntry>& q_entries);
/// Mean over the torus acting by rotation on the listed complex axes, `points` per angle.
MetricPtr averaged_metric(MetricPtr inner, std::vector<std::size_t> rotating_axes, int points);
/// h(z) = g(Re z) on complex axes with the same names as g's real axes.
MetricPtr complexified_metric(MetricPtr real_metric);
/// h'(t, w) = h(t, ln|w|) on the listed tube axes; with the Jacobian factor
/// (2π)^{-m} Π|w_j|^{-2} this is h''.
MetricPtr exp_reduced_metric(MetricPtr tube_metric, std::vector<std::size_t> tube_axes, bool with_jacobian);

/// exp(-A) for a Hermitian matrix jet by scaling and squaring a degree-20 series.
MatrixJet mexp_negative(const MatrixJet& a);

/// Evaluates, checks Hermitian symmetry (1e-12 relative) and positive
/// definiteness, and returns (M + M†)/2. Throws NumericalError.
Eigen::MatrixXcd metric_eval(const MetricField& m, std::span<const double> p);
Eigen::MatrixXcd first_derivative(const MetricField& m, std::span<const double> p, std::size_t slot);
/// ∂²/∂x_j∂x_k over real slots.
Eigen::MatrixXcd second_derivative(const MetricField& m, std::span<const double> p, std::size_t j, std::size_t k);
/// ∂/∂z_j (or ∂/∂z̄_j when `conjugate`) of complex axis j.
Eigen::MatrixXcd wirtinger1(const MetricField& m, std::span<const double> p, std::size_t axis, bool conjugate);
/// ∂²/∂z_j∂z̄_k over complex axes.
Eigen::MatrixXcd wirtinger2(const MetricField& m, std::span<const double> p, std::size_t j, std::size_t k);
Eigen::MatrixXcd torus_average(const MetricField& m, std::span<const double> p,
                               const std::vector<std::size_t>& rotating_axes, int points);

/// Value, gradient and Hessian over every real slot.
struct MetricDerivatives {
  Eigen::MatrixXcd value;
  std::vector<Eigen::MatrixXcd> first;
  std::vector<std::vector<Eigen::MatrixXcd>> second;
};
MetricDerivatives metric_derivatives(const MetricField& m, std::span<const double> p);

}  // namespace nakano
