#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nakano/fields.hpp"
#include "nakano/geometry.hpp"

namespace nakano {

enum class CurvatureFlavor { Real, Chern };

/// n×n array of r×r curvature blocks Θ_jk (Θ_{jk̄} for the Chern flavor).
struct CurvatureTensor {
  CurvatureFlavor flavor = CurvatureFlavor::Real;
  std::size_t n = 0;
  std::size_t r = 0;
  std::vector<Eigen::MatrixXcd> blocks;
  Eigen::MatrixXcd metric;
  std::vector<double> point;

  const Eigen::MatrixXcd& operator()(std::size_t j, std::size_t k) const { return blocks[j * n + k]; }
  Eigen::MatrixXcd& operator()(std::size_t j, std::size_t k) { return blocks[j * n + k]; }
};

/// Θ_jk = g⁻¹(∂_k g)g⁻¹(∂_j g) − g⁻¹∂_k∂_j g on a metric over real axes.
CurvatureTensor real_curvature(const MetricField& g, std::span<const double> p);
/// Θ_{jk̄} = h⁻¹(∂̄_k h)h⁻¹(∂_j h) − h⁻¹∂_j∂̄_k h on a metric over complex axes.
/// For h = e^{-φ}, Θ_{jk̄} = ∂²φ/∂z_j∂z̄_k.
CurvatureTensor chern_curvature(const MetricField& h, std::span<const double> p);
/// Real flavor for all-real axes, Chern for all-complex axes.
CurvatureTensor curvature(const MetricField& m, std::span<const double> p);

/// Hermitian (n·r)×(n·r) matrix whose form is Σ_{j,k} (Θ_jk u_j, u_k)_G with
/// (a, b)_G = b† G a; block (k, j) equals G Θ_jk. Throws NumericalError when
/// the assembled matrix deviates from Hermitian by more than 1e-8·‖N‖.
Eigen::MatrixXcd nakano_matrix(const CurvatureTensor& theta, const Eigen::MatrixXcd& G);

/// Smallest λ with N u = λ (I_n ⊗ G) u.
double generalized_lambda_min(const Eigen::MatrixXcd& N, const Eigen::MatrixXcd& G, std::size_t n);

struct PointValue {
  std::vector<double> point;
  double value = 0.0;
  double norm = 0.0;
};

/// Minimum of a pointwise positivity quantity over a sample set.
struct PositivityReport {
  double lambda_min = 0.0;
  std::vector<double> argmin;
  double tolerance = 0.0;
  double scale = 1.0;
  bool pass = false;
  std::vector<PointValue> table;
};

/// Default tolerance is 1e-6·scale with scale = 1 + max ‖N‖₂ over the grid.
PositivityReport certify_nakano(const MetricField& m, const SampleGrid& grid, std::optional<double> tol = {});

/// Smooth plurisubharmonicity: minimum eigenvalue of the complex Hessian.
PositivityReport psh_hessian_test(const ScalarField& phi, const SampleGrid& grid, std::optional<double> tol = {});

struct SubmeanSample {
  std::vector<std::complex<double>> center;
  double radius = 0.0;
  std::vector<std::complex<double>> direction;
};

/// Checks φ(a) <= mean of φ over a + ρ e^{iθ} w, θ on `circle_points` equally
/// spaced angles. `value` in the table is the margin mean − φ(a).
PositivityReport psh_submean_test(const ScalarField& phi, const std::vector<SubmeanSample>& samples,
                                  int circle_points, double tol);

/// Minimum eigenvalue of the real Hessian.
PositivityReport convexity_test(const ScalarField& phi, const SampleGrid& grid, std::optional<double> tol = {});

/// Minimum of the Nakano form over decomposable tuples u_j = ξ_j v with
/// |ξ| = |v|_G = 1: `samples` random starts, each refined by 20 alternating
/// minimization steps.
double griffiths_min(const CurvatureTensor& theta, const Eigen::MatrixXcd& G, int samples, std::uint64_t seed);

}  // namespace nakano
