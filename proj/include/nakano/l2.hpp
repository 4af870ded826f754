#pragma once

#include <array>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nakano/fields.hpp"

namespace nakano {

/// Uniform grid on [-a, a]² with vertex unknowns and one ∂̄ constraint per
/// active cell. A cell is active when its four corners lie in the mask.
struct DbarGrid {
  enum class Shape { Disc, Square };
  Shape shape = Shape::Disc;
  int n = 0;
  double half_width = 1.0;
  double delta = 0.0;
  /// Vertex (i, j) sits at -a + iδ + i(-a + jδ).
  std::vector<int> vertex_index;  // (n+1)² entries, -1 for unused vertices
  std::vector<std::array<int, 4>> cells;  // corners 00, 10, 01, 11 as unknown indices
  std::vector<std::array<double, 2>> vertices;
  std::vector<std::array<double, 2>> centers;
};

/// Disc mask is |z| < a; square mask is the closed square.
DbarGrid make_dbar_grid(DbarGrid::Shape shape, int n, double half_width = 1.0);

/// Staggered ½(D_x + i D_y) of vertex samples at each active cell centre.
Eigen::VectorXcd apply_dbar(const DbarGrid& g, const Eigen::VectorXcd& u);

/// Datum f = Σ f_λ dz̄ ⊗ e_λ given componentwise as real and imaginary scalar
/// fields over one complex axis.
struct L2Problem {
  MetricPtr h;
  ScalarPtr psi;
  std::vector<ScalarPtr> f_re;
  std::vector<ScalarPtr> f_im;
};

struct L2Solution {
  /// Vertex values, rank components per vertex.
  Eigen::VectorXcd u;
  Eigen::VectorXcd multiplier;
  int iterations = 0;
  /// max |∂̄u − f| over active cells.
  double residual = 0.0;
};

struct L2Report {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double residual = 0.0;
  int iterations = 0;
  int n = 0;
  double delta = 0.0;
  std::size_t cells = 0;
  std::size_t unknowns = 0;
};

/// Datum values at cell centres, rank components per cell.
Eigen::VectorXcd sample_datum(const L2Problem& p, const DbarGrid& g);

/// Σ_v |u_v|²_h e^{-ψ} δ² over the grid's vertices.
double weighted_norm2(const L2Problem& p, const DbarGrid& g, const Eigen::VectorXcd& u);

/// Minimizer of the weighted norm subject to ∂̄u = f, from the normal equations
/// D W⁻¹ D* λ = f solved by conjugate gradients to relative residual 1e-12.
/// Throws DomainError when ψ_zz̄ < 1e-8 at a cell centre and NumericalError
/// when the solver stalls.
L2Solution minimal_solution(const L2Problem& p, const DbarGrid& g,
                            const std::optional<Eigen::VectorXcd>& start = std::nullopt);

L2Report check_estimate(const L2Problem& p, const DbarGrid& g);

struct ViolationResult {
  double max_ratio = 0.0;
  std::size_t best_psi = 0;
  std::size_t best_datum = 0;
  /// ratios[i][j] for ψ-family member i and datum j.
  std::vector<std::vector<double>> ratios;
};

struct Datum {
  std::vector<ScalarPtr> re;
  std::vector<ScalarPtr> im;
};

/// Largest ratio over the product of the two families. Throws ConfigError
/// ("empty search space") when either family is empty.
ViolationResult violation_search(MetricPtr h, const std::vector<ScalarPtr>& psi_family,
                                 const std::vector<Datum>& data, const DbarGrid& g);

}  // namespace nakano
