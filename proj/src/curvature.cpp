#include "nakano/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "nakano/errors.hpp"
#include "nakano/parallel.hpp"

namespace nakano {

namespace {

using Eigen::Index;
using Eigen::MatrixXcd;

MatrixXcd inverse_pd(const MatrixXcd& G) {
  Eigen::LLT<MatrixXcd> llt(G);
  if (llt.info() != Eigen::Success) throw NumericalError("metric is not positive definite");
  return llt.solve(MatrixXcd::Identity(G.rows(), G.cols()));
}

double spectral_norm(const MatrixXcd& N) {
  if (N.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(N, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double hermitian_lambda_min(const MatrixXcd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigen-solver failed");
  return es.eigenvalues().minCoeff();
}

double default_tolerance(double scale) { return 1e-6 * scale; }

void finalize(PositivityReport& rep, std::optional<double> tol, double max_norm) {
  rep.scale = 1.0 + max_norm;
  rep.tolerance = tol ? *tol : default_tolerance(rep.scale);
  rep.lambda_min = std::numeric_limits<double>::infinity();
  for (const auto& row : rep.table) {
    if (row.value < rep.lambda_min) {
      rep.lambda_min = row.value;
      rep.argmin = row.point;
    }
  }
  rep.pass = rep.lambda_min >= -rep.tolerance;
}

}  // namespace

CurvatureTensor real_curvature(const MetricField& g, std::span<const double> p) {
  if (!g.coordinates().all_real()) throw DomainError("real curvature needs a metric over real axes");
  const MetricDerivatives d = metric_derivatives(g, p);
  const MatrixXcd ginv = inverse_pd(d.value);
  CurvatureTensor out;
  out.flavor = CurvatureFlavor::Real;
  out.n = p.size();
  out.r = g.rank();
  out.metric = d.value;
  out.point.assign(p.begin(), p.end());
  out.blocks.resize(out.n * out.n);
  std::vector<MatrixXcd> ginv_dg(out.n);
  for (std::size_t j = 0; j < out.n; ++j) ginv_dg[j] = ginv * d.first[j];
  for (std::size_t j = 0; j < out.n; ++j)
    for (std::size_t k = 0; k < out.n; ++k) out(j, k) = ginv_dg[k] * ginv_dg[j] - ginv * d.second[k][j];
  return out;
}

CurvatureTensor chern_curvature(const MetricField& h, std::span<const double> p) {
  const auto& coords = h.coordinates();
  if (!coords.all_complex()) throw DomainError("Chern curvature needs a metric over complex axes");
  const MetricDerivatives d = metric_derivatives(h, p);
  const MatrixXcd hinv = inverse_pd(d.value);
  const std::size_t n = coords.size();
  const std::complex<double> half_i(0.0, 0.5);
  std::vector<MatrixXcd> dz(n), dzbar(n);
  for (std::size_t j = 0; j < n; ++j) {
    const MatrixXcd& dx = d.first[2 * j];
    const MatrixXcd& dy = d.first[2 * j + 1];
    dz[j] = hinv * (0.5 * dx - half_i * dy);
    dzbar[j] = hinv * (0.5 * dx + half_i * dy);
  }
  CurvatureTensor out;
  out.flavor = CurvatureFlavor::Chern;
  out.n = n;
  out.r = h.rank();
  out.metric = d.value;
  out.point.assign(p.begin(), p.end());
  out.blocks.resize(n * n);
  const std::complex<double> quarter_i(0.0, 0.25);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t xj = 2 * j, yj = xj + 1, xk = 2 * k, yk = xk + 1;
      const MatrixXcd mixed = 0.25 * (d.second[xj][xk] + d.second[yj][yk]) +
                              quarter_i * (d.second[xj][yk] - d.second[yj][xk]);
      out(j, k) = dzbar[k] * dz[j] - hinv * mixed;
    }
  }
  return out;
}

CurvatureTensor curvature(const MetricField& m, std::span<const double> p) {
  if (m.coordinates().all_real()) return real_curvature(m, p);
  if (m.coordinates().all_complex()) return chern_curvature(m, p);
  throw DomainError("curvature needs all-real or all-complex axes");
}

MatrixXcd nakano_matrix(const CurvatureTensor& theta, const MatrixXcd& G) {
  const auto n = static_cast<Index>(theta.n);
  const auto r = static_cast<Index>(theta.r);
  if (G.rows() != r || G.cols() != r || theta.blocks.size() != theta.n * theta.n)
    throw DomainError("curvature and metric shapes are inconsistent");
  MatrixXcd N(n * r, n * r);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < n; ++k)
      N.block(k * r, j * r, r, r) = G * theta(static_cast<std::size_t>(j), static_cast<std::size_t>(k));
  const double norm = N.norm();
  const double dev = (N - N.adjoint()).norm();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> gs(0.5 * (G + G.adjoint()), Eigen::EigenvaluesOnly);
  const double cond = gs.eigenvalues().cwiseAbs().maxCoeff() / std::max(gs.eigenvalues().cwiseAbs().minCoeff(), 1e-300);
  if (dev > std::max(1e-8, 1e-15 * cond) * norm) throw NumericalError("Nakano matrix is not Hermitian; derivatives are inconsistent");
  return 0.5 * (N + N.adjoint());
}

double generalized_lambda_min(const MatrixXcd& N, const MatrixXcd& G, std::size_t n) {
  const Index r = G.rows();
  MatrixXcd B = MatrixXcd::Zero(N.rows(), N.cols());
  for (Index j = 0; j < static_cast<Index>(n); ++j) B.block(j * r, j * r, r, r) = G;
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXcd> es(N, B, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("generalized eigen-solver failed");
  return es.eigenvalues().minCoeff();
}

PositivityReport certify_nakano(const MetricField& m, const SampleGrid& grid, std::optional<double> tol) {
  if (grid.points.empty()) throw DomainError("empty sample grid");
  PositivityReport rep;
  rep.table.resize(grid.points.size());
  parallel_for(grid.points.size(), [&](std::size_t i) {
    const auto& p = grid.points[i];
    const CurvatureTensor theta = curvature(m, p);
    const MatrixXcd N = nakano_matrix(theta, theta.metric);
    rep.table[i] = {p, generalized_lambda_min(N, theta.metric, theta.n), spectral_norm(N)};
  });
  double max_norm = 0.0;
  for (const auto& row : rep.table) max_norm = std::max(max_norm, row.norm);
  finalize(rep, tol, max_norm);
  return rep;
}

PositivityReport psh_hessian_test(const ScalarField& phi, const SampleGrid& grid, std::optional<double> tol) {
  if (grid.points.empty()) throw DomainError("empty sample grid");
  PositivityReport rep;
  rep.table.resize(grid.points.size());
  parallel_for(grid.points.size(), [&](std::size_t i) {
    const auto& p = grid.points[i];
    const MatrixXcd H = complex_hessian(phi, p);
    rep.table[i] = {p, hermitian_lambda_min(0.5 * (H + H.adjoint())), spectral_norm(0.5 * (H + H.adjoint()))};
  });
  double max_norm = 0.0;
  for (const auto& row : rep.table) max_norm = std::max(max_norm, row.norm);
  finalize(rep, tol, max_norm);
  return rep;
}

PositivityReport psh_submean_test(const ScalarField& phi, const std::vector<SubmeanSample>& samples,
                                  int circle_points, double tol) {
  if (samples.empty()) throw DomainError("no submean samples");
  if (circle_points < 1) throw DomainError("submean test needs circle points");
  const auto& coords = phi.coordinates();
  if (!coords.all_complex()) throw DomainError("submean test needs complex axes");
  const std::size_t n = coords.size();
  PositivityReport rep;
  rep.table.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t s) {
    const auto& smp = samples[s];
    if (smp.center.size() != n || smp.direction.size() != n) throw DomainError("submean sample dimension mismatch");
    auto to_real = [&](const std::vector<std::complex<double>>& z) {
      std::vector<double> p(2 * n);
      for (std::size_t j = 0; j < n; ++j) {
        p[2 * j] = z[j].real();
        p[2 * j + 1] = z[j].imag();
      }
      return p;
    };
    const std::vector<double> center = to_real(smp.center);
    const double at_center = phi.value(center);
    std::vector<double> vals(static_cast<std::size_t>(circle_points));
    for (int k = 0; k < circle_points; ++k) {
      const std::complex<double> rot = std::polar(smp.radius, 2.0 * std::numbers::pi * k / circle_points);
      std::vector<std::complex<double>> z(n);
      for (std::size_t j = 0; j < n; ++j) z[j] = smp.center[j] + rot * smp.direction[j];
      vals[static_cast<std::size_t>(k)] = phi.value(to_real(z));
    }
    const double mean = pairwise_sum(vals) / circle_points;
    rep.table[s] = {center, mean - at_center, std::abs(at_center)};
  });
  finalize(rep, tol, 0.0);
  return rep;
}

PositivityReport convexity_test(const ScalarField& phi, const SampleGrid& grid, std::optional<double> tol) {
  if (grid.points.empty()) throw DomainError("empty sample grid");
  PositivityReport rep;
  rep.table.resize(grid.points.size());
  parallel_for(grid.points.size(), [&](std::size_t i) {
    const auto& p = grid.points[i];
    const Eigen::MatrixXd H = real_hessian(phi, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    rep.table[i] = {p, es.eigenvalues().minCoeff(), es.eigenvalues().cwiseAbs().maxCoeff()};
  });
  double max_norm = 0.0;
  for (const auto& row : rep.table) max_norm = std::max(max_norm, row.norm);
  finalize(rep, tol, max_norm);
  return rep;
}

double griffiths_min(const CurvatureTensor& theta, const MatrixXcd& G, int samples, std::uint64_t seed) {
  const auto n = static_cast<Index>(theta.n);
  const auto r = static_cast<Index>(theta.r);
  std::vector<MatrixXcd> gtheta(theta.n * theta.n);
  for (std::size_t j = 0; j < theta.n; ++j)
    for (std::size_t k = 0; k < theta.n; ++k) gtheta[j * theta.n + k] = G * theta(j, k);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto random_vector = [&](Index dim) {
    Eigen::VectorXcd v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = {normal(rng), normal(rng)};
    return v;
  };

  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(samples, 1); ++s) {
    Eigen::VectorXcd xi = random_vector(n).normalized();
    Eigen::VectorXcd v = random_vector(r);
    v /= std::sqrt(std::real(v.dot(G * v)));
    for (int step = 0; step < 20; ++step) {
      // Minimize over ξ with v fixed: q = ξ† M ξ, M_kj = v† G Θ_jk v.
      MatrixXcd M(n, n);
      for (Index j = 0; j < n; ++j)
        for (Index k = 0; k < n; ++k)
          M(k, j) = v.dot(gtheta[static_cast<std::size_t>(j * n + k)] * v);
      M = 0.5 * (M + M.adjoint()).eval();
      Eigen::SelfAdjointEigenSolver<MatrixXcd> es(M);
      xi = es.eigenvectors().col(0);
      best = std::min(best, es.eigenvalues()(0));
      // Minimize over v with ξ fixed: q = v† A v subject to v† G v = 1.
      MatrixXcd A = MatrixXcd::Zero(r, r);
      for (Index j = 0; j < n; ++j)
        for (Index k = 0; k < n; ++k)
          A += std::conj(xi(k)) * xi(j) * gtheta[static_cast<std::size_t>(j * n + k)];
      A = 0.5 * (A + A.adjoint()).eval();
      Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXcd> gs(A, G);
      v = gs.eigenvectors().col(0);
      best = std::min(best, gs.eigenvalues()(0));
    }
  }
  return best;
}

}  // namespace nakano
