#include "nakano/l2.hpp"

#include <cmath>
#include <complex>

#include "nakano/errors.hpp"
#include "nakano/parallel.hpp"

namespace nakano {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using cd = std::complex<double>;

namespace {

constexpr double kSolverTolerance = 1e-12;
constexpr double kMinLaplacian = 1e-8;

// Stencil weights of ½(D_x + i D_y) at corners 00, 10, 01, 11.
std::array<cd, 4> stencil(double delta) {
  const double s = 1.0 / (4.0 * delta);
  return {cd(-s, -s), cd(s, -s), cd(-s, s), cd(s, s)};
}

void check_problem(const L2Problem& p) {
  if (!p.h || !p.psi) throw ConfigError("L2 problem needs a metric and a weight");
  const Coordinates& hc = p.h->coordinates();
  if (hc.size() != 1 || !hc.all_complex()) throw ConfigError("L2 metric must live on one complex axis");
  const Coordinates& pc = p.psi->coordinates();
  if (pc.size() != 1 || !pc.all_complex()) throw ConfigError("L2 weight must live on one complex axis");
  if (p.f_re.size() != p.h->rank() || (!p.f_im.empty() && p.f_im.size() != p.h->rank()))
    throw ConfigError("datum must have one component per bundle index");
}

struct Weights {
  std::vector<MatrixXcd> vertex;          // h^T e^{-ψ} δ²
  std::vector<MatrixXcd> vertex_inverse;
};

Weights vertex_weights(const L2Problem& p, const DbarGrid& g) {
  const double area = g.delta * g.delta;
  Weights w;
  w.vertex.resize(g.vertices.size());
  w.vertex_inverse.resize(g.vertices.size());
  parallel_for(g.vertices.size(), [&](std::size_t i) {
    const std::array<double, 2>& z = g.vertices[i];
    const MatrixXcd h = metric_eval(*p.h, z);
    w.vertex[i] = h.transpose() * (std::exp(-p.psi->value(z)) * area);
    w.vertex_inverse[i] = w.vertex[i].inverse();
  });
  return w;
}

VectorXcd dbar_adjoint(const DbarGrid& g, std::size_t r, const VectorXcd& lambda) {
  const auto a = stencil(g.delta);
  VectorXcd out = VectorXcd::Zero(static_cast<Eigen::Index>(g.vertices.size() * r));
  for (std::size_t c = 0; c < g.cells.size(); ++c)
    for (int k = 0; k < 4; ++k)
      for (std::size_t l = 0; l < r; ++l)
        out(static_cast<Eigen::Index>(g.cells[c][k] * r + l)) +=
            std::conj(a[k]) * lambda(static_cast<Eigen::Index>(c * r + l));
  return out;
}

VectorXcd apply_dbar_rank(const DbarGrid& g, std::size_t r, const VectorXcd& u) {
  const auto a = stencil(g.delta);
  VectorXcd out(static_cast<Eigen::Index>(g.cells.size() * r));
  parallel_for(g.cells.size(), [&](std::size_t c) {
    for (std::size_t l = 0; l < r; ++l) {
      cd s = 0;
      for (int k = 0; k < 4; ++k) s += a[k] * u(static_cast<Eigen::Index>(g.cells[c][k] * r + l));
      out(static_cast<Eigen::Index>(c * r + l)) = s;
    }
  });
  return out;
}

VectorXcd apply_blocks(const std::vector<MatrixXcd>& blocks, const VectorXcd& x) {
  const auto r = blocks.empty() ? 0 : blocks.front().rows();
  VectorXcd out(x.size());
  parallel_for(blocks.size(), [&](std::size_t i) {
    out.segment(static_cast<Eigen::Index>(i) * r, r) = blocks[i] * x.segment(static_cast<Eigen::Index>(i) * r, r);
  });
  return out;
}

}  // namespace

DbarGrid make_dbar_grid(DbarGrid::Shape shape, int n, double half_width) {
  if (n < 2) throw ConfigError("L2 grid needs at least 2 cells per axis");
  if (!(half_width > 0.0)) throw ConfigError("L2 grid half width must be positive");
  DbarGrid g;
  g.shape = shape;
  g.n = n;
  g.half_width = half_width;
  g.delta = 2.0 * half_width / n;
  const int m = n + 1;
  auto coord = [&](int i) { return -half_width + i * g.delta; };
  std::vector<char> in_mask(static_cast<std::size_t>(m * m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double x = coord(i), y = coord(j);
      in_mask[static_cast<std::size_t>(i * m + j)] =
          shape == DbarGrid::Shape::Square || std::hypot(x, y) < half_width;
    }
  g.vertex_index.assign(static_cast<std::size_t>(m * m), -1);
  auto vid = [&](int i, int j) {
    int& id = g.vertex_index[static_cast<std::size_t>(i * m + j)];
    if (id < 0) {
      id = static_cast<int>(g.vertices.size());
      g.vertices.push_back({coord(i), coord(j)});
    }
    return id;
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const bool active = in_mask[static_cast<std::size_t>(i * m + j)] &&
                          in_mask[static_cast<std::size_t>((i + 1) * m + j)] &&
                          in_mask[static_cast<std::size_t>(i * m + j + 1)] &&
                          in_mask[static_cast<std::size_t>((i + 1) * m + j + 1)];
      if (!active) continue;
      g.cells.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)});
      g.centers.push_back({coord(i) + g.delta / 2, coord(j) + g.delta / 2});
    }
  if (g.cells.empty()) throw DomainError("L2 grid has no active cells");
  return g;
}

Eigen::VectorXcd apply_dbar(const DbarGrid& g, const Eigen::VectorXcd& u) {
  if (u.size() % static_cast<Eigen::Index>(g.vertices.size()) != 0)
    throw DomainError("vertex vector length does not match the grid");
  return apply_dbar_rank(g, static_cast<std::size_t>(u.size()) / g.vertices.size(), u);
}

Eigen::VectorXcd sample_datum(const L2Problem& p, const DbarGrid& g) {
  check_problem(p);
  const std::size_t r = p.h->rank();
  VectorXcd f(static_cast<Eigen::Index>(g.cells.size() * r));
  parallel_for(g.cells.size(), [&](std::size_t c) {
    const std::array<double, 2>& z = g.centers[c];
    for (std::size_t l = 0; l < r; ++l)
      f(static_cast<Eigen::Index>(c * r + l)) = {p.f_re[l]->value(z), p.f_im.empty() ? 0.0 : p.f_im[l]->value(z)};
  });
  return f;
}

double weighted_norm2(const L2Problem& p, const DbarGrid& g, const Eigen::VectorXcd& u) {
  check_problem(p);
  const Weights w = vertex_weights(p, g);
  const VectorXcd wu = apply_blocks(w.vertex, u);
  return u.dot(wu).real();
}

L2Solution minimal_solution(const L2Problem& p, const DbarGrid& g, const std::optional<Eigen::VectorXcd>& start) {
  check_problem(p);
  const std::size_t r = p.h->rank();
  const auto nc = static_cast<Eigen::Index>(g.cells.size() * r);
  for (const auto& c : g.centers) {
    const double lap = complex_hessian(*p.psi, c)(0, 0).real();
    if (!(lap >= kMinLaplacian)) throw DomainError("weight is not strictly plurisubharmonic on the grid");
  }
  const Weights w = vertex_weights(p, g);
  const VectorXcd f = sample_datum(p, g);
  auto op = [&](const VectorXcd& lam) {
    return apply_dbar_rank(g, r, apply_blocks(w.vertex_inverse, dbar_adjoint(g, r, lam)));
  };

  const auto a = stencil(g.delta);
  VectorXcd diag = VectorXcd::Zero(nc);
  for (std::size_t c = 0; c < g.cells.size(); ++c)
    for (int k = 0; k < 4; ++k)
      for (std::size_t l = 0; l < r; ++l)
        diag(static_cast<Eigen::Index>(c * r + l)) +=
            std::norm(a[k]) * w.vertex_inverse[static_cast<std::size_t>(g.cells[c][k])](l, l);
  const VectorXcd precond = diag.cwiseInverse();

  L2Solution out;
  VectorXcd lam = start ? *start : VectorXcd::Zero(nc);
  if (lam.size() != nc) throw ConfigError("starting multiplier has the wrong length");
  const double fnorm = f.norm();
  if (fnorm == 0.0) {
    lam.setZero();
  } else {
    const int max_iterations = 20 * static_cast<int>(nc) + 1000;
    for (int restart = 0; restart < 4; ++restart) {
      VectorXcd res = f - op(lam);
      if (res.norm() <= kSolverTolerance * fnorm) break;
      VectorXcd z = precond.cwiseProduct(res);
      VectorXcd dir = z;
      cd rz = res.dot(z);
      for (int it = 0; it < max_iterations; ++it) {
        const VectorXcd ad = op(dir);
        const double curv = dir.dot(ad).real();
        if (!(curv > 0.0)) throw NumericalError("normal operator is singular: degenerate mask");
        const cd alpha = rz / curv;
        lam += alpha * dir;
        res -= alpha * ad;
        ++out.iterations;
        if (res.norm() <= kSolverTolerance * fnorm) break;
        z = precond.cwiseProduct(res);
        const cd rz_next = res.dot(z);
        dir = z + (rz_next / rz) * dir;
        rz = rz_next;
      }
    }
    if ((f - op(lam)).norm() > 10 * kSolverTolerance * fnorm)
      throw NumericalError("conjugate gradients did not converge");
  }
  out.multiplier = lam;
  out.u = apply_blocks(w.vertex_inverse, dbar_adjoint(g, r, lam));
  out.residual = (apply_dbar_rank(g, r, out.u) - f).cwiseAbs().maxCoeff();
  return out;
}

L2Report check_estimate(const L2Problem& p, const DbarGrid& g) {
  const L2Solution s = minimal_solution(p, g);
  const std::size_t r = p.h->rank();
  const double area = g.delta * g.delta;
  const VectorXcd f = sample_datum(p, g);
  std::vector<double> rhs_terms(g.cells.size());
  parallel_for(g.cells.size(), [&](std::size_t c) {
    const std::array<double, 2>& z = g.centers[c];
    const MatrixXcd h = metric_eval(*p.h, z);
    const VectorXcd fc = f.segment(static_cast<Eigen::Index>(c * r), static_cast<Eigen::Index>(r));
    const double lap = complex_hessian(*p.psi, z)(0, 0).real();
    rhs_terms[c] = fc.dot(h.transpose() * fc).real() * std::exp(-p.psi->value(z)) * area / lap;
  });
  L2Report rep;
  rep.lhs = weighted_norm2(p, g, s.u);
  rep.rhs = pairwise_sum(rhs_terms);
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
  rep.residual = s.residual;
  rep.iterations = s.iterations;
  rep.n = g.n;
  rep.delta = g.delta;
  rep.cells = g.cells.size();
  rep.unknowns = g.vertices.size() * r;
  return rep;
}

ViolationResult violation_search(MetricPtr h, const std::vector<ScalarPtr>& psi_family,
                                 const std::vector<Datum>& data, const DbarGrid& g) {
  if (psi_family.empty() || data.empty()) throw ConfigError("empty search space");
  ViolationResult out;
  out.ratios.assign(psi_family.size(), std::vector<double>(data.size()));
  bool first = true;
  for (std::size_t i = 0; i < psi_family.size(); ++i)
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double ratio = check_estimate({h, psi_family[i], data[j].re, data[j].im}, g).ratio;
      out.ratios[i][j] = ratio;
      if (first || ratio > out.max_ratio) {
        out.max_ratio = ratio;
        out.best_psi = i;
        out.best_datum = j;
        first = false;
      }
    }
  return out;
}

}  // namespace nakano
