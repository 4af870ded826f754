#include "nakano/fields.hpp"

#include <cmath>
#include <numbers>

#include "nakano/errors.hpp"
#include "nakano/parallel.hpp"

namespace nakano {

Coordinates::Coordinates(std::vector<Axis> axes) : axes_(std::move(axes)) {
  for (std::size_t i = 0; i < axes_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (axes_[i].name == axes_[j].name) throw ConfigError("duplicate axis name '" + axes_[i].name + "'");
}

Coordinates Coordinates::real(const std::vector<std::string>& names) {
  std::vector<Axis> axes;
  for (const auto& n : names) axes.push_back({n, AxisKind::Real});
  return Coordinates(std::move(axes));
}

Coordinates Coordinates::complex(const std::vector<std::string>& names) {
  std::vector<Axis> axes;
  for (const auto& n : names) axes.push_back({n, AxisKind::Complex});
  return Coordinates(std::move(axes));
}

std::size_t Coordinates::real_dim() const {
  std::size_t d = 0;
  for (const auto& a : axes_) d += a.kind == AxisKind::Complex ? 2 : 1;
  return d;
}

std::size_t Coordinates::slot(std::size_t axis) const {
  std::size_t d = 0;
  for (std::size_t i = 0; i < axis; ++i) d += axes_[i].kind == AxisKind::Complex ? 2 : 1;
  return d;
}

std::vector<std::string> Coordinates::slot_names() const {
  std::vector<std::string> out;
  for (const auto& a : axes_) {
    if (a.kind == AxisKind::Complex) {
      out.push_back(a.name + "_re");
      out.push_back(a.name + "_im");
    } else {
      out.push_back(a.name);
    }
  }
  return out;
}

bool Coordinates::all_real() const {
  for (const auto& a : axes_)
    if (a.kind != AxisKind::Real) return false;
  return true;
}

bool Coordinates::all_complex() const {
  for (const auto& a : axes_)
    if (a.kind != AxisKind::Complex) return false;
  return true;
}

Coordinates Coordinates::operator+(const Coordinates& tail) const {
  std::vector<Axis> axes = axes_;
  axes.insert(axes.end(), tail.axes_.begin(), tail.axes_.end());
  return Coordinates(std::move(axes));
}

std::vector<HyperDual> seed(std::span<const double> p, std::span<const double> dir1, std::span<const double> dir2) {
  std::vector<HyperDual> x(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    x[i] = HyperDual(p[i], dir1.empty() ? 0.0 : dir1[i], dir2.empty() ? 0.0 : dir2[i], 0.0);
  return x;
}

std::vector<double> unit_vector(std::size_t dim, std::size_t i) {
  std::vector<double> e(dim, 0.0);
  e[i] = 1.0;
  return e;
}

namespace {

Program compile(const Coordinates& coords, const Expr& e) {
  const auto names = coords.slot_names();
  try {
    return Program(e, names);
  } catch (const DomainError& err) {
    throw ConfigError(std::string(err.what()) + " in expression '" + e.to_string() + "'");
  }
}

void check_dim(const Coordinates& c, std::size_t n) {
  if (n != c.real_dim())
    throw DomainError("point has " + std::to_string(n) + " coordinates, field expects " +
                      std::to_string(c.real_dim()));
}

class ExpressionField final : public ScalarField {
 public:
  ExpressionField(Coordinates coords, const Expr& e) : coords_(std::move(coords)), program_(compile(coords_, e)) {}
  const Coordinates& coordinates() const override { return coords_; }
  HyperDual jet(std::span<const HyperDual> x) const override {
    check_dim(coords_, x.size());
    return program_.run(x);
  }

 private:
  Coordinates coords_;
  Program program_;
};

class SumField final : public ScalarField {
 public:
  explicit SumField(std::vector<ScalarPtr> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw ConfigError("sum of zero fields");
    for (const auto& t : terms_)
      if (!(t->coordinates() == terms_[0]->coordinates())) throw ConfigError("summed fields differ in coordinates");
  }
  const Coordinates& coordinates() const override { return terms_[0]->coordinates(); }
  HyperDual jet(std::span<const HyperDual> x) const override {
    HyperDual s;
    for (const auto& t : terms_) s += t->jet(x);
    return s;
  }
  bool differentiable() const override {
    for (const auto& t : terms_)
      if (!t->differentiable()) return false;
    return true;
  }

 private:
  std::vector<ScalarPtr> terms_;
};

class EntrywiseMetric final : public MetricField {
 public:
  EntrywiseMetric(Coordinates coords, std::size_t rank, const std::vector<ComplexEntry>& entries)
      : coords_(std::move(coords)), rank_(rank) {
    if (rank == 0 || entries.size() != rank * rank) throw ConfigError("metric needs rank*rank entries");
    for (const auto& e : entries) {
      re_.push_back(compile(coords_, e.re));
      im_.push_back(e.im ? std::optional<Program>(compile(coords_, *e.im)) : std::nullopt);
    }
  }
  std::size_t rank() const override { return rank_; }
  const Coordinates& coordinates() const override { return coords_; }
  MatrixJet jet(std::span<const HyperDual> x) const override {
    check_dim(coords_, x.size());
    const auto r = static_cast<Eigen::Index>(rank_);
    MatrixJet out = MatrixJet::zero(r);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < r; ++j) {
        const auto k = static_cast<std::size_t>(i * r + j);
        const HyperDual re = re_[k].run(x);
        const HyperDual im = im_[k] ? im_[k]->run(x) : HyperDual{};
        out.v(i, j) = {re.value, im.value};
        out.d1(i, j) = {re.d1, im.d1};
        out.d2(i, j) = {re.d2, im.d2};
        out.d12(i, j) = {re.d12, im.d12};
      }
    }
    return out;
  }

 private:
  Coordinates coords_;
  std::size_t rank_;
  std::vector<Program> re_;
  std::vector<std::optional<Program>> im_;
};

class ConstantMetric final : public MetricField {
 public:
  ConstantMetric(Coordinates coords, Eigen::MatrixXcd value) : coords_(std::move(coords)), value_(std::move(value)) {
    if (value_.rows() == 0 || value_.rows() != value_.cols()) throw ConfigError("constant metric must be square");
  }
  std::size_t rank() const override { return static_cast<std::size_t>(value_.rows()); }
  const Coordinates& coordinates() const override { return coords_; }
  MatrixJet jet(std::span<const HyperDual> x) const override {
    check_dim(coords_, x.size());
    MatrixJet out = MatrixJet::zero(value_.rows());
    out.v = value_;
    return out;
  }

 private:
  Coordinates coords_;
  Eigen::MatrixXcd value_;
};

class ScaledMetric final : public MetricField {
 public:
  ScaledMetric(ScalarPtr scale, MetricPtr inner) : scale_(std::move(scale)), inner_(std::move(inner)) {
    if (!(scale_->coordinates() == inner_->coordinates())) throw ConfigError("scale and metric differ in coordinates");
  }
  std::size_t rank() const override { return inner_->rank(); }
  const Coordinates& coordinates() const override { return inner_->coordinates(); }
  MatrixJet jet(std::span<const HyperDual> x) const override { return scale_->jet(x) * inner_->jet(x); }

 private:
  ScalarPtr scale_;
  MetricPtr inner_;
};

class MexpMetric final : public MetricField {
 public:
  MexpMetric(const Coordinates& coords, std::size_t rank, const std::vector<ComplexEntry>& q)
      : q_(std::make_shared<EntrywiseMetric>(coords, rank, q)) {}
  std::size_t rank() const override { return q_->rank(); }
  const Coordinates& coordinates() const override { return q_->coordinates(); }
  MatrixJet jet(std::span<const HyperDual> x) const override { return mexp_negative(q_->jet(x)); }

 private:
  std::shared_ptr<const EntrywiseMetric> q_;
};

class AveragedMetric final : public MetricField {
 public:
  AveragedMetric(MetricPtr inner, std::vector<std::size_t> axes, int points)
      : inner_(std::move(inner)), axes_(std::move(axes)), points_(points) {
    if (points_ < 1) throw ConfigError("torus average needs at least one point per angle");
    for (auto a : axes_)
      if (a >= inner_->coordinates().size() || inner_->coordinates().axes()[a].kind != AxisKind::Complex)
        throw ConfigError("torus average requires complex axes");
  }
  std::size_t rank() const override { return inner_->rank(); }
  const Coordinates& coordinates() const override { return inner_->coordinates(); }
  MatrixJet jet(std::span<const HyperDual> x) const override {
    std::size_t total = 1;
    for (std::size_t k = 0; k < axes_.size(); ++k) total *= static_cast<std::size_t>(points_);
    std::vector<MatrixJet> terms(total);
    const auto& coords = inner_->coordinates();
    for (std::size_t n = 0; n < total; ++n) {
      std::vector<HyperDual> y(x.begin(), x.end());
      std::size_t rem = n;
      for (auto a : axes_) {
        const auto k = rem % static_cast<std::size_t>(points_);
        rem /= static_cast<std::size_t>(points_);
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / points_;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const std::size_t sl = coords.slot(a);
        y[sl] = c * x[sl] - s * x[sl + 1];
        y[sl + 1] = s * x[sl] + c * x[sl + 1];
      }
      terms[n] = inner_->jet(y);
    }
    MatrixJet sum = pairwise_sum(terms);
    sum *= 1.0 / static_cast<double>(total);
    return sum;
  }

 private:
  MetricPtr inner_;
  std::vector<std::size_t> axes_;
  int points_;
};

Coordinates complexify(const Coordinates& c) {
  if (!c.all_real()) throw ConfigError("complexification needs a metric on real axes");
  std::vector<std::string> names;
  for (const auto& a : c.axes()) names.push_back(a.name);
  return Coordinates::complex(names);
}

class ComplexifiedMetric final : public MetricField {
 public:
  explicit ComplexifiedMetric(MetricPtr real) : real_(std::move(real)), coords_(complexify(real_->coordinates())) {}
  std::size_t rank() const override { return real_->rank(); }
  const Coordinates& coordinates() const override { return coords_; }
  MatrixJet jet(std::span<const HyperDual> x) const override {
    check_dim(coords_, x.size());
    std::vector<HyperDual> re(x.size() / 2);
    for (std::size_t j = 0; j < re.size(); ++j) re[j] = x[2 * j];
    return real_->jet(re);
  }

 private:
  MetricPtr real_;
  Coordinates coords_;
};

class ExpReducedMetric final : public MetricField {
 public:
  ExpReducedMetric(MetricPtr tube, std::vector<std::size_t> axes, bool jacobian)
      : tube_(std::move(tube)), axes_(std::move(axes)), jacobian_(jacobian) {
    for (auto a : axes_)
      if (a >= tube_->coordinates().size() || tube_->coordinates().axes()[a].kind != AxisKind::Complex)
        throw ConfigError("exp reduction requires complex tube axes");
  }
  std::size_t rank() const override { return tube_->rank(); }
  const Coordinates& coordinates() const override { return tube_->coordinates(); }
  MatrixJet jet(std::span<const HyperDual> x) const override {
    check_dim(tube_->coordinates(), x.size());
    std::vector<HyperDual> z(x.begin(), x.end());
    HyperDual factor(1.0);
    for (auto a : axes_) {
      const std::size_t s = tube_->coordinates().slot(a);
      const HyperDual rho2 = x[s] * x[s] + x[s + 1] * x[s + 1];
      if (!(rho2.value > 0.0)) throw DomainError("exp reduction evaluated on a coordinate axis (|w| = 0)");
      z[s] = 0.5 * log(rho2);
      z[s + 1] = HyperDual(0.0);
      if (jacobian_) factor = factor * reciprocal(2.0 * std::numbers::pi * rho2);
    }
    MatrixJet h = tube_->jet(z);
    if (!jacobian_) return h;
    return factor * h;
  }

 private:
  MetricPtr tube_;
  std::vector<std::size_t> axes_;
  bool jacobian_;
};

MatrixJet scaled(const MatrixJet& a, double s) {
  MatrixJet out = a;
  out *= s;
  return out;
}

}  // namespace

ScalarPtr expression_field(const Coordinates& coords, const Expr& e) {
  return std::make_shared<ExpressionField>(coords, e);
}

ScalarPtr expression_field(const Coordinates& coords, std::string_view text) {
  return expression_field(coords, parse(text));
}

ScalarPtr sum_field(std::vector<ScalarPtr> terms) { return std::make_shared<SumField>(std::move(terms)); }

Eigen::VectorXd gradient(const ScalarField& f, std::span<const double> p) {
  const std::size_t n = p.size();
  Eigen::VectorXd g(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = unit_vector(n, i);
    g(static_cast<Eigen::Index>(i)) = f.jet(seed(p, e, {})).d1;
  }
  return g;
}

Eigen::MatrixXd real_hessian(const ScalarField& f, std::span<const double> p) {
  if (!f.differentiable()) throw NumericalError("field provides values only; no derivatives available");
  const std::size_t n = p.size();
  Eigen::MatrixXd h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = f.jet(seed(p, unit_vector(n, i), unit_vector(n, j))).d12;
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return h;
}

Eigen::MatrixXcd complex_hessian(const ScalarField& f, std::span<const double> p) {
  const auto& c = f.coordinates();
  if (!c.all_complex()) throw DomainError("complex Hessian needs complex axes");
  const Eigen::MatrixXd h = real_hessian(f, p);
  const auto n = static_cast<Eigen::Index>(c.size());
  Eigen::MatrixXcd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index xj = 2 * j, yj = 2 * j + 1, xk = 2 * k, yk = 2 * k + 1;
      out(j, k) = {0.25 * (h(xj, xk) + h(yj, yk)), 0.25 * (h(xj, yk) - h(yj, xk))};
    }
  }
  return out;
}

MetricPtr entrywise_metric(const Coordinates& coords, std::size_t rank, const std::vector<ComplexEntry>& entries) {
  return std::make_shared<EntrywiseMetric>(coords, rank, entries);
}

MetricPtr constant_metric(const Coordinates& coords, const Eigen::MatrixXcd& value) {
  return std::make_shared<ConstantMetric>(coords, value);
}

MetricPtr scaled_metric(ScalarPtr scale, MetricPtr inner) {
  return std::make_shared<ScaledMetric>(std::move(scale), std::move(inner));
}

MetricPtr mexp_metric(const Coordinates& coords, std::size_t rank, const std::vector<ComplexEntry>& q_entries) {
  return std::make_shared<MexpMetric>(coords, rank, q_entries);
}

MetricPtr averaged_metric(MetricPtr inner, std::vector<std::size_t> rotating_axes, int points) {
  return std::make_shared<AveragedMetric>(std::move(inner), std::move(rotating_axes), points);
}

MetricPtr complexified_metric(MetricPtr real_metric) {
  return std::make_shared<ComplexifiedMetric>(std::move(real_metric));
}

MetricPtr exp_reduced_metric(MetricPtr tube_metric, std::vector<std::size_t> tube_axes, bool with_jacobian) {
  return std::make_shared<ExpReducedMetric>(std::move(tube_metric), std::move(tube_axes), with_jacobian);
}

namespace {

constexpr int kMexpTerms = 16;

template <class M>
struct JetOf {
  M v, d1, d2, d12;
};

template <class M>
void multiply_into(const JetOf<M>& a, const JetOf<M>& b, JetOf<M>& out) {
  out.v.noalias() = a.v * b.v;
  out.d1.noalias() = a.d1 * b.v;
  out.d1.noalias() += a.v * b.d1;
  out.d2.noalias() = a.d2 * b.v;
  out.d2.noalias() += a.v * b.d2;
  out.d12.noalias() = a.d12 * b.v;
  out.d12.noalias() += a.d1 * b.d2;
  out.d12.noalias() += a.d2 * b.d1;
  out.d12.noalias() += a.v * b.d12;
}

// exp(s·a) squared `squarings` times, with fixed-size storage when R > 0.
template <int R>
MatrixJet mexp_scaled(const MatrixJet& a, double s, int squarings) {
  using M = Eigen::Matrix<std::complex<double>, R, R>;
  const auto r = a.rank();
  const JetOf<M> x{s * a.v, s * a.d1, s * a.d2, s * a.d12};
  JetOf<M> e{M::Identity(r, r), M::Zero(r, r), M::Zero(r, r), M::Zero(r, r)};
  JetOf<M> next = e;
  // Horner: I + x(I + x/2(I + x/3(... (I + x/16))))
  for (int k = kMexpTerms; k >= 1; --k) {
    multiply_into(x, e, next);
    const double c = 1.0 / k;
    next.v *= c;
    next.d1 *= c;
    next.d2 *= c;
    next.d12 *= c;
    next.v.diagonal().array() += 1.0;
    std::swap(e, next);
  }
  for (int i = 0; i < squarings; ++i) {
    multiply_into(e, e, next);
    std::swap(e, next);
  }
  return {e.v, e.d1, e.d2, e.d12};
}

}  // namespace

MatrixJet mexp_negative(const MatrixJet& a) {
  const double norm = a.v.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const double s = -std::ldexp(1.0, -squarings);
  switch (a.rank()) {
    case 1: return mexp_scaled<1>(a, s, squarings);
    case 2: return mexp_scaled<2>(a, s, squarings);
    case 3: return mexp_scaled<3>(a, s, squarings);
    case 4: return mexp_scaled<4>(a, s, squarings);
    default: return mexp_scaled<Eigen::Dynamic>(a, s, squarings);
  }
}

Eigen::MatrixXcd metric_eval(const MetricField& m, std::span<const double> p) {
  const Eigen::MatrixXcd v = m.jet(seed(p)).v;
  if (!v.allFinite()) throw NumericalError("metric value is not finite");
  const double norm = v.norm();
  if ((v - v.adjoint()).norm() > 1e-12 * std::max(norm, 1e-300))
    throw NumericalError("metric value is not Hermitian");
  Eigen::MatrixXcd h = 0.5 * (v + v.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw NumericalError("metric value is not positive definite");
  return h;
}

Eigen::MatrixXcd first_derivative(const MetricField& m, std::span<const double> p, std::size_t slot) {
  return m.jet(seed(p, unit_vector(p.size(), slot), {})).d1;
}

Eigen::MatrixXcd second_derivative(const MetricField& m, std::span<const double> p, std::size_t j, std::size_t k) {
  if (j >= p.size() || k >= p.size()) throw DomainError("derivative axis out of range");
  return m.jet(seed(p, unit_vector(p.size(), j), unit_vector(p.size(), k))).d12;
}

Eigen::MatrixXcd wirtinger1(const MetricField& m, std::span<const double> p, std::size_t axis, bool conjugate) {
  const auto& c = m.coordinates();
  if (axis >= c.size() || c.axes()[axis].kind != AxisKind::Complex)
    throw DomainError("Wirtinger derivative needs a complex axis");
  const std::size_t s = c.slot(axis);
  const std::complex<double> sign(0.0, conjugate ? 0.5 : -0.5);
  return 0.5 * first_derivative(m, p, s) + sign * first_derivative(m, p, s + 1);
}

Eigen::MatrixXcd wirtinger2(const MetricField& m, std::span<const double> p, std::size_t j, std::size_t k) {
  const auto& c = m.coordinates();
  if (j >= c.size() || k >= c.size() || c.axes()[j].kind != AxisKind::Complex ||
      c.axes()[k].kind != AxisKind::Complex)
    throw DomainError("Wirtinger derivative needs complex axes");
  const std::size_t xj = c.slot(j), yj = xj + 1, xk = c.slot(k), yk = xk + 1;
  const std::complex<double> i4(0.0, 0.25);
  return 0.25 * (second_derivative(m, p, xj, xk) + second_derivative(m, p, yj, yk)) +
         i4 * (second_derivative(m, p, xj, yk) - second_derivative(m, p, yj, xk));
}

Eigen::MatrixXcd torus_average(const MetricField& m, std::span<const double> p,
                               const std::vector<std::size_t>& rotating_axes, int points) {
  MetricPtr alias(std::shared_ptr<const MetricField>{}, &m);
  return averaged_metric(alias, rotating_axes, points)->jet(seed(p)).v;
}

MetricDerivatives metric_derivatives(const MetricField& m, std::span<const double> p) {
  const std::size_t n = p.size();
  MetricDerivatives out;
  out.value = metric_eval(m, p);
  out.first.resize(n);
  out.second.assign(n, std::vector<Eigen::MatrixXcd>(n));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j; k < n; ++k) {
      const MatrixJet jt = m.jet(seed(p, unit_vector(n, j), unit_vector(n, k)));
      if (k == j) out.first[j] = jt.d1;
      out.second[j][k] = jt.d12;
      out.second[k][j] = jt.d12;
    }
  }
  return out;
}

}  // namespace nakano
