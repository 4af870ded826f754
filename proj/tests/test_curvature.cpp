#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "nakano/curvature.hpp"
#include "nakano/errors.hpp"
#include "oracles.hpp"

using namespace nakano;
using cd = std::complex<double>;

namespace {
std::vector<double> v(std::initializer_list<double> xs) { return xs; }

MetricPtr scalar_metric(const Coordinates& c, const std::string& text) {
  return entrywise_metric(c, 1, {ComplexEntry{parse(text), std::nullopt}});
}

std::vector<ComplexEntry> entries(std::initializer_list<std::string> texts) {
  std::vector<ComplexEntry> out;
  for (const auto& t : texts) out.push_back({parse(t), std::nullopt});
  return out;
}

Eigen::MatrixXcd exp_neg_eig(const Eigen::MatrixXcd& q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(q);
  const Eigen::VectorXd d = (-es.eigenvalues().array()).exp();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

double entry(const Eigen::MatrixXcd& m) { return m(0, 0).real(); }
}  // namespace

TEST_CASE("real_curvature") {
  const Coordinates x = Coordinates::real({"x1"});
  for (double p : {0.0, 0.7, -1.3}) {
    const CurvatureTensor th = real_curvature(*scalar_metric(x, "exp(-(x1^2))"), v({p}));
    CHECK(std::abs(entry(th(0, 0)) - 2.0) <= 1e-8);
  }
  CHECK(real_curvature(*constant_metric(x, Eigen::MatrixXcd::Identity(3, 3)), v({0.2}))(0, 0).norm() == 0.0);
  const auto diag = entrywise_metric(x, 2, entries({"exp(-(x1^2))", "0", "0", "exp(-2*x1^2)"}));
  const CurvatureTensor d = real_curvature(*diag, v({0.9}));
  CHECK(d(0, 0)(0, 0).real() == doctest::Approx(2.0));
  CHECK(d(0, 0)(1, 1).real() == doctest::Approx(4.0));
  CHECK(std::abs(d(0, 0)(0, 1)) < 1e-14);
  CHECK_THROWS_AS(real_curvature(*scalar_metric(Coordinates::complex({"z"}), "1"), v({0, 0})), DomainError);
}

TEST_CASE("real_curvature agrees with differentiating g^{-1} dg numerically") {
  const Coordinates x = Coordinates::real({"x1", "x2"});
  const auto g = mexp_metric(x, 2, entries({"x1^2 + 0.5*x2^2", "0.3*x1*x2", "0.3*x1*x2", "x2^2 + x1"}));
  auto q_at = [](const std::vector<double>& p) {
    Eigen::MatrixXcd q(2, 2);
    q << p[0] * p[0] + 0.5 * p[1] * p[1], 0.3 * p[0] * p[1], 0.3 * p[0] * p[1], p[1] * p[1] + p[0];
    return q;
  };
  const std::vector<double> p{0.4, -0.6};
  const CurvatureTensor th = real_curvature(*g, p);
  const double h = 1e-4;
  for (std::size_t j = 0; j < 2; ++j) {
    // A_j(y) = g⁻¹ ∂_j g by a fourth-order stencil of the oracle exponential.
    auto a_j = [&](std::vector<double> y) {
      auto at = [&](double s) {
        std::vector<double> z = y;
        z[j] += s;
        return exp_neg_eig(q_at(z));
      };
      const Eigen::MatrixXcd dg = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
      return Eigen::MatrixXcd(exp_neg_eig(q_at(y)).inverse() * dg);
    };
    for (std::size_t k = 0; k < 2; ++k) {
      const double s = 1e-3;
      auto shift = [&](double d) {
        std::vector<double> z = p;
        z[k] += d;
        return a_j(z);
      };
      const Eigen::MatrixXcd oracle = -(8.0 * (shift(s) - shift(-s)) - (shift(2 * s) - shift(-2 * s))) / (12 * s);
      CHECK((th(j, k) - oracle).norm() < 1e-6);
    }
  }
}

TEST_CASE("chern_curvature") {
  const Coordinates z = Coordinates::complex({"z1"});
  const CurvatureTensor th = chern_curvature(*scalar_metric(z, "exp(-abs2(z1_re, z1_im))"), v({0.3, -0.8}));
  CHECK(std::abs(th(0, 0)(0, 0) - cd(1.0, 0.0)) <= 1e-8);
  CHECK(chern_curvature(*constant_metric(z, Eigen::MatrixXcd::Identity(2, 2)), v({1, 1}))(0, 0).norm() == 0.0);
  CHECK(curvature(*scalar_metric(z, "1"), v({0, 0})).flavor == CurvatureFlavor::Chern);

  // h = e^{-φ}, φ = |z1|² + Re(z1 z̄2)·0.5 + |z2|²: Θ_{jk̄} = ∂²φ/∂z_j∂z̄_k.
  const Coordinates z2 = Coordinates::complex({"z1", "z2"});
  const auto h = scalar_metric(
      z2, "exp(-(abs2(z1_re, z1_im) + 0.5*(z1_re*z2_re + z1_im*z2_im) + abs2(z2_re, z2_im)))");
  const CurvatureTensor t2 = chern_curvature(*h, v({0.1, 0.2, -0.3, 0.4}));
  CHECK(std::abs(t2(0, 1)(0, 0) - cd(0.25, 0.0)) < 1e-12);
  CHECK(std::abs(t2(1, 0)(0, 0) - cd(0.25, 0.0)) < 1e-12);
  CHECK(std::abs(t2(1, 1)(0, 0) - cd(1.0, 0.0)) < 1e-12);
}

TEST_CASE("property: scalar identity, real curvature of e^{-phi} is the Hessian of phi") {
  testing::ExprCorpus corpus(404);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const Coordinates x = Coordinates::real({"x1", "x2"});
  for (int i = 0; i < 25; ++i) {
    const std::string phi = corpus.next();
    const std::vector<double> p{u(rng), u(rng)};
    double phi_value = 0.0;
    try {
      phi_value = evaluate(parse(phi), {{"x1", p[0]}, {"x2", p[1]}});
    } catch (const DomainError&) {
      continue;
    }
    if (std::abs(phi_value) > 30) continue;
    const CurvatureTensor th = real_curvature(*scalar_metric(x, "exp(-(" + phi + "))"), p);
    const Eigen::MatrixXd hess = real_hessian(*expression_field(x, phi), p);
    INFO(phi);
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k)
        CHECK(std::abs(th(j, k)(0, 0).real() - hess(j, k)) <= 1e-10 * std::max(1.0, std::abs(hess(j, k))));
  }
}

TEST_CASE("property: conformal invariance and the real Hessian bridge") {
  const Coordinates x = Coordinates::real({"x1", "x2"});
  const std::vector<ComplexEntry> q{{parse("x1^2 + x2^2 + 1"), std::nullopt},
                                    {parse("0.2*x1"), parse("0.1*x2")},
                                    {parse("0.2*x1"), parse("-0.1*x2")},
                                    {parse("2*x2^2 + x1*x2 + x1^2"), std::nullopt}};
  const auto g = mexp_metric(x, 2, q);
  const auto cg = scaled_metric(expression_field(x, "3.5"), g);
  const auto h = complexified_metric(g);
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 10; ++i) {
    const std::vector<double> p{u(rng), u(rng)};
    const CurvatureTensor a = real_curvature(*g, p);
    const CurvatureTensor b = real_curvature(*cg, p);
    const CurvatureTensor c = chern_curvature(*h, v({p[0], u(rng), p[1], u(rng)}));
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK((a(j, k) - b(j, k)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((c(j, k) - 0.25 * a(j, k)).cwiseAbs().maxCoeff() <= 1e-10);
      }
  }
}

TEST_CASE("nakano_matrix") {
  const Coordinates x = Coordinates::real({"x1"});
  const auto g = scalar_metric(x, "exp(-(x1^2))");
  const CurvatureTensor th = real_curvature(*g, v({0}));
  const Eigen::MatrixXcd n = nakano_matrix(th, th.metric);
  REQUIRE(n.rows() == 1);
  CHECK(n(0, 0).real() == doctest::Approx(2.0));

  CurvatureTensor zero{CurvatureFlavor::Real, 2, 2, std::vector<Eigen::MatrixXcd>(4, Eigen::MatrixXcd::Zero(2, 2)),
                       Eigen::MatrixXcd::Identity(2, 2), {0, 0}};
  CHECK(nakano_matrix(zero, zero.metric).norm() == 0.0);

  const auto diag = entrywise_metric(x, 2, entries({"exp(-(x1^2))", "0", "0", "exp(-2*x1^2)"}));
  const CurvatureTensor d = real_curvature(*diag, v({0}));
  const Eigen::MatrixXcd nd = nakano_matrix(d, d.metric);
  CHECK(nd(0, 0).real() == doctest::Approx(2.0));
  CHECK(nd(1, 1).real() == doctest::Approx(4.0));

  // Form check: u†Nu = Σ (Θ_jk u_j, u_k)_G with (a, b)_G = b† G a.
  const Coordinates x2 = Coordinates::real({"x1", "x2"});
  const auto m = mexp_metric(x2, 2, entries({"x1^2 + x2^2", "0.4*x1*x2", "0.4*x1*x2", "2*x1^2 + x2^2"}));
  const CurvatureTensor t = real_curvature(*m, v({0.3, 0.5}));
  const Eigen::MatrixXcd big = nakano_matrix(t, t.metric);
  Eigen::VectorXcd u = Eigen::VectorXcd::Random(4);
  cd form = 0;
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t k = 0; k < 2; ++k)
      form += u.segment(2 * k, 2).dot(t.metric * t(j, k) * u.segment(2 * j, 2));
  CHECK(std::abs(u.dot(big * u) - form) < 1e-12);

  CurvatureTensor skew = zero;
  skew(0, 1) = Eigen::MatrixXcd::Identity(2, 2);
  CHECK_THROWS_AS(nakano_matrix(skew, skew.metric), NumericalError);
}

TEST_CASE("certify_nakano") {
  const Coordinates x = Coordinates::real({"x1"});
  const SampleGrid grid = sample_grid(Box{{-1}, {1}}, 9);
  const PositivityReport pos = certify_nakano(*scalar_metric(x, "exp(-(x1^2))"), grid);
  CHECK(pos.lambda_min == doctest::Approx(2.0));
  CHECK(pos.pass);
  CHECK(pos.table.size() == 9);
  const PositivityReport flat = certify_nakano(*constant_metric(x, Eigen::MatrixXcd::Identity(2, 2)), grid);
  CHECK(flat.lambda_min == 0.0);
  CHECK(flat.pass);
  const PositivityReport neg = certify_nakano(*scalar_metric(x, "exp(x1^2)"), grid);
  CHECK(neg.lambda_min == doctest::Approx(-2.0));
  CHECK_FALSE(neg.pass);
  CHECK(neg.tolerance == doctest::Approx(1e-6 * neg.scale));
}

TEST_CASE("property: certificate is invariant under constant rescaling") {
  const Coordinates x = Coordinates::real({"x1", "x2"});
  const SampleGrid grid = sample_grid(Box{{-1, -1}, {1, 1}}, 5);
  for (const char* q12 : {"0.3*x1*x2", "1.5*x1*x2"}) {
    const auto g = mexp_metric(x, 2, entries({"x1^2 + x2^2", q12, q12, "x1^2 + 2*x2^2"}));
    const auto cg = scaled_metric(expression_field(x, "0.01"), g);
    const PositivityReport a = certify_nakano(*g, grid);
    const PositivityReport b = certify_nakano(*cg, grid);
    CHECK(std::abs(a.lambda_min - b.lambda_min) <= 1e-10 * std::max(1.0, std::abs(a.lambda_min)));
    CHECK((a.lambda_min >= 0) == (b.lambda_min >= 0));
  }
}

TEST_CASE("griffiths_min") {
  const Coordinates x = Coordinates::real({"x1", "x2"});
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 10; ++i) {
    const std::string c = std::to_string(2 * u(rng));
    const auto g = mexp_metric(x, 2, entries({"x1^2 + x2^2", c + "*x1*x2", c + "*x1*x2", "x1^2 + 2*x2^2"}));
    const std::vector<double> p{u(rng), u(rng)};
    const CurvatureTensor th = real_curvature(*g, p);
    const double lam = generalized_lambda_min(nakano_matrix(th, th.metric), th.metric, 2);
    CHECK(griffiths_min(th, th.metric, 8, 42) >= lam - 1e-10);
  }
  const auto scalar = scalar_metric(x, "exp(-(x1^2 + 3*x2^2 + x1*x2))");
  const CurvatureTensor ts = real_curvature(*scalar, v({0.1, 0.2}));
  const double lam = generalized_lambda_min(nakano_matrix(ts, ts.metric), ts.metric, 2);
  CHECK(griffiths_min(ts, ts.metric, 4, 1) == doctest::Approx(lam).epsilon(1e-9));
  CurvatureTensor zero{CurvatureFlavor::Real, 2, 2, std::vector<Eigen::MatrixXcd>(4, Eigen::MatrixXcd::Zero(2, 2)),
                       Eigen::MatrixXcd::Identity(2, 2), {0, 0}};
  CHECK(std::abs(griffiths_min(zero, zero.metric, 3, 0)) < 1e-15);
}

TEST_CASE("psh_submean_test") {
  const Coordinates t = Coordinates::complex({"t1"});
  std::vector<SubmeanSample> samples;
  for (double rho : {0.1, 0.5, 1.0}) samples.push_back({{cd(0, 0)}, rho, {cd(1, 0)}});
  samples.push_back({{cd(0.3, -0.2)}, 0.4, {cd(0.6, 0.8)}});
  const PositivityReport sq = psh_submean_test(*expression_field(t, "abs2(t1_re, t1_im)"), samples, 32, 1e-9);
  CHECK(sq.pass);
  CHECK(sq.table[0].value == doctest::Approx(0.01));
  const PositivityReport harm = psh_submean_test(*expression_field(t, "t1_re"), samples, 32, 1e-9);
  CHECK(harm.pass);
  CHECK(std::abs(harm.lambda_min) < 1e-12);
  const PositivityReport neg = psh_submean_test(*expression_field(t, "-abs2(t1_re, t1_im)"), samples, 32, 1e-9);
  CHECK_FALSE(neg.pass);
  CHECK(neg.lambda_min == doctest::Approx(-1.0));
}

TEST_CASE("convexity_test and psh_hessian_test") {
  const Coordinates t = Coordinates::real({"t1"});
  const SampleGrid grid = sample_grid(Box{{-1}, {1}}, 5);
  const PositivityReport sq = convexity_test(*expression_field(t, "t1^2"), grid);
  CHECK(sq.lambda_min == doctest::Approx(2.0));
  CHECK(sq.pass);
  const PositivityReport quart = convexity_test(*expression_field(t, "t1^4"), grid);
  CHECK(quart.lambda_min == doctest::Approx(0.0));
  CHECK(quart.pass);
  CHECK_FALSE(convexity_test(*expression_field(t, "-t1^2"), grid).pass);

  const Coordinates z = Coordinates::complex({"t1"});
  const SampleGrid zg = sample_grid(Box{{-1, -1}, {1, 1}}, 3);
  CHECK(psh_hessian_test(*expression_field(z, "abs2(t1_re, t1_im)"), zg).lambda_min == doctest::Approx(1.0));
  CHECK_FALSE(psh_hessian_test(*expression_field(z, "t1_im^2 - 3*t1_re^2"), zg).pass);
}
