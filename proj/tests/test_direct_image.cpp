#include <doctest.h>

#include <cmath>

#include "nakano/curvature.hpp"
#include "nakano/direct_image.hpp"
#include "nakano/errors.hpp"

using namespace nakano;

namespace {
std::vector<double> v(std::initializer_list<double> xs) { return xs; }
const double kSqrtPi = std::sqrt(M_PI);

MetricPtr scalar_metric(const Coordinates& c, const std::string& text) {
  return entrywise_metric(c, 1, {ComplexEntry{parse(text), std::nullopt}});
}

Fibered gaussian_domain(double t_lo = -1, double t_hi = 1) {
  return Fibered{make_domain(Box{{t_lo}, {t_hi}}), Fibered::Rule::Product, make_domain(Box{{-8}, {8}})};
}

QuadratureRule gl(int order) {
  QuadratureRule r;
  r.order = order;
  return r;
}

Eigen::MatrixXcd scalar(double x) { return Eigen::MatrixXcd::Constant(1, 1, x); }
}  // namespace

TEST_CASE("integrate") {
  const Integral e = integrate([](auto x) { return scalar(std::exp(-x[0])); }, Box{{0}, {1}}, gl(16));
  CHECK(e.value(0, 0).real() == doctest::Approx(0.632120558828558).epsilon(1e-14));
  CHECK(e.error_estimate < 1e-12);

  const Integral c = integrate([](auto) { return Eigen::MatrixXcd::Identity(2, 2).eval(); },
                               Box{{0, -1}, {2, 2}}, gl(4));
  CHECK((c.value - 6.0 * Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-13);

  const double annulus = M_PI * (std::exp(-1.0) - std::exp(-4.0));
  const Integral a = integrate([](auto z) { return scalar(std::exp(-(z[0] * z[0] + z[1] * z[1]))); },
                               ReinhardtAnnulus{{1}, {2}}, gl(32));
  CHECK(a.value(0, 0).real() == doctest::Approx(annulus).epsilon(1e-12));
  CHECK(annulus == doctest::Approx(1.098187).epsilon(1e-6));

  // Box-indicator and QMC rules converge on the same annulus integral.
  QuadratureRule ind{RuleKind::BoxIndicator, 256, 1e-2, false};
  CHECK(integrate([](auto z) { return scalar(std::exp(-(z[0] * z[0] + z[1] * z[1]))); },
                  ReinhardtAnnulus{{1}, {2}}, ind)
            .value(0, 0)
            .real() == doctest::Approx(annulus).epsilon(1e-3));
  QuadratureRule qmc{RuleKind::QuasiMonteCarlo, 1 << 16, 1e-2, false};
  CHECK(integrate([](auto z) { return scalar(std::exp(-(z[0] * z[0] + z[1] * z[1]))); },
                  ReinhardtAnnulus{{1}, {2}}, qmc)
            .value(0, 0)
            .real() == doctest::Approx(annulus).epsilon(1e-2));
}

TEST_CASE("integrate refuses inaccurate results") {
  auto kink = [](auto x) { return scalar(std::sqrt(std::abs(x[0] - 0.3))); };
  QuadratureRule r = gl(4);
  r.max_relative_error = 1e-8;
  CHECK_THROWS_AS(integrate(kink, Box{{0}, {1}}, r), NumericalError);
  r.allow_inaccurate = true;
  CHECK(integrate(kink, Box{{0}, {1}}, r).error_estimate > 1e-8);
}

TEST_CASE("property: doubling the order shrinks the error estimate for smooth integrands") {
  auto f = [](auto x) { return scalar(std::exp(-(x[0] * x[0] + 2 * x[1] * x[1])) * std::cos(x[0] * x[1])); };
  double last = 1e300;
  for (int order : {8, 16, 32}) {
    QuadratureRule r = gl(order);
    r.allow_inaccurate = true;
    const double err = integrate(f, Box{{-4, -4}, {4, 4}}, r).error_estimate;
    CHECK(err < last);
    last = err;
  }
}

TEST_CASE("pushforward_metric") {
  const Coordinates tx = Coordinates::real({"t1", "x1"});
  const auto g = scalar_metric(tx, "exp(-(t1^2 + x1^2))");
  const Integral h0 = pushforward_metric(g, gaussian_domain(), v({0}), gl(64));
  CHECK(h0.value(0, 0).real() == doctest::Approx(1.772453851).epsilon(1e-9));

  const Integral vol = pushforward_metric(constant_metric(tx, Eigen::MatrixXcd::Identity(2, 2)),
                                          gaussian_domain(), v({0.5}), gl(8));
  CHECK((vol.value - 16.0 * Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-12);

  Eigen::MatrixXcd g0(2, 2);
  g0 << 2.0, std::complex<double>(0.5, 0.25), std::complex<double>(0.5, -0.25), 1.0;
  const auto sep = scaled_metric(expression_field(tx, "exp(-(t1^2 + x1^2))"), constant_metric(tx, g0));
  for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    const Integral h = pushforward_metric(sep, gaussian_domain(), v({t}), gl(64));
    CHECK((h.value - kSqrtPi * std::exp(-t * t) * g0).norm() <= 1e-10 * g0.norm());
  }
}

TEST_CASE("pushforward_derivatives under both schemes") {
  const Coordinates tx = Coordinates::real({"t1", "x1"});
  const auto g = scalar_metric(tx, "exp(-(t1^2 + x1^2))");
  const PushforwardMetric ui(g, gaussian_domain(), gl(64), DerivativeScheme::UnderIntegral);
  const PushforwardMetric fd(g, gaussian_domain(), gl(64), DerivativeScheme::FixedNodeFD);
  CHECK(PushforwardMetric(g, gaussian_domain(), gl(64)).scheme() == DerivativeScheme::UnderIntegral);
  CHECK(pushforward_derivatives(ui, v({0}), 0, 0)(0, 0).real() == doctest::Approx(-2 * kSqrtPi).epsilon(1e-10));
  CHECK(pushforward_derivatives(fd, v({0}), 0, 0)(0, 0).real() == doctest::Approx(-2 * kSqrtPi).epsilon(1e-6));

  const PushforwardMetric c(constant_metric(tx, Eigen::MatrixXcd::Identity(1, 1)), gaussian_domain(), gl(8));
  CHECK(pushforward_derivatives(c, v({0.2}), 0, 0).norm() == 0.0);

  const PushforwardMetric s(scalar_metric(tx, "(2 + sin(t1)) * exp(-(x1^2))"), gaussian_domain(), gl(64));
  CHECK(pushforward_derivatives(s, v({0.7}), 0, 0)(0, 0).real() ==
        doctest::Approx(-std::sin(0.7) * kSqrtPi).epsilon(1e-10));

  for (double t : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    for (const PushforwardMetric* h : {&ui, &fd}) {
      const CurvatureTensor th = real_curvature(*h, v({t}));
      CHECK(std::abs(th(0, 0)(0, 0).real() - 2.0) <= 1e-4);
    }
  }
}

TEST_CASE("property: derivative schemes agree on t-independent fibers") {
  const Coordinates c = Coordinates::real({"t1", "t2", "x1"});
  const auto g = mexp_metric(c, 2,
                             {{parse("t1^2 + t2^2 + x1^2 + 0.3*t1*x1"), std::nullopt},
                              {parse("0.2*t2*x1"), parse("0.1*t1")},
                              {parse("0.2*t2*x1"), parse("-0.1*t1")},
                              {parse("2*t1^2 + t2^2 + x1^2 + 0.5*x1"), std::nullopt}});
  const Fibered d{make_domain(Box{{-1, -1}, {1, 1}}), Fibered::Rule::Product, make_domain(Box{{-7}, {7}})};
  const PushforwardMetric ui(g, d, gl(64), DerivativeScheme::UnderIntegral);
  const PushforwardMetric fd(g, d, gl(64), DerivativeScheme::FixedNodeFD);
  for (const auto& t : {v({0.1, -0.4}), v({0.8, 0.3}), v({-0.6, 0.9})})
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k) {
        const Eigen::MatrixXcd a = pushforward_derivatives(ui, t, j, k);
        const Eigen::MatrixXcd b = pushforward_derivatives(fd, t, j, k);
        CHECK((a - b).norm() <= 1e-4 * std::max(a.norm(), 1e-3));
      }
}

TEST_CASE("t-dependent fibers") {
  HalfspaceConvex diamond;
  diamond.a = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  diamond.b = {1, 1, 1, 1};
  diamond.bounds = Box{{-1, -1}, {1, 1}};
  diamond.interior = v({0, 0});
  const Fibered d{make_domain(Box{{-0.5}, {0.5}}), Fibered::Rule::Slice, make_domain(diamond)};
  const Coordinates tx = Coordinates::real({"t1", "x1"});
  const auto g = scalar_metric(tx, "exp(-(t1^2 + x1^2))");
  CHECK_THROWS_AS(PushforwardMetric(g, d, gl(16), DerivativeScheme::UnderIntegral), ConfigError);
  const PushforwardMetric h(g, d, gl(16));
  CHECK(h.scheme() == DerivativeScheme::FixedNodeFD);
  // h(t) = e^{-t²} √π erf(1 - |t|).
  auto exact = [](double t) { return std::exp(-t * t) * kSqrtPi * std::erf(1 - std::abs(t)); };
  CHECK(metric_eval(h, v({0.3}))(0, 0).real() == doctest::Approx(exact(0.3)).epsilon(1e-12));
  const double step = 1e-3;
  const double second = (exact(0.3 + step) - 2 * exact(0.3) + exact(0.3 - step)) / (step * step);
  CHECK(pushforward_derivatives(h, v({0.3}), 0, 0)(0, 0).real() == doctest::Approx(second).epsilon(1e-5));
}

TEST_CASE("property: torus averaging does not change the pushforward over full annuli") {
  const Coordinates c = Coordinates::real({"t1"}) + Coordinates::complex({"z1"});
  const auto m = entrywise_metric(
      c, 2,
      {{parse("exp(-(t1^2 + z1_re^2 + 0.3*z1_im*t1))"), std::nullopt},
       {parse("0.1*z1_re"), parse("0.05*z1_im*t1")},
       {parse("0.1*z1_re"), parse("-0.05*z1_im*t1")},
       {parse("2 + cos(z1_re)"), std::nullopt}});
  const Fibered d{make_domain(Box{{-1}, {1}}), Fibered::Rule::Product, make_domain(ReinhardtAnnulus{{0.5}, {1.5}})};
  const auto avg = averaged_metric(m, {1}, 64);
  for (double t : {-0.7, 0.0, 0.4}) {
    const Eigen::MatrixXcd a = pushforward_metric(m, d, v({t}), gl(48)).value;
    const Eigen::MatrixXcd b = pushforward_metric(avg, d, v({t}), gl(48)).value;
    CHECK((a - b).norm() <= 1e-10 * a.norm());
  }
}

TEST_CASE("pushforward_scalar") {
  const Coordinates tz = Coordinates::complex({"t1", "z1"});
  const Fibered ann{make_domain(Box{{-1, -1}, {1, 1}}), Fibered::Rule::Product,
                    make_domain(ReinhardtAnnulus{{1}, {2}})};
  const auto phi = expression_field(tz, "abs2(t1_re, t1_im) + abs2(z1_re, z1_im)");
  const double c = std::log(M_PI * (std::exp(-1.0) - std::exp(-4.0)));
  CHECK(pushforward_scalar(phi, ann, v({0.3, 0.4}), gl(32)) == doctest::Approx(0.25 - c).epsilon(1e-12));
  const PushforwardScalar tilde(phi, ann, gl(32));
  CHECK(complex_hessian(tilde, v({0.2, -0.1}))(0, 0).real() == doctest::Approx(1.0).epsilon(1e-10));

  const Coordinates tx = Coordinates::real({"t1", "x1"});
  CHECK(pushforward_scalar(expression_field(tx, "3*t1^2"), gaussian_domain(), v({0.5}), gl(8)) ==
        doctest::Approx(0.75 - std::log(16.0)));

  const auto prekopa = expression_field(tx, "t1^2 + x1^2 + t1*x1");
  const double at0 = pushforward_scalar(prekopa, gaussian_domain(), v({0}), gl(64));
  const double at1 = pushforward_scalar(prekopa, gaussian_domain(), v({0.8}), gl(64));
  CHECK(at1 - at0 == doctest::Approx(0.75 * 0.64).epsilon(1e-10));
  CHECK(at0 == doctest::Approx(-std::log(kSqrtPi)).epsilon(1e-10));
  const PushforwardScalar p(prekopa, gaussian_domain(), gl(64));
  CHECK(real_hessian(p, v({0.4}))(0, 0) == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("kiselman_inf") {
  const Coordinates tz = Coordinates::complex({"t1", "z1"});
  const auto phi = expression_field(tz, "abs2(t1_re, t1_im) + z1_re^2 + 2*t1_re*z1_re");
  const Fibered tube{make_domain(Box{{-1, -1}, {1, 1}}), Fibered::Rule::Product,
                     make_domain(TubeOverBase{make_domain(Box{{-3}, {3}})})};
  const KiselmanResult at_i = kiselman_inf(*phi, tube, v({0, 1}), 17);
  CHECK(at_i.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(kiselman_inf(*phi, tube, v({0, 0}), 17).value) < 1e-12);
  const KiselmanResult off = kiselman_inf(*phi, tube, v({0.37, -0.5}), 17);
  CHECK(off.value == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(off.location[0] == doctest::Approx(-0.37).epsilon(1e-3));
  const auto flat = expression_field(tz, "t1_re^2 + 3*t1_im");
  CHECK(kiselman_inf(*flat, tube, v({0.5, 0.2}), 5).value == doctest::Approx(0.85));
  const KiselmanInf star(phi, tube, 17);
  CHECK_FALSE(star.differentiable());
  CHECK(star.value(v({0.1, 0.6})) == doctest::Approx(0.36).epsilon(1e-6));
}

TEST_CASE("exp-map reduction round trip") {
  const Coordinates tx = Coordinates::real({"t1", "x1"});
  const DomainPtr u = make_domain(Box{{0}, {1}});
  const Fibered tube{make_domain(Box{{-1, -1}, {1, 1}}), Fibered::Rule::Product, make_domain(TubeOverBase{u})};
  const Fibered star{make_domain(Box{{-1, -1}, {1, 1}}), Fibered::Rule::Product,
                     make_domain(exp_image(*u->as<Box>()))};
  for (const char* text : {"exp(-x1)", "2.5"}) {
    const auto h = complexified_metric(scalar_metric(tx, text));
    const auto h2 = exp_reduced_metric(h, {1}, true);
    const double lhs = pushforward_metric(h, tube, v({0.2, 0.1}), gl(32)).value(0, 0).real();
    const double rhs = pushforward_metric(h2, star, v({0.2, 0.1}), gl(32)).value(0, 0).real();
    CHECK(rhs == doctest::Approx(lhs).epsilon(1e-6));
    if (text[0] == 'e') CHECK(std::abs(rhs - (1 - std::exp(-1.0))) <= 1e-6);
  }
}

TEST_CASE("fubini_consistency") {
  const Coordinates tx = Coordinates::real({"t1", "x1"});
  const Coordinates t = Coordinates::real({"t1"});
  const Fibered d{make_domain(Box{{-8}, {8}}), Fibered::Rule::Product, make_domain(Box{{-8}, {8}})};
  const auto g = scalar_metric(tx, "exp(-(t1^2 + x1^2))");
  const FubiniResult one = fubini_consistency(g, d, {expression_field(t, "1")}, {}, nullptr, gl(64));
  CHECK(one.lhs == doctest::Approx(M_PI).epsilon(1e-9));
  CHECK(one.rhs == doctest::Approx(M_PI).epsilon(1e-9));
  const FubiniResult zero = fubini_consistency(g, d, {expression_field(t, "0")}, {}, nullptr, gl(16));
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);

  std::vector<ComplexEntry> diag{{parse("exp(-(t1^2 + x1^2))"), std::nullopt},
                                 {parse("0"), std::nullopt},
                                 {parse("0"), std::nullopt},
                                 {parse("exp(-(2*t1^2 + 3*x1^2))"), std::nullopt}};
  const FubiniResult second = fubini_consistency(entrywise_metric(tx, 2, diag), d,
                                                 {expression_field(t, "0"), expression_field(t, "1")}, {},
                                                 expression_field(t, "0.5*t1^2"), gl(64));
  const double want = std::sqrt(M_PI / 2.5) * std::sqrt(M_PI / 3.0);
  CHECK(second.lhs == doctest::Approx(want).epsilon(1e-9));
  CHECK(second.rhs == doctest::Approx(want).epsilon(1e-9));
}
