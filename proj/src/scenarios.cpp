#include "nakano/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "nakano/errors.hpp"
#include "nakano/l2.hpp"
#include "nakano/parallel.hpp"

namespace nakano {

using Eigen::MatrixXcd;
using cd = std::complex<double>;

std::string_view status_name(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::ConclusionFailed: return "conclusion_failed";
    case Status::HypothesesNotMet: return "hypotheses_not_met";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

int exit_code(Status s) {
  switch (s) {
    case Status::Pass: return 0;
    case Status::ConclusionFailed: return 1;
    case Status::NumericalFailure: return 3;
    case Status::HypothesesNotMet: return 4;
  }
  return 3;
}

std::string_view role_name(CheckRole r) {
  switch (r) {
    case CheckRole::Hypothesis: return "hypothesis";
    case CheckRole::Conclusion: return "conclusion";
    case CheckRole::Diagnostic: return "diagnostic";
  }
  return "unknown";
}

namespace {

Json matrix_json(const MatrixXcd& m) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json rr = Json::array(), ii = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      rr.push_back(m(i, j).real());
      ii.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ii));
  }
  return {{"re", std::move(re)}, {"im", std::move(im)}};
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Geometry shared by the fibered kinds.

struct Setup {
  Coordinates base;
  Coordinates fiber;
  Coordinates total;
  Fibered domain;
  std::size_t base_dim = 0;
};

Setup parse_setup(ObjectReader& r, bool complex) {
  Setup s;
  const auto base_names = r.strings("base_axes");
  const auto fiber_names = r.strings("fiber_axes");
  if (base_names.empty() || fiber_names.empty()) throw ConfigError(r.path() + ": base_axes and fiber_axes must be nonempty");
  s.base = complex ? Coordinates::complex(base_names) : Coordinates::real(base_names);
  s.fiber = complex ? Coordinates::complex(fiber_names) : Coordinates::real(fiber_names);
  try {
    s.total = s.base + s.fiber;
  } catch (const ConfigError& e) {
    throw ConfigError(r.path() + ": " + e.what());
  }
  s.base_dim = s.base.real_dim();
  auto base = std::make_shared<const Domain>(parse_domain(r.at("base"), r.child("base")));
  if (base->dimension() != s.base_dim)
    throw ConfigError(r.child("base") + ": dimension " + std::to_string(base->dimension()) + " does not match " +
                      std::to_string(s.base_dim) + " base slots");
  const bool has_fiber = r.has("fiber"), has_total = r.has("total");
  if (has_fiber == has_total) throw ConfigError(r.path() + ": give exactly one of 'fiber' or 'total'");
  try {
    if (has_fiber) {
      auto fiber = std::make_shared<const Domain>(parse_domain(r.at("fiber"), r.child("fiber")));
      s.domain = Fibered{base, Fibered::Rule::Product, fiber};
      std::size_t dim = fiber->dimension();
      if (dim != s.fiber.real_dim())
        throw ConfigError(r.child("fiber") + ": dimension " + std::to_string(dim) + " does not match " +
                          std::to_string(s.fiber.real_dim()) + " fiber slots");
    } else {
      auto total = std::make_shared<const Domain>(parse_domain(r.at("total"), r.child("total")));
      if (total->dimension() != s.total.real_dim())
        throw ConfigError(r.child("total") + ": dimension does not match the coordinates");
      s.domain = Fibered{base, Fibered::Rule::Slice, total};
    }
    (void)Domain(s.domain);
  } catch (const DomainError& e) {
    throw ConfigError(r.path() + ": " + e.what());
  }
  return s;
}

SampleGrid setup_grid(const Setup& s, int res) {
  if (s.domain.rule == Fibered::Rule::Slice) return sample_grid(*s.domain.fiber_or_total, res);
  const SampleGrid b = sample_grid(*s.domain.base, res);
  const SampleGrid f = sample_grid(*s.domain.fiber_or_total, res);
  SampleGrid out;
  out.resolution = b.resolution;
  out.resolution.insert(out.resolution.end(), f.resolution.begin(), f.resolution.end());
  out.points.reserve(b.points.size() * f.points.size());
  for (const auto& p : b.points)
    for (const auto& q : f.points) {
      std::vector<double> x = p;
      x.insert(x.end(), q.begin(), q.end());
      out.points.push_back(std::move(x));
    }
  return out;
}

std::vector<std::size_t> fiber_axis_indices(const Setup& s) {
  std::vector<std::size_t> out;
  for (std::size_t a = s.base.size(); a < s.total.size(); ++a) out.push_back(a);
  return out;
}

// ---------------------------------------------------------------------------
// Checks.

double pass_threshold(CheckRole role, const PositivityReport& rep, const Tolerances& tol) {
  if (role == CheckRole::Hypothesis) return tol.hypothesis_min ? *tol.hypothesis_min : -rep.tolerance;
  return -tol.conclusion_relative * rep.scale;
}

Check positivity_check(std::string name, CheckRole role, const PositivityReport& rep, const Tolerances& tol,
                       std::vector<std::string> columns) {
  Check c;
  c.name = std::move(name);
  c.role = role;
  const double threshold = pass_threshold(role, rep, tol);
  c.pass = rep.lambda_min >= threshold;
  c.summary = {{"lambda_min", rep.lambda_min},
               {"argmin", rep.argmin},
               {"threshold", threshold},
               {"scale", rep.scale},
               {"points", rep.table.size()}};
  c.columns = std::move(columns);
  c.table = rep.table;
  return c;
}

Check nakano_check(std::string name, CheckRole role, const MetricField& m, const SampleGrid& grid,
                   const Tolerances& tol) {
  const PositivityReport rep = certify_nakano(m, grid);
  Check c = positivity_check(std::move(name), role, rep, tol, m.coordinates().slot_names());
  if (!c.pass) {
    const CurvatureTensor th = curvature(m, rep.argmin);
    c.dump = {{"point", rep.argmin},
              {"lambda_min", rep.lambda_min},
              {"metric", matrix_json(th.metric)},
              {"nakano_matrix", matrix_json(nakano_matrix(th, th.metric))}};
  }
  return c;
}

Check psh_check(std::string name, CheckRole role, const ScalarField& phi, const SampleGrid& grid,
                const Tolerances& tol) {
  const PositivityReport rep = psh_hessian_test(phi, grid);
  Check c = positivity_check(std::move(name), role, rep, tol, phi.coordinates().slot_names());
  if (!c.pass)
    c.dump = {{"point", rep.argmin},
              {"lambda_min", rep.lambda_min},
              {"complex_hessian", matrix_json(complex_hessian(phi, rep.argmin))}};
  return c;
}

Check convexity_check(std::string name, CheckRole role, const ScalarField& phi, const SampleGrid& grid,
                      const Tolerances& tol) {
  const PositivityReport rep = convexity_test(phi, grid);
  Check c = positivity_check(std::move(name), role, rep, tol, phi.coordinates().slot_names());
  if (!c.pass)
    c.dump = {{"point", rep.argmin},
              {"lambda_min", rep.lambda_min},
              {"hessian", matrix_json(real_hessian(phi, rep.argmin).cast<cd>())}};
  return c;
}

Check residual_check(std::string name, CheckRole role, double residual, double threshold, std::vector<double> where) {
  Check c;
  c.name = std::move(name);
  c.role = role;
  c.pass = residual <= threshold;
  c.summary = {{"residual", residual}, {"threshold", threshold}, {"worst_point", std::move(where)}};
  if (!c.pass) c.dump = c.summary;
  return c;
}

// max over points of the relative change under a shift of the imaginary slots of `axes`.
template <class Eval>
std::pair<double, std::vector<double>> imaginary_shift_residual(const SampleGrid& grid, const Coordinates& coords,
                                                                const std::vector<std::size_t>& axes, Eval&& eval) {
  std::vector<double> res(grid.points.size());
  parallel_for(grid.points.size(), [&](std::size_t i) {
    std::vector<double> q = grid.points[i];
    double shift = 1.37;
    for (std::size_t a : axes) {
      q[coords.slot(a) + 1] += shift;
      shift = -1.9 * shift + 0.3;
    }
    res[i] = eval(grid.points[i], q);
  });
  const auto it = std::max_element(res.begin(), res.end());
  return {*it, grid.points[static_cast<std::size_t>(it - res.begin())]};
}

template <class Eval>
std::pair<double, std::vector<double>> rotation_residual(const SampleGrid& grid, const Coordinates& coords,
                                                         const std::vector<std::size_t>& axes, Eval&& eval) {
  std::vector<double> res(grid.points.size(), 0.0);
  parallel_for(grid.points.size(), [&](std::size_t i) {
    for (double theta : {0.7, 2.1, 4.4}) {
      std::vector<double> q = grid.points[i];
      double angle = theta;
      for (std::size_t a : axes) {
        const std::size_t s = coords.slot(a);
        const cd z = cd(q[s], q[s + 1]) * std::polar(1.0, angle);
        q[s] = z.real();
        q[s + 1] = z.imag();
        angle *= 1.618;
      }
      res[i] = std::max(res[i], eval(grid.points[i], q));
    }
  });
  const auto it = std::max_element(res.begin(), res.end());
  return {*it, grid.points[static_cast<std::size_t>(it - res.begin())]};
}

double scalar_change(const ScalarField& f, const std::vector<double>& p, const std::vector<double>& q) {
  const double a = f.value(p);
  return std::abs(f.value(q) - a) / (1.0 + std::abs(a));
}

double metric_change(const MetricField& m, const std::vector<double>& p, const std::vector<double>& q) {
  const MatrixXcd a = m.jet(seed(p)).v;
  return (m.jet(seed(q)).v - a).norm() / (1.0 + a.norm());
}

constexpr double kExactInvariance = 1e-12;
constexpr double kTorusInvariance = 1e-8;

double tail_bound(const Domain& fiber, double decay_rate) {
  const Box b = bounding_box(fiber);
  double tail = 0.0;
  for (std::size_t i = 0; i < b.lo.size(); ++i)
    tail += std::erfc(std::sqrt(decay_rate) * std::min(std::abs(b.lo[i]), std::abs(b.hi[i])));
  return tail;
}

}  // namespace

// ---------------------------------------------------------------------------

struct Scenario::Impl {
  std::string name;
  std::string kind;
  std::uint64_t seed = 0;
  int grid = 17;
  int total_grid = 17;
  Tolerances tol;

  virtual ~Impl() = default;
  virtual void hypotheses(ScenarioReport& rep) const = 0;
  virtual void conclusions(ScenarioReport& rep) const = 0;
  virtual std::vector<std::string> conclusion_names() const = 0;
};

namespace {

struct Quadrature {
  QuadratureRule rule;
  DerivativeScheme scheme = DerivativeScheme::Auto;
  std::optional<double> decay_rate;

  void parse(ObjectReader& r) {
    if (r.has("rule")) rule = parse_rule(r.at("rule"), r.child("rule"));
    scheme = parse_scheme(r.string_or("scheme", "auto"), r.child("scheme"));
    if (const Json* t = r.find("truncation")) {
      ObjectReader tr(*t, r.child("truncation"));
      decay_rate = tr.number("decay_rate");
      if (!(*decay_rate > 0.0)) throw ConfigError(tr.child("decay_rate") + ": must be positive");
      tr.finish();
    }
  }

  Json describe(const Fibered& d, double max_error) const {
    static const char* kinds[] = {"gauss_legendre", "box_indicator", "qmc"};
    Json q = {{"rule", kinds[static_cast<int>(rule.kind)]},
              {"order", rule.order},
              {"max_relative_error_estimate", max_error},
              {"threshold", rule.max_relative_error}};
    if (decay_rate && d.rule == Fibered::Rule::Product) q["tail_bound"] = tail_bound(*d.fiber_or_total, *decay_rate);
    return q;
  }
};

// Largest error estimate of a metric pushforward over the base grid.
double metric_quadrature_error(const PushforwardMetric& h, const SampleGrid& grid) {
  std::vector<double> err(grid.points.size());
  parallel_for(grid.points.size(), [&](std::size_t i) { err[i] = h.value_with_error(grid.points[i]).error_estimate; });
  return *std::max_element(err.begin(), err.end());
}

double scalar_quadrature_error(const PushforwardScalar& f, const SampleGrid& grid, const QuadratureRule& rule) {
  std::vector<double> err(grid.points.size());
  parallel_for(grid.points.size(), [&](std::size_t i) { err[i] = f.error_estimate(grid.points[i]); });
  const double worst = *std::max_element(err.begin(), err.end());
  if (!rule.allow_inaccurate && !(worst <= rule.max_relative_error))
    throw NumericalError("quadrature did not converge: estimated relative error " + format_number(worst));
  return worst;
}

// Scalar weight φ over a fibered domain: prekopa_scalar, berndtsson_reinhardt, berndtsson_tube.
struct ScalarPushforwardScenario final : Scenario::Impl {
  Setup setup;
  ScalarPtr phi;
  Quadrature quad;
  bool complex = false;
  bool reinhardt = false;
  bool tube = false;

  void hypotheses(ScenarioReport& rep) const override {
    const SampleGrid g = setup_grid(setup, total_grid);
    if (complex) {
      rep.checks.push_back(psh_check("input_psh", CheckRole::Hypothesis, *phi, g, tol));
    } else {
      rep.checks.push_back(convexity_check("input_convexity", CheckRole::Hypothesis, *phi, g, tol));
    }
    const auto axes = fiber_axis_indices(setup);
    auto change = [&](const std::vector<double>& p, const std::vector<double>& q) { return scalar_change(*phi, p, q); };
    if (reinhardt) {
      auto [res, where] = rotation_residual(g, setup.total, axes, change);
      rep.checks.push_back(residual_check("torus_invariance", CheckRole::Hypothesis, res, kTorusInvariance, where));
    }
    if (tube) {
      auto [res, where] = imaginary_shift_residual(g, setup.total, axes, change);
      rep.checks.push_back(
          residual_check("imaginary_independence", CheckRole::Hypothesis, res, kExactInvariance, where));
    }
  }

  void conclusions(ScenarioReport& rep) const override {
    const PushforwardScalar tilde(phi, setup.domain, quad.rule, quad.scheme);
    const SampleGrid g = sample_grid(*setup.domain.base, grid);
    rep.quadrature = quad.describe(setup.domain, scalar_quadrature_error(tilde, g, quad.rule));
    rep.quadrature["scheme"] = tilde.scheme() == DerivativeScheme::UnderIntegral ? "under_integral" : "fixed_node_fd";
    if (complex) {
      rep.checks.push_back(psh_check("pushforward_psh", CheckRole::Conclusion, tilde, g, tol));
    } else {
      rep.checks.push_back(convexity_check("pushforward_convexity", CheckRole::Conclusion, tilde, g, tol));
    }
  }

  std::vector<std::string> conclusion_names() const override {
    return {complex ? "pushforward_psh" : "pushforward_convexity"};
  }
};

// Metric over a fibered domain: prekopa_matrix, berndtsson_tube (matrix), invariant_direct_image_torus.
struct MetricPushforwardScenario final : Scenario::Impl {
  Setup setup;
  MetricPtr metric;
  Quadrature quad;
  bool reinhardt = false;
  bool tube = false;

  void hypotheses(ScenarioReport& rep) const override {
    const SampleGrid g = setup_grid(setup, total_grid);
    rep.checks.push_back(nakano_check("input_nakano", CheckRole::Hypothesis, *metric, g, tol));
    const auto axes = fiber_axis_indices(setup);
    auto change = [&](const std::vector<double>& p, const std::vector<double>& q) {
      return metric_change(*metric, p, q);
    };
    if (reinhardt) {
      auto [res, where] = rotation_residual(g, setup.total, axes, change);
      rep.checks.push_back(residual_check("torus_invariance", CheckRole::Hypothesis, res, kTorusInvariance, where));
    }
    if (tube) {
      auto [res, where] = imaginary_shift_residual(g, setup.total, axes, change);
      rep.checks.push_back(
          residual_check("imaginary_independence", CheckRole::Hypothesis, res, kExactInvariance, where));
    }
  }

  void conclusions(ScenarioReport& rep) const override {
    const PushforwardMetric h(metric, setup.domain, quad.rule, quad.scheme);
    const SampleGrid g = sample_grid(*setup.domain.base, grid);
    rep.quadrature = quad.describe(setup.domain, metric_quadrature_error(h, g));
    rep.quadrature["scheme"] = h.scheme() == DerivativeScheme::UnderIntegral ? "under_integral" : "fixed_node_fd";
    rep.checks.push_back(nakano_check("direct_image_nakano", CheckRole::Conclusion, h, g, tol));
  }

  std::vector<std::string> conclusion_names() const override { return {"direct_image_nakano"}; }
};

struct KiselmanScenario final : Scenario::Impl {
  Setup setup;
  ScalarPtr phi;
  ScalarPtr expected;
  double expected_tolerance = 1e-6;
  int fiber_grid = 33;
  int steps = 30;
  int pairs = 50;
  double radius_lo = 0.05;
  double radius_hi = 0.3;
  int circle_points = 32;

  void hypotheses(ScenarioReport& rep) const override {
    const SampleGrid g = setup_grid(setup, total_grid);
    rep.checks.push_back(psh_check("input_psh", CheckRole::Hypothesis, *phi, g, tol));
    auto [res, where] = imaginary_shift_residual(
        g, setup.total, fiber_axis_indices(setup),
        [&](const std::vector<double>& p, const std::vector<double>& q) { return scalar_change(*phi, p, q); });
    rep.checks.push_back(residual_check("imaginary_independence", CheckRole::Hypothesis, res, kExactInvariance, where));
  }

  std::vector<SubmeanSample> samples() const {
    const Box b = bounding_box(*setup.domain.base);
    const std::size_t n = setup.base.size();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal;
    std::vector<SubmeanSample> out;
    int attempts = 0;
    while (static_cast<int>(out.size()) < pairs) {
      if (++attempts > 1000 * pairs) throw ConfigError("kiselman: base too small for the submean radii");
      SubmeanSample s;
      s.radius = radius_lo + (radius_hi - radius_lo) * unit(rng);
      double norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double lo_re = b.lo[2 * j] + s.radius, hi_re = b.hi[2 * j] - s.radius;
        const double lo_im = b.lo[2 * j + 1] + s.radius, hi_im = b.hi[2 * j + 1] - s.radius;
        if (lo_re > hi_re || lo_im > hi_im) break;
        s.center.emplace_back(lo_re + (hi_re - lo_re) * unit(rng), lo_im + (hi_im - lo_im) * unit(rng));
        s.direction.emplace_back(normal(rng), normal(rng));
        norm += std::norm(s.direction.back());
      }
      if (s.center.size() != n || norm == 0.0) continue;
      for (auto& w : s.direction) w /= std::sqrt(norm);
      out.push_back(std::move(s));
    }
    return out;
  }

  void conclusions(ScenarioReport& rep) const override {
    const KiselmanInf star(phi, setup.domain, fiber_grid, steps);
    const auto smp = samples();
    const PositivityReport sub = psh_submean_test(star, smp, circle_points, 1e-6 * (1.0 + max_abs(star, smp)));
    Check c;
    c.name = "infimum_submean";
    c.role = CheckRole::Conclusion;
    c.pass = sub.pass;
    c.summary = {{"min_margin", sub.lambda_min}, {"argmin", sub.argmin}, {"tolerance", sub.tolerance},
                 {"pairs", smp.size()}, {"circle_points", circle_points}};
    c.columns = setup.base.slot_names();
    c.table = sub.table;
    if (!c.pass) c.dump = c.summary;
    rep.checks.push_back(std::move(c));
    if (expected) {
      const SampleGrid g = sample_grid(*setup.domain.base, grid);
      std::vector<PointValue> table(g.points.size());
      parallel_for(g.points.size(), [&](std::size_t i) {
        const double got = star.value(g.points[i]);
        table[i] = {g.points[i], std::abs(got - expected->value(g.points[i])), std::abs(got)};
      });
      const auto worst = std::max_element(table.begin(), table.end(),
                                          [](const PointValue& a, const PointValue& b) { return a.value < b.value; });
      rep.checks.push_back(residual_check("infimum_closed_form", CheckRole::Conclusion, worst->value,
                                          expected_tolerance, worst->point));
      rep.checks.back().columns = setup.base.slot_names();
      rep.checks.back().table = std::move(table);
    }
  }

  static double max_abs(const ScalarField& f, const std::vector<SubmeanSample>& smp) {
    double m = 0.0;
    for (const auto& s : smp) {
      std::vector<double> p;
      for (const auto& z : s.center) {
        p.push_back(z.real());
        p.push_back(z.imag());
      }
      m = std::max(m, std::abs(f.value(p)));
    }
    return m;
  }

  std::vector<std::string> conclusion_names() const override {
    if (expected) return {"infimum_submean", "infimum_closed_form"};
    return {"infimum_submean"};
  }
};

struct ExpReductionScenario final : Scenario::Impl {
  Setup setup;  // tube over U
  Fibered reinhardt;
  MetricPtr metric;
  MetricPtr reduced;   // h''
  MetricPtr pulled;    // h'
  Quadrature quad;
  int samples = 20;
  double integral_tolerance = 1e-6;
  double curvature_tolerance = 1e-8;

  void hypotheses(ScenarioReport& rep) const override {
    const SampleGrid g = setup_grid(setup, total_grid);
    auto [res, where] = imaginary_shift_residual(
        g, setup.total, fiber_axis_indices(setup),
        [&](const std::vector<double>& p, const std::vector<double>& q) { return metric_change(*metric, p, q); });
    rep.checks.push_back(residual_check("imaginary_independence", CheckRole::Hypothesis, res, kExactInvariance, where));
    rep.checks.push_back(nakano_check("input_nakano", CheckRole::Hypothesis, *metric, g, tol));
  }

  void conclusions(ScenarioReport& rep) const override {
    const SampleGrid base = sample_grid(*setup.domain.base, grid);
    std::vector<PointValue> table(base.points.size());
    std::vector<double> errs(base.points.size());
    parallel_for(base.points.size(), [&](std::size_t i) {
      const Integral a = pushforward_metric(metric, setup.domain, base.points[i], quad.rule);
      const Integral b = pushforward_metric(reduced, reinhardt, base.points[i], quad.rule);
      table[i] = {base.points[i], (a.value - b.value).norm() / a.value.norm(), a.value.norm()};
      errs[i] = std::max(a.error_estimate, b.error_estimate);
    });
    rep.quadrature = quad.describe(setup.domain, *std::max_element(errs.begin(), errs.end()));
    const auto worst = std::max_element(table.begin(), table.end(),
                                        [](const PointValue& a, const PointValue& b) { return a.value < b.value; });
    rep.checks.push_back(
        residual_check("integral_round_trip", CheckRole::Conclusion, worst->value, integral_tolerance, worst->point));
    rep.checks.back().columns = setup.base.slot_names();
    rep.checks.back().table = std::move(table);

    // Random (t, w) with w in the annulus.
    const Box bb = bounding_box(*setup.domain.base);
    const auto* ann = reinhardt.fiber_or_total->as<ReinhardtAnnulus>();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> pts;
    for (int s = 0; s < samples; ++s) {
      std::vector<double> p;
      for (std::size_t i = 0; i < bb.lo.size(); ++i) p.push_back(bb.lo[i] + (bb.hi[i] - bb.lo[i]) * unit(rng));
      for (std::size_t j = 0; j < ann->r_inner.size(); ++j) {
        const double r = ann->r_inner[j] + (ann->r_outer[j] - ann->r_inner[j]) * unit(rng);
        const double th = 2.0 * M_PI * unit(rng);
        p.push_back(r * std::cos(th));
        p.push_back(r * std::sin(th));
      }
      pts.push_back(std::move(p));
    }
    std::vector<PointValue> diffs(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
      const CurvatureTensor a = chern_curvature(*reduced, pts[i]);
      const CurvatureTensor b = chern_curvature(*pulled, pts[i]);
      double d = 0.0, norm = 0.0;
      for (std::size_t k = 0; k < a.blocks.size(); ++k) {
        d = std::max(d, (a.blocks[k] - b.blocks[k]).cwiseAbs().maxCoeff());
        norm = std::max(norm, b.blocks[k].cwiseAbs().maxCoeff());
      }
      diffs[i] = {pts[i], d, norm};
    });
    const auto cw = std::max_element(diffs.begin(), diffs.end(),
                                     [](const PointValue& a, const PointValue& b) { return a.value < b.value; });
    rep.checks.push_back(
        residual_check("curvature_invariance", CheckRole::Conclusion, cw->value, curvature_tolerance, cw->point));
    rep.checks.back().columns = reduced->coordinates().slot_names();
    rep.checks.back().table = std::move(diffs);

    Setup ann_setup = setup;
    ann_setup.domain = reinhardt;
    rep.checks.push_back(
        nakano_check("reduced_nakano", CheckRole::Conclusion, *reduced, setup_grid(ann_setup, total_grid), tol));
  }

  std::vector<std::string> conclusion_names() const override {
    return {"integral_round_trip", "curvature_invariance", "reduced_nakano"};
  }
};

// ---------------------------------------------------------------------------
// L² kinds.

struct L2Common {
  Coordinates coords;
  MetricPtr metric;
  DbarGrid::Shape shape = DbarGrid::Shape::Disc;
  double half_width = 1.0;

  void parse(ObjectReader& r, const MetricContext& base_ctx) {
    coords = Coordinates::complex({r.string_or("axis", "z")});
    MetricContext ctx = base_ctx;
    ctx.coords = coords;
    ctx.rotating_axes = {0};
    ctx.base_dim = 0;
    metric = parse_metric(r.at("metric"), ctx, r.child("metric"));
    const std::string s = r.string_or("domain", "disc");
    if (s == "disc") {
      shape = DbarGrid::Shape::Disc;
    } else if (s == "square") {
      shape = DbarGrid::Shape::Square;
    } else {
      throw ConfigError(r.child("domain") + ": expected 'disc' or 'square'");
    }
    half_width = r.number_or("half_width", 1.0);
    if (!(half_width > 0.0)) throw ConfigError(r.child("half_width") + ": must be positive");
  }

  Datum parse_datum(const Json& j, const std::string& path) const {
    Datum d;
    if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i) d.re.push_back(parse_scalar(j[i], coords, path + "[" + std::to_string(i) + "]"));
    } else {
      ObjectReader r(j, path);
      const Json& re = r.at("re");
      const Json& im = r.at("im");
      if (!re.is_array() || !im.is_array() || re.size() != im.size())
        throw ConfigError(path + ": re and im must be arrays of equal length");
      for (std::size_t i = 0; i < re.size(); ++i) {
        d.re.push_back(parse_scalar(re[i], coords, r.child("re")));
        d.im.push_back(parse_scalar(im[i], coords, r.child("im")));
      }
      r.finish();
    }
    if (d.re.size() != metric->rank()) throw ConfigError(path + ": datum needs one component per bundle index");
    return d;
  }

  // Chern positivity of h at the active cell centres.
  Check metric_check(CheckRole role, const DbarGrid& g, const Tolerances& tol) const {
    SampleGrid s;
    for (const auto& c : g.centers) s.points.push_back({c[0], c[1]});
    s.resolution = {g.n, g.n};
    return nakano_check("metric_nakano", role, *metric, s, tol);
  }
};

Json l2_json(const L2Report& r) {
  return {{"n", r.n},       {"delta", r.delta},         {"lhs", r.lhs},     {"rhs", r.rhs},
          {"ratio", r.ratio}, {"residual", r.residual}, {"cells", r.cells}, {"iterations", r.iterations}};
}

constexpr double kL2Residual = 1e-10;
constexpr double kMinLaplacian = 1e-8;

struct L2BenchmarkScenario final : Scenario::Impl {
  L2Common l2;
  ScalarPtr psi;
  Datum datum;
  std::vector<int> grids;
  std::optional<double> ratio_bound;
  double monotone_tolerance = 0.1;

  void hypotheses(ScenarioReport& rep) const override {
    const DbarGrid g = make_dbar_grid(l2.shape, grids.front(), l2.half_width);
    double worst = std::numeric_limits<double>::infinity();
    std::vector<double> where;
    for (const auto& c : g.centers) {
      const double lap = complex_hessian(*psi, c)(0, 0).real();
      if (lap < worst) {
        worst = lap;
        where = {c[0], c[1]};
      }
    }
    Check c;
    c.name = "weight_strictly_psh";
    c.role = CheckRole::Hypothesis;
    c.pass = worst >= kMinLaplacian;
    c.summary = {{"min_laplacian", worst}, {"threshold", kMinLaplacian}, {"argmin", where}};
    rep.checks.push_back(std::move(c));
    rep.checks.push_back(l2.metric_check(CheckRole::Hypothesis, g, tol));
  }

  void conclusions(ScenarioReport& rep) const override {
    Json runs = Json::array();
    double max_residual = 0.0;
    bool ratios_ok = true, monotone_ok = true;
    double prev = 0.0;
    Json bounds = Json::array();
    for (std::size_t i = 0; i < grids.size(); ++i) {
      const L2Report r = check_estimate({l2.metric, psi, datum.re, datum.im},
                                        make_dbar_grid(l2.shape, grids[i], l2.half_width));
      runs.push_back(l2_json(r));
      max_residual = std::max(max_residual, r.residual);
      const double bound = ratio_bound ? *ratio_bound : 1.0 + 5.0 / grids[i];
      bounds.push_back(bound);
      ratios_ok = ratios_ok && r.ratio <= bound;
      if (i > 0 && r.ratio > prev * (1.0 + monotone_tolerance)) monotone_ok = false;
      prev = r.ratio;
    }
    rep.checks.push_back(residual_check("constraint_residual", CheckRole::Conclusion, max_residual, kL2Residual, {}));
    Check ratio;
    ratio.name = "estimate_ratio";
    ratio.role = CheckRole::Conclusion;
    ratio.pass = ratios_ok;
    ratio.summary = {{"runs", runs}, {"bounds", bounds}};
    if (!ratio.pass) ratio.dump = ratio.summary;
    rep.checks.push_back(std::move(ratio));
    Check mono;
    mono.name = "grid_convergence";
    mono.role = CheckRole::Conclusion;
    mono.pass = monotone_ok;
    mono.summary = {{"monotone_tolerance", monotone_tolerance}};
    if (!mono.pass) mono.dump = runs;
    rep.checks.push_back(std::move(mono));
  }

  std::vector<std::string> conclusion_names() const override {
    return {"constraint_residual", "estimate_ratio", "grid_convergence"};
  }
};

struct L2ViolationScenario final : Scenario::Impl {
  L2Common l2;
  std::vector<ScalarPtr> family;
  std::vector<double> parameters;
  std::vector<Datum> data;
  int n = 64;

  void hypotheses(ScenarioReport&) const override {}

  void conclusions(ScenarioReport& rep) const override {
    const DbarGrid g = make_dbar_grid(l2.shape, n, l2.half_width);
    Check curv = l2.metric_check(CheckRole::Diagnostic, g, tol);
    const bool positive = curv.pass;
    rep.checks.push_back(std::move(curv));
    const ViolationResult v = violation_search(l2.metric, family, data, g);
    const double bound = 1.0 + 5.0 / n;
    Check c;
    c.name = "estimate_consistency";
    c.role = CheckRole::Conclusion;
    c.pass = !(positive && v.max_ratio > bound);
    c.summary = {{"max_ratio", v.max_ratio},
                 {"best_psi", v.best_psi},
                 {"best_datum", v.best_datum},
                 {"ratios", v.ratios},
                 {"violation_found", v.max_ratio > 1.0},
                 {"metric_nakano_semipositive", positive},
                 {"bound_if_semipositive", bound}};
    if (!parameters.empty()) c.summary["parameters"] = parameters;
    if (!c.pass) c.dump = c.summary;
    rep.checks.push_back(std::move(c));
  }

  std::vector<std::string> conclusion_names() const override { return {"estimate_consistency"}; }
};

// ---------------------------------------------------------------------------
// Parsing.

MetricContext metric_context(const Setup& s, std::uint64_t seed) {
  MetricContext ctx{s.total, {}, seed, s.base_dim};
  for (std::size_t a = s.base.size(); a < s.total.size(); ++a)
    if (s.total.axes()[a].kind == AxisKind::Complex) ctx.rotating_axes.push_back(a);
  return ctx;
}

std::shared_ptr<Scenario::Impl> parse_kind(const std::string& kind, ObjectReader& r, std::uint64_t seed) {
  if (kind == "prekopa_scalar" || kind == "berndtsson_reinhardt" ||
      (kind == "berndtsson_tube" && r.has("phi"))) {
    auto s = std::make_shared<ScalarPushforwardScenario>();
    s->complex = kind != "prekopa_scalar";
    s->setup = parse_setup(r, s->complex);
    s->phi = parse_scalar(r.at("phi"), s->setup.total, r.child("phi"));
    s->quad.parse(r);
    if (kind == "berndtsson_reinhardt") {
      s->reinhardt = true;
      if (s->setup.domain.rule != Fibered::Rule::Product || !s->setup.domain.fiber_or_total->as<ReinhardtAnnulus>())
        throw ConfigError(r.path() + ": berndtsson_reinhardt needs an annulus fiber");
    }
    if (kind == "berndtsson_tube") {
      s->tube = true;
      if (s->setup.domain.rule != Fibered::Rule::Product || !s->setup.domain.fiber_or_total->as<TubeOverBase>())
        throw ConfigError(r.path() + ": berndtsson_tube needs a tube fiber");
    }
    return s;
  }
  if (kind == "prekopa_matrix" || kind == "invariant_direct_image_torus" || kind == "berndtsson_tube") {
    auto s = std::make_shared<MetricPushforwardScenario>();
    s->setup = parse_setup(r, kind != "prekopa_matrix");
    s->metric = parse_metric(r.at("metric"), metric_context(s->setup, seed), r.child("metric"));
    s->quad.parse(r);
    if (kind == "invariant_direct_image_torus") {
      s->reinhardt = true;
      if (s->setup.domain.rule != Fibered::Rule::Product || !s->setup.domain.fiber_or_total->as<ReinhardtAnnulus>())
        throw ConfigError(r.path() + ": invariant_direct_image_torus needs an annulus fiber");
    }
    if (kind == "berndtsson_tube") {
      s->tube = true;
      if (s->setup.domain.rule != Fibered::Rule::Product || !s->setup.domain.fiber_or_total->as<TubeOverBase>())
        throw ConfigError(r.path() + ": berndtsson_tube needs a tube fiber");
    }
    return s;
  }
  if (kind == "kiselman") {
    auto s = std::make_shared<KiselmanScenario>();
    s->setup = parse_setup(r, true);
    if (s->setup.domain.rule != Fibered::Rule::Product || !s->setup.domain.fiber_or_total->as<TubeOverBase>())
      throw ConfigError(r.path() + ": kiselman needs a tube fiber");
    s->phi = parse_scalar(r.at("phi"), s->setup.total, r.child("phi"));
    if (r.has("expected")) s->expected = parse_scalar(r.at("expected"), s->setup.base, r.child("expected"));
    s->expected_tolerance = r.number_or("expected_tolerance", s->expected_tolerance);
    s->fiber_grid = r.integer_or("fiber_grid", s->fiber_grid);
    s->steps = r.integer_or("descent_steps", s->steps);
    if (const Json* sm = r.find("submean")) {
      ObjectReader sr(*sm, r.child("submean"));
      s->pairs = sr.integer_or("pairs", s->pairs);
      if (sr.has("radius")) {
        const auto rad = sr.numbers("radius");
        if (rad.size() != 2 || !(0.0 < rad[0] && rad[0] <= rad[1]))
          throw ConfigError(sr.child("radius") + ": expected [lo, hi] with 0 < lo <= hi");
        s->radius_lo = rad[0];
        s->radius_hi = rad[1];
      }
      s->circle_points = sr.integer_or("circle_points", s->circle_points);
      sr.finish();
    }
    if (s->fiber_grid < 2 || s->steps < 0 || s->pairs < 1 || s->circle_points < 3)
      throw ConfigError(r.path() + ": kiselman grid, steps, pairs or circle points out of range");
    return s;
  }
  if (kind == "exp_reduction") {
    auto s = std::make_shared<ExpReductionScenario>();
    const auto base_names = r.strings("base_axes");
    const auto fiber_names = r.strings("fiber_axes");
    if (base_names.empty() || fiber_names.empty())
      throw ConfigError(r.path() + ": base_axes and fiber_axes must be nonempty");
    s->setup.base = Coordinates::complex(base_names);
    s->setup.fiber = Coordinates::complex(fiber_names);
    s->setup.total = s->setup.base + s->setup.fiber;
    s->setup.base_dim = s->setup.base.real_dim();
    auto base = std::make_shared<const Domain>(parse_domain(r.at("base"), r.child("base")));
    const Domain u = parse_domain(r.at("fiber"), r.child("fiber"));
    const Box* ub = u.as<Box>();
    if (!ub || ub->lo.size() != fiber_names.size())
      throw ConfigError(r.child("fiber") + ": expected a real box with one interval per fiber axis");
    if (base->dimension() != s->setup.base_dim) throw ConfigError(r.child("base") + ": dimension mismatch");
    s->setup.domain = Fibered{base, Fibered::Rule::Product,
                              std::make_shared<const Domain>(TubeOverBase{std::make_shared<const Domain>(u)})};
    s->reinhardt = Fibered{base, Fibered::Rule::Product, std::make_shared<const Domain>(exp_image(*ub))};
    s->metric = parse_metric(r.at("metric"), metric_context(s->setup, seed), r.child("metric"));
    const auto axes = fiber_axis_indices(s->setup);
    s->reduced = exp_reduced_metric(s->metric, axes, true);
    s->pulled = exp_reduced_metric(s->metric, axes, false);
    s->quad.parse(r);
    s->samples = r.integer_or("samples", s->samples);
    s->integral_tolerance = r.number_or("integral_tolerance", s->integral_tolerance);
    s->curvature_tolerance = r.number_or("curvature_tolerance", s->curvature_tolerance);
    return s;
  }
  if (kind == "l2_flat_benchmark") {
    auto s = std::make_shared<L2BenchmarkScenario>();
    s->l2.parse(r, MetricContext{{}, {}, seed, 0});
    s->psi = parse_scalar(r.at("psi"), s->l2.coords, r.child("psi"));
    s->datum = s->l2.parse_datum(r.at("f"), r.child("f"));
    const Json& gs = r.at("grids");
    if (!gs.is_array() || gs.empty()) throw ConfigError(r.child("grids") + ": expected a nonempty array");
    for (const auto& x : gs) {
      if (!x.is_number_integer() || x.get<int>() < 2) throw ConfigError(r.child("grids") + ": entries must be integers >= 2");
      s->grids.push_back(x.get<int>());
    }
    if (r.has("ratio_bound")) s->ratio_bound = r.number("ratio_bound");
    s->monotone_tolerance = r.number_or("monotone_tolerance", s->monotone_tolerance);
    return s;
  }
  if (kind == "l2_violation_search") {
    auto s = std::make_shared<L2ViolationScenario>();
    s->l2.parse(r, MetricContext{{}, {}, seed, 0});
    s->n = r.integer_or("n", s->n);
    if (s->n < 2) throw ConfigError(r.child("n") + ": must be at least 2");
    const Json& fam = r.at("psi_family");
    if (fam.is_array()) {
      for (std::size_t i = 0; i < fam.size(); ++i)
        s->family.push_back(parse_scalar(fam[i], s->l2.coords, r.child("psi_family") + "[" + std::to_string(i) + "]"));
    } else {
      ObjectReader fr(fam, r.child("psi_family"));
      const std::string tmpl = fr.string("template");
      const std::string param = fr.string("parameter");
      s->parameters = fr.numbers("values");
      fr.finish();
      std::optional<Expr> e;
      try {
        e = parse(tmpl);
      } catch (const ParseError& err) {
        throw ConfigError(fr.child("template") + ": " + err.what());
      }
      for (double v : s->parameters) {
        const Expr sub = substitute(*e, param, Expr::number(v));
        try {
          s->family.push_back(expression_field(s->l2.coords, sub));
        } catch (const ConfigError& err) {
          throw ConfigError(fr.child("template") + ": " + err.what());
        }
      }
    }
    const Json& data = r.at("data");
    if (!data.is_array()) throw ConfigError(r.child("data") + ": expected an array of data");
    for (std::size_t i = 0; i < data.size(); ++i)
      s->data.push_back(s->l2.parse_datum(data[i], r.child("data") + "[" + std::to_string(i) + "]"));
    if (s->family.empty() || s->data.empty()) throw ConfigError(r.path() + ": empty search space");
    return s;
  }
  throw ConfigError(r.child("kind") + ": unknown scenario kind '" + kind + "'");
}

}  // namespace

Scenario Scenario::parse(const Json& j, const SuiteDefaults& defaults, const std::string& path) {
  ObjectReader r(j, path);
  const std::string kind = r.string("kind");
  const std::string name = r.string_or("name", kind);
  const std::uint64_t seed = r.has("seed") ? static_cast<std::uint64_t>(r.integer("seed")) : defaults.seed;
  auto impl = parse_kind(kind, r, seed);
  impl->name = name;
  impl->kind = kind;
  impl->seed = seed;
  impl->tol = defaults.tolerances;
  impl->grid = r.integer_or("grid", defaults.grid);
  impl->total_grid = r.integer_or("total_grid", impl->grid);
  if (impl->grid < 2 || impl->total_grid < 2) throw ConfigError(path + ": grid resolutions must be at least 2");
  if (const Json* t = r.find("tolerances")) {
    ObjectReader tr(*t, r.child("tolerances"));
    impl->tol.conclusion_relative = tr.number_or("conclusion_relative", impl->tol.conclusion_relative);
    if (tr.has("hypothesis_min")) impl->tol.hypothesis_min = tr.number("hypothesis_min");
    tr.finish();
  }
  r.finish();
  Scenario s;
  s.impl_ = std::move(impl);
  return s;
}

const std::string& Scenario::name() const { return impl_->name; }
const std::string& Scenario::kind() const { return impl_->kind; }

ScenarioReport Scenario::run() const {
  const auto start = std::chrono::steady_clock::now();
  ScenarioReport rep;
  rep.name = impl_->name;
  rep.kind = impl_->kind;
  rep.seed = impl_->seed;
  try {
    impl_->hypotheses(rep);
    const bool hyp_ok = std::all_of(rep.checks.begin(), rep.checks.end(), [](const Check& c) {
      return c.role != CheckRole::Hypothesis || c.pass;
    });
    if (!hyp_ok) {
      rep.status = Status::HypothesesNotMet;
      rep.skipped = impl_->conclusion_names();
    } else {
      impl_->conclusions(rep);
      rep.status = Status::Pass;
      for (const Check& c : rep.checks)
        if (c.role == CheckRole::Conclusion && !c.pass) {
          rep.status = Status::ConclusionFailed;
          rep.failure_dump = {{"check", c.name}, {"detail", c.dump}};
          break;
        }
    }
  } catch (const NumericalError& e) {
    rep.status = Status::NumericalFailure;
    rep.error = e.what();
  } catch (const DomainError& e) {
    rep.status = Status::NumericalFailure;
    rep.error = e.what();
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

MetricPtr random_metric(std::uint64_t seed, std::size_t rank, const Coordinates& coords, std::size_t base_dim,
                        double coupling) {
  if (!coords.all_real() || base_dim == 0 || base_dim >= coords.size())
    throw ConfigError("random metric needs real base and fiber axes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto r = static_cast<Eigen::Index>(rank);
  auto gaussian = [&] {
    MatrixXcd m(r, r);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < r; ++j) m(i, j) = cd(normal(rng), normal(rng));
    return m;
  };
  const MatrixXcd m = gaussian();
  const MatrixXcd a = MatrixXcd::Identity(r, r) + m * m.adjoint() / (4.0 * static_cast<double>(rank));
  const MatrixXcd nb = gaussian();
  const MatrixXcd b = (nb + nb.adjoint()) / (2.0 * std::sqrt(static_cast<double>(rank)));
  const MatrixXcd nc = gaussian();
  const MatrixXcd c = (nc + nc.adjoint()) / (2.0 * std::sqrt(static_cast<double>(rank)));

  const auto names = coords.slot_names();
  std::string squares, sum_t, sum_x;
  for (std::size_t i = 0; i < names.size(); ++i) {
    squares += (i ? " + " : "") + names[i] + "^2";
    std::string& s = i < base_dim ? sum_t : sum_x;
    s += (s.empty() ? "" : " + ") + names[i];
  }
  auto part = [&](double av, double bv, double cv) {
    return "(" + format_number(av) + ")*(" + squares + ") + (" + format_number(coupling) + ")*((" +
           format_number(bv) + ")*(" + sum_t + ")*(" + sum_x + ") + (" + format_number(cv) + ")*(" + sum_x + "))";
  };
  std::vector<ComplexEntry> q;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) {
      ComplexEntry e{parse(part(a(i, j).real(), b(i, j).real(), c(i, j).real())), std::nullopt};
      if (i != j) e.im = parse(part(a(i, j).imag(), b(i, j).imag(), c(i, j).imag()));
      q.push_back(std::move(e));
    }
  return mexp_metric(coords, rank, q);
}

}  // namespace nakano
