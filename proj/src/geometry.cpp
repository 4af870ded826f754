#include "nakano/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nakano/errors.hpp"

namespace nakano {

Domain::Domain(Box b) : v_(std::move(b)) {
  const auto& box = std::get<Box>(v_);
  if (box.lo.size() != box.hi.size()) throw ConfigError("box bounds have different lengths");
  for (std::size_t i = 0; i < box.lo.size(); ++i)
    if (!(box.lo[i] <= box.hi[i]) || !std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i]))
      throw ConfigError("box bounds must be finite with lo <= hi");
}

Domain::Domain(HalfspaceConvex h) : v_(std::move(h)) {
  const auto& hs = std::get<HalfspaceConvex>(v_);
  const std::size_t dim = hs.bounds.lo.size();
  if (hs.a.size() != hs.b.size()) throw ConfigError("halfspace rows and offsets differ in count");
  for (const auto& row : hs.a)
    if (row.size() != dim) throw ConfigError("halfspace row dimension mismatch");
  if (hs.interior) {
    if (hs.interior->size() != dim) throw ConfigError("interior point dimension mismatch");
    for (std::size_t i = 0; i < hs.a.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += hs.a[i][k] * (*hs.interior)[k];
      if (!(s < hs.b[i])) throw ConfigError("interior point violates a halfspace constraint");
    }
  }
}

Domain::Domain(ReinhardtAnnulus r) : v_(std::move(r)) {
  const auto& ann = std::get<ReinhardtAnnulus>(v_);
  if (ann.r_inner.size() != ann.r_outer.size()) throw ConfigError("annulus radii lists differ in length");
  for (std::size_t j = 0; j < ann.r_inner.size(); ++j)
    if (!(0.0 < ann.r_inner[j] && ann.r_inner[j] <= ann.r_outer[j]))
      throw ConfigError("annulus radii must satisfy 0 < inner <= outer");
}

Domain::Domain(TubeOverBase t) : v_(std::move(t)) {
  if (!std::get<TubeOverBase>(v_).base) throw ConfigError("tube needs a base domain");
}

Domain::Domain(Fibered f) : v_(std::move(f)) {
  const auto& fib = std::get<Fibered>(v_);
  if (!fib.base || !fib.fiber_or_total) throw ConfigError("fibered domain needs base and fiber");
  if (fib.rule == Fibered::Rule::Slice) {
    if (!fib.fiber_or_total->as<Box>() && !fib.fiber_or_total->as<HalfspaceConvex>())
      throw ConfigError("slice fibers require a box or halfspace total space");
    if (fib.fiber_or_total->dimension() <= fib.base->dimension())
      throw ConfigError("total space must have more coordinates than the base");
  }
}

std::size_t Domain::dimension() const {
  return std::visit(
      [](const auto& d) -> std::size_t {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Box>) {
          return d.lo.size();
        } else if constexpr (std::is_same_v<T, HalfspaceConvex>) {
          return d.bounds.lo.size();
        } else if constexpr (std::is_same_v<T, ReinhardtAnnulus>) {
          return 2 * d.r_inner.size();
        } else if constexpr (std::is_same_v<T, TubeOverBase>) {
          return 2 * d.base->dimension();
        } else {
          if (d.rule == Fibered::Rule::Product) return d.base->dimension() + d.fiber_or_total->dimension();
          return d.fiber_or_total->dimension();
        }
      },
      v_);
}

std::size_t base_dimension(const Fibered& f) { return f.base->dimension(); }

namespace {

bool in_box(const Box& b, std::span<const double> p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] < b.lo[i] || p[i] > b.hi[i]) return false;
  return true;
}

bool in_halfspaces(const HalfspaceConvex& h, std::span<const double> p) {
  if (!in_box(h.bounds, p)) return false;
  for (std::size_t i = 0; i < h.a.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += h.a[i][k] * p[k];
    if (s > h.b[i]) return false;
  }
  return true;
}

Box slice_box(const Box& b, std::size_t lead) {
  return Box{std::vector<double>(b.lo.begin() + static_cast<std::ptrdiff_t>(lead), b.lo.end()),
             std::vector<double>(b.hi.begin() + static_cast<std::ptrdiff_t>(lead), b.hi.end())};
}

Domain slice_total(const Domain& total, std::span<const double> t) {
  const std::size_t lead = t.size();
  if (const auto* b = total.as<Box>()) return slice_box(*b, lead);
  const auto& h = *total.as<HalfspaceConvex>();
  HalfspaceConvex out;
  out.bounds = slice_box(h.bounds, lead);
  const std::size_t dim = h.bounds.lo.size() - lead;
  for (std::size_t i = 0; i < h.a.size(); ++i) {
    double shift = 0.0;
    for (std::size_t k = 0; k < lead; ++k) shift += h.a[i][k] * t[k];
    std::vector<double> row(h.a[i].begin() + static_cast<std::ptrdiff_t>(lead), h.a[i].end());
    const double rhs = h.b[i] - shift;
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) {
      // Constraint independent of the fiber variables; a violated one empties the slice.
      if (rhs < 0.0) {
        out.a.push_back(std::vector<double>(dim, 0.0));
        out.b.push_back(rhs);
      }
      continue;
    }
    out.a.push_back(std::move(row));
    out.b.push_back(rhs);
  }
  if (dim == 1) {
    // One-dimensional slices are intervals; clip exactly.
    double lo = out.bounds.lo[0];
    double hi = out.bounds.hi[0];
    for (std::size_t i = 0; i < out.a.size(); ++i) {
      const double c = out.a[i][0];
      if (c > 0.0) {
        hi = std::min(hi, out.b[i] / c);
      } else if (c < 0.0) {
        lo = std::max(lo, out.b[i] / c);
      } else if (out.b[i] < 0.0) {
        hi = lo - 1.0;
      }
    }
    if (!(lo <= hi)) throw DomainError("degenerate slice: fiber is empty");
    return Box{{lo}, {hi}};
  }
  return out;
}

}  // namespace

bool contains(const Domain& d, std::span<const double> p) {
  if (p.size() != d.dimension())
    throw DomainError("point dimension " + std::to_string(p.size()) + " does not match domain dimension " +
                      std::to_string(d.dimension()));
  return std::visit(
      [&](const auto& dom) -> bool {
        using T = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<T, Box>) {
          return in_box(dom, p);
        } else if constexpr (std::is_same_v<T, HalfspaceConvex>) {
          return in_halfspaces(dom, p);
        } else if constexpr (std::is_same_v<T, ReinhardtAnnulus>) {
          for (std::size_t j = 0; j < dom.r_inner.size(); ++j) {
            const double r = std::hypot(p[2 * j], p[2 * j + 1]);
            if (r < dom.r_inner[j] || r > dom.r_outer[j]) return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, TubeOverBase>) {
          std::vector<double> re(p.size() / 2);
          for (std::size_t j = 0; j < re.size(); ++j) re[j] = p[2 * j];
          return contains(*dom.base, re);
        } else {
          const std::size_t k = base_dimension(dom);
          const auto t = p.first(k);
          if (!contains(*dom.base, t)) return false;
          if (dom.rule == Fibered::Rule::Slice) return contains(*dom.fiber_or_total, p);
          return contains(*dom.fiber_or_total, p.subspan(k));
        }
      },
      d.variant());
}

Box bounding_box(const Domain& d) {
  return std::visit(
      [&](const auto& dom) -> Box {
        using T = std::decay_t<decltype(dom)>;
        if constexpr (std::is_same_v<T, Box>) {
          return dom;
        } else if constexpr (std::is_same_v<T, HalfspaceConvex>) {
          return dom.bounds;
        } else if constexpr (std::is_same_v<T, ReinhardtAnnulus>) {
          Box b;
          for (double r : dom.r_outer) {
            for (int k = 0; k < 2; ++k) {
              b.lo.push_back(-r);
              b.hi.push_back(r);
            }
          }
          return b;
        } else if constexpr (std::is_same_v<T, TubeOverBase>) {
          const Box base = bounding_box(*dom.base);
          Box b;
          for (std::size_t j = 0; j < base.lo.size(); ++j) {
            b.lo.push_back(base.lo[j]);
            b.hi.push_back(base.hi[j]);
            b.lo.push_back(0.0);
            b.hi.push_back(0.0);
          }
          return b;
        } else {
          if (dom.rule == Fibered::Rule::Slice) return bounding_box(*dom.fiber_or_total);
          Box b = bounding_box(*dom.base);
          const Box f = bounding_box(*dom.fiber_or_total);
          b.lo.insert(b.lo.end(), f.lo.begin(), f.lo.end());
          b.hi.insert(b.hi.end(), f.hi.begin(), f.hi.end());
          return b;
        }
      },
      d.variant());
}

Domain fiber_domain(const Fibered& f, std::span<const double> t, bool check_base) {
  if (t.size() != base_dimension(f)) throw DomainError("parameter dimension does not match the base");
  if (check_base && !contains(*f.base, t)) throw DomainError("parameter point lies outside the base");
  if (f.rule == Fibered::Rule::Product) return *f.fiber_or_total;
  return slice_total(*f.fiber_or_total, t);
}

Domain fiber(const Fibered& f, std::span<const double> t) {
  Domain d = fiber_domain(f, t);
  if (const auto* tube = d.as<TubeOverBase>()) return *tube->base;
  return d;
}

bool fibers_independent_of_base(const Fibered& f) {
  return f.rule == Fibered::Rule::Product || f.fiber_or_total->as<Box>() != nullptr;
}

SampleGrid sample_grid(const Domain& d, std::span<const int> resolution) {
  const Box box = bounding_box(d);
  const std::size_t dim = box.lo.size();
  if (resolution.size() != dim) throw DomainError("resolution must give one count per axis");
  std::vector<std::vector<double>> axes(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (box.lo[i] == box.hi[i]) {
      axes[i] = {box.lo[i]};
      continue;
    }
    if (resolution[i] < 2) throw DomainError("resolution must be at least 2 per axis");
    const int n = resolution[i];
    for (int k = 0; k < n; ++k) {
      // Endpoints are pinned exactly so box corners remain members.
      const double s = static_cast<double>(k) / (n - 1);
      axes[i].push_back(k == n - 1 ? box.hi[i] : box.lo[i] + s * (box.hi[i] - box.lo[i]));
    }
  }
  SampleGrid grid;
  grid.resolution.assign(resolution.begin(), resolution.end());
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> p(dim);
  for (;;) {
    for (std::size_t i = 0; i < dim; ++i) p[i] = axes[i][idx[i]];
    if (contains(d, p)) grid.points.push_back(p);
    // Last axis varies fastest.
    bool done = true;
    for (std::size_t i = dim; i-- > 0;) {
      if (++idx[i] < axes[i].size()) {
        done = false;
        break;
      }
      idx[i] = 0;
    }
    if (done) break;
  }
  if (grid.points.empty()) throw DomainError("degenerate slice: sample grid is empty");
  return grid;
}

SampleGrid sample_grid(const Domain& d, int per_axis) {
  const std::vector<int> res(bounding_box(d).lo.size(), per_axis);
  return sample_grid(d, res);
}

}  // namespace nakano
