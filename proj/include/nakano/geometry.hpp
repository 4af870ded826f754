#pragma once

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace nakano {

// Complex coordinates occupy two consecutive real slots (re, im).

class Domain;
using DomainPtr = std::shared_ptr<const Domain>;

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
};

/// {x : a_i · x <= b_i for all i} intersected with `bounds`.
struct HalfspaceConvex {
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  Box bounds;
  std::optional<std::vector<double>> interior;
};

/// Product of annuli r_inner[j] <= |z_j| <= r_outer[j]; real dimension 2m.
struct ReinhardtAnnulus {
  std::vector<double> r_inner;
  std::vector<double> r_outer;
};

/// base + i R^m. Points carry 2m real slots; only the real parts are constrained.
struct TubeOverBase {
  DomainPtr base;
};

/// Domain over (t, q). `Product` fibers are the same for every t; `Slice`
/// fibers are obtained by fixing the leading coordinates of `total`.
struct Fibered {
  enum class Rule { Product, Slice };
  DomainPtr base;
  Rule rule = Rule::Product;
  DomainPtr fiber_or_total;
};

class Domain {
 public:
  using Variant = std::variant<Box, HalfspaceConvex, ReinhardtAnnulus, TubeOverBase, Fibered>;

  Domain(Box b);                // NOLINT(google-explicit-constructor)
  Domain(HalfspaceConvex h);    // NOLINT(google-explicit-constructor)
  Domain(ReinhardtAnnulus r);   // NOLINT(google-explicit-constructor)
  Domain(TubeOverBase t);       // NOLINT(google-explicit-constructor)
  Domain(Fibered f);            // NOLINT(google-explicit-constructor)

  const Variant& variant() const { return v_; }
  template <class T>
  const T* as() const {
    return std::get_if<T>(&v_);
  }

  std::size_t dimension() const;

 private:
  Variant v_;
};

template <class T>
DomainPtr make_domain(T&& d) {
  return std::make_shared<const Domain>(std::forward<T>(d));
}

/// Throws DomainError on dimension mismatch.
bool contains(const Domain& d, std::span<const double> p);

Box bounding_box(const Domain& d);

/// Parameter dimension of a fibered domain.
std::size_t base_dimension(const Fibered& f);

/// Ω_t as stored: tube fibers are returned as the tube itself. Throws
/// DomainError when t lies outside the base (unless `check_base` is false,
/// which finite-difference stencils at the base boundary rely on).
Domain fiber_domain(const Fibered& f, std::span<const double> t, bool check_base = true);

/// Ω_t with tube fibers unwrapped to their real base U_t.
Domain fiber(const Fibered& f, std::span<const double> t);

/// True when every fiber is the same set (product rule, or a slice of a box).
bool fibers_independent_of_base(const Fibered& f);

struct SampleGrid {
  std::vector<std::vector<double>> points;
  std::vector<int> resolution;
};

/// Tensor grid over the bounding box filtered by membership. Degenerate axes
/// (lo == hi) contribute a single coordinate. Throws DomainError when the
/// filtered grid is empty.
SampleGrid sample_grid(const Domain& d, std::span<const int> resolution);
SampleGrid sample_grid(const Domain& d, int per_axis);

}  // namespace nakano
