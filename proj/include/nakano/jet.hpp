#pragma once

#include <Eigen/Dense>

#include "nakano/hyperdual.hpp"

namespace nakano {

/// Matrix-valued hyper-dual number: value, derivatives along two directions,
/// and the mixed second derivative, each a complex matrix.
struct MatrixJet {
  Eigen::MatrixXcd v;
  Eigen::MatrixXcd d1;
  Eigen::MatrixXcd d2;
  Eigen::MatrixXcd d12;

  static MatrixJet zero(Eigen::Index r) {
    const Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(r, r);
    return {z, z, z, z};
  }
  static MatrixJet identity(Eigen::Index r) {
    MatrixJet j = zero(r);
    j.v.setIdentity();
    return j;
  }

  Eigen::Index rank() const { return v.rows(); }

  MatrixJet& operator+=(const MatrixJet& o) {
    v += o.v;
    d1 += o.d1;
    d2 += o.d2;
    d12 += o.d12;
    return *this;
  }

  MatrixJet& operator*=(double s) {
    v *= s;
    d1 *= s;
    d2 *= s;
    d12 *= s;
    return *this;
  }

  friend MatrixJet operator+(MatrixJet a, const MatrixJet& b) { return a += b; }

  friend MatrixJet operator*(const MatrixJet& a, const MatrixJet& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + a.v * b.d2,
            a.d12 * b.v + a.d1 * b.d2 + a.d2 * b.d1 + a.v * b.d12};
  }

  /// Scalar hyper-dual times matrix jet.
  friend MatrixJet operator*(const HyperDual& s, const MatrixJet& m) {
    return {s.value * m.v, s.d1 * m.v + s.value * m.d1, s.d2 * m.v + s.value * m.d2,
            s.d12 * m.v + s.d1 * m.d2 + s.d2 * m.d1 + s.value * m.d12};
  }
};

}  // namespace nakano
