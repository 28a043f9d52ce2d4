#include <cmath>
#include <stdexcept>
#include <string>

#include "spinforge/spin_core.hpp"

namespace spinforge {

namespace {

bool is_half_integer(double j) {
  const double twice = 2.0 * j;
  return std::isfinite(j) && j >= 0.0 && std::abs(twice - std::round(twice)) < 1e-12;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

bool all_finite(const std::array<double, 3>& v) {
  return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

}  // namespace

const CMatrix& SpinMatrices::operator[](int axis) const {
  switch (axis) {
    case 0: return x;
    case 1: return y;
    case 2: return z;
  }
  throw std::out_of_range("spin axis must be 0, 1 or 2");
}

SpinMatrices spin_matrices(double j) {
  if (!is_half_integer(j))
    throw std::invalid_argument("spin quantum number must be a nonnegative half-integer, got " +
                                std::to_string(j));
  const int dim = static_cast<int>(std::lround(2.0 * j)) + 1;
  const std::complex<double> i_unit(0.0, 1.0);

  SpinMatrices m{CMatrix::Zero(dim, dim), CMatrix::Zero(dim, dim), CMatrix::Zero(dim, dim)};
  for (int k = 0; k < dim; ++k) {
    const double mk = j - k;
    m.z(k, k) = mk;
    if (k + 1 < dim) {
      // <m+1| J+ |m> with m = mk - 1
      const double mlow = mk - 1.0;
      const double ladder = std::sqrt(j * (j + 1.0) - mlow * (mlow + 1.0));
      m.x(k, k + 1) = 0.5 * ladder;
      m.x(k + 1, k) = 0.5 * ladder;
      m.y(k, k + 1) = -0.5 * i_unit * ladder;
      m.y(k + 1, k) = 0.5 * i_unit * ladder;
    }
  }
  return m;
}

Mat3 rotation_x(double angle_deg) {
  const double a = angle_deg * constants::pi / 180.0;
  return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix();
}

Mat3 rotate_tensor(const std::array<double, 3>& principal, const Mat3& rotation) {
  if (!all_finite(principal) || !rotation.allFinite())
    throw std::invalid_argument("tensor inputs must be finite");
  const Vec3 d(principal[0], principal[1], principal[2]);
  Mat3 t = rotation * d.asDiagonal() * rotation.transpose();
  return 0.5 * (t + t.transpose());
}

Mat3 rotate_tensor(const std::array<double, 3>& principal, const std::array<double, 3>& angles_deg) {
  if (!all_finite(principal) || !all_finite(angles_deg))
    throw std::invalid_argument("tensor inputs must be finite");
  double tilt = 0.0;
  for (double a : angles_deg) {
    if (a == 0.0) continue;
    if (tilt != 0.0 && std::abs(a - tilt) > 1e-12)
      throw std::invalid_argument(
          "ambiguous tensor orientation: more than one distinct tilt angle; give an explicit "
          "rotation matrix");
    tilt = a;
  }
  return rotate_tensor(principal, rotation_x(tilt));
}

int SpinParams::electron_dim() const { return static_cast<int>(std::lround(2.0 * S)) + 1; }
int SpinParams::nuclear_dim() const { return static_cast<int>(std::lround(2.0 * I)) + 1; }

Mat3 SpinParams::g_tensor() const {
  return g_rotation ? rotate_tensor(g_principal, *g_rotation) : rotate_tensor(g_principal, g_angles);
}

Mat3 SpinParams::A_tensor() const {
  return A_rotation ? rotate_tensor(A_principal, *A_rotation) : rotate_tensor(A_principal, A_angles);
}

void SpinParams::validate() const {
  if (!is_half_integer(S) || S <= 0.0) throw std::invalid_argument("electron spin S must be a positive half-integer");
  if (!is_half_integer(I) || I <= 0.0) throw std::invalid_argument("nuclear spin I must be a positive half-integer");
  if (!all_finite(g_principal) || !all_finite(A_principal) || !std::isfinite(gN_muN))
    throw std::invalid_argument("spin parameters must be finite");
  for (const auto* angles : {&g_angles, &A_angles})
    for (double a : *angles)
      if (!std::isfinite(a) || a < 0.0 || a > 180.0)
        throw std::invalid_argument("tilt angles must lie in [0, 180] degrees");
  for (const auto* rot : {&g_rotation, &A_rotation}) {
    if (!*rot) continue;
    const Mat3& r = **rot;
    if (!r.allFinite() || !(r * r.transpose()).isApprox(Mat3::Identity(), 1e-9) || r.determinant() < 0.0)
      throw std::invalid_argument("explicit principal-axis rotation must be a proper rotation");
  }
}

FieldPoint FieldPoint::along(const Vec3& axis, double tesla) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("field axis must be a nonzero finite vector");
  return FieldPoint{axis / n * tesla};
}

SpinOperators product_operators(const SpinParams& p) {
  const SpinMatrices s = spin_matrices(p.S);
  const SpinMatrices n = spin_matrices(p.I);
  const CMatrix eye_s = CMatrix::Identity(p.electron_dim(), p.electron_dim());
  const CMatrix eye_n = CMatrix::Identity(p.nuclear_dim(), p.nuclear_dim());
  SpinOperators ops;
  for (int a = 0; a < 3; ++a) {
    ops.S[a] = kron(s[a], eye_n);
    ops.I[a] = kron(eye_s, n[a]);
  }
  return ops;
}

}  // namespace spinforge
