#pragma once

#include <Eigen/Core>
#include <cmath>

namespace lic {

// Quaternions throughout are JPL convention, scalar last: q = [x, y, z, w].
// q_AfromB corresponds to the rotation matrix returned by quat_to_rot, i.e.
//   v_A = quat_to_rot(q_AfromB) * v_B
// and composition follows quat_multiply(q_AfromB, q_BfromC) = q_AfromC.

template <typename Derived>
inline Eigen::Matrix<typename Derived::Scalar, 3, 3> skew(const Eigen::MatrixBase<Derived> &v) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, 3, 3> m;
  m << S(0), -v(2), v(1),
       v(2), S(0), -v(0),
      -v(1), v(0), S(0);
  return m;
}

template <typename S = double>
inline Eigen::Matrix<S, 4, 1> quat_identity() {
  return Eigen::Matrix<S, 4, 1>(S(0), S(0), S(0), S(1));
}

// Normalizes and fixes the sign so the scalar part is non-negative.
template <typename Derived>
inline Eigen::Matrix<typename Derived::Scalar, 4, 1> quat_normalize(const Eigen::MatrixBase<Derived> &q) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 4);
  Eigen::Matrix<typename Derived::Scalar, 4, 1> out = q.derived();
  out /= out.norm();
  if (out(3) < 0) out = -out;
  return out;
}

template <typename Derived>
inline Eigen::Matrix<typename Derived::Scalar, 4, 1> quat_inverse(const Eigen::MatrixBase<Derived> &q) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 4);
  Eigen::Matrix<typename Derived::Scalar, 4, 1> out;
  out.template head<3>() = -q.derived().template head<3>();
  out(3) = q(3);
  return out;
}

// JPL product: quat_to_rot(a (*) b) = quat_to_rot(a) * quat_to_rot(b).
template <typename DerivedA, typename DerivedB>
inline Eigen::Matrix<typename DerivedA::Scalar, 4, 1> quat_multiply(const Eigen::MatrixBase<DerivedA> &a,
                                                                    const Eigen::MatrixBase<DerivedB> &b) {
  using S = typename DerivedA::Scalar;
  const Eigen::Matrix<S, 3, 1> av = a.derived().template head<3>();
  const Eigen::Matrix<S, 3, 1> bv = b.derived().template head<3>();
  const S aw = a(3), bw = b(3);
  Eigen::Matrix<S, 4, 1> out;
  out.template head<3>() = aw * bv + bw * av - av.cross(bv);
  out(3) = aw * bw - av.dot(bv);
  return quat_normalize(out);
}

template <typename Derived>
inline Eigen::Matrix<typename Derived::Scalar, 3, 3> quat_to_rot(const Eigen::MatrixBase<Derived> &q) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 4);
  using S = typename Derived::Scalar;
  const Eigen::Matrix<S, 3, 1> v = q.derived().template head<3>();
  const S w = q(3);
  Eigen::Matrix<S, 3, 3> r = (S(2) * w * w - S(1)) * Eigen::Matrix<S, 3, 3>::Identity();
  r.noalias() -= S(2) * w * skew(v);
  r.noalias() += S(2) * v * v.transpose();
  return r;
}

template <typename Derived>
inline Eigen::Matrix<typename Derived::Scalar, 4, 1> rot_to_quat(const Eigen::MatrixBase<Derived> &rin) {
  EIGEN_STATIC_ASSERT_MATRIX_SPECIFIC_SIZE(Derived, 3, 3);
  using S = typename Derived::Scalar;
  const Eigen::Matrix<S, 3, 3> r = rin.derived();
  Eigen::Matrix<S, 4, 1> q;
  const S tr = r.trace();
  // Shepperd-style branch on the largest diagonal contribution.
  if (tr >= r(0, 0) && tr >= r(1, 1) && tr >= r(2, 2)) {
    q(3) = std::sqrt((S(1) + tr) / S(4));
    q(0) = (r(1, 2) - r(2, 1)) / (S(4) * q(3));
    q(1) = (r(2, 0) - r(0, 2)) / (S(4) * q(3));
    q(2) = (r(0, 1) - r(1, 0)) / (S(4) * q(3));
  } else if (r(0, 0) >= r(1, 1) && r(0, 0) >= r(2, 2)) {
    q(0) = std::sqrt((S(1) + S(2) * r(0, 0) - tr) / S(4));
    q(3) = (r(1, 2) - r(2, 1)) / (S(4) * q(0));
    q(1) = (r(0, 1) + r(1, 0)) / (S(4) * q(0));
    q(2) = (r(0, 2) + r(2, 0)) / (S(4) * q(0));
  } else if (r(1, 1) >= r(2, 2)) {
    q(1) = std::sqrt((S(1) + S(2) * r(1, 1) - tr) / S(4));
    q(3) = (r(2, 0) - r(0, 2)) / (S(4) * q(1));
    q(0) = (r(0, 1) + r(1, 0)) / (S(4) * q(1));
    q(2) = (r(1, 2) + r(2, 1)) / (S(4) * q(1));
  } else {
    q(2) = std::sqrt((S(1) + S(2) * r(2, 2) - tr) / S(4));
    q(3) = (r(0, 1) - r(1, 0)) / (S(4) * q(2));
    q(0) = (r(0, 2) + r(2, 0)) / (S(4) * q(2));
    q(1) = (r(1, 2) + r(2, 1)) / (S(4) * q(2));
  }
  return quat_normalize(q);
}

// Exponential map: quat_to_rot(quat_from_rotvec(phi)) = exp(-skew(phi)),
// so a left perturbation quat_from_rotvec(dth) (*) q rotates the local frame
// consistently with R = (I - skew(dth)) * R_hat to first order.
template <typename Derived>
inline Eigen::Matrix<typename Derived::Scalar, 4, 1> quat_from_rotvec(const Eigen::MatrixBase<Derived> &phi) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 3);
  using S = typename Derived::Scalar;
  const S theta = phi.derived().norm();
  Eigen::Matrix<S, 4, 1> q;
  if (theta < S(1e-8)) {
    q.template head<3>() = phi.derived() / S(2);
    q(3) = S(1);
  } else {
    q.template head<3>() = std::sin(theta / S(2)) / theta * phi.derived();
    q(3) = std::cos(theta / S(2));
  }
  return quat_normalize(q);
}

template <typename Derived>
inline Eigen::Matrix<typename Derived::Scalar, 3, 1> rotvec_from_quat(const Eigen::MatrixBase<Derived> &qin) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 4);
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, 4, 1> q = qin.derived();
  if (q(3) < 0) q = -q;
  const S nv = q.template head<3>().norm();
  if (nv < S(1e-12)) return S(2) * q.template head<3>();
  const S theta = S(2) * std::atan2(nv, q(3));
  return (theta / nv) * q.template head<3>();
}

// Rotation angle of R in [0, pi].
template <typename Derived>
inline typename Derived::Scalar rot_angle(const Eigen::MatrixBase<Derived> &r) {
  using S = typename Derived::Scalar;
  S c = (r.derived().trace() - S(1)) / S(2);
  c = std::min(S(1), std::max(S(-1), c));
  return std::acos(c);
}

}  // namespace lic
