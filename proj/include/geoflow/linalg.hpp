#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "geoflow/errors.hpp"

namespace geoflow {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

/// hat: R^3 -> so(3), w -> [w]_x with hat(w)*v = w x v.
template <typename Scalar>
Mat3<Scalar> hat(const Vec3<Scalar>& w) {
    Mat3<Scalar> m;
    m << Scalar(0), -w(2), w(1),
         w(2), Scalar(0), -w(0),
         -w(1), w(0), Scalar(0);
    return m;
}

/// vee: so(3) -> R^3, inverse of hat (input is averaged to kill asymmetry drift).
template <typename Scalar>
Vec3<Scalar> vee(const Mat3<Scalar>& m) {
    return Vec3<Scalar>((m(2, 1) - m(1, 2)) / 2, (m(0, 2) - m(2, 0)) / 2, (m(1, 0) - m(0, 1)) / 2);
}

template <typename Scalar>
MatX<Scalar> sym(const MatX<Scalar>& m) {
    return ((m + m.transpose()) / 2).eval();
}

template <typename Scalar>
MatX<Scalar> skew_part(const MatX<Scalar>& m) {
    return ((m - m.transpose()) / 2).eval();
}

/// Rodrigues formula: exp of a skew-symmetric 3x3 matrix.
template <typename Scalar>
Mat3<Scalar> rotation_exp(const Mat3<Scalar>& omega_hat) {
    const Vec3<Scalar> w = vee(omega_hat);
    const Scalar theta = w.norm();
    const Mat3<Scalar> K = hat(w);
    Scalar a, b;
    if (theta < Scalar(1e-6)) {
        // sin(t)/t and (1-cos t)/t^2 by series
        a = Scalar(1) - theta * theta / 6;
        b = Scalar(0.5) - theta * theta / 24;
    } else {
        a = std::sin(theta) / theta;
        b = (Scalar(1) - std::cos(theta)) / (theta * theta);
    }
    return Mat3<Scalar>::Identity() + a * K + b * K * K;
}

/// Rotation angle of R in [0, pi]. atan2 form: well-conditioned at both ends,
/// unlike acos((tr - 1)/2) which loses half the digits near 0 and pi.
template <typename Scalar>
Scalar rotation_angle(const Mat3<Scalar>& R) {
    const Scalar c = (R.trace() - Scalar(1)) / 2;
    const Scalar s = vee<Scalar>(((R - R.transpose()) / 2).eval()).norm();  // = sin(angle)
    return std::atan2(s, c);
}

/// Principal matrix log of a rotation. Throws AtCutLocus for angles within
/// angle_tol of pi, where the principal branch stops being unique.
template <typename Scalar>
Mat3<Scalar> rotation_log(const Mat3<Scalar>& R, Scalar angle_tol = Scalar(1e-8)) {
    const Scalar theta = rotation_angle(R);
    const Scalar pi = Scalar(EIGEN_PI);
    if (theta >= pi - angle_tol)
        throw AtCutLocus("rotation_log: angle within tolerance of pi");
    if (theta < Scalar(1e-6)) {
        // log(R) ~ skew(R) * (1 + theta^2/6)
        return (skew_part<Scalar>(R) * (Scalar(1) + theta * theta / 6)).eval();
    }
    if (theta > Scalar(3)) {
        // Near pi the skew part is small; recover the axis from the symmetric
        // part and fix signs from the skew part.
        const Mat3<Scalar> S = (R + R.transpose()) / 2;
        const Scalar c = std::cos(theta);
        Vec3<Scalar> axis;
        for (int i = 0; i < 3; ++i)
            axis(i) = std::sqrt(std::max(Scalar(0), (S(i, i) - c) / (Scalar(1) - c)));
        const Vec3<Scalar> s = vee<Scalar>((R - R.transpose()).eval() / 2);  // = sin(theta) * axis
        for (int i = 0; i < 3; ++i)
            if (s(i) < Scalar(0)) axis(i) = -axis(i);
        axis.normalize();
        return hat<Scalar>((theta * axis).eval());
    }
    return (theta / (2 * std::sin(theta)) * (R - R.transpose())).eval();
}

/// Closest rotation matrix in Frobenius norm (polar factor with det +1).
template <typename Scalar>
Mat3<Scalar> project_rotation(const Mat3<Scalar>& m) {
    Eigen::JacobiSVD<Mat3<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3<Scalar> R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < Scalar(0)) {
        Mat3<Scalar> D = Mat3<Scalar>::Identity();
        D(2, 2) = Scalar(-1);
        R = svd.matrixU() * D * svd.matrixV().transpose();
    }
    return R;
}

namespace detail {

// Apply f to the eigenvalues of a symmetric matrix (inputs are symmetrized first).
template <typename Scalar, typename Fn>
MatX<Scalar> sym_eig_apply(const MatX<Scalar>& m, Fn&& f) {
    const MatX<Scalar> s = sym(m);
    Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(s);
    VecX<Scalar> d = eig.eigenvalues();
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = f(d(i));
    return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

template <typename Scalar>
MatX<Scalar> spd_sqrt(const MatX<Scalar>& m) {
    return detail::sym_eig_apply<Scalar>(m, [](Scalar x) { return std::sqrt(std::max(x, Scalar(0))); });
}

template <typename Scalar>
MatX<Scalar> spd_inv_sqrt(const MatX<Scalar>& m) {
    return detail::sym_eig_apply<Scalar>(m, [](Scalar x) { return Scalar(1) / std::sqrt(x); });
}

/// Matrix log of a symmetric positive definite matrix.
template <typename Scalar>
MatX<Scalar> spd_log(const MatX<Scalar>& m) {
    return detail::sym_eig_apply<Scalar>(m, [](Scalar x) { return std::log(x); });
}

/// Matrix exp of a symmetric matrix.
template <typename Scalar>
MatX<Scalar> sym_exp(const MatX<Scalar>& m) {
    return detail::sym_eig_apply<Scalar>(m, [](Scalar x) { return std::exp(x); });
}

/// Symmetrize, then clip eigenvalues from below.
template <typename Scalar>
MatX<Scalar> spd_project(const MatX<Scalar>& m, Scalar floor = Scalar(1e-12)) {
    return detail::sym_eig_apply<Scalar>(m, [floor](Scalar x) { return std::max(x, floor); });
}

template <typename Scalar>
Scalar min_eigenvalue(const MatX<Scalar>& m) {
    Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(sym(m));
    return eig.eigenvalues().minCoeff();
}

}  // namespace geoflow
