#pragma once

#include <optional>

#include "geoflow/manifold.hpp"

namespace geoflow {

// Closed-form Riemannian operations for the four supported manifolds.
//
// Metrics: Euclidean/Sphere use the ambient dot product, SO(3) the
// bi-invariant <X,Y> = tr(X^T Y) (no 1/2 factor), SPD(n) the affine-invariant
// <X,Y>_P = tr(X P^-1 Y P^-1).
//
// Curvature sign convention: R(x,y)z such that <R(x,y)y, x> > 0 on the
// sphere, i.e. R(x,y)z = (1/r^2)(<y,z>x - <x,z>y) in constant curvature.
// The Lie-group/symmetric-space commutator forms below follow the same
// convention and are locked against the finite-difference oracle
// (fd_curvature): D/dt D/ds X - D/ds D/dt X = R(d_t q, d_s q) X.

template <typename Scalar>
struct BilinearReport {
    Scalar value;
    std::optional<Scalar> lower_bound;
    std::optional<Scalar> upper_bound;
};

/// Riemannian inner product of two tangent vectors at the same point.
template <typename Scalar>
Scalar inner(const Tangent<Scalar>& v, const Tangent<Scalar>& w, Scalar tol = Scalar(1e-9)) {
    require_same_base(v, w, tol);
    switch (v.base.manifold.kind) {
        case ManifoldKind::euclidean:
        case ManifoldKind::sphere:
            return (v.coords.transpose() * w.coords).value();
        case ManifoldKind::so3:
            return (v.coords.transpose() * w.coords).trace();
        case ManifoldKind::spd: {
            const MatX<Scalar> pinv = v.base.coords.inverse();
            return (v.coords * pinv * w.coords * pinv).trace();
        }
    }
    return Scalar(0);
}

template <typename Scalar>
Scalar norm(const Tangent<Scalar>& v) {
    return std::sqrt(std::max(Scalar(0), inner(v, v)));
}

/// Radius within which exp is guaranteed diffeomorphic (in metric norm of the
/// initial velocity): pi*r on the sphere, sqrt(2)*pi on SO(3) (geodesic angle
/// pi), unbounded on Euclidean/SPD.
template <typename Scalar>
Scalar injectivity_guard(const Manifold<Scalar>& m) {
    switch (m.kind) {
        case ManifoldKind::sphere: return Scalar(EIGEN_PI) * m.radius;
        case ManifoldKind::so3: return std::sqrt(Scalar(2)) * Scalar(EIGEN_PI);
        default: return std::numeric_limits<Scalar>::infinity();
    }
}

/// Exponential map: endpoint of the geodesic from p with initial velocity v.
template <typename Scalar>
Point<Scalar> exp_map(const Point<Scalar>& p, const Tangent<Scalar>& v, Scalar tol = Scalar(1e-9)) {
    if (!same_point(v.base, p, tol)) throw BasepointMismatch("exp_map: v not based at p");
    const Manifold<Scalar>& m = p.manifold;
    const Scalar len = norm(v);
    if (len >= injectivity_guard(m))
        throw InjectivityRadiusExceeded("exp_map: |v| beyond injectivity guard on " + m.describe());
    switch (m.kind) {
        case ManifoldKind::euclidean:
            return Point<Scalar>(m, (p.coords + v.coords).eval());
        case ManifoldKind::sphere: {
            if (len < Scalar(1e-300)) return p;
            const Scalar r = m.radius, t = len / r;
            MatX<Scalar> c = std::cos(t) * p.coords + (r * std::sin(t) / len) * v.coords;
            return Point<Scalar>::project(m, c);
        }
        case ManifoldKind::so3: {
            const Mat3<Scalar> R = p.coords;
            const Mat3<Scalar> body = skew_part<Scalar>((R.transpose() * v.coords).eval());
            return Point<Scalar>(m, MatX<Scalar>(project_rotation<Scalar>(R * rotation_exp(body))));
        }
        case ManifoldKind::spd: {
            const MatX<Scalar> h = spd_sqrt<Scalar>(p.coords);
            const MatX<Scalar> hi = spd_inv_sqrt<Scalar>(p.coords);
            return Point<Scalar>(m, (h * sym_exp<Scalar>((hi * v.coords * hi).eval()) * h).eval());
        }
    }
    throw ConstraintViolation("unknown manifold kind");
}

/// Convenience overload: exp from the tangent's own basepoint.
template <typename Scalar>
Point<Scalar> exp_map(const Tangent<Scalar>& v) {
    return exp_map(v.base, v);
}

/// Inverse exponential: initial velocity of the minimizing geodesic p -> q.
template <typename Scalar>
Tangent<Scalar> log_map(const Point<Scalar>& p, const Point<Scalar>& q) {
    if (p.manifold != q.manifold) throw BasepointMismatch("log_map: points on different manifolds");
    const Manifold<Scalar>& m = p.manifold;
    switch (m.kind) {
        case ManifoldKind::euclidean:
            return Tangent<Scalar>(p, (q.coords - p.coords).eval());
        case ManifoldKind::sphere: {
            const Scalar r = m.radius, r2 = r * r;
            Scalar c = (p.coords.transpose() * q.coords).value() / r2;
            if (c <= Scalar(-1) + Scalar(1e-10))
                throw AtCutLocus("log_map: antipodal points on sphere");
            c = std::min(Scalar(1), c);
            // chord-based angle (acos(c) loses half the digits near c = 1)
            const Scalar theta =
                2 * std::atan2((q.coords - p.coords).norm() / 2, (q.coords + p.coords).norm() / 2);
            MatX<Scalar> w = (q.coords - c * p.coords).eval();
            const Scalar wn = w.norm();
            if (wn < Scalar(1e-14) || theta < Scalar(1e-14))
                return Tangent<Scalar>::project(p, (q.coords - p.coords).eval());
            return Tangent<Scalar>(p, (w * (r * theta / wn)).eval());
        }
        case ManifoldKind::so3: {
            const Mat3<Scalar> rel = (p.coords.transpose() * q.coords).eval();
            const Mat3<Scalar> body = rotation_log(project_rotation(rel));
            return Tangent<Scalar>(p, MatX<Scalar>(Mat3<Scalar>(p.coords) * body));
        }
        case ManifoldKind::spd: {
            const MatX<Scalar> h = spd_sqrt<Scalar>(p.coords);
            const MatX<Scalar> hi = spd_inv_sqrt<Scalar>(p.coords);
            return Tangent<Scalar>(p, (h * spd_log<Scalar>((hi * q.coords * hi).eval()) * h).eval());
        }
    }
    throw ConstraintViolation("unknown manifold kind");
}

/// Riemannian distance.
template <typename Scalar>
Scalar dist(const Point<Scalar>& p, const Point<Scalar>& q) {
    if (p.manifold != q.manifold) throw BasepointMismatch("dist: points on different manifolds");
    const Manifold<Scalar>& m = p.manifold;
    switch (m.kind) {
        case ManifoldKind::euclidean:
            return (q.coords - p.coords).norm();
        case ManifoldKind::sphere: {
            // chord-based half-angle form, well-conditioned at both ends
            const Scalar r = m.radius;
            const Scalar chord_near = (q.coords - p.coords).norm();
            const Scalar chord_far = (q.coords + p.coords).norm();
            return 2 * r * std::atan2(chord_near / 2, chord_far / 2);
        }
        case ManifoldKind::so3: {
            const Mat3<Scalar> rel = project_rotation<Scalar>((p.coords.transpose() * q.coords).eval());
            return std::sqrt(Scalar(2)) * rotation_angle(rel);
        }
        case ManifoldKind::spd: {
            const MatX<Scalar> hi = spd_inv_sqrt<Scalar>(p.coords);
            return spd_log<Scalar>((hi * q.coords * hi).eval()).norm();
        }
    }
    return Scalar(0);
}

/// Parallel transport of v along the minimizing geodesic from v.base to q.
template <typename Scalar>
Tangent<Scalar> parallel_transport(const Tangent<Scalar>& v, const Point<Scalar>& q) {
    const Point<Scalar>& p = v.base;
    if (p.manifold != q.manifold) throw BasepointMismatch("parallel_transport: different manifolds");
    if (same_point(p, q, Scalar(1e-14))) return Tangent<Scalar>(q, v.coords);
    const Manifold<Scalar>& m = p.manifold;
    switch (m.kind) {
        case ManifoldKind::euclidean:
            return Tangent<Scalar>(q, v.coords);
        case ManifoldKind::sphere: {
            const Tangent<Scalar> u = log_map(p, q);
            const Scalar d = norm(u);
            if (d < Scalar(1e-14)) return Tangent<Scalar>::project(q, v.coords);
            const Scalar r = m.radius, theta = d / r;
            const MatX<Scalar> e = u.coords / d;  // unit initial direction
            const Scalar a = (v.coords.transpose() * e).value();
            // component along the geodesic rotates in the (p, e) plane
            MatX<Scalar> out = v.coords - a * e +
                               a * (std::cos(theta) * e - (std::sin(theta) / r) * p.coords);
            return Tangent<Scalar>::project(q, out);
        }
        case ManifoldKind::so3: {
            const Tangent<Scalar> u = log_map(p, q);
            const Mat3<Scalar> x = skew_part<Scalar>((Mat3<Scalar>(p.coords).transpose() * u.coords).eval());
            const Mat3<Scalar> e = rotation_exp<Scalar>((x / 2).eval());
            const Mat3<Scalar> body = skew_part<Scalar>((Mat3<Scalar>(p.coords).transpose() * v.coords).eval());
            return Tangent<Scalar>::project(q, MatX<Scalar>(Mat3<Scalar>(p.coords) * e * body * e));
        }
        case ManifoldKind::spd: {
            // E = (Q P^-1)^{1/2} = P^{1/2} (P^-1/2 Q P^-1/2)^{1/2} P^-1/2
            const MatX<Scalar> h = spd_sqrt<Scalar>(p.coords);
            const MatX<Scalar> hi = spd_inv_sqrt<Scalar>(p.coords);
            const MatX<Scalar> s = spd_sqrt<Scalar>((hi * q.coords * hi).eval());
            const MatX<Scalar> E = (h * s * hi).eval();
            return Tangent<Scalar>::project(q, (E * v.coords * E.transpose()).eval());
        }
    }
    throw ConstraintViolation("unknown manifold kind");
}

/// Curvature tensor R(x,y)z at p (sign convention in the file header).
template <typename Scalar>
Tangent<Scalar> curvature(const Point<Scalar>& p, const Tangent<Scalar>& x, const Tangent<Scalar>& y,
                          const Tangent<Scalar>& z, Scalar tol = Scalar(1e-9)) {
    if (!same_point(x.base, p, tol) || !same_point(y.base, p, tol) || !same_point(z.base, p, tol))
        throw BasepointMismatch("curvature: arguments not based at p");
    const Manifold<Scalar>& m = p.manifold;
    switch (m.kind) {
        case ManifoldKind::euclidean:
            return Tangent<Scalar>::zero(p);
        case ManifoldKind::sphere: {
            const Scalar A = Scalar(1) / (m.radius * m.radius);
            const Scalar yz = (y.coords.transpose() * z.coords).value();
            const Scalar xz = (x.coords.transpose() * z.coords).value();
            return Tangent<Scalar>::project(p, (A * (yz * x.coords - xz * y.coords)).eval());
        }
        case ManifoldKind::so3: {
            const Mat3<Scalar> R = p.coords;
            const Mat3<Scalar> a = skew_part<Scalar>((R.transpose() * x.coords).eval());
            const Mat3<Scalar> b = skew_part<Scalar>((R.transpose() * y.coords).eval());
            const Mat3<Scalar> c = skew_part<Scalar>((R.transpose() * z.coords).eval());
            const Mat3<Scalar> ab = a * b - b * a;
            const Mat3<Scalar> res = (ab * c - c * ab) * Scalar(-0.25);
            return Tangent<Scalar>::project(p, MatX<Scalar>(R * res));
        }
        case ManifoldKind::spd: {
            const MatX<Scalar> h = spd_sqrt<Scalar>(p.coords);
            const MatX<Scalar> hi = spd_inv_sqrt<Scalar>(p.coords);
            const MatX<Scalar> a = (hi * x.coords * hi).eval();
            const MatX<Scalar> b = (hi * y.coords * hi).eval();
            const MatX<Scalar> c = (hi * z.coords * hi).eval();
            const MatX<Scalar> ab = (a * b - b * a).eval();
            const MatX<Scalar> res = ((ab * c - c * ab) * Scalar(-0.25)).eval();
            return Tangent<Scalar>::project(p, (h * res * h).eval());
        }
    }
    throw ConstraintViolation("unknown manifold kind");
}

/// Sectional curvature of the plane spanned by x, y.
template <typename Scalar>
Scalar sectional_curvature(const Point<Scalar>& p, const Tangent<Scalar>& x, const Tangent<Scalar>& y) {
    const Scalar num = inner(curvature(p, x, y, y), x);
    const Scalar den = inner(x, x) * inner(y, y) - inner(x, y) * inner(x, y);
    if (den < Scalar(1e-12)) throw DegenerateInput("sectional_curvature: x, y nearly collinear");
    return num / den;
}

/// Gradient of F(q) = d(q,P)^2 / 2 with respect to q: -log_q(P).
template <typename Scalar>
Tangent<Scalar> grad_half_sq_dist(const Point<Scalar>& q, const Point<Scalar>& P) {
    Tangent<Scalar> l = log_map(q, P);
    return Tangent<Scalar>(q, (-l.coords).eval());
}

namespace detail {

// Hessian comparison profile: the Hessian eigenvalue of d^2/2 at geodesic
// distance d in a Jacobi-eigendirection of sectional curvature mu. Exact on
// these manifolds (they are symmetric spaces, so the Jacobi operator is
// parallel along radial geodesics).
template <typename Scalar>
Scalar hessian_profile(Scalar mu, Scalar d) {
    const Scalar x2 = mu * d * d;
    if (std::abs(x2) < Scalar(1e-10))
        return Scalar(1) - x2 / 3 - x2 * x2 / 45;
    if (mu > Scalar(0)) {
        const Scalar x = std::sqrt(mu) * d;
        return x / std::tan(x);
    }
    const Scalar x = std::sqrt(-mu) * d;
    return x / std::tanh(x);
}

// Hessian of d(.,P)^2/2 at q as a matrix in an orthonormal tangent basis,
// via the eigendecomposition of the radial Jacobi operator.
template <typename Scalar>
MatX<Scalar> hessian_matrix(const Point<Scalar>& q, const Point<Scalar>& P,
                            const std::vector<Tangent<Scalar>>& basis, Scalar d) {
    const int n = static_cast<int>(basis.size());
    const Tangent<Scalar> u = log_map(q, P);
    Tangent<Scalar> e_r(q, (u.coords / d).eval());
    MatX<Scalar> J(n, n);
    for (int i = 0; i < n; ++i) {
        const Tangent<Scalar> Rei = curvature(q, basis[i], e_r, e_r);
        for (int j = 0; j < n; ++j) J(i, j) = inner(Rei, basis[j]);
    }
    Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig((J + J.transpose()) / 2);
    VecX<Scalar> h = eig.eigenvalues();
    for (int i = 0; i < n; ++i) h(i) = hessian_profile(h(i), d);
    return eig.eigenvectors() * h.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// Hessian of F(q) = d(q,P)^2 / 2 evaluated on (v, w), with quadratic-form
/// bounds reported when v == w.
template <typename Scalar>
BilinearReport<Scalar> hess_half_sq_dist(const Point<Scalar>& q, const Point<Scalar>& P,
                                         const Tangent<Scalar>& v, const Tangent<Scalar>& w,
                                         Scalar tol = Scalar(1e-9)) {
    if (!same_point(v.base, q, tol) || !same_point(w.base, q, tol))
        throw BasepointMismatch("hess_half_sq_dist: v, w not based at q");
    const Scalar d = dist(q, P);
    BilinearReport<Scalar> rep;
    if (d < Scalar(1e-12)) {
        rep.value = inner(v, w);
        rep.lower_bound = rep.value;
        rep.upper_bound = rep.value;
        return rep;
    }
    const auto basis = orthonormal_basis(q);
    const int n = static_cast<int>(basis.size());
    const MatX<Scalar> H = detail::hessian_matrix(q, P, basis, d);
    VecX<Scalar> vc(n), wc(n);
    for (int i = 0; i < n; ++i) {
        vc(i) = inner(v, basis[i]);
        wc(i) = inner(w, basis[i]);
    }
    rep.value = (vc.transpose() * H * wc).value();
    if ((v.coords - w.coords).norm() <= Scalar(1e-12) * std::max(Scalar(1), v.coords.norm())) {
        Eigen::SelfAdjointEigenSolver<MatX<Scalar>> eig(H);
        const Scalar vv = vc.squaredNorm();
        rep.lower_bound = eig.eigenvalues().minCoeff() * vv;
        rep.upper_bound = eig.eigenvalues().maxCoeff() * vv;
    }
    return rep;
}

/// Laplacian of F(q) = d(q,P)^2 / 2: trace of the Hessian in an orthonormal frame.
template <typename Scalar>
Scalar laplacian_half_sq_dist(const Point<Scalar>& q, const Point<Scalar>& P) {
    const Scalar d = dist(q, P);
    if (d < Scalar(1e-12)) return Scalar(q.manifold.dim());
    const auto basis = orthonormal_basis(q);
    return detail::hessian_matrix(q, P, basis, d).trace();
}

// defined here because it needs the metric
template <typename Scalar>
Tangent<Scalar> random_tangent(const Point<Scalar>& p, std::mt19937_64& rng, bool unit) {
    Tangent<Scalar> v = Tangent<Scalar>::project(p, gaussian_matrix<Scalar>(p.coords.rows(), p.coords.cols(), rng));
    if (unit) {
        const Scalar n = norm(v);
        if (n < Scalar(1e-12)) return random_tangent(p, rng, unit);
        v.coords /= n;
    }
    return v;
}

}  // namespace geoflow
