#pragma once

#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geoflow/linalg.hpp"

namespace geoflow {

enum class ManifoldKind { euclidean, sphere, so3, spd };

inline const char* to_string(ManifoldKind k) {
    switch (k) {
        case ManifoldKind::euclidean: return "euclidean";
        case ManifoldKind::sphere: return "sphere";
        case ManifoldKind::so3: return "so3";
        case ManifoldKind::spd: return "spd";
    }
    return "?";
}

/// Tag describing one of the supported manifolds. Points and tangents are
/// stored in ambient coordinates: length-n vector for Euclidean(n), length
/// (n+1) vector for Sphere(n, r) embedded at radius r, 3x3 matrices for SO(3),
/// n x n symmetric matrices for SPD(n).
template <typename Scalar>
struct Manifold {
    ManifoldKind kind = ManifoldKind::euclidean;
    int n = 1;                  // dimension parameter (sphere: intrinsic dim, spd: matrix size)
    Scalar radius = Scalar(1);  // sphere only

    static Manifold euclidean(int n) {
        if (n < 1) throw ConstraintViolation("euclidean: n >= 1 required");
        return {ManifoldKind::euclidean, n, Scalar(1)};
    }
    static Manifold sphere(int n, Scalar r) {
        if (n < 1 || !(r > Scalar(0))) throw ConstraintViolation("sphere: n >= 1, r > 0 required");
        return {ManifoldKind::sphere, n, r};
    }
    static Manifold so3() { return {ManifoldKind::so3, 3, Scalar(1)}; }
    static Manifold spd(int n) {
        if (n < 1) throw ConstraintViolation("spd: n >= 1 required");
        return {ManifoldKind::spd, n, Scalar(1)};
    }

    /// Intrinsic dimension.
    int dim() const {
        switch (kind) {
            case ManifoldKind::euclidean: return n;
            case ManifoldKind::sphere: return n;
            case ManifoldKind::so3: return 3;
            case ManifoldKind::spd: return n * (n + 1) / 2;
        }
        return 0;
    }

    int ambient_rows() const {
        switch (kind) {
            case ManifoldKind::euclidean: return n;
            case ManifoldKind::sphere: return n + 1;
            case ManifoldKind::so3: return 3;
            case ManifoldKind::spd: return n;
        }
        return 0;
    }
    int ambient_cols() const {
        return (kind == ManifoldKind::so3 || kind == ManifoldKind::spd) ? ambient_rows() : 1;
    }

    bool operator==(const Manifold& o) const {
        return kind == o.kind && n == o.n &&
               (kind != ManifoldKind::sphere || std::abs(radius - o.radius) <= Scalar(1e-12));
    }
    bool operator!=(const Manifold& o) const { return !(*this == o); }

    std::string describe() const {
        std::ostringstream os;
        os << to_string(kind) << "(n=" << n;
        if (kind == ManifoldKind::sphere) os << ", r=" << radius;
        os << ")";
        return os.str();
    }
};

/// Magnitude of the manifold-constraint violation of ambient coordinates.
template <typename Scalar>
Scalar point_constraint_error(const Manifold<Scalar>& m, const MatX<Scalar>& c) {
    switch (m.kind) {
        case ManifoldKind::euclidean:
            return Scalar(0);
        case ManifoldKind::sphere:
            return std::abs(c.norm() - m.radius);
        case ManifoldKind::so3: {
            const Mat3<Scalar> R = c;
            Scalar e = (R.transpose() * R - Mat3<Scalar>::Identity()).norm();
            if (R.determinant() < Scalar(0)) e += Scalar(2);
            return e;
        }
        case ManifoldKind::spd:
            // symmetry residual; positive-definiteness is checked separately
            return (c - c.transpose()).norm() / 2;
    }
    return Scalar(0);
}

/// A point on a manifold, stored as ambient coordinates.
template <typename Scalar>
struct Point {
    Manifold<Scalar> manifold;
    MatX<Scalar> coords;

    Point() = default;
    Point(const Manifold<Scalar>& m, const MatX<Scalar>& c, Scalar tol = Scalar(-1)) : manifold(m), coords(c) {
        if (c.rows() != m.ambient_rows() || c.cols() != m.ambient_cols())
            throw ConstraintViolation("point: wrong ambient shape for " + m.describe());
        if (tol < Scalar(0))
            tol = (m.kind == ManifoldKind::spd) ? Scalar(1e-12) : Scalar(1e-9);
        if (point_constraint_error(m, c) > tol * std::max(Scalar(1), c.norm()))
            throw ConstraintViolation("point: constraint violated on " + m.describe());
        if (m.kind == ManifoldKind::spd && min_eigenvalue<Scalar>(c) <= Scalar(0))
            throw ConstraintViolation("point: spd matrix not positive definite");
    }

    /// Project arbitrary ambient coordinates to the manifold, then construct.
    static Point project(const Manifold<Scalar>& m, const MatX<Scalar>& c, Scalar spd_floor = Scalar(1e-12)) {
        switch (m.kind) {
            case ManifoldKind::euclidean:
                return Point(m, c);
            case ManifoldKind::sphere: {
                const Scalar norm = c.norm();
                if (norm < Scalar(1e-14))
                    throw ConstraintViolation("sphere projection of (near-)zero coordinates");
                return Point(m, (c * (m.radius / norm)).eval());
            }
            case ManifoldKind::so3:
                return Point(m, MatX<Scalar>(project_rotation<Scalar>(c)));
            case ManifoldKind::spd:
                return Point(m, spd_project<Scalar>(c, spd_floor));
        }
        throw ConstraintViolation("unknown manifold kind");
    }
};

/// Residual of the tangency constraint of ambient coordinates v at point p.
template <typename Scalar>
Scalar tangent_constraint_error(const Point<Scalar>& p, const MatX<Scalar>& v) {
    switch (p.manifold.kind) {
        case ManifoldKind::euclidean:
            return Scalar(0);
        case ManifoldKind::sphere:
            return std::abs((p.coords.transpose() * v).value()) / p.manifold.radius;
        case ManifoldKind::so3:
            return sym<Scalar>((p.coords.transpose() * v).eval()).norm();
        case ManifoldKind::spd:
            return (v - v.transpose()).norm() / 2;
    }
    return Scalar(0);
}

/// Orthogonal projection of ambient coordinates onto the tangent space at p.
template <typename Scalar>
MatX<Scalar> project_to_tangent(const Point<Scalar>& p, const MatX<Scalar>& v) {
    switch (p.manifold.kind) {
        case ManifoldKind::euclidean:
            return v;
        case ManifoldKind::sphere: {
            const Scalar r2 = p.manifold.radius * p.manifold.radius;
            return (v - p.coords * ((p.coords.transpose() * v).value() / r2)).eval();
        }
        case ManifoldKind::so3:
            return (p.coords * skew_part<Scalar>((p.coords.transpose() * v).eval())).eval();
        case ManifoldKind::spd:
            return sym(v);
    }
    return v;
}

/// A tangent vector: basepoint plus ambient coordinates satisfying the
/// tangency constraint of the base manifold.
template <typename Scalar>
struct Tangent {
    Point<Scalar> base;
    MatX<Scalar> coords;

    Tangent() = default;
    Tangent(const Point<Scalar>& p, const MatX<Scalar>& v, Scalar tol = Scalar(-1)) : base(p), coords(v) {
        if (v.rows() != p.coords.rows() || v.cols() != p.coords.cols())
            throw ConstraintViolation("tangent: shape mismatch with basepoint");
        if (tol < Scalar(0))
            tol = (p.manifold.kind == ManifoldKind::spd) ? Scalar(1e-12) : Scalar(1e-9);
        if (tangent_constraint_error(p, v) > tol * std::max(Scalar(1), v.norm()))
            throw ConstraintViolation("tangent: tangency constraint violated on " + p.manifold.describe());
    }

    static Tangent zero(const Point<Scalar>& p) {
        return Tangent(p, MatX<Scalar>::Zero(p.coords.rows(), p.coords.cols()));
    }
    static Tangent project(const Point<Scalar>& p, const MatX<Scalar>& v) {
        return Tangent(p, project_to_tangent(p, v));
    }
};

template <typename Scalar>
bool same_point(const Point<Scalar>& a, const Point<Scalar>& b, Scalar tol = Scalar(1e-9)) {
    return a.manifold == b.manifold && (a.coords - b.coords).norm() <= tol * std::max(Scalar(1), a.coords.norm());
}

template <typename Scalar>
void require_same_base(const Tangent<Scalar>& v, const Tangent<Scalar>& w, Scalar tol = Scalar(1e-9)) {
    if (!same_point(v.base, w.base, tol))
        throw BasepointMismatch("tangent vectors based at different points");
}

// ---------------------------------------------------------------------------
// Orthonormal bases (with respect to the Riemannian metric)
// ---------------------------------------------------------------------------

/// Orthonormal basis of the tangent space at p.
template <typename Scalar>
std::vector<Tangent<Scalar>> orthonormal_basis(const Point<Scalar>& p) {
    std::vector<Tangent<Scalar>> out;
    const Manifold<Scalar>& m = p.manifold;
    switch (m.kind) {
        case ManifoldKind::euclidean: {
            for (int i = 0; i < m.n; ++i) {
                MatX<Scalar> e = MatX<Scalar>::Zero(m.n, 1);
                e(i, 0) = Scalar(1);
                out.emplace_back(p, e);
            }
            break;
        }
        case ManifoldKind::sphere: {
            // Householder frame: columns of Q after the first span the complement of p.
            VecX<Scalar> v = p.coords.col(0);
            Eigen::HouseholderQR<MatX<Scalar>> qr(v);
            MatX<Scalar> Q = qr.householderQ();
            for (int i = 1; i < m.n + 1; ++i)
                out.emplace_back(p, MatX<Scalar>(Q.col(i)));
            break;
        }
        case ManifoldKind::so3: {
            const Scalar s = Scalar(1) / std::sqrt(Scalar(2));
            for (int i = 0; i < 3; ++i) {
                Vec3<Scalar> e = Vec3<Scalar>::Zero();
                e(i) = Scalar(1);
                out.emplace_back(p, MatX<Scalar>(p.coords * hat(e) * s));
            }
            break;
        }
        case ManifoldKind::spd: {
            const MatX<Scalar> h = spd_sqrt<Scalar>(p.coords);  // pushforward of the isometry X -> h X h
            const Scalar s = Scalar(1) / std::sqrt(Scalar(2));
            for (int i = 0; i < m.n; ++i)
                for (int j = i; j < m.n; ++j) {
                    MatX<Scalar> e = MatX<Scalar>::Zero(m.n, m.n);
                    if (i == j) {
                        e(i, i) = Scalar(1);
                    } else {
                        e(i, j) = s;
                        e(j, i) = s;
                    }
                    out.emplace_back(p, (h * e * h).eval());
                }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random sampling (seeded; used by tests and scenarios)
// ---------------------------------------------------------------------------

template <typename Scalar>
MatX<Scalar> gaussian_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<Scalar> dist(Scalar(0), Scalar(1));
    MatX<Scalar> g(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) g(i, j) = dist(rng);
    return g;
}

template <typename Scalar>
Point<Scalar> random_point(const Manifold<Scalar>& m, std::mt19937_64& rng) {
    switch (m.kind) {
        case ManifoldKind::euclidean:
            return Point<Scalar>(m, gaussian_matrix<Scalar>(m.n, 1, rng));
        case ManifoldKind::sphere:
            return Point<Scalar>::project(m, gaussian_matrix<Scalar>(m.n + 1, 1, rng));
        case ManifoldKind::so3: {
            // uniform via normalized quaternion
            std::normal_distribution<Scalar> dist(Scalar(0), Scalar(1));
            Eigen::Quaternion<Scalar> q(dist(rng), dist(rng), dist(rng), dist(rng));
            q.normalize();
            return Point<Scalar>(m, MatX<Scalar>(q.toRotationMatrix()));
        }
        case ManifoldKind::spd: {
            MatX<Scalar> s = sym(gaussian_matrix<Scalar>(m.n, m.n, rng)) * Scalar(0.5);
            return Point<Scalar>(m, sym_exp<Scalar>(s));
        }
    }
    throw ConstraintViolation("unknown manifold kind");
}

/// Random tangent vector at p; if unit, normalized to metric norm 1.
template <typename Scalar>
Tangent<Scalar> random_tangent(const Point<Scalar>& p, std::mt19937_64& rng, bool unit = false);

}  // namespace geoflow
