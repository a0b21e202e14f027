#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "geoflow/geometry.hpp"

namespace geoflow {

// Finite-difference ground truth for the closed-form geometry. These
// routines never call exp/log/transport/curvature of the kernel; they use
// only ambient differencing, tangent projection and, on SPD, the Christoffel
// term of the affine-invariant metric (the SPD cone embedding is not
// metrically flat, so projection alone does not produce the Levi-Civita
// derivative there).

template <typename Scalar>
struct OracleConfig {
    Scalar fd_step = Scalar(1e-5);
    bool richardson = true;
    Scalar tol = Scalar(1e-5);
};

/// Ambient correction: for a curve with velocity u and tangent field v along
/// it, dv/dt(ambient) = Dv/dt + lambda(u, v). On Sphere/SO(3) the term is
/// normal to the tangent space; on SPD it is tangential (Christoffel term).
template <typename Scalar>
MatX<Scalar> ambient_velocity_correction(const Point<Scalar>& q, const MatX<Scalar>& u, const MatX<Scalar>& v) {
    switch (q.manifold.kind) {
        case ManifoldKind::euclidean:
            return MatX<Scalar>::Zero(u.rows(), u.cols());
        case ManifoldKind::sphere: {
            const Scalar r2 = q.manifold.radius * q.manifold.radius;
            return (-(u.transpose() * v).value() / r2 * q.coords).eval();
        }
        case ManifoldKind::so3: {
            const Mat3<Scalar> R = q.coords;
            const Mat3<Scalar> a = (R.transpose() * u).eval();
            const Mat3<Scalar> b = (R.transpose() * v).eval();
            return (R * ((a * b + b * a) / 2)).eval();
        }
        case ManifoldKind::spd: {
            const MatX<Scalar> qi = q.coords.inverse();
            return ((u * qi * v + v * qi * u) / 2).eval();
        }
    }
    return MatX<Scalar>::Zero(u.rows(), u.cols());
}

namespace detail {

// Levi-Civita derivative from an ambient derivative estimate vdot of a field
// with value v at q, along a curve with velocity u at q.
template <typename Scalar>
Tangent<Scalar> covariant_from_ambient(const Point<Scalar>& q, const MatX<Scalar>& vdot, const MatX<Scalar>& u,
                                       const MatX<Scalar>& v) {
    MatX<Scalar> w = vdot;
    if (q.manifold.kind == ManifoldKind::spd) w -= ambient_velocity_correction(q, u, v);
    return Tangent<Scalar>::project(q, w);
}

// second-order accurate derivative of a sampled array of ambient coordinates
template <typename Scalar>
MatX<Scalar> array_derivative(const std::vector<MatX<Scalar>>& ys, std::size_t i, Scalar h) {
    const std::size_t n = ys.size();
    if (i == 0) return ((-Scalar(3) * ys[0] + Scalar(4) * ys[1] - ys[2]) / (2 * h)).eval();
    if (i + 1 == n) return ((Scalar(3) * ys[n - 1] - Scalar(4) * ys[n - 2] + ys[n - 3]) / (2 * h)).eval();
    return ((ys[i + 1] - ys[i - 1]) / (2 * h)).eval();
}

}  // namespace detail

template <typename Scalar>
struct SampledPath {
    std::vector<Scalar> times;
    std::vector<Point<Scalar>> points;
};

template <typename Scalar>
void require_uniform_fine_grid(const SampledPath<Scalar>& path) {
    if (path.times.size() < 3 || path.times.size() != path.points.size())
        throw GridTooCoarse("sampled path needs at least three uniform samples");
    const Scalar h = path.times[1] - path.times[0];
    for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        if (std::abs(path.times[i + 1] - path.times[i] - h) > Scalar(1e-9) * std::max(Scalar(1), std::abs(h)))
            throw GridTooCoarse("sampled path grid not uniform");
        if (dist(path.points[i], path.points[i + 1]) >= injectivity_guard(path.points[i].manifold))
            throw GridTooCoarse("consecutive samples exceed the injectivity guard");
    }
}

/// Covariant derivative of a sampled tangent field along a sampled curve,
/// by central differences in ambient coordinates plus projection (plus the
/// SPD Christoffel term). Second-order accurate, one-sided at the ends.
template <typename Scalar>
std::vector<Tangent<Scalar>> fd_covariant_derivative(const SampledPath<Scalar>& path,
                                                     const std::vector<Tangent<Scalar>>& field,
                                                     const OracleConfig<Scalar>& cfg = {}) {
    (void)cfg;
    require_uniform_fine_grid(path);
    if (field.size() != path.points.size())
        throw GridTooCoarse("field and path sample counts differ");
    const Scalar h = path.times[1] - path.times[0];
    const std::size_t n = path.points.size();
    std::vector<MatX<Scalar>> qs(n), vs(n);
    for (std::size_t i = 0; i < n; ++i) {
        qs[i] = path.points[i].coords;
        vs[i] = field[i].coords;
    }
    std::vector<Tangent<Scalar>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const MatX<Scalar> qdot = detail::array_derivative(qs, i, h);
        const MatX<Scalar> vdot = detail::array_derivative(vs, i, h);
        out.push_back(detail::covariant_from_ambient(path.points[i], vdot, qdot, vs[i]));
    }
    return out;
}

/// Max residual of d/dt<V,W> = <DV/dt, W> + <V, DW/dt> over the grid.
template <typename Scalar>
Scalar check_metric_compatibility(const SampledPath<Scalar>& path, const std::vector<Tangent<Scalar>>& fieldV,
                                  const std::vector<Tangent<Scalar>>& fieldW,
                                  const OracleConfig<Scalar>& cfg = {}) {
    const auto dV = fd_covariant_derivative(path, fieldV, cfg);
    const auto dW = fd_covariant_derivative(path, fieldW, cfg);
    const Scalar h = path.times[1] - path.times[0];
    const std::size_t n = path.points.size();
    std::vector<MatX<Scalar>> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = MatX<Scalar>::Zero(1, 1);
        s[i](0, 0) = inner(fieldV[i], fieldW[i]);
    }
    Scalar worst = Scalar(0);
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar ds = detail::array_derivative(s, i, h)(0, 0);
        const Scalar res = std::abs(ds - inner(dV[i], fieldW[i]) - inner(fieldV[i], dW[i]));
        worst = std::max(worst, res);
    }
    return worst;
}

/// Tangent field given as a callable on manifold points.
template <typename Scalar>
using PointField = std::function<Tangent<Scalar>(const Point<Scalar>&)>;

/// Directional covariant derivative of a field callable at p along v, by
/// sampling the field on a short geodesic probe curve through p.
template <typename Scalar>
Tangent<Scalar> fd_directional_covariant(const PointField<Scalar>& field, const Point<Scalar>& p,
                                         const Tangent<Scalar>& v, const OracleConfig<Scalar>& cfg = {}) {
    const MatX<Scalar> v0 = field(p).coords;
    auto estimate = [&](Scalar eps) {
        Tangent<Scalar> step(p, (eps * v.coords).eval());
        Tangent<Scalar> back(p, (-eps * v.coords).eval());
        const MatX<Scalar> yp = field(exp_map(p, step)).coords;
        const MatX<Scalar> ym = field(exp_map(p, back)).coords;
        return ((yp - ym) / (2 * eps)).eval();
    };
    MatX<Scalar> vdot = estimate(cfg.fd_step);
    if (cfg.richardson)
        vdot = ((Scalar(4) * estimate(cfg.fd_step / 2) - vdot) / 3).eval();
    return detail::covariant_from_ambient(p, vdot, v.coords, v0);
}

/// Residual |nabla_X Y - nabla_Y X - [X,Y]| at p for field callables.
template <typename Scalar>
Scalar check_torsion_free(const Point<Scalar>& p, const PointField<Scalar>& X, const PointField<Scalar>& Y,
                          const OracleConfig<Scalar>& cfg = {}) {
    const Tangent<Scalar> xp = X(p);
    const Tangent<Scalar> yp = Y(p);
    const Tangent<Scalar> nxy = fd_directional_covariant(Y, p, xp, cfg);
    const Tangent<Scalar> nyx = fd_directional_covariant(X, p, yp, cfg);
    // ambient directional derivatives give the Lie bracket of tangent fields
    auto directional = [&](const PointField<Scalar>& F, const Tangent<Scalar>& dir) {
        auto estimate = [&](Scalar eps) {
            Tangent<Scalar> fw(p, (eps * dir.coords).eval());
            Tangent<Scalar> bw(p, (-eps * dir.coords).eval());
            return ((F(exp_map(p, fw)).coords - F(exp_map(p, bw)).coords) / (2 * eps)).eval();
        };
        MatX<Scalar> d = estimate(cfg.fd_step);
        if (cfg.richardson) d = ((Scalar(4) * estimate(cfg.fd_step / 2) - d) / 3).eval();
        return d;
    };
    const MatX<Scalar> bracket = directional(Y, xp) - directional(X, yp);
    const Tangent<Scalar> lie = Tangent<Scalar>::project(p, bracket);
    Tangent<Scalar> res(p, (nxy.coords - nyx.coords - lie.coords).eval());
    return norm(res);
}

/// A 2-parameter surface of manifold points with a uniform evaluation grid.
template <typename Scalar>
struct SurfacePatch {
    Manifold<Scalar> manifold;
    std::function<Point<Scalar>(Scalar, Scalar)> map;  // (s, t) -> point
    Scalar s0 = Scalar(0), t0 = Scalar(0);
    Scalar hs = Scalar(1e-2), ht = Scalar(1e-2);
    int ns = 3, nt = 3;
};

template <typename Scalar>
using SurfaceField = std::function<Tangent<Scalar>(Scalar, Scalar)>;

namespace detail {

// covariant s-derivative of a surface field at (s, t) with step a
template <typename Scalar>
Tangent<Scalar> surface_cov_s(const SurfacePatch<Scalar>& patch, const SurfaceField<Scalar>& X, Scalar s, Scalar t,
                              Scalar a) {
    const Point<Scalar> q = patch.map(s, t);
    const MatX<Scalar> xdot = ((X(s + a, t).coords - X(s - a, t).coords) / (2 * a)).eval();
    const MatX<Scalar> qdot = ((patch.map(s + a, t).coords - patch.map(s - a, t).coords) / (2 * a)).eval();
    return covariant_from_ambient(q, xdot, qdot, X(s, t).coords);
}

template <typename Scalar>
Tangent<Scalar> surface_cov_t(const SurfacePatch<Scalar>& patch, const SurfaceField<Scalar>& X, Scalar s, Scalar t,
                              Scalar b) {
    const Point<Scalar> q = patch.map(s, t);
    const MatX<Scalar> xdot = ((X(s, t + b).coords - X(s, t - b).coords) / (2 * b)).eval();
    const MatX<Scalar> qdot = ((patch.map(s, t + b).coords - patch.map(s, t - b).coords) / (2 * b)).eval();
    return covariant_from_ambient(q, xdot, qdot, X(s, t).coords);
}

// (D/dt D/ds - D/ds D/dt) X at one node, with steps (a, b)
template <typename Scalar>
Tangent<Scalar> curvature_stencil(const SurfacePatch<Scalar>& patch, const SurfaceField<Scalar>& X, Scalar s,
                                  Scalar t, Scalar a, Scalar b) {
    const Point<Scalar> q = patch.map(s, t);
    SurfaceField<Scalar> ds_x = [&](Scalar ss, Scalar tt) { return surface_cov_s(patch, X, ss, tt, a); };
    SurfaceField<Scalar> dt_x = [&](Scalar ss, Scalar tt) { return surface_cov_t(patch, X, ss, tt, b); };
    const Tangent<Scalar> A = surface_cov_t(patch, ds_x, s, t, b);
    const Tangent<Scalar> B = surface_cov_s(patch, dt_x, s, t, a);
    return Tangent<Scalar>(q, (A.coords - B.coords).eval());
}

template <typename Scalar>
void require_patch_fine(const SurfacePatch<Scalar>& patch) {
    const Scalar guard = injectivity_guard(patch.manifold);
    for (int i = 0; i + 1 < patch.ns; ++i)
        for (int j = 0; j < patch.nt; ++j) {
            const Scalar s = patch.s0 + i * patch.hs, t = patch.t0 + j * patch.ht;
            if (dist(patch.map(s, t), patch.map(s + patch.hs, t)) >= guard)
                throw GridTooCoarse("patch grid exceeds injectivity guard in s");
        }
    for (int i = 0; i < patch.ns; ++i)
        for (int j = 0; j + 1 < patch.nt; ++j) {
            const Scalar s = patch.s0 + i * patch.hs, t = patch.t0 + j * patch.ht;
            if (dist(patch.map(s, t), patch.map(s, t + patch.ht)) >= guard)
                throw GridTooCoarse("patch grid exceeds injectivity guard in t");
        }
}

}  // namespace detail

/// Finite-difference curvature acting on a surface field:
/// D/dt D/ds X - D/ds D/dt X = R(d_t q, d_s q) X evaluated on the patch grid.
/// This is the oracle that locks the curvature sign of the closed forms.
template <typename Scalar>
std::vector<std::vector<Tangent<Scalar>>> fd_curvature(const SurfacePatch<Scalar>& patch,
                                                       const SurfaceField<Scalar>& field,
                                                       const OracleConfig<Scalar>& cfg = {}) {
    detail::require_patch_fine(patch);
    std::vector<std::vector<Tangent<Scalar>>> out(patch.ns);
    for (int i = 0; i < patch.ns; ++i) {
        out[i].reserve(patch.nt);
        for (int j = 0; j < patch.nt; ++j) {
            const Scalar s = patch.s0 + i * patch.hs, t = patch.t0 + j * patch.ht;
            Tangent<Scalar> full = detail::curvature_stencil(patch, field, s, t, patch.hs, patch.ht);
            if (cfg.richardson) {
                Tangent<Scalar> half = detail::curvature_stencil(patch, field, s, t, patch.hs / 2, patch.ht / 2);
                full = Tangent<Scalar>(full.base, ((Scalar(4) * half.coords - full.coords) / 3).eval());
            }
            out[i].push_back(full);
        }
    }
    return out;
}

/// Max residual of the symmetry D/ds d_t q = D/dt d_s q over the patch grid.
template <typename Scalar>
Scalar check_swap_cov(const SurfacePatch<Scalar>& patch, const OracleConfig<Scalar>& cfg = {}) {
    detail::require_patch_fine(patch);
    SurfaceField<Scalar> dt_q = [&](Scalar s, Scalar t) {
        const Point<Scalar> q = patch.map(s, t);
        const Scalar b = patch.ht;
        return Tangent<Scalar>::project(q, ((patch.map(s, t + b).coords - patch.map(s, t - b).coords) / (2 * b)).eval());
    };
    SurfaceField<Scalar> ds_q = [&](Scalar s, Scalar t) {
        const Point<Scalar> q = patch.map(s, t);
        const Scalar a = patch.hs;
        return Tangent<Scalar>::project(q, ((patch.map(s + a, t).coords - patch.map(s - a, t).coords) / (2 * a)).eval());
    };
    Scalar worst = Scalar(0);
    for (int i = 0; i < patch.ns; ++i)
        for (int j = 0; j < patch.nt; ++j) {
            const Scalar s = patch.s0 + i * patch.hs, t = patch.t0 + j * patch.ht;
            const Tangent<Scalar> lhs = detail::surface_cov_s(patch, dt_q, s, t, patch.hs);
            const Tangent<Scalar> rhs = detail::surface_cov_t(patch, ds_q, s, t, patch.ht);
            Tangent<Scalar> res(lhs.base, (lhs.coords - rhs.coords).eval());
            worst = std::max(worst, norm(res));
        }
    return worst;
}

/// Fitted order of d(curve1(s), curve2(s)) ~ s^order for two curves with the
/// same initial point and velocity, over s in [1e-4, 1e-2].
template <typename Scalar>
Scalar check_separation_order(const std::function<Point<Scalar>(Scalar)>& curve1,
                              const std::function<Point<Scalar>(Scalar)>& curve2,
                              const OracleConfig<Scalar>& cfg = {}) {
    (void)cfg;
    if (dist(curve1(Scalar(0)), curve2(Scalar(0))) > Scalar(1e-9))
        throw DegenerateInput("check_separation_order: initial points differ");
    const int n = 17;
    const Scalar lo = Scalar(1e-4), hi = Scalar(1e-2);
    std::vector<Scalar> xs, ys;
    for (int i = 0; i < n; ++i) {
        const Scalar s = lo * std::pow(hi / lo, Scalar(i) / (n - 1));
        const Scalar d = dist(curve1(s), curve2(s));
        if (d > Scalar(1e-15)) {
            xs.push_back(std::log(s));
            ys.push_back(std::log(d));
        }
    }
    if (xs.size() < 4) throw DegenerateInput("check_separation_order: curves coincide on the window");
    Scalar mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    Scalar sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    return sxy / sxx;
}

/// Max over samples (p, Y) of |<nabla_Y f, Y>| with unit Y; small residual
/// certifies the Killing property of f.
template <typename Scalar>
Scalar check_killing(const PointField<Scalar>& field,
                     const std::vector<std::pair<Point<Scalar>, Tangent<Scalar>>>& samples,
                     const OracleConfig<Scalar>& cfg = {}) {
    Scalar worst = Scalar(0);
    for (const auto& [p, y] : samples) {
        Tangent<Scalar> yu = y;
        const Scalar n = norm(yu);
        if (n < Scalar(1e-12)) continue;
        yu.coords /= n;
        const Tangent<Scalar> d = fd_directional_covariant(field, p, yu, cfg);
        worst = std::max(worst, std::abs(inner(d, yu)));
    }
    return worst;
}

/// Seeded (point, direction) samples for check_killing.
template <typename Scalar>
std::vector<std::pair<Point<Scalar>, Tangent<Scalar>>> killing_samples(const Manifold<Scalar>& m, int count,
                                                                       std::mt19937_64& rng) {
    std::vector<std::pair<Point<Scalar>, Tangent<Scalar>>> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Point<Scalar> p = random_point(m, rng);
        out.emplace_back(p, random_tangent(p, rng, true));
    }
    return out;
}

}  // namespace geoflow
