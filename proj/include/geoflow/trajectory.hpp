#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "geoflow/oracles.hpp"

namespace geoflow {

template <typename Scalar>
using FirstOrderField = std::function<Tangent<Scalar>(Scalar, const Point<Scalar>&)>;

/// Force field of a second-order system: Dq'/dt = f(t, q, qdot).
template <typename Scalar>
using SecondOrderField = std::function<Tangent<Scalar>(Scalar, const Point<Scalar>&, const Tangent<Scalar>&)>;

template <typename Scalar>
struct Trajectory {
    std::vector<Scalar> times;
    std::vector<Point<Scalar>> points;
    std::vector<Tangent<Scalar>> velocities;  // empty for first-order runs

    std::size_t size() const { return times.size(); }
    bool has_velocities() const { return !velocities.empty(); }
    Scalar step() const { return times.size() > 1 ? times[1] - times[0] : Scalar(0); }

    SampledPath<Scalar> path() const { return {times, points}; }
};

enum class Scheme {
    projected_rk4,  // classical 4-stage step in ambient coordinates + projection
    geodesic,       // exp/transport stages (exact on geodesics), order 1-2
};

namespace detail {

template <typename Scalar>
int step_count(std::pair<Scalar, Scalar> t_span, Scalar h) {
    if (!(h > Scalar(0)) || !(t_span.second > t_span.first))
        throw StepTooLarge("integrator: need h > 0 and a forward time span");
    const Scalar n = (t_span.second - t_span.first) / h;
    const int N = static_cast<int>(std::llround(static_cast<double>(n)));
    if (N < 1) throw StepTooLarge("integrator: span shorter than one step");
    return N;
}

template <typename Scalar>
void check_drift(const Manifold<Scalar>& m, const MatX<Scalar>& raw) {
    if (point_constraint_error(m, raw) > Scalar(1e-3) * std::max(Scalar(1), raw.norm()))
        throw ConstraintDrift("integrator: ambient step drifted far from the manifold");
}

}  // namespace detail

/// Integrate xdot = f(t, x) on the manifold of x0.
template <typename Scalar>
Trajectory<Scalar> integrate_first_order(const FirstOrderField<Scalar>& f, const Point<Scalar>& x0,
                                         std::pair<Scalar, Scalar> t_span, Scalar h,
                                         Scheme scheme = Scheme::projected_rk4) {
    const int N = detail::step_count(t_span, h);
    const Manifold<Scalar> m = x0.manifold;
    const Scalar guard = injectivity_guard(m);
    Trajectory<Scalar> out;
    out.times.reserve(N + 1);
    out.points.reserve(N + 1);
    Point<Scalar> x = x0;
    out.times.push_back(t_span.first);
    out.points.push_back(x);
    for (int i = 0; i < N; ++i) {
        const Scalar t = t_span.first + i * h;
        if (scheme == Scheme::geodesic) {
            Tangent<Scalar> v = f(t, x);
            if (h * norm(v) >= guard) throw StepTooLarge("integrate_first_order: h |f| exceeds guard");
            x = exp_map(x, Tangent<Scalar>(x, (h * v.coords).eval()));
        } else {
            const MatX<Scalar> k1 = f(t, x).coords;
            if (h * k1.norm() >= guard) throw StepTooLarge("integrate_first_order: h |f| exceeds guard");
            auto stage = [&](const MatX<Scalar>& c) { return Point<Scalar>::project(m, c); };
            const MatX<Scalar> k2 = f(t + h / 2, stage(x.coords + (h / 2) * k1)).coords;
            const MatX<Scalar> k3 = f(t + h / 2, stage(x.coords + (h / 2) * k2)).coords;
            const MatX<Scalar> k4 = f(t + h, stage(x.coords + h * k3)).coords;
            const MatX<Scalar> raw = x.coords + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
            detail::check_drift(m, raw);
            x = Point<Scalar>::project(m, raw);
        }
        out.times.push_back(t_span.first + (i + 1) * h);
        out.points.push_back(x);
    }
    return out;
}

/// Coupled point/tangent dynamics: qdot = U(t,q,v), Dv/dt = W(t,q,v) with v
/// tangent at q. Second-order systems are the special case U = v.
template <typename Scalar>
struct CoupledField {
    std::function<Tangent<Scalar>(Scalar, const Point<Scalar>&, const Tangent<Scalar>&)> U;
    std::function<Tangent<Scalar>(Scalar, const Point<Scalar>&, const Tangent<Scalar>&)> W;
};

template <typename Scalar>
Trajectory<Scalar> integrate_coupled(const CoupledField<Scalar>& field, const Point<Scalar>& q0,
                                     const Tangent<Scalar>& v0, std::pair<Scalar, Scalar> t_span, Scalar h,
                                     Scheme scheme = Scheme::projected_rk4) {
    if (!same_point(v0.base, q0)) throw BasepointMismatch("integrate_coupled: v0 not based at q0");
    const int N = detail::step_count(t_span, h);
    const Manifold<Scalar> m = q0.manifold;
    const Scalar guard = injectivity_guard(m);
    Trajectory<Scalar> out;
    out.times.reserve(N + 1);
    out.points.reserve(N + 1);
    out.velocities.reserve(N + 1);
    Point<Scalar> q = q0;
    Tangent<Scalar> v = Tangent<Scalar>(q0, v0.coords);
    out.times.push_back(t_span.first);
    out.points.push_back(q);
    out.velocities.push_back(v);
    for (int i = 0; i < N; ++i) {
        const Scalar t = t_span.first + i * h;
        if (scheme == Scheme::geodesic) {
            const Tangent<Scalar> u1 = field.U(t, q, v);
            const Tangent<Scalar> w1 = field.W(t, q, v);
            if (h * norm(u1) >= guard) throw StepTooLarge("integrate_coupled: h |U| exceeds guard");
            const Point<Scalar> qm = exp_map(q, Tangent<Scalar>(q, (h * u1.coords).eval()));
            const Tangent<Scalar> vm = parallel_transport(Tangent<Scalar>(q, (v.coords + h * w1.coords).eval()), qm);
            const Tangent<Scalar> u2 = parallel_transport(field.U(t + h, qm, vm), q);
            const Tangent<Scalar> w2 = parallel_transport(field.W(t + h, qm, vm), q);
            const Point<Scalar> qn =
                exp_map(q, Tangent<Scalar>(q, ((h / 2) * (u1.coords + u2.coords)).eval()));
            const Tangent<Scalar> vn = parallel_transport(
                Tangent<Scalar>(q, (v.coords + (h / 2) * (w1.coords + w2.coords)).eval()), qn);
            q = qn;
            v = vn;
        } else {
            auto rhs = [&](Scalar tt, const MatX<Scalar>& qa, const MatX<Scalar>& va) {
                const Point<Scalar> qp = Point<Scalar>::project(m, qa);
                const Tangent<Scalar> vp = Tangent<Scalar>::project(qp, va);
                const Tangent<Scalar> u = field.U(tt, qp, vp);
                const Tangent<Scalar> w = field.W(tt, qp, vp);
                MatX<Scalar> vdot = w.coords + ambient_velocity_correction(qp, u.coords, vp.coords);
                return std::make_pair(u.coords, std::move(vdot));
            };
            const auto [kq1, kv1] = rhs(t, q.coords, v.coords);
            if (h * kq1.norm() >= guard) throw StepTooLarge("integrate_coupled: h |U| exceeds guard");
            const auto [kq2, kv2] = rhs(t + h / 2, q.coords + (h / 2) * kq1, v.coords + (h / 2) * kv1);
            const auto [kq3, kv3] = rhs(t + h / 2, q.coords + (h / 2) * kq2, v.coords + (h / 2) * kv2);
            const auto [kq4, kv4] = rhs(t + h, q.coords + h * kq3, v.coords + h * kv3);
            const MatX<Scalar> qraw = q.coords + (h / 6) * (kq1 + 2 * kq2 + 2 * kq3 + kq4);
            const MatX<Scalar> vraw = v.coords + (h / 6) * (kv1 + 2 * kv2 + 2 * kv3 + kv4);
            detail::check_drift(m, qraw);
            q = Point<Scalar>::project(m, qraw);
            v = Tangent<Scalar>::project(q, vraw);
        }
        out.times.push_back(t_span.first + (i + 1) * h);
        out.points.push_back(q);
        out.velocities.push_back(v);
    }
    return out;
}

/// Integrate the second-order system Dqdot/dt = F(t, q, qdot).
template <typename Scalar>
Trajectory<Scalar> integrate_second_order(const SecondOrderField<Scalar>& F, const Point<Scalar>& q0,
                                          const Tangent<Scalar>& v0, std::pair<Scalar, Scalar> t_span, Scalar h,
                                          Scheme scheme = Scheme::projected_rk4) {
    CoupledField<Scalar> field;
    field.U = [](Scalar, const Point<Scalar>&, const Tangent<Scalar>& v) { return v; };
    field.W = F;
    return integrate_coupled(field, q0, v0, t_span, h, scheme);
}

/// Covariant rate of a tangent field sampled along a trajectory, by central
/// parallel-transport differences (exact on covariantly constant fields).
template <typename Scalar>
std::vector<Tangent<Scalar>> transport_covariant_rate(const Trajectory<Scalar>& base,
                                                      const std::vector<Tangent<Scalar>>& field) {
    const std::size_t n = base.size();
    if (field.size() != n || n < 3) throw GridTooCoarse("transport_covariant_rate: bad sample counts");
    const Scalar h = base.step();
    std::vector<Tangent<Scalar>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        // project on construction: dividing by 2h amplifies tangency roundoff
        if (i == 0) {
            const Tangent<Scalar> a = parallel_transport(field[1], base.points[0]);
            const Tangent<Scalar> b = parallel_transport(field[2], base.points[0]);
            out.push_back(Tangent<Scalar>::project(
                base.points[0], ((-Scalar(3) * field[0].coords + Scalar(4) * a.coords - b.coords) / (2 * h)).eval()));
        } else if (i + 1 == n) {
            const Tangent<Scalar> a = parallel_transport(field[n - 2], base.points[n - 1]);
            const Tangent<Scalar> b = parallel_transport(field[n - 3], base.points[n - 1]);
            out.push_back(Tangent<Scalar>::project(
                base.points[n - 1],
                ((Scalar(3) * field[n - 1].coords - Scalar(4) * a.coords + b.coords) / (2 * h)).eval()));
        } else {
            const Tangent<Scalar> a = parallel_transport(field[i + 1], base.points[i]);
            const Tangent<Scalar> b = parallel_transport(field[i - 1], base.points[i]);
            out.push_back(Tangent<Scalar>::project(base.points[i], ((a.coords - b.coords) / (2 * h)).eval()));
        }
    }
    return out;
}

/// Parallel-transport an orthonormal frame from the start along the whole
/// trajectory (consecutive-step transports; frames stay orthonormal).
template <typename Scalar>
std::vector<std::vector<Tangent<Scalar>>> transport_frame(const Trajectory<Scalar>& base,
                                                          const std::vector<Tangent<Scalar>>& frame0) {
    std::vector<std::vector<Tangent<Scalar>>> frames(base.size());
    frames[0] = frame0;
    for (std::size_t i = 1; i < base.size(); ++i) {
        frames[i].reserve(frame0.size());
        for (const auto& e : frames[i - 1]) frames[i].push_back(parallel_transport(e, base.points[i]));
    }
    return frames;
}

}  // namespace geoflow
