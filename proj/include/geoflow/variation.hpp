#pragma once

#include "geoflow/decay.hpp"
#include "geoflow/trajectory.hpp"

namespace geoflow {

/// Tangent vectors q'(t) along a base trajectory (and, for second-order
/// systems, the covariant rates Dq'/dt).
template <typename Scalar>
struct VariationTrack {
    std::vector<Scalar> times;
    std::vector<Tangent<Scalar>> qprime;
    std::vector<Tangent<Scalar>> dqprime;  // empty for first-order propagation

    std::size_t size() const { return times.size(); }
};

namespace detail {

template <typename Scalar>
void require_eps(Scalar eps) {
    if (!(eps >= Scalar(1e-6) && eps <= Scalar(1e-3)))
        throw DegenerateInput("variation step eps must lie in [1e-6, 1e-3]");
}

template <typename Scalar>
Tangent<Scalar> scaled(const Tangent<Scalar>& v, Scalar a) {
    return Tangent<Scalar>(v.base, (a * v.coords).eval());
}

}  // namespace detail

/// Variation of a first-order flow by finite differences of flows: integrate
/// a neighbor started at exp(q0, eps v0) and return log(q(t), q_eps(t))/eps.
template <typename Scalar>
VariationTrack<Scalar> propagate_variation_fd(const FirstOrderField<Scalar>& f, const Trajectory<Scalar>& base,
                                              const Tangent<Scalar>& v0, Scalar eps = Scalar(1e-5),
                                              Scheme scheme = Scheme::projected_rk4) {
    detail::require_eps(eps);
    if (!same_point(v0.base, base.points.front())) throw BasepointMismatch("v0 not based at the trajectory start");
    const Point<Scalar> start = exp_map(base.points.front(), detail::scaled(v0, eps));
    const Trajectory<Scalar> nb =
        integrate_first_order(f, start, {base.times.front(), base.times.back()}, base.step(), scheme);
    VariationTrack<Scalar> track;
    track.times = base.times;
    track.qprime.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        try {
            const Tangent<Scalar> l = log_map(base.points[i], nb.points[i]);
            track.qprime.emplace_back(base.points[i], (l.coords / eps).eval());
        } catch (const InjectivityRadiusExceeded&) {
            throw NeighborLeftInjectivityGuard("neighbor trajectory left the injectivity guard of the base");
        }
    }
    return track;
}

/// Second-order version: the neighbor starts at exp(q0, eps v0) with velocity
/// P(v(0) + eps w0); Dq'/dt is recovered from the velocity difference.
template <typename Scalar>
VariationTrack<Scalar> propagate_variation_fd(const SecondOrderField<Scalar>& F, const Trajectory<Scalar>& base,
                                              const Tangent<Scalar>& v0, const Tangent<Scalar>& w0,
                                              Scalar eps = Scalar(1e-5), Scheme scheme = Scheme::projected_rk4) {
    detail::require_eps(eps);
    if (!base.has_velocities()) throw NotOnTrajectory("second-order variation needs a trajectory with velocities");
    if (!same_point(v0.base, base.points.front())) throw BasepointMismatch("v0 not based at the trajectory start");
    const Point<Scalar> q0 = base.points.front();
    const Point<Scalar> start = exp_map(q0, detail::scaled(v0, eps));
    const Tangent<Scalar> vstart = parallel_transport(
        Tangent<Scalar>(q0, (base.velocities.front().coords + eps * w0.coords).eval()), start);
    const Trajectory<Scalar> nb =
        integrate_second_order(F, start, vstart, {base.times.front(), base.times.back()}, base.step(), scheme);
    VariationTrack<Scalar> track;
    track.times = base.times;
    track.qprime.reserve(base.size());
    track.dqprime.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        try {
            const Tangent<Scalar> l = log_map(base.points[i], nb.points[i]);
            track.qprime.emplace_back(base.points[i], (l.coords / eps).eval());
            const Tangent<Scalar> vb = parallel_transport(nb.velocities[i], base.points[i]);
            track.dqprime.emplace_back(base.points[i], ((vb.coords - base.velocities[i].coords) / eps).eval());
        } catch (const InjectivityRadiusExceeded&) {
            throw NeighborLeftInjectivityGuard("neighbor trajectory left the injectivity guard of the base");
        }
    }
    return track;
}

namespace detail {

template <typename Scalar>
void require_geodesic(const Trajectory<Scalar>& base) {
    if (!base.has_velocities() || base.size() < 3) throw NotAGeodesic("base must be a sampled geodesic");
    const auto rate = transport_covariant_rate(base, base.velocities);
    const Scalar speed2 = std::max(Scalar(1), inner(base.velocities.front(), base.velocities.front()));
    for (std::size_t i = 1; i + 1 < rate.size(); i += std::max<std::size_t>(1, rate.size() / 16))
        if (norm(rate[i]) > Scalar(1e-6) * speed2)
            throw NotAGeodesic("covariant acceleration residual exceeds 1e-6");
}

// Frame-coordinate second-order linear propagation:
//   udotdot = A(t) u + B(t) udot
// with A, B sampled at trajectory nodes (midpoint values averaged).
template <typename Scalar, typename FnA, typename FnB>
VariationTrack<Scalar> propagate_in_frame(const Trajectory<Scalar>& base, const Tangent<Scalar>& v0,
                                          const Tangent<Scalar>& w0, const FnA& A_at, const FnB& B_at) {
    const auto frame0 = orthonormal_basis(base.points.front());
    const int n = static_cast<int>(frame0.size());
    const auto frames = transport_frame(base, frame0);
    const Scalar h = base.step();

    VecX<Scalar> u(n), du(n);
    for (int k = 0; k < n; ++k) {
        u(k) = inner(v0, frame0[k]);
        du(k) = inner(w0, frame0[k]);
    }

    VariationTrack<Scalar> track;
    track.times = base.times;
    track.qprime.reserve(base.size());
    track.dqprime.reserve(base.size());
    auto emit = [&](std::size_t i, const VecX<Scalar>& uu, const VecX<Scalar>& dd) {
        MatX<Scalar> qc = MatX<Scalar>::Zero(base.points[i].coords.rows(), base.points[i].coords.cols());
        MatX<Scalar> dc = qc;
        for (int k = 0; k < n; ++k) {
            qc += uu(k) * frames[i][k].coords;
            dc += dd(k) * frames[i][k].coords;
        }
        track.qprime.emplace_back(base.points[i], qc);
        track.dqprime.emplace_back(base.points[i], dc);
    };
    emit(0, u, du);
    for (std::size_t i = 0; i + 1 < base.size(); ++i) {
        const MatX<Scalar> A0 = A_at(i), A1 = A_at(i + 1);
        const MatX<Scalar> B0 = B_at(i), B1 = B_at(i + 1);
        const MatX<Scalar> Am = (A0 + A1) / 2, Bm = (B0 + B1) / 2;
        auto rhs = [n](const MatX<Scalar>& A, const MatX<Scalar>& B, const VecX<Scalar>& uu, const VecX<Scalar>& dd) {
            return std::make_pair(dd, VecX<Scalar>(A * uu + B * dd));
        };
        const auto [k1u, k1d] = rhs(A0, B0, u, du);
        const auto [k2u, k2d] = rhs(Am, Bm, (u + (h / 2) * k1u).eval(), (du + (h / 2) * k1d).eval());
        const auto [k3u, k3d] = rhs(Am, Bm, (u + (h / 2) * k2u).eval(), (du + (h / 2) * k2d).eval());
        const auto [k4u, k4d] = rhs(A1, B1, (u + h * k3u).eval(), (du + h * k3d).eval());
        u = u + (h / 6) * (k1u + 2 * k2u + 2 * k3u + k4u);
        du = du + (h / 6) * (k1d + 2 * k2d + 2 * k3d + k4d);
        emit(i + 1, u, du);
    }
    return track;
}

// matrix of v -> R(v, qdot) qdot in the given frame at node i
template <typename Scalar>
MatX<Scalar> jacobi_operator_matrix(const Trajectory<Scalar>& base,
                                    const std::vector<std::vector<Tangent<Scalar>>>& frames, std::size_t i) {
    const int n = static_cast<int>(frames[i].size());
    MatX<Scalar> M(n, n);
    for (int k = 0; k < n; ++k) {
        const Tangent<Scalar> r = curvature(base.points[i], frames[i][k], base.velocities[i], base.velocities[i]);
        for (int j = 0; j < n; ++j) M(j, k) = inner(r, frames[i][j]);
    }
    return ((M + M.transpose()) / 2).eval();
}

}  // namespace detail

/// Jacobi-field propagation along a geodesic: D^2 q'/dt^2 + R(q', qdot) qdot = 0
/// with q'(0) = v0, Dq'/dt(0) = w0, solved in a parallel orthonormal frame.
template <typename Scalar>
VariationTrack<Scalar> propagate_jacobi(const Trajectory<Scalar>& base, const Tangent<Scalar>& v0,
                                        const Tangent<Scalar>& w0) {
    detail::require_geodesic(base);
    const auto frame0 = orthonormal_basis(base.points.front());
    const auto frames = transport_frame(base, frame0);
    const int n = static_cast<int>(frame0.size());
    std::vector<MatX<Scalar>> cache(base.size());
    auto A_at = [&](std::size_t i) {
        if (cache[i].size() == 0) cache[i] = (-detail::jacobi_operator_matrix(base, frames, i)).eval();
        return cache[i];
    };
    auto B_at = [n](std::size_t) { return MatX<Scalar>(MatX<Scalar>::Zero(n, n)); };
    return detail::propagate_in_frame(base, v0, w0, A_at, B_at);
}

/// Operator form of the Hessian of a potential: (q, v) -> nabla_v grad V.
template <typename Scalar>
using HessianOp = std::function<Tangent<Scalar>(const Point<Scalar>&, const Tangent<Scalar>&)>;

/// Linearized closed-loop tracking dynamics along a feasible base trajectory:
/// D^2 q'/dt^2 = -k1 Dq'/dt - k2 q' - nabla_{q'} grad V, in a parallel frame.
template <typename Scalar>
VariationTrack<Scalar> propagate_linearized_el(const Trajectory<Scalar>& base, Scalar k1, Scalar k2,
                                               const HessianOp<Scalar>& hess_v, const Tangent<Scalar>& v0,
                                               const Tangent<Scalar>& w0) {
    if (!base.has_velocities() || base.size() < 3)
        throw NotOnTrajectory("linearized propagation needs a second-order base trajectory");
    const auto frame0 = orthonormal_basis(base.points.front());
    const auto frames = transport_frame(base, frame0);
    const int n = static_cast<int>(frame0.size());
    std::vector<MatX<Scalar>> cache(base.size());
    auto A_at = [&](std::size_t i) {
        if (cache[i].size() == 0) {
            MatX<Scalar> H(n, n);
            for (int k = 0; k < n; ++k) {
                const Tangent<Scalar> hv = hess_v(base.points[i], frames[i][k]);
                for (int j = 0; j < n; ++j) H(j, k) = inner(hv, frames[i][j]);
            }
            cache[i] = (-(k2 * MatX<Scalar>::Identity(n, n)) - ((H + H.transpose()) / 2)).eval();
        }
        return cache[i];
    };
    auto B_at = [n, k1](std::size_t) { return MatX<Scalar>((-k1 * MatX<Scalar>::Identity(n, n)).eval()); };
    return detail::propagate_in_frame(base, v0, w0, A_at, B_at);
}

/// Conserved quantity of the Jacobi flow: |Dq'/dt|^2 + <R(q', qdot) qdot, q'>,
/// constant along geodesics on these (locally symmetric) manifolds.
template <typename Scalar>
std::vector<Scalar> jacobi_invariant(const Trajectory<Scalar>& base, const VariationTrack<Scalar>& track) {
    if (track.dqprime.empty()) throw DegenerateInput("jacobi_invariant needs covariant rates");
    std::vector<Scalar> out;
    out.reserve(track.size());
    for (std::size_t i = 0; i < track.size(); ++i) {
        const Tangent<Scalar> r =
            curvature(base.points[i], track.qprime[i], base.velocities[i], base.velocities[i]);
        out.push_back(inner(track.dqprime[i], track.dqprime[i]) + inner(r, track.qprime[i]));
    }
    return out;
}

/// Distance proxy on the tangent bundle:
/// sqrt(d(p,q)^2 + |P_p^q v - w|^2). An upper-bound surrogate for the Sasaki
/// distance, sufficient for decay-rate fitting.
template <typename Scalar>
Scalar sasaki_distance(const std::pair<Point<Scalar>, Tangent<Scalar>>& a,
                       const std::pair<Point<Scalar>, Tangent<Scalar>>& b) {
    const Scalar d = dist(a.first, b.first);
    if (d >= injectivity_guard(a.first.manifold)) throw AtCutLocus("sasaki_distance: points beyond guard");
    const Tangent<Scalar> moved = parallel_transport(a.second, b.first);
    Tangent<Scalar> diff(b.first, (moved.coords - b.second.coords).eval());
    return std::sqrt(d * d + inner(diff, diff));
}

/// Result of propagating an orthonormal frame through the variational flow.
template <typename Scalar>
struct LiftReport {
    std::vector<Scalar> times;
    std::vector<Scalar> sigma_max;      // largest singular value of the frame matrix
    std::vector<Scalar> growth_factor;  // per-interval ratios of sigma_max
    DecayFit<Scalar> fit;               // exponential fit of sigma_max
};

/// Empirical stability certificate of the linearized flow along a base
/// trajectory: propagate an orthonormal frame of variations, express it in a
/// parallel-transported reference frame, and fit the decay of the largest
/// singular value.
template <typename Scalar>
LiftReport<Scalar> lift_frame_analysis(const FirstOrderField<Scalar>& f, const Trajectory<Scalar>& base,
                                       Scalar eps = Scalar(1e-5), Scalar window_frac = Scalar(0.2)) {
    const auto frame0 = orthonormal_basis(base.points.front());
    const int n = static_cast<int>(frame0.size());
    std::vector<VariationTrack<Scalar>> tracks;
    tracks.reserve(n);
    for (const auto& e : frame0) tracks.push_back(propagate_variation_fd(f, base, e, eps));
    const auto frames = transport_frame(base, frame0);

    LiftReport<Scalar> rep;
    rep.times = base.times;
    rep.sigma_max.reserve(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        MatX<Scalar> G(n, n);
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) G(j, k) = inner(tracks[k].qprime[i], frames[i][j]);
        Eigen::JacobiSVD<MatX<Scalar>> svd(G);
        rep.sigma_max.push_back(svd.singularValues()(0));
    }
    rep.growth_factor.reserve(base.size() - 1);
    for (std::size_t i = 0; i + 1 < base.size(); ++i)
        rep.growth_factor.push_back(rep.sigma_max[i + 1] / std::max(rep.sigma_max[i], Scalar(1e-300)));
    rep.fit = fit_decay(rep.times, rep.sigma_max, window_frac);
    return rep;
}

}  // namespace geoflow
