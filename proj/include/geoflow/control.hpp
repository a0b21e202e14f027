#pragma once

#include <memory>

#include "geoflow/variation.hpp"

namespace geoflow {

// Controllers, observers and filters as vector-field constructors, plus
// contraction certificates and volume-contraction monitors.
//
// Curvature terms below are written with this library's sign convention
// (<R(x,y)y, x> > 0 on the sphere); the compensation terms therefore read
// R(grad F, qdot) qdot etc. Their correctness is not assumed: the
// closed-loop linearization test compares the full nonlinear variation with
// the linearized flat dynamics, which only match if the cancellation works.

template <typename Scalar>
struct Gains {
    Scalar k1 = Scalar(0);           // damping
    Scalar k2 = Scalar(0);           // stiffness
    Scalar alpha = Scalar(0);        // observer position gain
    Scalar beta = Scalar(0);         // observer velocity gain
    Scalar k = Scalar(0);            // filter gain
    Scalar lambda_flow = Scalar(1);  // gradient-flow time scale
};

namespace detail {

template <typename Scalar>
void require_positive(Scalar g, const char* name) {
    if (!(g > Scalar(0))) throw DegenerateInput(std::string("gain must be positive: ") + name);
}

}  // namespace detail

/// Scalar potential with gradient (and Hessian operator) access.
template <typename Scalar>
struct Potential {
    std::function<Scalar(const Point<Scalar>&)> value;
    PointField<Scalar> gradient;
    HessianOp<Scalar> hessian;

    static Potential zero() {
        Potential p;
        p.value = [](const Point<Scalar>&) { return Scalar(0); };
        p.gradient = [](const Point<Scalar>& q) { return Tangent<Scalar>::zero(q); };
        p.hessian = [](const Point<Scalar>& q, const Tangent<Scalar>&) { return Tangent<Scalar>::zero(q); };
        return p;
    }
};

/// V(q) = g <q, a> in ambient coordinates (gravity-style potential).
/// On the sphere the Hessian operator is -(V(q)/r^2) Id; flat elsewhere.
template <typename Scalar>
Potential<Scalar> ambient_linear_potential(Scalar g, const MatX<Scalar>& a) {
    Potential<Scalar> p;
    p.value = [g, a](const Point<Scalar>& q) { return g * (a.transpose() * q.coords).trace(); };
    p.gradient = [g, a](const Point<Scalar>& q) { return Tangent<Scalar>::project(q, (g * a).eval()); };
    p.hessian = [g, a](const Point<Scalar>& q, const Tangent<Scalar>& v) {
        if (q.manifold.kind == ManifoldKind::euclidean) return Tangent<Scalar>::zero(q);
        if (q.manifold.kind != ManifoldKind::sphere)
            throw DegenerateInput("ambient_linear_potential: Hessian implemented for Euclidean/Sphere only");
        const Scalar r2 = q.manifold.radius * q.manifold.radius;
        const Scalar val = g * (a.transpose() * q.coords).trace();
        return Tangent<Scalar>(q, (-(val / r2) * v.coords).eval());
    };
    return p;
}

/// Finite-difference Hessian operator from a gradient field, for potentials
/// without a closed form: nabla_v grad V by transport differencing.
template <typename Scalar>
HessianOp<Scalar> fd_hessian_op(const PointField<Scalar>& gradient, Scalar eps = Scalar(1e-6)) {
    return [gradient, eps](const Point<Scalar>& q, const Tangent<Scalar>& v) {
        OracleConfig<Scalar> cfg;
        cfg.fd_step = eps;
        return fd_directional_covariant(gradient, q, v, cfg);
    };
}

/// Max residual of D qdot/dt + grad V(q) along a stored trajectory: zero on
/// feasible motions of the unforced system.
template <typename Scalar>
Scalar feasibility_residual(const Trajectory<Scalar>& base, const Potential<Scalar>& V) {
    if (!base.has_velocities() || base.size() < 3)
        throw NotOnTrajectory("feasibility_residual needs a second-order trajectory");
    const auto rate = transport_covariant_rate(base, base.velocities);
    Scalar worst = Scalar(0);
    const std::size_t stride = std::max<std::size_t>(1, base.size() / 32);
    for (std::size_t i = 1; i + 1 < base.size(); i += stride) {
        Tangent<Scalar> r(base.points[i], (rate[i].coords + V.gradient(base.points[i]).coords).eval());
        worst = std::max(worst, norm(r));
    }
    return worst;
}

/// Feasibility-checked front end for the linearized closed-loop propagation:
/// the base must solve D qdot/dt = -grad V.
template <typename Scalar>
VariationTrack<Scalar> propagate_linearized_el(const Trajectory<Scalar>& base, Scalar k1, Scalar k2,
                                               const Potential<Scalar>& V, const Tangent<Scalar>& v0,
                                               const Tangent<Scalar>& w0, Scalar feas_tol = Scalar(1e-5)) {
    if (feasibility_residual(base, V) > feas_tol)
        throw NotOnTrajectory("propagate_linearized_el: base does not solve the unforced system");
    return propagate_linearized_el(base, k1, k2, V.hessian, v0, w0);
}

/// Reference state (q*(t), qdot*(t)).
template <typename Scalar>
struct ReferenceSignal {
    std::function<std::pair<Point<Scalar>, Tangent<Scalar>>(Scalar)> eval;
    bool bounded = true;
};

template <typename Scalar>
ReferenceSignal<Scalar> geodesic_reference(const Point<Scalar>& q0, const Tangent<Scalar>& v0) {
    ReferenceSignal<Scalar> ref;
    ref.eval = [q0, v0](Scalar t) {
        const Point<Scalar> q = exp_map(q0, Tangent<Scalar>(q0, (t * v0.coords).eval()));
        return std::make_pair(q, parallel_transport(v0, q));
    };
    return ref;
}

/// Reference backed by a stored trajectory; query times must land on the
/// trajectory grid (integrate the reference at half the consumer's step so
/// all Runge-Kutta stage times are available).
template <typename Scalar>
ReferenceSignal<Scalar> trajectory_reference(Trajectory<Scalar> traj) {
    if (!traj.has_velocities()) throw NotOnTrajectory("trajectory_reference needs stored velocities");
    ReferenceSignal<Scalar> ref;
    auto data = std::make_shared<Trajectory<Scalar>>(std::move(traj));
    ref.eval = [data](Scalar t) {
        const Scalar h = data->step();
        const Scalar x = (t - data->times.front()) / h;
        const auto i = static_cast<std::size_t>(std::llround(static_cast<double>(x)));
        if (i >= data->size() || std::abs(x - Scalar(i)) > Scalar(1e-6))
            throw NotOnTrajectory("reference queried off the stored grid");
        return std::make_pair(data->points[i], data->velocities[i]);
    };
    return ref;
}

/// Tracking controller for the fully actuated second-order system,
/// u = u_P + u_D + u_R:
///   u_P = -k2 grad F(q, q*)        (geodesic pull toward the reference)
///   u_D = -k1 (qdot - P qdot*)     (damping against the transported rate)
///   u_R = R(grad F, qdot) qdot     (curvature compensation)
/// Vanishes identically on the reference.
template <typename Scalar>
Tangent<Scalar> tracking_force(const Point<Scalar>& q, const Tangent<Scalar>& qdot,
                               const ReferenceSignal<Scalar>& ref, Scalar t, const Gains<Scalar>& g) {
    detail::require_positive(g.k1, "k1");
    detail::require_positive(g.k2, "k2");
    const auto [qs, vs] = ref.eval(t);
    const Tangent<Scalar> lg = log_map(q, qs);           // = -grad F(q, q*)
    const Tangent<Scalar> vref = parallel_transport(vs, q);
    Tangent<Scalar> grad_f(q, (-lg.coords).eval());
    const Tangent<Scalar> u_r = curvature(q, grad_f, qdot, qdot);
    return Tangent<Scalar>(
        q, (g.k2 * lg.coords - g.k1 * (qdot.coords - vref.coords) + u_r.coords).eval());
}

/// Intrinsic speed observer for Dqdot/dt = -grad V(q) given position
/// measurements. Returns (qhat_dot, covariant rate of vhat).
template <typename Scalar>
std::pair<Tangent<Scalar>, Tangent<Scalar>> speed_observer_field(const Point<Scalar>& qhat,
                                                                 const Tangent<Scalar>& vhat,
                                                                 const Point<Scalar>& q_meas,
                                                                 const Potential<Scalar>& V,
                                                                 const Gains<Scalar>& g) {
    detail::require_positive(g.alpha, "alpha");
    detail::require_positive(g.beta, "beta");
    const Tangent<Scalar> lg = log_map(qhat, q_meas);  // = -grad F(qhat, q)
    Tangent<Scalar> grad_f(qhat, (-lg.coords).eval());
    const Tangent<Scalar> qhat_dot(qhat, (vhat.coords + g.alpha * lg.coords).eval());
    const Tangent<Scalar> curv = curvature(qhat, grad_f, vhat, vhat);
    const Tangent<Scalar> gv = parallel_transport(V.gradient(q_meas), qhat);
    const Tangent<Scalar> vrate(qhat, (g.beta * lg.coords + curv.coords - gv.coords).eval());
    return {qhat_dot, vrate};
}

/// Attitude tracking on SO(3): Rdot = R u with
/// u = -(k/2)(R*^T R - R^T R*) + Omega(t). Returns the ambient tangent R u.
template <typename Scalar>
Tangent<Scalar> so3_tracking_field(const Point<Scalar>& R, const Point<Scalar>& Rstar, const Vec3<Scalar>& omega,
                                   Scalar k) {
    detail::require_positive(k, "k");
    const Mat3<Scalar> Rm = R.coords, Rs = Rstar.coords;
    const Mat3<Scalar> u = (-(k / 2) * (Rs.transpose() * Rm - Rm.transpose() * Rs) + hat(omega)).eval();
    return Tangent<Scalar>::project(R, MatX<Scalar>(Rm * u));
}

enum class So3FilterVariant {
    gradient,  // -(k/2) Rhat (R^T Rhat - Rhat^T R) + Rhat Omega
    log,       // Rhat Omega + k Rhat Log(Rhat^T R)
};

/// Low-pass attitude filter for Rdot = R Omega from attitude measurements.
template <typename Scalar>
Tangent<Scalar> so3_filter_field(const Point<Scalar>& Rhat, const Point<Scalar>& R_meas,
                                 const Vec3<Scalar>& omega, Scalar k,
                                 So3FilterVariant variant = So3FilterVariant::gradient) {
    detail::require_positive(k, "k");
    const Mat3<Scalar> Rh = Rhat.coords, Rm = R_meas.coords;
    const Mat3<Scalar> rel = project_rotation<Scalar>((Rh.transpose() * Rm).eval());
    if (rotation_angle(rel) >= Scalar(EIGEN_PI) - Scalar(1e-8))
        throw AtCutLocus("so3_filter_field: filter error at angle pi");
    Mat3<Scalar> u;
    if (variant == So3FilterVariant::gradient) {
        u = (-(k / 2) * (Rm.transpose() * Rh - Rh.transpose() * Rm) + hat(omega)).eval();
    } else {
        u = (k * rotation_log(rel) + hat(omega)).eval();
    }
    return Tangent<Scalar>::project(Rhat, MatX<Scalar>(Rh * u));
}

/// A flow field together with its (offline) Killing certification.
template <typename Scalar>
struct KillingField {
    FirstOrderField<Scalar> field;
    bool certified = false;
    Scalar residual = std::numeric_limits<Scalar>::infinity();
};

/// Certify the Killing property of f by sampling |<nabla_Y f, Y>| at random
/// (point, direction) pairs and at the given times.
template <typename Scalar>
KillingField<Scalar> certify_killing(const FirstOrderField<Scalar>& f, const Manifold<Scalar>& m, int n_samples,
                                     std::mt19937_64& rng, const std::vector<Scalar>& times = {Scalar(0)},
                                     const OracleConfig<Scalar>& cfg = {}) {
    KillingField<Scalar> kf;
    kf.field = f;
    const auto samples = killing_samples(m, n_samples, rng);
    Scalar worst = Scalar(0);
    for (Scalar t : times) {
        PointField<Scalar> frozen = [&f, t](const Point<Scalar>& q) { return f(t, q); };
        worst = std::max(worst, check_killing(frozen, samples, cfg));
    }
    kf.residual = worst;
    kf.certified = worst <= Scalar(1e-6);
    return kf;
}

/// Low-pass filter for a Killing system: qhat_dot = f(t, qhat) + k log_qhat(q).
template <typename Scalar>
Tangent<Scalar> killing_filter_field(Scalar t, const Point<Scalar>& qhat, const Point<Scalar>& q_meas,
                                     const KillingField<Scalar>& kf, Scalar k) {
    detail::require_positive(k, "k");
    if (!kf.certified) throw NotKilling("killing_filter_field: field failed Killing certification");
    const Tangent<Scalar> drift = kf.field(t, qhat);
    const Tangent<Scalar> lg = log_map(qhat, q_meas);
    return Tangent<Scalar>(qhat, (drift.coords + k * lg.coords).eval());
}

/// An isometry given by its action on points and its differential.
template <typename Scalar>
struct Isometry {
    std::function<Point<Scalar>(const Point<Scalar>&)> act;
    std::function<Tangent<Scalar>(const Tangent<Scalar>&)> push;  // based at act(base)

    static Isometry identity() {
        return {[](const Point<Scalar>& p) { return p; }, [](const Tangent<Scalar>& v) { return v; }};
    }
};

/// One step of the sampled-data Killing filter: propagate the estimate by the
/// isometry and exp the pushed-forward correction k dt log_qhat(q). The
/// correction is mapped through the differential of tau before the exp at
/// tau(qhat), so the first-order error recursion is (D tau - k dt Id) e.
template <typename Scalar>
Point<Scalar> killing_filter_discrete_step(const Point<Scalar>& qhat, const Point<Scalar>& q_meas,
                                           const Isometry<Scalar>& tau, Scalar k, Scalar dt) {
    detail::require_positive(k, "k");
    if (!(k * dt > Scalar(0) && k * dt < Scalar(1)))
        throw BeyondValidityRange("killing_filter_discrete_step: k*dt must lie in (0,1)");
    const Tangent<Scalar> lg = log_map(qhat, q_meas);
    const Tangent<Scalar> corr = tau.push(Tangent<Scalar>(qhat, (k * dt * lg.coords).eval()));
    return exp_map(corr.base, corr);
}

/// Gradient flow toward P: (1/lambda) log_q(P).
template <typename Scalar>
Tangent<Scalar> gradient_flow_field(const Point<Scalar>& q, const Point<Scalar>& P, Scalar lambda_flow) {
    detail::require_positive(lambda_flow, "lambda_flow");
    const Tangent<Scalar> lg = log_map(q, P);
    return Tangent<Scalar>(q, (lg.coords / lambda_flow).eval());
}

template <typename Scalar>
FirstOrderField<Scalar> make_gradient_flow(const Point<Scalar>& P, Scalar lambda_flow) {
    return [P, lambda_flow](Scalar, const Point<Scalar>& q) { return gradient_flow_field(q, P, lambda_flow); };
}

/// Guaranteed contraction rate of the gradient flow at distance d from P,
/// from the Hessian comparison under the sectional-curvature upper bound A:
/// gamma = (2 / lambda) * x / tan(x), x = sqrt(A) d.
template <typename Scalar>
Scalar contraction_rate_bound(Scalar d, Scalar lambda_flow, Scalar A) {
    detail::require_positive(lambda_flow, "lambda_flow");
    if (A < Scalar(0)) throw BeyondValidityRange("contraction_rate_bound: A must be >= 0");
    if (A == Scalar(0)) return 2 / lambda_flow;
    const Scalar x = std::sqrt(A) * d;
    if (x >= Scalar(EIGEN_PI) / 2) throw BeyondValidityRange("contraction_rate_bound: sqrt(A) d >= pi/2");
    if (x < Scalar(1e-8)) return (2 / lambda_flow) * (Scalar(1) - x * x / 3);
    return (2 / lambda_flow) * x / std::tan(x);
}

template <typename Scalar>
Scalar contraction_rate_bound(const Point<Scalar>& q, const Point<Scalar>& P, Scalar lambda_flow, Scalar A) {
    return contraction_rate_bound(dist(q, P), lambda_flow, A);
}

/// Empirical contraction margin of a flow along a trajectory:
/// min over sampled times and random unit tangents v of -<nabla_v f, v>.
template <typename Scalar>
Scalar contraction_certificate(const FirstOrderField<Scalar>& f, const Trajectory<Scalar>& base, int n_samples,
                               std::mt19937_64& rng, const OracleConfig<Scalar>& cfg = {}) {
    if (base.size() < 2) throw DegenerateInput("contraction_certificate: empty trajectory");
    std::uniform_int_distribution<std::size_t> pick(0, base.size() - 1);
    Scalar margin = std::numeric_limits<Scalar>::infinity();
    for (int i = 0; i < n_samples; ++i) {
        const std::size_t j = pick(rng);
        const Point<Scalar>& p = base.points[j];
        const Tangent<Scalar> v = random_tangent(p, rng, true);
        const Scalar t = base.times[j];
        PointField<Scalar> frozen = [&f, t](const Point<Scalar>& x) { return f(t, x); };
        const Tangent<Scalar> d = fd_directional_covariant(frozen, p, v, cfg);
        margin = std::min(margin, -inner(d, v));
    }
    return margin;
}

/// Instantaneous log-volume rate of a tangent frame under the gradient flow:
/// -(Laplacian of d^2/2)/lambda.
template <typename Scalar>
Scalar volume_rate(const Point<Scalar>& q, const Point<Scalar>& P, Scalar lambda_flow) {
    detail::require_positive(lambda_flow, "lambda_flow");
    return -laplacian_half_sq_dist(q, P) / lambda_flow;
}

}  // namespace geoflow
