#include "lrscat/flow.hpp"

#include <algorithm>
#include <boost/numeric/odeint/stepper/controlled_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/dense_output_runge_kutta.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>
#include <cmath>
#include <limits>

#include "lrscat/detail/flow_engine.hpp"
#include "lrscat/errors.hpp"

namespace odeint = boost::numeric::odeint;

namespace lrscat {
namespace detail {

namespace {

using State = std::vector<double>;
const double kFdStep = std::cbrt(std::numeric_limits<double>::epsilon());

// Hamilton equations plus optional variational and quadrature blocks.
// Built-in potentials are x-only, so the variational matrix has the block
// structure  d/dt [Jx; Jxi] = [Hxi(xi) Jxi; -Hx(x) Jx]  with both Hessians
// taken as central differences of the analytic gradients.
struct HamiltonSystem {
    const HamiltonianModel* model;
    EngineSpec spec;
    int d;

    mutable Vec x, xi, grad, vvec, gp, gm;
    mutable Mat Hx, Hxi;

    HamiltonSystem(const HamiltonianModel& m, const EngineSpec& s)
        : model(&m), spec(s), d(m.dimension()) {
        x.resize(d);
        xi.resize(d);
        grad.resize(d);
        vvec.resize(d);
        gp.resize(d);
        gm.resize(d);
        Hx.resize(d, d);
        Hxi.resize(d, d);
    }

    void operator()(const State& z, State& dz, double t) const {
        for (int k = 0; k < d; ++k) {
            x[k] = z[k];
            xi[k] = z[d + k];
        }
        vvec = model->v(xi);
        grad = model->grad_vR(x);
        for (int k = 0; k < d; ++k) {
            dz[k] = vvec[k];
            dz[d + k] = -grad[k];
        }
        const int cols = spec.jacobian_cols;
        if (cols > 0) {
            // FD Hessians of the analytic first derivatives
            Vec xp = x;
            for (int k = 0; k < d; ++k) {
                const double h = kFdStep * std::max(1.0, std::abs(x[k]));
                const double saved = xp[k];
                xp[k] = saved + h;
                gp = model->grad_vR(xp);
                xp[k] = saved - h;
                gm = model->grad_vR(xp);
                xp[k] = saved;
                Hx.col(k) = (gp - gm) / (2.0 * h);
            }
            Vec xip = xi;
            for (int k = 0; k < d; ++k) {
                const double h = kFdStep * std::max(1.0, std::abs(xi[k]));
                const double saved = xip[k];
                xip[k] = saved + h;
                gp = model->v(xip);
                xip[k] = saved - h;
                gm = model->v(xip);
                xip[k] = saved;
                Hxi.col(k) = (gp - gm) / (2.0 * h);
            }
            const int base = 2 * d;
            for (int c = 0; c < cols; ++c) {
                const double* jc = z.data() + base + 2 * d * c;
                double* djc = dz.data() + base + 2 * d * c;
                for (int r = 0; r < d; ++r) {
                    double sx = 0.0, sxi = 0.0;
                    for (int k = 0; k < d; ++k) {
                        sx += Hxi(r, k) * jc[d + k];
                        sxi -= Hx(r, k) * jc[k];
                    }
                    djc[r] = sx;
                    djc[d + r] = sxi;
                }
            }
        }
        int idx = 2 * d + 2 * d * cols;
        if (spec.action) {
            const double xdotg = x.dot(grad);
            dz[idx] = model->p0(xi) + model->vR(x) - xdotg;
            dz[idx + 1] = -xdotg;
            idx += 2;
        }
        if (spec.psi_quads) {
            dz[idx] = model->vR(x);
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += (x[k] - t * vvec[k]) * (-grad[k]);
            dz[idx + 1] = s;
        }
    }
};

// Error weight with a capped relative part so far-field positions are still
// controlled near-absolutely; keeps asymptotic differences of two long
// trajectories meaningful.
struct CappedErrorChecker {
    double atol = 1e-12, rtol = 1e-12, cap = 64.0;

    template <class Algebra, class S1, class S2, class S3>
    double error(Algebra&, const S1& x_old, const S2& /*dxdt_old*/, S3& x_err,
                 double /*dt*/) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < x_err.size(); ++i) {
            const double w = atol + rtol * std::min(std::abs(x_old[i]), cap);
            worst = std::max(worst, std::abs(x_err[i]) / w);
        }
        return worst;
    }
};

using Dopri5 = odeint::runge_kutta_dopri5<State>;
using Controlled = odeint::controlled_runge_kutta<Dopri5, CappedErrorChecker>;
using Dense = odeint::dense_output_runge_kutta<Controlled>;

}  // namespace

struct FlowEngine::Impl {
    HamiltonSystem system;
    Dense stepper;
    State state;
    double dir = 1.0;
    bool initialized = false;

    Impl(const HamiltonianModel& m, const EngineSpec& spec, double atol, double rtol)
        : system(m, spec), stepper(Controlled(CappedErrorChecker{atol, rtol, 64.0})) {}
};

FlowEngine::FlowEngine(const HamiltonianModel& model, const EngineSpec& spec, double abs_tol,
                       double rel_tol, long max_steps)
    : model_(&model),
      spec_(spec),
      d_(model.dimension()),
      abs_tol_(abs_tol),
      rel_tol_(rel_tol),
      max_steps_(max_steps) {
    impl_ = std::make_unique<Impl>(model, spec, abs_tol, rel_tol);
}

FlowEngine::~FlowEngine() = default;
FlowEngine::FlowEngine(FlowEngine&&) noexcept = default;
FlowEngine& FlowEngine::operator=(FlowEngine&&) noexcept = default;

void FlowEngine::init(const Vec& x0, const Vec& xi0) {
    auto& st = impl_->state;
    st.assign(state_size(), 0.0);
    for (int k = 0; k < d_; ++k) {
        st[k] = x0[k];
        st[d_ + k] = xi0[k];
    }
    const int cols = spec_.jacobian_cols;
    for (int c = 0; c < cols; ++c) {
        // full mode: columns are (x0_0..x0_{d-1}, xi0_0..xi0_{d-1});
        // xi0-only mode: columns are xi0 derivatives
        const int row = (cols == 2 * d_) ? c : d_ + c;
        st[idx_jac() + 2 * d_ * c + row] = 1.0;
    }
    impl_->initialized = false;
    started_ = false;
    steps_ = 0;
    max_drift_ = 0.0;
    energy0_ = model_->p(x0, xi0);
    snapshot_ = st;
    t_snapshot_ = 0.0;
}

void FlowEngine::advance_to(double t) {
    auto& impl = *impl_;
    if (t == 0.0) {
        t_snapshot_ = 0.0;
        return;
    }
    if (!started_) {
        impl.dir = t > 0 ? 1.0 : -1.0;
        const double dt0 = impl.dir * 1e-3;
        impl.stepper.initialize(impl.state, 0.0, dt0);
        started_ = true;
    }
    if (t * impl.dir < std::abs(t_snapshot_))
        throw Error("flow engine horizons must move away from t=0");
    try {
        while (impl.stepper.current_time() * impl.dir < t * impl.dir) {
            impl.stepper.do_step(std::ref(impl.system));
            if (++steps_ > max_steps_)
                throw StepSizeUnderflow("flow integration exceeded the step budget");
            const auto& cur = impl.stepper.current_state();
            Eigen::Map<const Vec> cx(cur.data(), d_);
            Eigen::Map<const Vec> cxi(cur.data() + d_, d_);
            max_drift_ = std::max(max_drift_, std::abs(model_->p(cx, cxi) - energy0_));
            if (observer) observer(impl.stepper.current_time(), cur);
        }
    } catch (const std::overflow_error&) {
        throw StepSizeUnderflow("flow integrator step size underflow");
    }
    if (snapshot_.size() != impl.state.size()) snapshot_.resize(impl.state.size());
    impl.stepper.calc_state(t, snapshot_);
    t_snapshot_ = t;
}

Vec FlowEngine::x() const {
    return Eigen::Map<const Vec>(snapshot_.data() + idx_x(), d_);
}
Vec FlowEngine::xi() const {
    return Eigen::Map<const Vec>(snapshot_.data() + idx_xi(), d_);
}
Mat FlowEngine::jacobian() const {
    const int cols = spec_.jacobian_cols;
    Mat J(2 * d_, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < 2 * d_; ++r) J(r, c) = snapshot_[idx_jac() + 2 * d_ * c + r];
    return J;
}
double FlowEngine::action_u() const { return spec_.action ? snapshot_[idx_action()] : 0.0; }
double FlowEngine::action_corr() const {
    return spec_.action ? snapshot_[idx_action() + 1] : 0.0;
}
double FlowEngine::quad_V() const { return spec_.psi_quads ? snapshot_[idx_quads()] : 0.0; }
double FlowEngine::quad_xi() const {
    return spec_.psi_quads ? snapshot_[idx_quads() + 1] : 0.0;
}

}  // namespace detail

Trajectory integrate_flow(const HamiltonianModel& model, const PhasePoint& start, double t,
                          const FlowOptions& opts) {
    const int d = model.dimension();
    if (start.x.size() != d || start.xi.size() != d)
        throw PreconditionViolation("phase point dimension mismatch");
    if (!std::isfinite(model.p(start.x, start.xi)))
        throw PreconditionViolation("initial energy is not finite");
    if (std::abs(t) > opts.t_max) throw PreconditionViolation("|t| exceeds t_max");

    detail::EngineSpec spec;
    spec.jacobian_cols = opts.with_jacobian ? 2 * d : 0;
    spec.action = opts.with_action;
    detail::FlowEngine engine(model, spec, opts.abs_tol * opts.internal_safety,
                              opts.rel_tol * opts.internal_safety, opts.max_steps);
    engine.init(start.x, start.xi);

    Trajectory out;
    out.energy0 = engine.energy0();
    const double drift_bound =
        10.0 * opts.rel_tol * std::abs(out.energy0) + 10.0 * opts.abs_tol;

    auto sample_from_state = [&](double at, const Vec& x, const Vec& xi, const Mat* J) {
        TrajectorySample s;
        s.t = at;
        s.x = x;
        s.xi = xi;
        s.energy_drift = std::abs(model.p(s.x, s.xi) - out.energy0);
        if (J) s.jacobian = *J;
        out.samples.push_back(std::move(s));
    };
    auto sample_from_engine = [&](double at) {
        Mat J;
        if (opts.with_jacobian) J = engine.jacobian();
        sample_from_state(at, engine.x(), engine.xi(), opts.with_jacobian ? &J : nullptr);
    };

    if (t == 0.0) {
        engine.advance_to(0.0);
        sample_from_engine(0.0);
    } else if (!opts.sample_times.empty()) {
        std::vector<double> times = opts.sample_times;
        std::sort(times.begin(), times.end(),
                  [&](double a, double b) { return std::abs(a) < std::abs(b); });
        for (double at : times) {
            if (at * t < 0 || std::abs(at) > std::abs(t))
                throw PreconditionViolation("sample times must lie between 0 and t");
            engine.advance_to(at);
            sample_from_engine(at);
        }
        engine.advance_to(t);
        sample_from_engine(t);
    } else {
        sample_from_engine(0.0);
        long count = 0;
        engine.observer = [&](double at, const std::vector<double>& st) {
            if (++count % opts.store_every != 0) return;
            if (std::abs(at) >= std::abs(t)) return;  // endpoint recorded below
            Vec x = Eigen::Map<const Vec>(st.data(), d);
            Vec xi = Eigen::Map<const Vec>(st.data() + d, d);
            Mat J;
            if (opts.with_jacobian) {
                J.resize(2 * d, 2 * d);
                for (int c = 0; c < 2 * d; ++c)
                    for (int r = 0; r < 2 * d; ++r) J(r, c) = st[2 * d + 2 * d * c + r];
            }
            sample_from_state(at, x, xi, opts.with_jacobian ? &J : nullptr);
        };
        engine.advance_to(t);
        engine.observer = nullptr;
        sample_from_engine(t);
    }
    out.t_end = t;
    out.end = PhasePoint{engine.x(), engine.xi()};
    if (opts.with_jacobian) out.jacobian_end = engine.jacobian();
    out.action_u = engine.action_u();
    out.action_corr = engine.action_corr();
    out.steps = engine.steps();
    out.max_energy_drift = std::max(engine.max_drift(), [&] {
        double m = 0.0;
        for (const auto& s : out.samples) m = std::max(m, s.energy_drift);
        return m;
    }());
    if (out.max_energy_drift > drift_bound)
        throw EnergyDriftExceeded("energy drift " + std::to_string(out.max_energy_drift) +
                                  " exceeds contract " + std::to_string(drift_bound));
    return out;
}

Mat flow_jacobian(const HamiltonianModel& model, const PhasePoint& start, double t,
                  const FlowOptions& opts) {
    FlowOptions o = opts;
    o.with_jacobian = true;
    o.store_every = std::numeric_limits<int>::max();
    return integrate_flow(model, start, t, o).jacobian_end;
}

double cos_angle(const HamiltonianModel& model, const PhasePoint& p) {
    const double nx = p.x.norm();
    const Vec vel = model.v(p.xi);
    const double nv = vel.norm();
    if (nx == 0.0 || nv == 0.0)
        throw DegenerateDirection("cos(x, v(xi)) undefined: zero direction");
    return p.x.dot(vel) / (nx * nv);
}

MinRadiusReport min_radius_estimate(const HamiltonianModel& model, const PhasePoint& start,
                                    int sign, double t_max, double beta,
                                    const FlowOptions& opts) {
    if (sign != 1 && sign != -1) throw PreconditionViolation("sign must be +1 or -1");
    const double c = cos_angle(model, start);
    if (sign * c < beta)
        throw PreconditionViolation("datum violates the out-going/in-coming condition: " +
                                    std::to_string(sign * c) + " < beta");
    FlowOptions o = opts;
    o.t_max = std::max(o.t_max, t_max);
    Trajectory tr = integrate_flow(model, start, sign * t_max, o);
    const double jx0 = jbracket(start.x);
    MinRadiusReport rep{std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity()};
    for (const auto& s : tr.samples) {
        const double r = s.x.norm();
        rep.c_fit = std::min(rep.c_fit, r / jbracket(start.x, s.t));
        rep.min_ratio = std::min(rep.min_ratio, r / (jx0 + jbracket(s.t)));
    }
    return rep;
}

}  // namespace lrscat
