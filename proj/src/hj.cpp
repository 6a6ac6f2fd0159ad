#include "lrscat/hj.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <mutex>

#include "lrscat/detail/flow_engine.hpp"
#include "lrscat/errors.hpp"

namespace lrscat {

namespace {
constexpr double kInternalTol = 1e-12;

std::uint64_t double_bits(double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, sizeof(b));
    return b;
}
}  // namespace

HJSolution::HJSolution(const HamiltonianModel& model, NewtonOptions newton)
    : model_(&model), newton_(newton) {}

HJSolution::Key HJSolution::make_key(double t, const Vec& xi) const {
    Key k;
    k.bits.reserve(xi.size() + 1);
    k.bits.push_back(double_bits(t));
    for (int i = 0; i < xi.size(); ++i) k.bits.push_back(double_bits(xi[i]));
    return k;
}

double HJSolution::action_u(double t, const Vec& eta) const {
    if (!model_->in_omega0(eta, 5))
        throw PreconditionViolation("action_u: eta outside Omega^0_{I5}");
    if (t == 0.0) return 0.0;
    detail::EngineSpec spec;
    spec.action = true;
    detail::FlowEngine eng(*model_, spec, kInternalTol, kInternalTol);
    eng.init(Vec::Zero(model_->dimension()), eta);
    eng.advance_to(t);
    return eng.action_u();
}

Vec HJSolution::lambda_map(double t, const Vec& eta) const {
    if (!model_->in_omega0(eta, 5))
        throw PreconditionViolation("lambda_map: eta outside Omega^0_{I5}");
    if (t == 0.0) return eta;
    detail::FlowEngine eng(*model_, detail::EngineSpec{}, kInternalTol, kInternalTol);
    eng.init(Vec::Zero(model_->dimension()), eta);
    eng.advance_to(t);
    return eng.xi();
}

HJSolution::Companion HJSolution::companion(double t, const Vec& xi, const Vec* guess) const {
    const int d = model_->dimension();
    Companion comp;
    if (t == 0.0 || model_->potential_is_zero()) {
        comp.eta = xi;
        comp.x_end = t == 0.0 ? Vec(Vec::Zero(d)) : Vec(t * model_->v(xi));
        comp.xi_end = xi;
        comp.Mx = Mat::Zero(d, d);
        if (t != 0.0) {
            // free flow: dx/deta = t * Hess p0
            const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
            Mat H(d, d);
            Vec ep = xi;
            for (int k = 0; k < d; ++k) {
                const double h = h0 * std::max(1.0, std::abs(xi[k]));
                const double saved = ep[k];
                ep[k] = saved + h;
                Vec bp = model_->v(ep);
                ep[k] = saved - h;
                Vec bm = model_->v(ep);
                ep[k] = saved;
                H.col(k) = (bp - bm) / (2.0 * h);
            }
            comp.Mx = t * H;
        }
        comp.Mxi = Mat::Identity(d, d);
        comp.u = t * model_->p0(xi);
        comp.corr = 0.0;
        return comp;
    }

    const Key key = make_key(t, xi);
    if (guess == nullptr) {
        std::shared_lock lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }

    detail::EngineSpec spec;
    spec.jacobian_cols = d;  // xi0 columns only
    spec.action = true;

    Vec eta = guess ? *guess : xi;
    double best_res = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < newton_.max_iter; ++it) {
        detail::FlowEngine eng(*model_, spec, kInternalTol, kInternalTol);
        eng.init(Vec::Zero(d), eta);
        eng.advance_to(t);
        Vec F = eng.xi() - xi;
        const double res = F.norm();
        const bool improved = res < best_res;
        if (improved) {
            best_res = res;
            comp.eta = eta;
            comp.x_end = eng.x();
            comp.xi_end = eng.xi();
            Mat J = eng.jacobian();
            comp.Mx = J.topRows(d);
            comp.Mxi = J.bottomRows(d);
            comp.u = eng.action_u();
            comp.corr = eng.action_corr();
            comp.residual = res;
        }
        // iterate to the machine floor: the action assembly multiplies the
        // residual by the horizon, so early stopping is not harmless
        if (!improved) break;
        Vec step = comp.Mxi.partialPivLu().solve(F);
        eta = comp.eta - step;
    }
    comp.iters = it + 1;
    if (comp.residual > newton_.accept_tol)
        throw NewtonDiverged("Lambda_t inversion did not converge", comp.residual);

    if (guess == nullptr) {
        std::unique_lock lock(mutex_);
        cache_.emplace(key, comp);
    }
    return comp;
}

Vec HJSolution::invert_lambda(double t, const Vec& xi, const Vec* guess) const {
    if (!model_->in_omega0(xi, 4))
        throw PreconditionViolation("invert_lambda: xi outside Omega^0_{I4}");
    return companion(t, xi, guess).eta;
}

double HJSolution::phi(double t, const Vec& xi) const {
    return t * model_->p0(xi) + phi_minus_tp0(t, xi);
}

double HJSolution::phi_minus_tp0(double t, const Vec& xi) const {
    if (t == 0.0 || model_->potential_is_zero()) return 0.0;
    const Companion comp = companion(t, xi);
    // u = t p(0,eta) + corr with p conserved along the companion; evaluating
    // the conserved energy at the endpoint keeps every term small
    const double dp0 = model_->p0(comp.xi_end) - model_->p0(xi) + model_->vR(comp.x_end);
    return t * dp0 + comp.corr;
}

Vec HJSolution::grad_phi(double t, const Vec& xi) const {
    if (t == 0.0) return Vec::Zero(model_->dimension());
    return companion(t, xi).x_end;
}

Mat HJSolution::hess_phi(double t, const Vec& xi) const {
    const Companion comp = companion(t, xi);
    return comp.Mx * comp.Mxi.inverse();
}

}  // namespace lrscat
