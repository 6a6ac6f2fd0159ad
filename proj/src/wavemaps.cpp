#include "lrscat/wavemaps.hpp"

#include <cmath>

#include "lrscat/detail/flow_engine.hpp"
#include "lrscat/errors.hpp"
#include "lrscat/numeric.hpp"

namespace lrscat {

namespace detail {
// tuning knobs for the psi_pm horizon ladder (fixed after calibration)
double psi_ladder_ratio = 4.0;
int psi_ladder_suffix = 3;  // extra points beyond the exponent count in the LS fit
}  // namespace detail

namespace {
constexpr double kInternalTol = 1e-12;
constexpr double kActionTailTol = 1e-10;

// Interaction action at horizon t assembled from small quantities only:
// B(t) = x0.xi0 + int V_R(x) + int (x - s v(xi)).xi' - corr_c
//        - t [ p0(xi_c(t)) - p0(xi(t)) + V_R(x_c(t)) ]
double assemble_action(const HamiltonianModel& m, const Vec& x0, const Vec& xi0,
                       double t, double quad_V, double quad_xi, const Vec& xi_end,
                       const HJSolution::Companion& comp) {
    const double endpoint = m.p0(comp.xi_end) - m.p0(xi_end) + m.vR(comp.x_end);
    return x0.dot(xi0) + quad_V + quad_xi - comp.corr - t * endpoint;
}

struct Track {
    double best_change = std::numeric_limits<double>::infinity();
    std::size_t best_n = 0;
    std::size_t first_below = 0;
    int worse_streak = 0;
    bool done = false;
    double tol = 1e-9;

    void update(double ch, std::size_t n) {
        if (ch < best_change) {
            best_change = ch;
            best_n = n;
            worse_streak = 0;
        } else if (n >= 5) {
            ++worse_streak;
        }
        if (first_below == 0 && ch < tol) first_below = n;
        if (first_below != 0 || worse_streak >= 2) done = true;
    }
    // prefer the first window that met the tolerance: its switch jitter is
    // bounded by tol, unlike the argmin window
    std::size_t window(std::size_t n_avail) const {
        std::size_t n = first_below != 0 ? first_below : (best_n >= 3 ? best_n : n_avail);
        return std::min(n, n_avail);
    }
};

}  // namespace

detail::RayEval WaveMaps::ray_eval(const Vec& x0, const Vec& xi0, int sign,
                                   detail::RayRequest& req) const {
    if (sign != 1 && sign != -1) throw PreconditionViolation("sign must be +1 or -1");
    const int d = model_->dimension();
    detail::RayEval out;

    if (model_->potential_is_zero()) {
        out.xi_lim = xi0;
        out.y_lim = x0;
        out.B_lim = x0.dot(xi0);
        if (req.with_jacobian) {
            out.dxi = Mat::Zero(d, 2 * d);
            out.dxi.rightCols(d) = Mat::Identity(d, d);
            out.dy = Mat::Zero(d, 2 * d);
            out.dy.leftCols(d) = Mat::Identity(d, d);
        }
        out.eta_hat = xi0;
        return out;
    }

    const LimitOptions& lim = req.limits;
    detail::RayPolicy local_policy;
    detail::RayPolicy& pol = req.policy ? *req.policy : local_policy;
    const bool locked = pol.locked();
    const double t0 = locked ? pol.t0
                             : (lim.t_init > 0 ? lim.t_init : std::max(32.0, 4.0 * jbracket(x0)));
    const double mu = model_->mu();

    detail::EngineSpec spec;
    spec.jacobian_cols = req.with_jacobian ? 2 * d : 0;
    spec.psi_quads = req.need_B;
    detail::FlowEngine main(*model_, spec, kInternalTol, kInternalTol);
    main.init(x0, xi0);

    std::vector<double> horizons;
    std::vector<Vec> xis, ys;
    std::vector<double> Bs;
    std::vector<Mat> jac_xi, jac_y;
    Vec eta_guess = req.eta_guess;

    Track trk_xi, trk_y, trk_B;
    trk_xi.tol = lim.tail_tol;
    trk_y.tol = lim.tail_tol;
    trk_B.tol = kActionTailTol;

    const std::vector<double> exps_map{mu, 2.0 * mu};
    const std::vector<double> exps_action{1.0 + mu, 1.0 + 2.0 * mu};
    auto extrap_at = [&](const std::vector<double>& vals, std::size_t n,
                         const std::vector<double>& exps) {
        std::vector<double> h2(horizons.begin(), horizons.begin() + n);
        std::vector<double> v2(vals.begin(), vals.begin() + n);
        return extrapolate_tail_multi(h2, v2, exps);
    };
    auto extrap_vec_at = [&](const std::vector<Vec>& vals, std::size_t n,
                             const std::vector<double>& exps, double* change) {
        Vec res(vals.back().size());
        double ch = 0.0;
        for (int k = 0; k < res.size(); ++k) {
            std::vector<double> series(n);
            for (std::size_t i = 0; i < n; ++i) series[i] = vals[i][k];
            auto ex = extrap_at(series, n, exps);
            res[k] = ex.value;
            ch = std::max(ch, ex.change);
        }
        if (change) *change = ch;
        return res;
    };

    const bool need_companion = req.need_y || req.need_B;
    bool companion_active = need_companion;
    const int max_rungs = locked ? pol.rungs : 40;
    for (int rung = 0; rung < max_rungs; ++rung) {
        const double T = t0 * std::pow(2.0, rung);
        main.advance_to(sign * T);
        horizons.push_back(T);
        xis.push_back(main.xi());
        if (req.with_jacobian) jac_xi.push_back(main.jacobian().bottomRows(d));
        if (companion_active) {
            HJSolution::Companion comp = hj_->companion(
                sign * T, main.xi(), eta_guess.size() ? &eta_guess : nullptr);
            eta_guess = comp.eta;
            out.eta_hat = comp.eta;
            ys.push_back(main.x() - comp.x_end);
            Bs.push_back(assemble_action(*model_, x0, xi0, sign * T, main.quad_V(),
                                         main.quad_xi(), main.xi(), comp));
            if (req.with_jacobian) {
                // d y / d(x0,xi0) = dx/d. - Mx Mxi^{-1} dxi/d.
                Mat dxi_blk = main.jacobian().bottomRows(d);
                Mat dx_blk = main.jacobian().topRows(d);
                jac_y.push_back(dx_blk - comp.Mx * comp.Mxi.partialPivLu().solve(dxi_blk));
            }
        }
        if (locked) {
            if (companion_active && req.need_y &&
                static_cast<int>(ys.size()) >= std::max(pol.n_y, pol.n_B))
                companion_active = false;
            continue;
        }
        const std::size_t n = horizons.size();
        if (n >= exps_map.size() + 1) {
            double ch = 0.0;
            if (req.need_xi && !trk_xi.done) {
                extrap_vec_at(xis, n, exps_map, &ch);
                trk_xi.update(ch, n);
            }
            if (companion_active) {
                if (req.need_y && !trk_y.done) {
                    extrap_vec_at(ys, n, exps_map, &ch);
                    trk_y.update(ch, n);
                }
                if (req.need_B && !trk_B.done)
                    trk_B.update(extrap_at(Bs, n, exps_action).change, n);
                if ((!req.need_y || trk_y.done) && (!req.need_B || trk_B.done))
                    companion_active = false;
            }
            const bool all_done = (!req.need_xi || trk_xi.done) &&
                                  (!req.need_y || trk_y.done) && (!req.need_B || trk_B.done);
            if (all_done) break;
        }
        if (T >= lim.t_cap) break;
    }

    const std::size_t n_all = horizons.size();
    out.horizons = static_cast<int>(n_all);
    out.t_stop = sign * horizons.back();

    const std::size_t n_xi = locked ? std::min<std::size_t>(pol.n_xi, n_all)
                                    : trk_xi.window(n_all);
    const std::size_t n_y =
        locked ? std::min<std::size_t>(pol.n_y, ys.size()) : trk_y.window(ys.size());
    const std::size_t n_B =
        locked ? std::min<std::size_t>(pol.n_B, Bs.size()) : trk_B.window(Bs.size());
    if (!locked) {
        pol.t0 = t0;
        pol.rungs = static_cast<int>(n_all);
        pol.n_xi = static_cast<int>(n_xi);
        pol.n_y = static_cast<int>(n_y);
        pol.n_B = static_cast<int>(n_B);
    }

    double tail = 0.0;
    {
        double ch = lim.stagnation_tol / 2;
        out.xi_lim = n_xi >= 3 ? extrap_vec_at(xis, n_xi, exps_map, &ch) : xis.back();
        if (req.need_xi) tail = std::max(tail, ch);
        if (req.with_jacobian) {
            const std::size_t n = std::max<std::size_t>(n_xi, 1);
            out.dxi.resize(d, 2 * d);
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < 2 * d; ++c) {
                    std::vector<double> series(n);
                    for (std::size_t i = 0; i < n; ++i) series[i] = jac_xi[i](r, c);
                    out.dxi(r, c) =
                        n >= 3 ? extrap_at(series, n, exps_map).value : series.back();
                }
        }
    }
    if (req.need_y) {
        double ch = lim.stagnation_tol / 2;
        out.y_lim = n_y >= 3 ? extrap_vec_at(ys, n_y, exps_map, &ch) : ys.back();
        tail = std::max(tail, ch);
        if (req.with_jacobian) {
            const std::size_t n = std::max<std::size_t>(n_y, 1);
            out.dy.resize(d, 2 * d);
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < 2 * d; ++c) {
                    std::vector<double> series(n);
                    for (std::size_t i = 0; i < n; ++i) series[i] = jac_y[i](r, c);
                    out.dy(r, c) =
                        n >= 3 ? extrap_at(series, n, exps_map).value : series.back();
                }
        }
    }
    if (req.need_B) {
        if (n_B >= 3) {
            auto ex = extrap_at(Bs, n_B, exps_action);
            out.B_lim = ex.value;
            tail = std::max(tail, ex.change);
        } else {
            out.B_lim = Bs.back();
            tail = std::max(tail, lim.stagnation_tol / 2);
        }
    }
    out.tail = tail;
    if (!(tail < lim.stagnation_tol))
        throw LimitNotConverged("wave-map tail estimate stagnated at " + std::to_string(tail));
    return out;
}

InteractionState WaveMaps::interaction_flow(const Vec& x0, const Vec& xi0, double t) const {
    if (!model_->in_omega(x0, xi0, 5))
        throw PreconditionViolation("interaction_flow: datum outside Omega_{I5}");
    InteractionState st;
    st.t = t;
    if (t == 0.0 || model_->potential_is_zero()) {
        st.y = x0;
        st.xi = xi0;
        st.action = x0.dot(xi0);
        return st;
    }
    detail::EngineSpec spec;
    spec.psi_quads = true;
    detail::FlowEngine main(*model_, spec, kInternalTol, kInternalTol);
    main.init(x0, xi0);
    main.advance_to(t);
    HJSolution::Companion comp = hj_->companion(t, main.xi());
    st.y = main.x() - comp.x_end;
    st.xi = main.xi();
    st.action = assemble_action(*model_, x0, xi0, t, main.quad_V(), main.quad_xi(),
                                main.xi(), comp);
    return st;
}

WaveMapResult WaveMaps::wave_map(const Vec& x0, const Vec& xi0, int sign,
                                 const LimitOptions& limits) const {
    if (!model_->in_omega(x0, xi0, 5))
        throw PreconditionViolation("wave_map: datum outside Omega_{I5}");
    detail::RayRequest req;
    req.need_y = true;
    req.need_B = false;
    req.limits = limits;
    detail::RayEval ray = ray_eval(x0, xi0, sign, req);
    WaveMapResult res;
    res.x_pm = ray.y_lim;
    res.xi_pm = ray.xi_lim;
    res.sign = sign;
    res.t_stop = ray.t_stop;
    res.tail_bound = ray.tail;
    return res;
}

InverseWaveMapResult WaveMaps::inverse_wave_map(const Vec& x, const Vec& xi, int sign,
                                                const LimitOptions& limits,
                                                detail::RayPolicy* policy) const {
    InverseWaveMapResult res;
    if (model_->potential_is_zero()) {
        res.xi0 = xi;
        res.iters = 1;
        res.residual = 0.0;
        return res;
    }
    detail::RayPolicy local;
    detail::RayPolicy& pol = policy ? *policy : local;
    Vec eta = xi;
    double best = std::numeric_limits<double>::infinity();
    int grow_streak = 0;
    for (int it = 0; it < 60; ++it) {
        detail::RayRequest req;
        req.limits = limits;
        req.policy = &pol;
        detail::RayEval ray = ray_eval(x, eta, sign, req);
        Vec eta_next = xi - (ray.xi_lim - eta);
        const double step = (eta_next - eta).norm();
        res.step_norms.push_back(step);
        eta = eta_next;
        res.iters = it + 1;
        if (step < best) {
            best = step;
            grow_streak = 0;
        } else if (++grow_streak >= 4) {
            throw FixedPointDiverged("inverse wave map iteration diverged");
        }
        if (step < 2e-14 * std::max(1.0, xi.norm())) break;
    }
    res.residual = res.step_norms.back();
    if (res.residual > 1e-11)
        throw FixedPointDiverged("inverse wave map stalled at step " +
                                 std::to_string(res.residual));
    res.xi0 = eta;
    return res;
}

double WaveMaps::psi_t(double t, const Vec& x, const Vec& xi) const {
    const int d = model_->dimension();
    if (t == 0.0 || model_->potential_is_zero()) return x.dot(xi);

    // Newton on xi0 -> xi(t; x, xi0) with the variational block as Jacobian
    detail::EngineSpec spec;
    spec.jacobian_cols = d;
    spec.psi_quads = true;
    Vec xi0 = xi;
    double best = std::numeric_limits<double>::infinity();
    Vec best_xi0 = xi0;
    double quad_V = 0.0, quad_xi = 0.0;
    Vec xi_end;
    for (int it = 0; it < 50; ++it) {
        detail::FlowEngine eng(*model_, spec, kInternalTol, kInternalTol);
        eng.init(x, xi0);
        eng.advance_to(t);
        Vec F = eng.xi() - xi;
        const double res = F.norm();
        const bool improved = res < best;
        if (improved) {
            best = res;
            best_xi0 = xi0;
            quad_V = eng.quad_V();
            quad_xi = eng.quad_xi();
            xi_end = eng.xi();
        }
        if (res < 1e-13 * std::max(1.0, xi.norm())) break;
        if (!improved) break;
        Mat J = eng.jacobian();
        Vec step = J.bottomRows(d).partialPivLu().solve(F);
        xi0 = best_xi0 - step;
    }
    if (best > 1e-10) throw NewtonDiverged("L_t^x inversion did not converge", best);
    HJSolution::Companion comp = hj_->companion(t, xi_end);
    return assemble_action(*model_, x, best_xi0, t, quad_V, quad_xi, xi_end, comp);
}

PsiPM WaveMaps::psi_pm(const Vec& x, const Vec& xi, int sign, const LimitOptions& limits,
                       detail::PsiPolicy* policy) const {
    PsiPM out;
    if (model_->potential_is_zero()) {
        out.value = x.dot(xi);
        out.xi0 = xi;
        return out;
    }
    if (sign != 1 && sign != -1) throw PreconditionViolation("sign must be +1 or -1");
    const int d = model_->dimension();
    const double mu = model_->mu();
    detail::PsiPolicy local;
    detail::PsiPolicy& pol = policy ? *policy : local;
    const bool locked = pol.locked();
    const double ratio = detail::psi_ladder_ratio;
    const double t0 = locked ? pol.t0
                             : (limits.t_init > 0 ? limits.t_init
                                                  : std::max(32.0, 4.0 * jbracket(x)));

    // Extrapolating the finite-horizon generating functions psi_t(T) keeps the
    // gradient identity d_x psi_t = xi0(T) exact rung by rung, so the
    // extrapolated phase inherits it. The tail of psi_t(T) carries the powers
    // of T^-mu dragged in by the finite-horizon inverse.
    std::vector<double> exps;
    for (double e : {mu, 2.0 * mu, 3.0 * mu, 1.0 + mu, 1.0 + 2.0 * mu}) {
        bool close = false;
        for (double have : exps) close = close || std::abs(have - e) < 0.12;
        if (!close && exps.size() < 4) exps.push_back(e);
    }

    detail::EngineSpec spec;
    spec.jacobian_cols = d;
    spec.psi_quads = true;

    std::vector<double> horizons;
    std::vector<double> psis;
    std::vector<Vec> xi0s;
    Vec xi0 = xi;
    Vec eta_guess;
    Track trk;
    trk.tol = kActionTailTol;
    const int max_rungs = locked ? pol.rungs : 40;
    for (int rung = 0; rung < max_rungs; ++rung) {
        const double T = t0 * std::pow(ratio, rung);
        // Newton for the finite-horizon inverse xi0(T), warm from the last rung
        double best = std::numeric_limits<double>::infinity();
        Vec best_xi0 = xi0;
        double quad_V = 0.0, quad_xi = 0.0;
        Vec xi_end;
        for (int it = 0; it < 50; ++it) {
            detail::FlowEngine eng(*model_, spec, kInternalTol, kInternalTol);
            eng.init(x, xi0);
            eng.advance_to(sign * T);
            Vec F = eng.xi() - xi;
            const double res = F.norm();
            const bool improved = res < best;
            if (improved) {
                best = res;
                best_xi0 = xi0;
                quad_V = eng.quad_V();
                quad_xi = eng.quad_xi();
                xi_end = eng.xi();
            }
            if (!improved) break;
            Mat J = eng.jacobian();
            Vec step = J.bottomRows(d).partialPivLu().solve(F);
            xi0 = best_xi0 - step;
        }
        if (best > 1e-10)
            throw NewtonDiverged("finite-horizon inverse did not converge", best);
        xi0 = best_xi0;
        HJSolution::Companion comp =
            hj_->companion(sign * T, xi_end, eta_guess.size() ? &eta_guess : nullptr);
        eta_guess = comp.eta;
        horizons.push_back(T);
        psis.push_back(assemble_action(*model_, x, best_xi0, sign * T, quad_V, quad_xi,
                                       xi_end, comp));
        xi0s.push_back(best_xi0);

        if (!locked) {
            const std::size_t n = horizons.size();
            if (n >= exps.size() + 2) {
                auto ex = extrapolate_tail_lsq(horizons, psis, exps, detail::psi_ladder_suffix);
                trk.update(ex.change, n);
                if (trk.done) break;
            }
            if (T >= limits.t_cap) break;
        }
    }
    const std::size_t n_all = horizons.size();
    const std::size_t win =
        locked ? std::min<std::size_t>(pol.window, n_all) : trk.window(n_all);
    if (!locked) {
        pol.t0 = t0;
        pol.rungs = static_cast<int>(n_all);
        pol.window = static_cast<int>(win);
    }
    std::vector<double> h2(horizons.begin(), horizons.begin() + win);
    std::vector<double> p2(psis.begin(), psis.begin() + win);
    auto ex = extrapolate_tail_lsq(h2, p2, exps, detail::psi_ladder_suffix);
    out.value = ex.value;
    out.tail_bound = ex.change;
    out.t_stop = sign * horizons[win - 1];
    // same linear extrapolation applied to the inverse momenta: this equals
    // the weighted combination whose gradient identity the value inherits
    out.xi0.resize(d);
    for (int k = 0; k < d; ++k) {
        std::vector<double> series(win);
        for (std::size_t i = 0; i < win; ++i) series[i] = xi0s[i][k];
        out.xi0[k] = extrapolate_tail_lsq(h2, series, exps, detail::psi_ladder_suffix).value;
    }
    if (!(out.tail_bound < limits.stagnation_tol))
        throw LimitNotConverged("psi_pm tail estimate stagnated at " +
                                std::to_string(out.tail_bound));
    return out;
}

Vec WaveMaps::grad_x_psi_pm(const Vec& x, const Vec& xi, int sign) const {
    detail::PsiPolicy pol;
    psi_pm(x, xi, sign, {}, &pol);  // center eval freezes the ladder policy
    const double h0 = 1e-5 * std::max(1.0, x.norm());
    Vec g(x.size());
    Vec xp = x;
    for (int k = 0; k < x.size(); ++k) {
        const double saved = xp[k];
        xp[k] = saved + h0;
        const double fp = psi_pm(xp, xi, sign, {}, &pol).value;
        xp[k] = saved - h0;
        const double fm = psi_pm(xp, xi, sign, {}, &pol).value;
        xp[k] = saved;
        g[k] = (fp - fm) / (2.0 * h0);
    }
    return g;
}

Vec WaveMaps::grad_xi_psi_pm(const Vec& x, const Vec& xi, int sign) const {
    detail::PsiPolicy pol;
    psi_pm(x, xi, sign, {}, &pol);
    const double h0 = 1e-5 * std::max(1.0, x.norm());
    Vec g(xi.size());
    Vec xip = xi;
    for (int k = 0; k < xi.size(); ++k) {
        const double saved = xip[k];
        xip[k] = saved + h0;
        const double fp = psi_pm(x, xip, sign, {}, &pol).value;
        xip[k] = saved - h0;
        const double fm = psi_pm(x, xip, sign, {}, &pol).value;
        xip[k] = saved;
        g[k] = (fp - fm) / (2.0 * h0);
    }
    return g;
}

}  // namespace lrscat
