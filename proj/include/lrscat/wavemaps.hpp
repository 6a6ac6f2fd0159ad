#pragma once

#include <vector>

#include "lrscat/geometry.hpp"
#include "lrscat/hj.hpp"
#include "lrscat/model.hpp"

namespace lrscat {

struct LimitOptions {
    double tail_tol = 1e-9;       // stop extending horizons below this tail estimate
    double t_cap = 1e6;           // hard horizon cap
    double t_init = 0.0;          // first horizon; 0 = auto from <x0>
    double stagnation_tol = 1e-5; // LimitNotConverged beyond this at the cap
};

struct InteractionState {
    Vec y, xi;
    double t = 0.0;
    double action = 0.0;  // interaction generating action phi(t, x0, xi0)
};

struct WaveMapResult {
    Vec x_pm, xi_pm;
    int sign = +1;
    double t_stop = 0.0;
    double tail_bound = 0.0;
};

struct InverseWaveMapResult {
    Vec xi0;
    int iters = 0;
    double residual = 0.0;
    std::vector<double> step_norms;  // fixed-point contraction log
};

struct PsiPM {
    double value = 0.0;
    Vec xi0;          // = grad_x psi_pm by the generating identity
    double t_stop = 0.0;
    double tail_bound = 0.0;
};

namespace detail {

// psi_pm ladder tuning (fixed defaults; see wavemaps.cpp)
extern double psi_ladder_ratio;
extern int psi_ladder_suffix;

// A frozen horizon-ladder policy. Finite differences of psi-type quantities
// need sibling evaluations to share the ladder and extrapolation windows
// exactly, otherwise discrete window switches alias into the differences.
struct RayPolicy {
    double t0 = 0.0;
    int rungs = 0;  // 0 = adaptive (policy gets filled in)
    int n_xi = 0, n_y = 0, n_B = 0;
    bool locked() const { return rungs > 0; }
};

struct RayRequest {
    bool need_xi = true;
    bool need_y = false;
    bool need_B = false;
    bool with_jacobian = false;
    LimitOptions limits;
    Vec eta_guess;             // companion warm start (empty = cold)
    RayPolicy* policy = nullptr;  // in/out
};

// Extrapolated t -> sign*inf data of one trajectory.
struct RayEval {
    Vec xi_lim;
    Vec y_lim;
    double B_lim = 0.0;  // interaction action limit
    Mat dxi;             // d x 2d, d(xi_lim)/d(x0,xi0)
    Mat dy;              // d x 2d
    Vec eta_hat;         // companion preimage at the last horizon
    double t_stop = 0.0;
    double tail = 0.0;
    int horizons = 0;
};

// Ladder policy for psi_pm: extrapolation of the finite-horizon generating
// functions psi_t(T). Locked across finite-difference siblings.
struct PsiPolicy {
    double t0 = 0.0;
    int rungs = 0;
    int window = 0;
    bool locked() const { return rungs > 0; }
};

}  // namespace detail

// Interaction-picture dynamics y(t) = x(t) - grad_xi phi(t, xi(t)), classical
// wave maps w_pm and their generating functions psi_pm.
class WaveMaps {
  public:
    WaveMaps(const HamiltonianModel& model, const HJSolution& hj) : model_(&model), hj_(&hj) {}

    const HamiltonianModel& model() const { return *model_; }
    const HJSolution& hj() const { return *hj_; }

    InteractionState interaction_flow(const Vec& x0, const Vec& xi0, double t) const;

    WaveMapResult wave_map(const Vec& x0, const Vec& xi0, int sign,
                           const LimitOptions& limits = {}) const;

    // Fixed-point iteration of F(eta) = xi - (xi_pm(x,eta) - eta).
    InverseWaveMapResult inverse_wave_map(const Vec& x, const Vec& xi, int sign,
                                          const LimitOptions& limits = {},
                                          detail::RayPolicy* policy = nullptr) const;

    // Interaction-picture generating function at finite time.
    double psi_t(double t, const Vec& x, const Vec& xi) const;

    // Eikonal phase psi_pm = lim psi_t, via the inverse wave map.
    PsiPM psi_pm(const Vec& x, const Vec& xi, int sign, const LimitOptions& limits = {},
                 detail::PsiPolicy* policy = nullptr) const;

    // central differences with step 1e-5 max(1,|x|), policy-locked
    Vec grad_x_psi_pm(const Vec& x, const Vec& xi, int sign) const;
    Vec grad_xi_psi_pm(const Vec& x, const Vec& xi, int sign) const;

    detail::RayEval ray_eval(const Vec& x0, const Vec& xi0, int sign,
                             detail::RayRequest& req) const;

  private:
    const HamiltonianModel* model_;
    const HJSolution* hj_;
};

}  // namespace lrscat
