#pragma once

// Internal integration engine shared by the flow, hj and wavemaps modules.
// One engine owns one trajectory; horizons can only move away from t = 0.

#include <functional>
#include <memory>
#include <vector>

#include "lrscat/geometry.hpp"
#include "lrscat/model.hpp"

namespace lrscat::detail {

struct EngineSpec {
    // 0 = no variational block, d = xi0 columns only, 2d = full Jacobian
    int jacobian_cols = 0;
    bool action = false;     // u = int p - x.grad V_R  and  corr = int -x.grad V_R
    bool psi_quads = false;  // Q_V = int V_R(x),  Q_xi = int (x - s v(xi)).xi'
};

class FlowEngine {
  public:
    FlowEngine(const HamiltonianModel& model, const EngineSpec& spec, double abs_tol,
               double rel_tol, long max_steps = 4'000'000);
    ~FlowEngine();
    FlowEngine(FlowEngine&&) noexcept;
    FlowEngine& operator=(FlowEngine&&) noexcept;

    void init(const Vec& x0, const Vec& xi0);

    // Advance the trajectory to time t (same sign as previous targets, larger
    // magnitude) and snapshot the dense-output state exactly at t.
    void advance_to(double t);

    double t() const { return t_snapshot_; }
    Vec x() const;
    Vec xi() const;
    Mat jacobian() const;  // 2d x jacobian_cols
    double action_u() const;
    double action_corr() const;
    double quad_V() const;
    double quad_xi() const;
    double energy0() const { return energy0_; }
    double max_drift() const { return max_drift_; }
    long steps() const { return steps_; }

    // called at every accepted step with (t, state span)
    std::function<void(double, const std::vector<double>&)> observer;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    const HamiltonianModel* model_;
    EngineSpec spec_;
    int d_;
    double abs_tol_, rel_tol_;
    long max_steps_;
    long steps_ = 0;
    double t_snapshot_ = 0.0;
    std::vector<double> snapshot_;
    double energy0_ = 0.0;
    double max_drift_ = 0.0;
    bool started_ = false;

    int idx_x() const { return 0; }
    int idx_xi() const { return d_; }
    int idx_jac() const { return 2 * d_; }
    int idx_action() const { return 2 * d_ + 2 * d_ * spec_.jacobian_cols; }
    int idx_quads() const { return idx_action() + (spec_.action ? 2 : 0); }
    int state_size() const { return idx_quads() + (spec_.psi_quads ? 2 : 0); }
};

}  // namespace lrscat::detail
