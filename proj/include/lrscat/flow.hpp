#pragma once

#include <vector>

#include "lrscat/geometry.hpp"
#include "lrscat/model.hpp"

namespace lrscat {

struct FlowOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double t_max = 1e6;
    bool with_jacobian = false;
    bool with_action = false;
    std::vector<double> sample_times;  // dense-output sampling; empty = accepted steps
    int store_every = 1;
    // The integrator runs tighter than the advertised tolerances so that the
    // energy-drift contract 10*rel_tol*|p| + 10*abs_tol holds with margin.
    double internal_safety = 1e-2;
    long max_steps = 4'000'000;
};

struct TrajectorySample {
    double t;
    Vec x, xi;
    double energy_drift;
    Mat jacobian;  // 2d x 2d, only filled when requested
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    double t_end = 0.0;
    PhasePoint end;
    Mat jacobian_end;  // 2d x 2d when requested
    double action_u = 0.0;     // integral of p - x.grad_x V_R along the flow
    double action_corr = 0.0;  // integral of -x.grad_x V_R (the u - t p0 part)
    double energy0 = 0.0;
    double max_energy_drift = 0.0;
    long steps = 0;
};

// Adaptive embedded Runge-Kutta (Dormand-Prince 5(4), dense output) solution
// of the Hamilton equations dx/dt = dp/dxi, dxi/dt = -dp/dx.
Trajectory integrate_flow(const HamiltonianModel& model, const PhasePoint& start, double t,
                          const FlowOptions& opts = {});

// Variational system alongside the flow; initial data is the identity block
// structure (dx/dx0 = E, dxi/dx0 = 0, etc.). Returns the full 2d x 2d Jacobian.
Mat flow_jacobian(const HamiltonianModel& model, const PhasePoint& start, double t,
                  const FlowOptions& opts = {});

// cos(x, v(xi)) = x.v / (|x||v|)
double cos_angle(const HamiltonianModel& model, const PhasePoint& p);

struct MinRadiusReport {
    double c_fit;      // inf over samples of |x(t)| / <x0;t>
    double min_ratio;  // inf over samples of |x(t)| / (<x0> + <t>)
};

// Integrates to sign*t_max and reports the trajectory lower-bound ratios.
// The initial datum must satisfy the out-going (sign=+1) / in-coming (sign=-1)
// condition sign*cos(x0, v(xi0)) >= beta.
MinRadiusReport min_radius_estimate(const HamiltonianModel& model, const PhasePoint& start,
                                    int sign, double t_max, double beta = -0.75,
                                    const FlowOptions& opts = {});

}  // namespace lrscat
