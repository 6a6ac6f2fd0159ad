#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "lrscat/geometry.hpp"

namespace lrscat {

// Central finite differences. Steps are relative: h_k = h0 * max(1, |x_k|).
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h0);
Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h0);

// One-dimensional central difference with absolute step.
double fd_derivative(const std::function<double(double)>& f, double t, double h);

// Least-squares slope of log(value) against log(scale). Values must be positive.
// Returns {slope, intercept}.
std::pair<double, double> loglog_fit(const std::vector<std::pair<double, double>>& samples);

// Tail extrapolation for values sampled at a geometric ladder of horizons
// T, 2T, 4T, ... assuming v(T) = v_inf + a T^{-e1} + b T^{-e2} (+ smaller).
// Uses the last three ladder entries; with fewer entries it degrades to a
// one-exponent step or the raw value. `change` reports the difference between
// the extrapolations from the last two windows (tail estimate).
struct TailExtrapolation {
    double value = 0.0;
    double change = 0.0;
};
TailExtrapolation extrapolate_tail(const std::vector<double>& horizons,
                                   const std::vector<double>& values,
                                   double e1, double e2);

// General form: v(T) = v_inf + sum_k a_k T^{-exps[k]}, fitted on the last
// exps.size()+1 ladder entries; `change` compares against the previous window.
TailExtrapolation extrapolate_tail_multi(const std::vector<double>& horizons,
                                         const std::vector<double>& values,
                                         const std::vector<double>& exps);

// Least-squares variant over all supplied ladder entries; better conditioned
// against per-rung noise than the exact fit. `change` compares against the
// fit with the last entry dropped.
TailExtrapolation extrapolate_tail_lsq(const std::vector<double>& horizons,
                                       const std::vector<double>& values,
                                       const std::vector<double>& exps, int extra = 2);

// Adaptive Gauss-Kronrod on [a, b] (finite). Throws QuadratureFailure if the
// requested tolerance cannot be reached.
double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double rel_tol, double abs_tol = 0.0);

// Integral over [0, inf) of a decaying integrand, via x = t/(1-t) substitution.
double integrate_semi_infinite(const std::function<double(double)>& f,
                               double rel_tol, double abs_tol = 0.0);

// C^inf step: 0 for s <= 0, 1 for s >= 1, strictly increasing in between.
double smooth_step(double s);
double smooth_step_prime(double s);

// FNV-1a hash of a byte string, for config provenance stamps.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace lrscat
