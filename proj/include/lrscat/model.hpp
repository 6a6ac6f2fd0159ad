#pragma once

#include <cstdint>
#include <string>

#include "lrscat/errors.hpp"
#include "lrscat/geometry.hpp"

namespace lrscat {

enum class P0Family { Quadratic, Relativistic, Cosine };
enum class PotentialFamily { Zero, Isotropic, Anisotropic };

P0Family p0_family_from_string(const std::string& s);
PotentialFamily potential_family_from_string(const std::string& s);
std::string to_string(P0Family f);
std::string to_string(PotentialFamily f);

struct ModelParams {
    int dimension = 2;
    P0Family p0 = P0Family::Quadratic;
    PotentialFamily potential = PotentialFamily::Isotropic;
    double coupling = 0.1;
    double mu = 0.5;
    double anisotropy = 0.5;     // the x1/<x> modulation strength of the anisotropic family
    double cutoff_radius = 0.0;  // <= 0 means "auto": calibrate R at construction
    double e0 = 0.45, e1 = 0.55;
    double epsilon0 = -1.0;      // < 0 means the default 0.1*(e1-e0)
};

struct CalibrationResult {
    double R = 0.0;
    double c4 = 0.0;  // min |v| over sampled Omega^0_{I6}
    double c5 = 0.0;  // observed min of {{|x|^2,p},p} over sampled Omega_{I5}
    double M = 0.0;   // momentum bound on Omega_{I6}
    int doublings = 0;
    int samples_used = 0;
};

// Immutable Hamiltonian symbol family p = p0(xi) + V_R(x) with the spatial
// cutoff V_R = chi1(|x|/R) V. All evaluators are pure.
class HamiltonianModel {
  public:
    static HamiltonianModel create(const ModelParams& params, int calib_samples = 4096,
                                   std::uint64_t seed = 42);

    int dimension() const { return params_.dimension; }
    const ModelParams& params() const { return params_; }
    const CalibrationResult& calibration() const { return calib_; }
    double R() const { return calib_.R; }
    double mu() const { return params_.mu; }
    double epsilon0() const { return eps0_; }
    bool potential_is_zero() const {
        return params_.potential == PotentialFamily::Zero || params_.coupling == 0.0;
    }

    // nested energy intervals I_k = [E0 - k eps0, E1 + k eps0], k = 0..6
    double interval_lo(int k) const { return params_.e0 - k * eps0_; }
    double interval_hi(int k) const { return params_.e1 + k * eps0_; }
    bool in_omega0(const Vec& xi, int k) const;        // p0(xi) in I_k
    bool in_omega(const Vec& x, const Vec& xi, int k) const;  // p(x,xi) in I_k

    // free symbol and velocity v = grad p0
    double p0(const Vec& xi) const;
    Vec v(const Vec& xi) const;

    // potential family (without cutoff) and analytic gradient
    double potential(const Vec& x) const;
    Vec grad_potential(const Vec& x) const;

    // cutoff potential V_R and analytic gradient
    double vR(const Vec& x) const;
    Vec grad_vR(const Vec& x) const;

    // full symbol and analytic first derivatives
    double p(const Vec& x, const Vec& xi) const { return p0(xi) + vR(x); }
    Vec grad_x_p(const Vec& x, const Vec& xi) const;
    Vec grad_xi_p(const Vec& x, const Vec& xi) const;

    // {{|x|^2,p},p}; outer bracket derivatives by central differences of the
    // analytic inner bracket (project FD policy, step max(1,|z|) eps^{1/3})
    double poisson_double_bracket(const Vec& x, const Vec& xi) const;

    // smooth transition chi1: 0 for s <= 1, 1 for s >= 2
    static double chi1(double s) ;
    static double chi1_prime(double s);

    // smooth energy window: 1 on I_{k_inner}, 0 outside I_{k_outer}
    double energy_window(double lambda, int k_inner, int k_outer) const;

  private:
    HamiltonianModel(const ModelParams& p, double eps0) : params_(p), eps0_(eps0) {}

    ModelParams params_;
    double eps0_;
    CalibrationResult calib_;

    friend CalibrationResult calibrate_R(const ModelParams& params, int sample_count,
                                         std::uint64_t seed);
};

// Doubles R from R_init until the convexity bound min {{|x|^2,p},p} >= c4^2/2
// holds on quasi-random samples of Omega_{I5}; fails after 20 doublings.
CalibrationResult calibrate_R(const ModelParams& params, int sample_count = 4096,
                              std::uint64_t seed = 42);

}  // namespace lrscat
