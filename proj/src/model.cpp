#include "lrscat/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrscat/numeric.hpp"
#include "lrscat/sampling.hpp"

namespace lrscat {

namespace {
const double kFdStep = std::cbrt(std::numeric_limits<double>::epsilon());
}

P0Family p0_family_from_string(const std::string& s) {
    if (s == "quadratic") return P0Family::Quadratic;
    if (s == "relativistic") return P0Family::Relativistic;
    if (s == "cosine") return P0Family::Cosine;
    throw SchemaError("/model/p0", "unknown p0 family '" + s + "'");
}

PotentialFamily potential_family_from_string(const std::string& s) {
    if (s == "zero") return PotentialFamily::Zero;
    if (s == "isotropic") return PotentialFamily::Isotropic;
    if (s == "anisotropic") return PotentialFamily::Anisotropic;
    throw SchemaError("/model/potential", "unknown potential family '" + s + "'");
}

std::string to_string(P0Family f) {
    switch (f) {
        case P0Family::Quadratic: return "quadratic";
        case P0Family::Relativistic: return "relativistic";
        case P0Family::Cosine: return "cosine";
    }
    return "?";
}

std::string to_string(PotentialFamily f) {
    switch (f) {
        case PotentialFamily::Zero: return "zero";
        case PotentialFamily::Isotropic: return "isotropic";
        case PotentialFamily::Anisotropic: return "anisotropic";
    }
    return "?";
}

double HamiltonianModel::chi1(double s) { return smooth_step(s - 1.0); }
double HamiltonianModel::chi1_prime(double s) { return smooth_step_prime(s - 1.0); }

bool HamiltonianModel::in_omega0(const Vec& xi, int k) const {
    const double e = p0(xi);
    return e >= interval_lo(k) && e <= interval_hi(k);
}

bool HamiltonianModel::in_omega(const Vec& x, const Vec& xi, int k) const {
    const double e = p(x, xi);
    return e >= interval_lo(k) && e <= interval_hi(k);
}

double HamiltonianModel::p0(const Vec& xi) const {
    switch (params_.p0) {
        case P0Family::Quadratic: return 0.5 * xi.squaredNorm();
        case P0Family::Relativistic: return std::sqrt(1.0 + xi.squaredNorm());
        case P0Family::Cosine: {
            double s = 0.0;
            for (int j = 0; j < xi.size(); ++j) s += 1.0 - std::cos(xi[j]);
            return s;
        }
    }
    return 0.0;
}

Vec HamiltonianModel::v(const Vec& xi) const {
    switch (params_.p0) {
        case P0Family::Quadratic: return xi;
        case P0Family::Relativistic: return xi / std::sqrt(1.0 + xi.squaredNorm());
        case P0Family::Cosine: {
            Vec out(xi.size());
            for (int j = 0; j < xi.size(); ++j) out[j] = std::sin(xi[j]);
            return out;
        }
    }
    return xi;
}

double HamiltonianModel::potential(const Vec& x) const {
    switch (params_.potential) {
        case PotentialFamily::Zero: return 0.0;
        case PotentialFamily::Isotropic:
            return params_.coupling * std::pow(1.0 + x.squaredNorm(), -0.5 * params_.mu);
        case PotentialFamily::Anisotropic: {
            const double w2 = 1.0 + x.squaredNorm();
            const double w = std::sqrt(w2);
            const double radial = params_.coupling * std::pow(w2, -0.5 * params_.mu);
            return radial * (1.0 + params_.anisotropy * x[0] / w);
        }
    }
    return 0.0;
}

Vec HamiltonianModel::grad_potential(const Vec& x) const {
    const int d = dimension();
    Vec g = Vec::Zero(d);
    switch (params_.potential) {
        case PotentialFamily::Zero: break;
        case PotentialFamily::Isotropic: {
            const double w2 = 1.0 + x.squaredNorm();
            g = -params_.coupling * params_.mu * std::pow(w2, -0.5 * params_.mu - 1.0) * x;
            break;
        }
        case PotentialFamily::Anisotropic: {
            const double w2 = 1.0 + x.squaredNorm();
            const double w = std::sqrt(w2);
            const double A = params_.coupling * std::pow(w2, -0.5 * params_.mu);
            const double B = 1.0 + params_.anisotropy * x[0] / w;
            Vec gA = -params_.mu * A / w2 * x;
            Vec gB = -params_.anisotropy * x[0] / (w * w2) * x;
            gB[0] += params_.anisotropy / w;
            g = gA * B + A * gB;
            break;
        }
    }
    return g;
}

double HamiltonianModel::vR(const Vec& x) const {
    if (potential_is_zero()) return 0.0;
    const double r = x.norm();
    if (r <= calib_.R) return 0.0;
    return chi1(r / calib_.R) * potential(x);
}

Vec HamiltonianModel::grad_vR(const Vec& x) const {
    if (potential_is_zero()) return Vec::Zero(dimension());
    const double r = x.norm();
    if (r <= calib_.R) return Vec::Zero(dimension());
    const double s = r / calib_.R;
    Vec g = chi1(s) * grad_potential(x);
    const double cp = chi1_prime(s);
    if (cp != 0.0) g += (cp * potential(x) / (calib_.R * r)) * x;
    return g;
}

Vec HamiltonianModel::grad_x_p(const Vec& x, const Vec& xi) const {
    (void)xi;
    return grad_vR(x);
}

Vec HamiltonianModel::grad_xi_p(const Vec& x, const Vec& xi) const {
    (void)x;
    return v(xi);
}

double HamiltonianModel::poisson_double_bracket(const Vec& x, const Vec& xi) const {
    // inner bracket {|x|^2, p} = 2 x . grad_xi p, analytic
    auto inner = [this](const Vec& xx, const Vec& xxi) {
        return 2.0 * xx.dot(grad_xi_p(xx, xxi));
    };
    const int d = dimension();
    const Vec gx = grad_x_p(x, xi);
    const Vec gxi = grad_xi_p(x, xi);
    double out = 0.0;
    Vec xp = x, xip = xi;
    for (int j = 0; j < d; ++j) {
        const double hx = kFdStep * std::max(1.0, std::abs(x[j]));
        double saved = x[j];
        xp[j] = saved + hx;
        const double fxp = inner(xp, xi);
        xp[j] = saved - hx;
        const double fxm = inner(xp, xi);
        xp[j] = saved;
        const double dFdx = (fxp - fxm) / (2.0 * hx);

        const double hxi = kFdStep * std::max(1.0, std::abs(xi[j]));
        saved = xi[j];
        xip[j] = saved + hxi;
        const double fip = inner(x, xip);
        xip[j] = saved - hxi;
        const double fim = inner(x, xip);
        xip[j] = saved;
        const double dFdxi = (fip - fim) / (2.0 * hxi);

        out += dFdx * gxi[j] - dFdxi * gx[j];
    }
    return out;
}

double HamiltonianModel::energy_window(double lambda, int k_inner, int k_outer) const {
    const double width = (k_outer - k_inner) * eps0_;
    const double lo = smooth_step((lambda - interval_lo(k_outer)) / width);
    const double hi = smooth_step((interval_hi(k_outer) - lambda) / width);
    return lo * hi;
}

namespace {

// Momentum bound M with p0 > E1 + 6 eps0 + |c| outside |xi| <= M.
double momentum_bound(const HamiltonianModel& m) {
    const auto& prm = m.params();
    const double upper = m.interval_hi(6) + std::abs(prm.coupling);
    if (prm.p0 == P0Family::Cosine) {
        // bounded band; fundamental cube [-pi, pi]^d
        return M_PI * std::sqrt(static_cast<double>(prm.dimension));
    }
    Vec dir = Vec::Zero(prm.dimension);
    dir[0] = 1.0;
    double lo = 0.0, hi = 1.0;
    while (m.p0(hi * dir) <= upper) {
        hi *= 2.0;
        if (hi > 1e8) throw CalibrationFailed("momentum bound bisection diverged");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (m.p0(mid * dir) <= upper ? lo : hi) = mid;
    }
    return 1.1 * hi;
}

}  // namespace

CalibrationResult calibrate_R(const ModelParams& params, int sample_count, std::uint64_t seed) {
    ModelParams prm = params;
    const double eps0 = prm.epsilon0 > 0 ? prm.epsilon0 : 0.1 * (prm.e1 - prm.e0);
    if (prm.e1 <= prm.e0) throw PreconditionViolation("energy interval is empty");
    HamiltonianModel probe(prm, eps0);
    probe.calib_.R = std::max(prm.cutoff_radius, 1.0);

    CalibrationResult result;
    result.M = momentum_bound(probe);
    const int d = prm.dimension;
    const double xi_box = prm.p0 == P0Family::Cosine ? M_PI : result.M;

    // c4 = min |v| over sampled Omega^0_{I6}
    {
        HaltonSampler xi_sampler(d, mix_seed(seed, 11));
        double c4 = std::numeric_limits<double>::infinity();
        int accepted = 0;
        for (int i = 0; i < 400 * sample_count && accepted < sample_count; ++i) {
            Vec xi = xi_sampler.next_box(xi_box);
            if (!probe.in_omega0(xi, 6)) continue;
            ++accepted;
            c4 = std::min(c4, probe.v(xi).norm());
        }
        if (accepted < std::max(16, sample_count / 64))
            throw PreconditionViolation("energy shell Omega^0_{I6} not reachable by sampling");
        if (!(c4 > 1e-8))
            throw PreconditionViolation("velocity lower bound |v| >= c4 > 0 fails on Omega^0_{I6}");
        result.c4 = c4;
    }

    const bool zero = prm.potential == PotentialFamily::Zero || prm.coupling == 0.0;
    double R = prm.cutoff_radius > 0 ? prm.cutoff_radius : 1.0;
    const double threshold = 0.5 * result.c4 * result.c4;

    for (int doubling = 0; doubling <= 20; ++doubling) {
        probe.calib_.R = R;
        HaltonSampler box_sampler(2 * d, mix_seed(seed, 101 + doubling));
        HaltonSampler shell_sampler(2 * d, mix_seed(seed, 501 + doubling));
        double min_bracket = std::numeric_limits<double>::infinity();
        int accepted = 0;
        const int goal = sample_count;
        for (int i = 0; i < 400 * goal && accepted < goal; ++i) {
            Vec z;
            if (i % 2 == 0) {
                z = box_sampler.next_box(1.0);
                for (int k = 0; k < d; ++k) z[k] *= 1e3;
            } else {
                // the shell |x| in [0.9R, 2.2R] is where the cutoff derivatives live
                z = shell_sampler.next_box(1.0);
                const double u = 0.5 * (z[0] + 1.0);
                const double radius = (0.9 + 1.3 * u) * R;
                Vec dir(d);
                if (d == 1) {
                    dir[0] = z.size() > 1 && z[1] >= 0 ? 1.0 : -1.0;
                } else {
                    double angle = M_PI * z[1];
                    dir[0] = std::cos(angle);
                    dir[1] = std::sin(angle);
                    for (int k = 2; k < d; ++k) dir[k] = 0.0;
                    if (d > 2) {
                        // mix remaining coordinates through extra Halton dims
                        for (int k = 2; k < d; ++k) dir[k] = z[k];
                        dir.normalize();
                    }
                }
                z.head(d) = radius * dir;
            }
            Vec x = z.head(d);
            Vec xi(d);
            for (int k = 0; k < d; ++k) xi[k] = z[d + k] * xi_box;
            if (!probe.in_omega(x, xi, 5)) continue;
            ++accepted;
            min_bracket = std::min(min_bracket, probe.poisson_double_bracket(x, xi));
        }
        result.samples_used = accepted;
        if (accepted < std::max(16, goal / 64))
            throw PreconditionViolation("Omega_{I5} not reachable by sampling");
        if (min_bracket >= threshold) {
            result.R = R;
            result.c5 = min_bracket;
            result.doublings = doubling;
            return result;
        }
        if (zero || prm.cutoff_radius > 0) {
            // explicit R or zero potential: no doubling to do
            throw CalibrationFailed("convexity bound fails at the requested cutoff radius");
        }
        R *= 2.0;
    }
    throw CalibrationFailed(
        "no cutoff radius R satisfies the convexity bound after 20 doublings; "
        "the potential is too strong for this regime");
}

HamiltonianModel HamiltonianModel::create(const ModelParams& params, int calib_samples,
                                          std::uint64_t seed) {
    ModelParams prm = params;
    if (prm.dimension < 1) throw SchemaError("/model/dimension", "must be >= 1");
    if (!(prm.mu > 0.0 && prm.mu < 1.0)) throw SchemaError("/model/mu", "must be in (0,1)");
    const double eps0 = prm.epsilon0 > 0 ? prm.epsilon0 : 0.1 * (prm.e1 - prm.e0);
    HamiltonianModel model(prm, eps0);
    model.calib_ = calibrate_R(prm, calib_samples, seed);
    return model;
}

}  // namespace lrscat
