#include "lrscat/numeric.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <string>

#include "lrscat/errors.hpp"

namespace lrscat {

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h0) {
    Vec g(x.size());
    Vec xp = x;
    for (int k = 0; k < x.size(); ++k) {
        const double h = h0 * std::max(1.0, std::abs(x[k]));
        const double saved = x[k];
        xp[k] = saved + h;
        const double fp = f(xp);
        xp[k] = saved - h;
        const double fm = f(xp);
        xp[k] = saved;
        g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h0) {
    Mat J;
    Vec xp = x;
    for (int k = 0; k < x.size(); ++k) {
        const double h = h0 * std::max(1.0, std::abs(x[k]));
        const double saved = x[k];
        xp[k] = saved + h;
        Vec fp = f(xp);
        xp[k] = saved - h;
        Vec fm = f(xp);
        xp[k] = saved;
        if (J.size() == 0) J.resize(fp.size(), x.size());
        J.col(k) = (fp - fm) / (2.0 * h);
    }
    return J;
}

double fd_derivative(const std::function<double(double)>& f, double t, double h) {
    return (f(t + h) - f(t - h)) / (2.0 * h);
}

std::pair<double, double> loglog_fit(const std::vector<std::pair<double, double>>& samples) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(samples.size());
    for (const auto& [scale, value] : samples) {
        const double lx = std::log(scale);
        const double ly = std::log(value);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    return {slope, intercept};
}

TailExtrapolation extrapolate_tail(const std::vector<double>& horizons,
                                   const std::vector<double>& values,
                                   double e1, double e2) {
    const std::size_t n = values.size();
    TailExtrapolation out;
    if (n == 0) return out;
    if (n == 1) {
        out.value = values[0];
        out.change = std::abs(values[0]);
        return out;
    }
    auto one_exp = [&](std::size_t i, std::size_t j) {
        // v(T) = v + a T^{-e1} through entries i < j
        const double wi = std::pow(horizons[i], -e1), wj = std::pow(horizons[j], -e1);
        return (values[j] * wi - values[i] * wj) / (wi - wj);
    };
    if (n == 2) {
        out.value = one_exp(0, 1);
        out.change = std::abs(out.value - values[1]);
        return out;
    }
    auto two_exp = [&](std::size_t i) {
        // v(T) = v + a T^{-e1} + b T^{-e2} through entries i, i+1, i+2
        Eigen::Matrix3d A;
        Eigen::Vector3d rhs;
        for (int r = 0; r < 3; ++r) {
            const double T = horizons[i + r];
            A(r, 0) = 1.0;
            A(r, 1) = std::pow(T, -e1);
            A(r, 2) = std::pow(T, -e2);
            rhs(r) = values[i + r];
        }
        return A.fullPivLu().solve(rhs)(0);
    };
    const double best = two_exp(n - 3);
    const double prev = (n >= 4) ? two_exp(n - 4) : one_exp(n - 2, n - 1);
    out.value = best;
    out.change = std::abs(best - prev);
    return out;
}

TailExtrapolation extrapolate_tail_multi(const std::vector<double>& horizons,
                                         const std::vector<double>& values,
                                         const std::vector<double>& exps) {
    const std::size_t K = exps.size();
    const std::size_t n = values.size();
    auto fit_at = [&](std::size_t last) {  // window ends at index `last` (inclusive)
        const std::size_t m = K + 1;
        Eigen::MatrixXd A(m, m);
        Eigen::VectorXd rhs(m);
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t i = last + 1 - m + r;
            A(r, 0) = 1.0;
            for (std::size_t k = 0; k < K; ++k) A(r, k + 1) = std::pow(horizons[i], -exps[k]);
            rhs(r) = values[i];
        }
        return A.fullPivLu().solve(rhs)(0);
    };
    TailExtrapolation out;
    if (n < K + 1) {
        // not enough points for the full basis; fall back to fewer exponents
        if (n >= 2) {
            std::vector<double> fewer(exps.begin(), exps.begin() + (n - 1));
            return extrapolate_tail_multi(horizons, values, fewer);
        }
        out.value = values.empty() ? 0.0 : values.back();
        out.change = std::abs(out.value);
        return out;
    }
    out.value = fit_at(n - 1);
    if (n >= K + 2) {
        out.change = std::abs(out.value - fit_at(n - 2));
    } else {
        std::vector<double> fewer(exps.begin(), exps.end() - 1);
        out.change = std::abs(out.value - extrapolate_tail_multi(horizons, values, fewer).value);
    }
    return out;
}

TailExtrapolation extrapolate_tail_lsq(const std::vector<double>& horizons,
                                       const std::vector<double>& values,
                                       const std::vector<double>& exps, int extra) {
    const std::size_t n = values.size();
    const std::size_t K = exps.size();
    if (n < K + 1) return extrapolate_tail_multi(horizons, values, exps);
    // fit a suffix: early rungs are pre-asymptotic and would bias the fit
    auto fit = [&](std::size_t last) {  // inclusive end index
        const std::size_t count = std::min<std::size_t>(last + 1, K + 1 + extra);
        Eigen::MatrixXd A(count, K + 1);
        Eigen::VectorXd rhs(count);
        for (std::size_t r = 0; r < count; ++r) {
            const std::size_t i = last + 1 - count + r;
            A(r, 0) = 1.0;
            for (std::size_t k = 0; k < K; ++k) A(r, k + 1) = std::pow(horizons[i], -exps[k]);
            rhs(r) = values[i];
        }
        return A.colPivHouseholderQr().solve(rhs)(0);
    };
    TailExtrapolation out;
    out.value = fit(n - 1);
    out.change = (n >= K + 2) ? std::abs(out.value - fit(n - 2))
                              : std::abs(out.value - values.back());
    return out;
}

double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double rel_tol, double abs_tol) {
    double error = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, 12, rel_tol, &error);
    if (!(std::isfinite(value)) ||
        (error > rel_tol * std::abs(value) + abs_tol && error > 1e3 * rel_tol * std::abs(value))) {
        throw QuadratureFailure("adaptive quadrature did not converge");
    }
    return value;
}

double integrate_semi_infinite(const std::function<double(double)>& f,
                               double rel_tol, double abs_tol) {
    auto g = [&f](double t) {
        const double u = 1.0 - t;
        const double x = t / u;
        return f(x) / (u * u);
    };
    return integrate_gk(g, 0.0, 1.0, rel_tol, abs_tol);
}

namespace {
inline double bump(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }
inline double bump_prime(double u) {
    if (u <= 0.0) return 0.0;
    const double e = std::exp(-1.0 / u);
    return e / (u * u);
}
}  // namespace

double smooth_step(double s) {
    const double a = bump(s);
    const double b = bump(1.0 - s);
    return a / (a + b);
}

double smooth_step_prime(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double a = bump(s);
    const double b = bump(1.0 - s);
    const double ap = bump_prime(s);
    const double bp = -bump_prime(1.0 - s);
    const double denom = (a + b) * (a + b);
    return (ap * b - a * bp) / denom;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace lrscat
