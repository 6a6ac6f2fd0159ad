#pragma once

#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "lrscat/geometry.hpp"
#include "lrscat/model.hpp"

namespace lrscat {

struct NewtonOptions {
    double accept_tol = 1e-10;  // failure threshold on the final residual
    int max_iter = 50;
};

// Free-frame Hamilton-Jacobi solution phi(t,xi) = u(t, Lambda_t^{-1}(xi)) by
// characteristics: trajectories started at x0 = 0.
class HJSolution {
  public:
    explicit HJSolution(const HamiltonianModel& model, NewtonOptions newton = {});

    const HamiltonianModel& model() const { return *model_; }

    // action integral along the characteristic from (0, eta)
    double action_u(double t, const Vec& eta) const;

    // Lambda_t : eta -> xi(0, eta; t)
    Vec lambda_map(double t, const Vec& eta) const;

    // Newton inversion of Lambda_t with the variational d xi/d xi0 block as
    // Jacobian; initial guess defaults to xi itself.
    Vec invert_lambda(double t, const Vec& xi, const Vec* guess = nullptr) const;

    double phi(double t, const Vec& xi) const;
    Vec grad_phi(double t, const Vec& xi) const;        // = x(t, Lambda_t^{-1}(xi))
    double phi_minus_tp0(double t, const Vec& xi) const;  // cancellation-free
    Mat hess_phi(double t, const Vec& xi) const;        // d^2phi/dxi^2 = Mx Mxi^{-1}

    // Converged characteristic data at (t, xi); the building block above and
    // for the interaction picture. Pure function of (t, xi); `guess` only
    // seeds the Newton iteration.
    struct Companion {
        Vec eta;            // Lambda_t^{-1}(xi)
        Vec x_end, xi_end;  // endpoint of the flow from (0, eta)
        Mat Mx, Mxi;        // d x d variational blocks w.r.t. eta
        double u = 0.0;     // int p - x.grad V_R
        double corr = 0.0;  // int -x.grad V_R
        int iters = 0;
        double residual = 0.0;
    };
    Companion companion(double t, const Vec& xi, const Vec* guess = nullptr) const;

  private:
    const HamiltonianModel* model_;
    NewtonOptions newton_;

    // memo on exact (t, xi) keys; values do not depend on hit/miss since
    // companion() converges to its fixed point regardless of the seed
    struct Key {
        std::vector<std::uint64_t> bits;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::size_t h = 0xcbf29ce484222325ULL;
            for (auto b : k.bits) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
            return h;
        }
    };
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<Key, Companion, KeyHash> cache_;

    Key make_key(double t, const Vec& xi) const;
};

}  // namespace lrscat
