#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace lrscat {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Point in phase space.
struct PhasePoint {
    Vec x;
    Vec xi;
};

// Japanese bracket <x> = (1+|x|^2)^{1/2}.
inline double jbracket(double s) { return std::sqrt(1.0 + s * s); }
inline double jbracket(const Vec& x) { return std::sqrt(1.0 + x.squaredNorm()); }

// <x;t> = (1+|x|^2+t^2)^{1/2}
inline double jbracket(const Vec& x, double t) {
    return std::sqrt(1.0 + x.squaredNorm() + t * t);
}

}  // namespace lrscat
