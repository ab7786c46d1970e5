#pragma once

// SO(3) helpers: skew matrices, exponential and logarithm maps.
// Templated on the scalar so the beam element can differentiate through them.

#include "stentrom/core.hpp"

namespace stentrom {

template <typename S>
Eigen::Matrix<S, 3, 3> skew(const Eigen::Matrix<S, 3, 1>& v) {
    Eigen::Matrix<S, 3, 3> m;
    m << S(0), -v(2), v(1),
         v(2), S(0), -v(0),
         -v(1), v(0), S(0);
    return m;
}

/// Rodrigues formula. Small angles fall back to the second-order series.
inline Mat3 exp_so3(const Vec3& w) {
    const double th = w.norm();
    const Mat3 k = skew<double>(w);
    if (th < 1e-8) return Mat3::Identity() + k + 0.5 * k * k;
    return Mat3::Identity() + (std::sin(th) / th) * k + ((1.0 - std::cos(th)) / (th * th)) * k * k;
}

inline Mat3 rotation_about(const Vec3& axis, double angle) {
    return exp_so3(axis.normalized() * angle);
}

/// Rotation vector of R. Valid for angles in [0, pi).
///
/// Written without a square root at the identity so that forward-mode
/// derivatives stay finite there: the rotation vector is w * theta / sin(theta)
/// with w = vee(R - R^T) / 2, and theta / sin(theta) is expanded in sin^2.
template <typename S>
Eigen::Matrix<S, 3, 1> log_so3(const Eigen::Matrix<S, 3, 3>& r) {
    using std::atan2;
    using std::sqrt;
    Eigen::Matrix<S, 3, 1> w(S(0.5) * (r(2, 1) - r(1, 2)),
                             S(0.5) * (r(0, 2) - r(2, 0)),
                             S(0.5) * (r(1, 0) - r(0, 1)));
    const S s2 = w.squaredNorm();
    const S c = S(0.5) * (r.trace() - S(1));
    if (s2 < S(1e-2) && c > S(0)) {
        // asin(s)/s = 1 + s^2/6 + 3 s^4/40 + 5 s^6/112 + 35 s^8/1152
        const S f = S(1) + s2 * (S(1.0 / 6.0) + s2 * (S(3.0 / 40.0) + s2 * (S(5.0 / 112.0) + s2 * S(35.0 / 1152.0))));
        return w * f;
    }
    const S s = sqrt(s2);
    if (s < S(1e-12)) {
        // Angle close to pi: recover the axis from the symmetric part.
        Eigen::Matrix<S, 3, 3> b = (r + Eigen::Matrix<S, 3, 3>::Identity()) * S(0.5);
        int k = 0;
        for (int i = 1; i < 3; ++i)
            if (b(i, i) > b(k, k)) k = i;
        Eigen::Matrix<S, 3, 1> axis = b.col(k) / sqrt(b(k, k));
        return axis * S(kPi);
    }
    return w * (atan2(s, c) / s);
}

}  // namespace stentrom
