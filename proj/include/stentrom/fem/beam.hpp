#pragma once

// Two-node corotational beam with circular cross-section.
//
// The element frame follows the chord and the mean of the nodal triads; in that
// frame the deformation is small and the classical linear beam energy applies
// (axial, torsion, and two bending planes with the [4 2; 2 4] EI/L stiffness).
// Nodal rotations are multiplicative: R <- exp(spin) R.

#include "stentrom/rotation.hpp"

#include <unsupported/Eigen/AutoDiff>

namespace stentrom::fem {

struct BeamSection {
    double ea;  // axial stiffness E*A [N]
    double gj;  // torsional stiffness G*J [N mm^2]
    double ei;  // bending stiffness E*I [N mm^2]
};

struct BeamElement {
    int a;
    int b;
    double l0;
    Mat3 e0;  // initial element frame, columns (chord, e2, e3)
};

inline BeamElement make_beam(int a, int b, const Vec3& xa, const Vec3& xb) {
    const Vec3 d = xb - xa;
    const double l = d.norm();
    if (!(l > 0.0)) throw GeometryError("zero-length beam");
    const Vec3 e1 = d / l;
    const Vec3 e2 = e1.unitOrthogonal();
    BeamElement e{a, b, l, Mat3::Zero()};
    e.e0.col(0) = e1;
    e.e0.col(1) = e2;
    e.e0.col(2) = e1.cross(e2);
    return e;
}

template <typename S>
S corotational_energy(const BeamElement& e, const BeamSection& s, const Eigen::Matrix<S, 3, 1>& xa,
                      const Eigen::Matrix<S, 3, 1>& xb, const Eigen::Matrix<S, 3, 3>& ra,
                      const Eigen::Matrix<S, 3, 3>& rb) {
    using V = Eigen::Matrix<S, 3, 1>;
    using M = Eigen::Matrix<S, 3, 3>;
    using std::sqrt;
    const V d = xb - xa;
    const S l = sqrt(d.squaredNorm());
    const V r1 = d / l;
    const V e2 = e.e0.col(1).template cast<S>();
    const V q = S(0.5) * (ra * e2 + rb * e2);
    V r3 = r1.cross(q);
    r3 /= sqrt(r3.squaredNorm());
    const V r2 = r3.cross(r1);
    M rr;
    rr.col(0) = r1;
    rr.col(1) = r2;
    rr.col(2) = r3;
    const M e0 = e.e0.template cast<S>();
    const V ta = log_so3<S>(M(rr.transpose() * ra * e0));
    const V tb = log_so3<S>(M(rr.transpose() * rb * e0));

    const S u = l - S(e.l0);
    const S k_ax = S(s.ea / e.l0);
    const S k_t = S(s.gj / e.l0);
    const S k_b = S(s.ei / e.l0);
    const S tw = tb(0) - ta(0);
    return S(0.5) * k_ax * u * u + S(0.5) * k_t * tw * tw +
           S(2.0) * k_b * (ta(1) * ta(1) + ta(1) * tb(1) + tb(1) * tb(1)) +
           S(2.0) * k_b * (ta(2) * ta(2) + ta(2) * tb(2) + tb(2) * tb(2));
}

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

/// Energy and its gradient with respect to (dxa, spin_a, dxb, spin_b).
inline double corotational_gradient(const BeamElement& e, const BeamSection& s, const Vec3& xa, const Vec3& xb,
                                    const Mat3& ra, const Mat3& rb, Vec12& grad) {
    using AD = Eigen::AutoDiffScalar<Vec12>;
    using V = Eigen::Matrix<AD, 3, 1>;
    using M = Eigen::Matrix<AD, 3, 3>;
    std::array<AD, 12> d;
    for (int k = 0; k < 12; ++k) d[k] = AD(0.0, 12, k);
    const V pa(AD(xa(0)) + d[0], AD(xa(1)) + d[1], AD(xa(2)) + d[2]);
    const V pb(AD(xb(0)) + d[6], AD(xb(1)) + d[7], AD(xb(2)) + d[8]);
    // first-order spin perturbation (I + [w]x) R: exact gradient at w = 0
    const V wa(d[3], d[4], d[5]);
    const V wb(d[9], d[10], d[11]);
    const M rac = ra.cast<AD>();
    const M rbc = rb.cast<AD>();
    const M qa = rac + skew<AD>(wa) * rac;
    const M qb = rbc + skew<AD>(wb) * rbc;
    const AD en = corotational_energy<AD>(e, s, pa, pb, qa, qb);
    grad = en.derivatives();
    return en.value();
}

/// Internal force (energy gradient) and a tangent obtained by forward
/// differences of that gradient along the 12 generalized directions.
inline double corotational_force_tangent(const BeamElement& e, const BeamSection& s, const Vec3& xa, const Vec3& xb,
                                         const Mat3& ra, const Mat3& rb, Vec12& force, Mat12* tangent) {
    const double energy = corotational_gradient(e, s, xa, xb, ra, rb, force);
    if (!tangent) return energy;
    const double h = 1e-7 * std::max(1.0, e.l0);
    const double hr = 1e-7;
    Vec12 gp;
    for (int k = 0; k < 12; ++k) {
        const int blk = k / 3;
        const int c = k % 3;
        Vec3 pa = xa, pb = xb;
        Mat3 rpa = ra, rpb = rb;
        double step = h;
        Vec3 w = Vec3::Zero();
        w[c] = hr;
        switch (blk) {
            case 0: pa[c] += h; break;
            case 1: step = hr; rpa = exp_so3(w) * ra; break;
            case 2: pb[c] += h; break;
            default: step = hr; rpb = exp_so3(w) * rb; break;
        }
        corotational_gradient(e, s, pa, pb, rpa, rpb, gp);
        tangent->col(k) = (gp - force) / step;
    }
    return energy;
}

}  // namespace stentrom::fem
