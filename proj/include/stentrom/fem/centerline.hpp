#pragma once

// Stent centerline kinematics used to steer the crimped stent into the vessel:
// projection of the straight centerline onto the vessel centerline, per-segment
// realignment rotations, their cumulative products, and partial-rotation paths.

#include "stentrom/rotation.hpp"
#include "stentrom/vessel.hpp"

namespace stentrom::fem {

struct CenterlinePath {
    std::vector<Vec3> points;

    std::size_t size() const { return points.size(); }

    /// seg_i = R_i - R_{i-1}, i = 1..N-1 (stored at index i-1).
    std::vector<Vec3> segments() const {
        std::vector<Vec3> s;
        for (std::size_t i = 1; i < points.size(); ++i) s.push_back(points[i] - points[i - 1]);
        return s;
    }

    double length() const {
        double l = 0.0;
        for (std::size_t i = 1; i < points.size(); ++i) l += (points[i] - points[i - 1]).norm();
        return l;
    }

    CenterlinePath translated(const Vec3& d) const {
        CenterlinePath p = *this;
        for (auto& x : p.points) x += d;
        return p;
    }
};

struct SegmentRotation {
    Vec3 axis;
    double angle;

    Mat3 matrix(double fraction = 1.0) const { return rotation_about(axis, fraction * angle); }
};

/// Rotation realigning seg_i onto seg_{i-1}; the segment preceding the first one
/// is `reference` (the stent axis, +z).
inline std::vector<SegmentRotation> segment_rotations(const CenterlinePath& c, const Vec3& reference = Vec3::UnitZ()) {
    const auto segs = c.segments();
    std::vector<SegmentRotation> out;
    out.reserve(segs.size());
    Vec3 prev = reference;
    for (const auto& s : segs) {
        const double ls = s.norm();
        const double lp = prev.norm();
        if (!(ls > 0.0) || !(lp > 0.0)) throw GeometryError("zero-length centerline segment");
        const Vec3 cr = s.cross(prev) / (ls * lp);
        const double sn = cr.norm();
        const double cs = s.dot(prev) / (ls * lp);
        SegmentRotation r{Vec3::UnitX(), 0.0};
        if (sn > 1e-14) {
            r.axis = cr / sn;
            r.angle = std::atan2(sn, cs);
        } else if (cs < 0.0) {
            // antiparallel: any axis perpendicular to the segment
            Vec3 a = s.unitOrthogonal();
            r.axis = a;
            r.angle = kPi;
        }
        out.push_back(r);
        prev = s;
    }
    return out;
}

/// M_tot,i = M_1 M_2 ... M_i, each M_k rotating by `fraction` of its angle.
inline std::vector<Mat3> cumulative_rotations(const std::vector<SegmentRotation>& rots, double fraction = 1.0) {
    std::vector<Mat3> out;
    out.reserve(rots.size());
    Mat3 acc = Mat3::Identity();
    for (const auto& r : rots) {
        acc = acc * r.matrix(fraction);
        out.push_back(acc);
    }
    return out;
}

/// Applies the cumulative rotations to every segment, keeping R_0 fixed.
inline CenterlinePath straighten(const CenterlinePath& c) {
    const auto rots = cumulative_rotations(segment_rotations(c));
    const auto segs = c.segments();
    CenterlinePath out;
    out.points.push_back(c.points.front());
    for (std::size_t i = 0; i < segs.size(); ++i) out.points.push_back(out.points.back() + rots[i] * segs[i]);
    return out;
}

/// Places the straight centerline on the vessel: R_0 at arc-length fraction eta,
/// every following point on the vessel polyline at the original chord distance
/// from its predecessor.
inline CenterlinePath project_centerline(const CenterlinePath& c0, const Polyline& vessel, double eta) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("deployment site eta must lie in [0,1]");
    if (c0.size() < 2) throw GeometryError("centerline needs at least two points");
    const auto& pts = vessel.points();
    const double s0 = eta * vessel.length();
    if (c0.length() > vessel.length() - s0 + 1e-12) throw GeometryError("stent overruns the vessel end");

    CenterlinePath out;
    Vec3 cur = vessel.point_at(s0);
    out.points.push_back(cur);
    // locate the polyline segment holding R_0
    std::size_t seg = 0;
    while (seg + 1 < vessel.segments() && vessel.arc_length_at(seg + 1) < s0) ++seg;
    double t_start = 0.0;
    {
        const double l = vessel.arc_length_at(seg + 1) - vessel.arc_length_at(seg);
        t_start = l > 0 ? (s0 - vessel.arc_length_at(seg)) / l : 0.0;
    }
    const auto segs = c0.segments();
    for (const auto& s : segs) {
        const double ell = s.norm();
        if (!(ell > 0.0)) throw GeometryError("zero-length centerline segment");
        bool placed = false;
        for (; seg < vessel.segments(); ++seg, t_start = 0.0) {
            const Vec3& a = pts[seg];
            const Vec3& b = pts[seg + 1];
            if ((b - cur).norm() < ell) continue;
            const Vec3 d = b - a;
            const Vec3 w = a - cur;
            const double qa = d.squaredNorm();
            const double qb = 2.0 * d.dot(w);
            const double qc = w.squaredNorm() - ell * ell;
            const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
            const double t = std::max(t_start, (-qb + std::sqrt(disc)) / (2.0 * qa));
            cur = a + std::min(t, 1.0) * d;
            t_start = std::min(t, 1.0);
            placed = true;
            break;
        }
        if (!placed) throw GeometryError("stent overruns the vessel end");
        out.points.push_back(cur);
    }
    return out;
}

/// Intermediate centerline: each rotation of C_T applied with the given fraction
/// to the straight, z-aligned C_0. fraction 0 gives C_0 and 1 gives C_T.
inline CenterlinePath path_at_fraction(const CenterlinePath& c0, const CenterlinePath& ct, double fraction) {
    if (c0.size() != ct.size() || c0.size() < 2) throw GeometryError("centerline point counts differ");
    const auto segs0 = c0.segments();
    const auto segst = ct.segments();
    for (std::size_t i = 0; i < segs0.size(); ++i) {
        const double l0 = segs0[i].norm();
        const double lt = segst[i].norm();
        if (std::abs(l0 - lt) > 1e-6 * std::max(1.0, l0)) throw GeometryError("segment lengths of C_0 and C_T differ");
        if ((segs0[i] / l0 - Vec3::UnitZ()).norm() > 1e-6) throw GeometryError("C_0 must be straight along +z");
    }
    const auto rots = cumulative_rotations(segment_rotations(ct), fraction);
    CenterlinePath out;
    out.points.push_back((1.0 - fraction) * c0.points.front() + fraction * ct.points.front());
    for (std::size_t i = 0; i < segst.size(); ++i)
        out.points.push_back(out.points.back() + rots[i].transpose() * (segst[i].norm() * Vec3::UnitZ()));
    return out;
}

/// Paths for steps k = 1..n_steps (the last one is C_T).
inline std::vector<CenterlinePath> interpolate_path(const CenterlinePath& c0, const CenterlinePath& ct, int n_steps) {
    if (n_steps < 1) throw DomainError("n_steps must be >= 1");
    std::vector<CenterlinePath> out;
    for (int k = 1; k <= n_steps; ++k) out.push_back(path_at_fraction(c0, ct, double(k) / n_steps));
    return out;
}

/// Orientation of every ring on a path: maps +z onto the local tangent (the
/// bisector of the adjacent segments for interior rings).
inline std::vector<Mat3> ring_frames(const CenterlinePath& c) {
    const auto rots = segment_rotations(c);
    const auto cum = cumulative_rotations(rots);
    const std::size_t n = c.size();
    std::vector<Mat3> out(n);
    out[0] = cum[0].transpose();
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = rots[i].matrix(0.5).transpose() * cum[i - 1].transpose();
    out[n - 1] = cum[n - 2].transpose();
    return out;
}

}  // namespace stentrom::fem
