#pragma once

// Parametric idealized artery with a saccular aneurysm.
//
// The artery is a constant-diameter tube around a planar quadratic Bezier
// centerline; the aneurysm is a sphere whose centre sits above the centerline
// midpoint. The wall is the boundary of the union of both solids and is
// queried through a signed distance (negative inside the lumen or sac).

#include "stentrom/core.hpp"
#include "stentrom/io/binary.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>

namespace stentrom {

struct BezierCenterline {
    Vec3 p0{0, 0, 0};
    Vec3 p1{0, 0, 10};
    Vec3 p2{0, 0, 20};

    void validate() const {
        if (std::abs(p0.x() - p1.x()) > 1e-12 || std::abs(p0.x() - p2.x()) > 1e-12)
            throw DomainError("Bezier control points must share the same x coordinate");
        if ((p0 - p2).norm() <= 0.0) throw DomainError("Bezier end points must differ");
    }

    Vec3 tangent(double t) const { return 2.0 * (1.0 - t) * (p1 - p0) + 2.0 * t * (p2 - p1); }
};

inline Vec3 bezier_point(const BezierCenterline& c, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("Bezier parameter outside [0,1]");
    const double s = 1.0 - t;
    return s * s * c.p0 + 2.0 * t * s * c.p1 + t * t * c.p2;
}

/// Closest point on a segment, returned as the clamped parameter in [0,1].
inline double segment_closest_param(const Vec3& a, const Vec3& b, const Vec3& p) {
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return 0.0;
    return std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
}

/// Piecewise-linear curve with cumulative arc length.
class Polyline {
public:
    Polyline() = default;

    explicit Polyline(std::vector<Vec3> pts) : pts_(std::move(pts)) {
        if (pts_.size() < 2) throw GeometryError("polyline needs at least two points");
        cum_.assign(pts_.size(), 0.0);
        mid_.resize(pts_.size() - 1);
        half_.resize(pts_.size() - 1);
        for (std::size_t i = 1; i < pts_.size(); ++i) {
            const double l = (pts_[i] - pts_[i - 1]).norm();
            cum_[i] = cum_[i - 1] + l;
            mid_[i - 1] = 0.5 * (pts_[i] + pts_[i - 1]);
            half_[i - 1] = 0.5 * l;
        }
        for (std::size_t b = 0; b < mid_.size(); b += kBlock) {
            const std::size_t e = std::min(mid_.size(), b + kBlock);
            Vec3 c = 0.5 * (pts_[b] + pts_[e]);
            double r = 0.0;
            for (std::size_t i = b; i <= e; ++i) r = std::max(r, (pts_[i] - c).norm());
            blocks_.push_back({c, r, b, e});
        }
    }

    const std::vector<Vec3>& points() const { return pts_; }
    std::size_t segments() const { return pts_.size() - 1; }
    double length() const { return cum_.back(); }
    double arc_length_at(std::size_t i) const { return cum_[i]; }

    struct Closest {
        double distance;
        std::size_t segment;
        double t;  // parameter within the segment
        Vec3 point;
    };

    /// Exact closest point over all segments. Blocks of segments are visited
    /// nearest first and skipped once their bounding sphere lies beyond the
    /// current best.
    Closest closest(const Vec3& p) const {
        Closest best{std::numeric_limits<double>::infinity(), 0, 0.0, pts_.front()};
        double best2 = best.distance;
        thread_local std::vector<std::pair<double, std::size_t>> order;
        order.clear();
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            order.emplace_back((p - blocks_[b].center).norm() - blocks_[b].radius, b);
        std::sort(order.begin(), order.end());
        for (const auto& [lb, b] : order) {
            if (lb > best.distance) break;
            for (std::size_t s = blocks_[b].begin; s < blocks_[b].end; ++s) {
                const double dm = (p - mid_[s]).norm() - half_[s];
                if (dm > best.distance) continue;
                const double t = segment_closest_param(pts_[s], pts_[s + 1], p);
                const Vec3 q = pts_[s] + t * (pts_[s + 1] - pts_[s]);
                const double d2 = (p - q).squaredNorm();
                if (d2 < best2) {
                    best2 = d2;
                    best = {std::sqrt(d2), s, t, q};
                }
            }
        }
        return best;
    }

    double arc_length_of(const Closest& c) const {
        return cum_[c.segment] + c.t * (cum_[c.segment + 1] - cum_[c.segment]);
    }

    Vec3 point_at(double s) const {
        if (s <= 0.0) return pts_.front();
        if (s >= length()) return pts_.back();
        const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
        const std::size_t i = static_cast<std::size_t>(it - cum_.begin()) - 1;
        const double seg = cum_[i + 1] - cum_[i];
        const double t = seg > 0 ? (s - cum_[i]) / seg : 0.0;
        return pts_[i] + t * (pts_[i + 1] - pts_[i]);
    }

private:
    static constexpr std::size_t kBlock = 16;
    struct Block {
        Vec3 center;
        double radius;
        std::size_t begin, end;
    };
    std::vector<Vec3> pts_;
    std::vector<double> cum_;
    std::vector<Vec3> mid_;
    std::vector<double> half_;
    std::vector<Block> blocks_;
};

inline Polyline discretize(const BezierCenterline& c, int n_segments) {
    if (n_segments < 1) throw DomainError("polyline needs at least one segment");
    std::vector<Vec3> pts(static_cast<std::size_t>(n_segments) + 1);
    for (int i = 0; i <= n_segments; ++i) pts[static_cast<std::size_t>(i)] = bezier_point(c, double(i) / n_segments);
    return Polyline(std::move(pts));
}

/// The five geometric parameters of the idealized vessel.
struct VesselParams {
    double y_p1 = 0.0;        // [mm]
    double z_p1 = 10.0;       // [mm]
    double d_vessel = 3.0;    // [mm]
    double d_aneurysm = 7.0;  // [mm]
    double y_ca = 4.0;        // [mm] offset of the sac centre from B(0.5)
};

class VesselModel {
public:
    static constexpr int kDefaultPolyline = 400;

    VesselModel(BezierCenterline c, double d_vessel, double d_aneurysm, double y_offset,
                int n_polyline = kDefaultPolyline)
        : c_(c), dv_(d_vessel), da_(d_aneurysm), n_(n_polyline) {
        c_.validate();
        if (!(dv_ > 0.0) || !(da_ > 0.0)) throw DomainError("vessel and aneurysm diameters must be positive");
        if (n_ < 1) throw DomainError("n_polyline must be positive");
        ca_ = bezier_point(c_, 0.5) + Vec3(0.0, y_offset, 0.0);
        line_ = discretize(c_, n_);
    }

    /// Builds the vessel from the five geometry parameters; P0 and P2 are fixed.
    static VesselModel from_params(const VesselParams& p, const Vec3& p0, const Vec3& p2,
                                   int n_polyline = kDefaultPolyline) {
        BezierCenterline c{p0, Vec3(p0.x(), p.y_p1, p.z_p1), p2};
        return VesselModel(c, p.d_vessel, p.d_aneurysm, p.y_ca, n_polyline);
    }

    const BezierCenterline& centerline() const { return c_; }
    const Polyline& polyline() const { return line_; }
    double vessel_diameter() const { return dv_; }
    double aneurysm_diameter() const { return da_; }
    const Vec3& aneurysm_center() const { return ca_; }
    double aneurysm_offset() const { return ca_.y() - bezier_point(c_, 0.5).y(); }
    int n_polyline() const { return n_; }

    double tube_distance(const Vec3& p) const { return line_.closest(p).distance - 0.5 * dv_; }
    double sphere_distance(const Vec3& p) const { return (p - ca_).norm() - 0.5 * da_; }

    /// Min-union signed distance: negative inside the lumen or the sac.
    double distance(const Vec3& p) const { return std::min(tube_distance(p), sphere_distance(p)); }

    /// Gradient of distance(); falls back to +y on the medial axis.
    Vec3 normal(const Vec3& p) const {
        const auto c = line_.closest(p);
        const double dt = c.distance - 0.5 * dv_;
        const Vec3 ds = p - ca_;
        const bool tube = dt <= ds.norm() - 0.5 * da_;
        const Vec3 g = tube ? Vec3(p - c.point) : ds;
        const double n = g.norm();
        return n > 1e-12 ? Vec3(g / n) : Vec3::UnitY();
    }

    /// Jacobian of normal(), i.e. the Hessian of the distance.
    Mat3 normal_jacobian(const Vec3& p) const {
        const auto c = line_.closest(p);
        const Vec3 ds = p - ca_;
        const bool tube = c.distance - 0.5 * dv_ <= ds.norm() - 0.5 * da_;
        const Vec3 g = tube ? Vec3(p - c.point) : ds;
        const double rho = g.norm();
        if (rho < 1e-12) return Mat3::Zero();
        const Vec3 n = g / rho;
        Mat3 j = Mat3::Identity() - n * n.transpose();
        if (tube && c.t > 0.0 && c.t < 1.0) {
            const auto& pts = line_.points();
            const Vec3 t = (pts[c.segment + 1] - pts[c.segment]).normalized();
            j -= t * t.transpose();
        }
        return j / rho;
    }

    /// Axis-aligned box of {P0, P1, P2, C_a} inflated by D_a/2 + margin.
    std::pair<Vec3, Vec3> bounding_box(double margin = 2.0) const {
        Vec3 lo = c_.p0.cwiseMin(c_.p1).cwiseMin(c_.p2).cwiseMin(ca_);
        Vec3 hi = c_.p0.cwiseMax(c_.p1).cwiseMax(c_.p2).cwiseMax(ca_);
        const double pad = 0.5 * da_ + margin;
        return {lo.array() - pad, hi.array() + pad};
    }

private:
    BezierCenterline c_;
    double dv_;
    double da_;
    int n_;
    Vec3 ca_;
    Polyline line_;
};

inline double sdf_eval(const VesselModel& v, const Vec3& p) { return v.distance(p); }

/// Anything exposing a signed distance query.
template <typename F>
concept SignedDistanceField = requires(const F& f, const Vec3& p) {
    { f.distance(p) } -> std::convertible_to<double>;
};

/// Unit normal of the field: analytic when the field provides normal(),
/// central differences otherwise.
template <SignedDistanceField F>
Vec3 sdf_gradient(const F& f, const Vec3& p, double h = 1e-6) {
    if constexpr (requires { { f.normal(p) } -> std::convertible_to<Vec3>; }) {
        return f.normal(p);
    }
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
        Vec3 a = p, b = p;
        a[k] += h;
        b[k] -= h;
        g[k] = (f.distance(a) - f.distance(b)) / (2.0 * h);
    }
    const double n = g.norm();
    if (!(n >= 1e-12)) throw GeometryError("degenerate signed-distance gradient");
    return g / n;
}

/// Jacobian of the unit normal: analytic when the field provides it, central
/// differences of sdf_gradient otherwise.
template <SignedDistanceField F>
Mat3 sdf_normal_jacobian(const F& f, const Vec3& p, double h = 1e-6) {
    if constexpr (requires { { f.normal_jacobian(p) } -> std::convertible_to<Mat3>; }) {
        return f.normal_jacobian(p);
    }
    Mat3 j;
    for (int k = 0; k < 3; ++k) {
        Vec3 a = p, b = p;
        a[k] += h;
        b[k] -= h;
        j.col(k) = (sdf_gradient(f, a) - sdf_gradient(f, b)) / (2.0 * h);
    }
    return 0.5 * (j + j.transpose());
}

/// Signed distance sampled on a regular grid, x index fastest.
class SdfGrid {
public:
    SdfGrid() = default;
    SdfGrid(Vec3 origin, double spacing, std::array<std::uint32_t, 3> dims)
        : origin_(origin), h_(spacing), dims_(dims) {
        if (!(spacing > 0.0)) throw DomainError("grid spacing must be positive");
        for (auto d : dims)
            if (d < 2) throw DomainError("grid needs at least two nodes per direction");
        values_.assign(std::size_t(dims[0]) * dims[1] * dims[2], 0.0f);
    }

    const Vec3& origin() const { return origin_; }
    double spacing() const { return h_; }
    const std::array<std::uint32_t, 3>& dims() const { return dims_; }
    std::vector<float>& values() { return values_; }
    const std::vector<float>& values() const { return values_; }

    std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return i + std::size_t(dims_[0]) * (j + std::size_t(dims_[1]) * k);
    }
    float at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const { return values_[index(i, j, k)]; }
    Vec3 node(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
        return origin_ + h_ * Vec3(double(i), double(j), double(k));
    }

    struct Sample {
        double value;
        bool clamped;
    };

    /// Trilinear interpolation; points outside the box are clamped onto it.
    Sample query(const Vec3& p) const {
        bool clamped = false;
        std::array<std::uint32_t, 3> i0{};
        std::array<double, 3> f{};
        for (int a = 0; a < 3; ++a) {
            double u = (p[a] - origin_[a]) / h_;
            const double umax = double(dims_[a] - 1);
            if (u < 0.0 || u > umax) {
                clamped = true;
                u = std::clamp(u, 0.0, umax);
            }
            auto c = static_cast<std::uint32_t>(std::floor(u));
            if (c >= dims_[a] - 1) c = dims_[a] - 2;
            i0[a] = c;
            f[a] = u - double(c);
        }
        double v = 0.0;
        for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) {
                    const double w = (di ? f[0] : 1.0 - f[0]) * (dj ? f[1] : 1.0 - f[1]) * (dk ? f[2] : 1.0 - f[2]);
                    if (w != 0.0) v += w * double(at(i0[0] + di, i0[1] + dj, i0[2] + dk));
                }
        return {v, clamped};
    }

    double distance(const Vec3& p) const { return query(p).value; }

    void write(std::ostream& os) const {
        io::BinaryWriter w(os);
        w.magic("SDF1");
        for (int a = 0; a < 3; ++a) w.put<double>(origin_[a]);
        w.put<double>(h_);
        for (auto d : dims_) w.put<std::uint32_t>(d);
        os.write(reinterpret_cast<const char*>(values_.data()), std::streamsize(values_.size() * sizeof(float)));
        w.check();
    }

    static SdfGrid read(std::istream& is) {
        io::BinaryReader r(is);
        r.expect_magic("SDF1");
        Vec3 o;
        for (int a = 0; a < 3; ++a) o[a] = r.get<double>();
        const double h = r.get<double>();
        std::array<std::uint32_t, 3> d{};
        for (auto& x : d) x = r.get<std::uint32_t>();
        SdfGrid g(o, h, d);
        is.read(reinterpret_cast<char*>(g.values_.data()), std::streamsize(g.values_.size() * sizeof(float)));
        if (!is) throw DataError("truncated SDF grid");
        return g;
    }

private:
    Vec3 origin_ = Vec3::Zero();
    double h_ = 1.0;
    std::array<std::uint32_t, 3> dims_{2, 2, 2};
    std::vector<float> values_;
};

inline SdfGrid bake_sdf_grid(const VesselModel& v, double spacing = 0.1) {
    if (!(spacing > 0.0)) throw DomainError("grid spacing must be positive");
    const auto [lo, hi] = v.bounding_box();
    std::array<std::uint32_t, 3> dims{};
    for (int a = 0; a < 3; ++a)
        dims[a] = std::max<std::uint32_t>(2, static_cast<std::uint32_t>(std::ceil((hi[a] - lo[a]) / spacing)) + 1);
    SdfGrid g(lo, spacing, dims);
    auto& vals = g.values();
    for (std::uint32_t k = 0; k < dims[2]; ++k)
        for (std::uint32_t j = 0; j < dims[1]; ++j)
            for (std::uint32_t i = 0; i < dims[0]; ++i) vals[g.index(i, j, k)] = float(v.distance(g.node(i, j, k)));
    return g;
}

}  // namespace stentrom
