#pragma once

// Brute-force geometry used as ground truth in the tests: a dense triangle
// tessellation of the tube+sphere union and an AABB tree for exact
// point-to-mesh distances.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

namespace oracle {

using V3 = Eigen::Vector3d;

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
inline V3 closest_on_triangle(const V3& p, const V3& a, const V3& b, const V3& c) {
    const V3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const V3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
    const V3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

struct Tri {
    V3 a, b, c;
};

/// Median-split AABB tree over triangles.
class MeshDistance {
public:
    explicit MeshDistance(std::vector<Tri> tris) : tris_(std::move(tris)) {
        idx_.resize(tris_.size());
        std::iota(idx_.begin(), idx_.end(), 0);
        nodes_.reserve(2 * tris_.size() / kLeaf + 2);
        build(0, tris_.size());
    }

    double unsigned_distance(const V3& p) const {
        double best = std::numeric_limits<double>::infinity();
        query(0, p, best);
        return std::sqrt(best);
    }

    std::size_t size() const { return tris_.size(); }

private:
    static constexpr std::size_t kLeaf = 8;
    struct Node {
        V3 lo, hi;
        std::size_t begin, end;
        int left = -1, right = -1;
    };

    int build(std::size_t b, std::size_t e) {
        Node n;
        n.lo = V3::Constant(std::numeric_limits<double>::infinity());
        n.hi = -n.lo;
        for (std::size_t i = b; i < e; ++i) {
            const Tri& t = tris_[idx_[i]];
            for (const V3* v : {&t.a, &t.b, &t.c}) {
                n.lo = n.lo.cwiseMin(*v);
                n.hi = n.hi.cwiseMax(*v);
            }
        }
        n.begin = b;
        n.end = e;
        const int id = int(nodes_.size());
        nodes_.push_back(n);
        if (e - b > kLeaf) {
            int axis;
            (n.hi - n.lo).maxCoeff(&axis);
            const std::size_t mid = (b + e) / 2;
            std::nth_element(idx_.begin() + long(b), idx_.begin() + long(mid), idx_.begin() + long(e),
                             [&](std::size_t x, std::size_t y) {
                                 const Tri& tx = tris_[x];
                                 const Tri& ty = tris_[y];
                                 return tx.a[axis] + tx.b[axis] + tx.c[axis] < ty.a[axis] + ty.b[axis] + ty.c[axis];
                             });
            const int l = build(b, mid);
            const int r = build(mid, e);
            nodes_[std::size_t(id)].left = l;
            nodes_[std::size_t(id)].right = r;
        }
        return id;
    }

    static double box_d2(const Node& n, const V3& p) {
        const V3 d = (n.lo - p).cwiseMax(V3::Zero()).cwiseMax(p - n.hi);
        return d.squaredNorm();
    }

    void query(int id, const V3& p, double& best) const {
        const Node& n = nodes_[std::size_t(id)];
        if (box_d2(n, p) >= best) return;
        if (n.left < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const Tri& t = tris_[idx_[i]];
                best = std::min(best, (closest_on_triangle(p, t.a, t.b, t.c) - p).squaredNorm());
            }
            return;
        }
        const double dl = box_d2(nodes_[std::size_t(n.left)], p);
        const double dr = box_d2(nodes_[std::size_t(n.right)], p);
        if (dl < dr) {
            query(n.left, p, best);
            query(n.right, p, best);
        } else {
            query(n.right, p, best);
            query(n.left, p, best);
        }
    }

    std::vector<Tri> tris_;
    std::vector<std::size_t> idx_;
    std::vector<Node> nodes_;
};

/// Planar quadratic Bezier tube (capsule-swept, radius rv) united with a
/// sphere (centre ca, radius ra), tessellated independently of the library.
struct UnionOracle {
    V3 p0, p1, p2, ca;
    double rv, ra;
    std::vector<V3> axis;  // dense centreline samples
    MeshDistance mesh;

    static V3 bez(const V3& p0, const V3& p1, const V3& p2, double t) {
        return (1 - t) * (1 - t) * p0 + 2 * t * (1 - t) * p1 + t * t * p2;
    }

    static std::vector<V3> sample_axis(const V3& p0, const V3& p1, const V3& p2, int n) {
        std::vector<V3> a;
        for (int i = 0; i <= n; ++i) a.push_back(bez(p0, p1, p2, double(i) / n));
        return a;
    }

    static double axis_distance(const std::vector<V3>& axis, const V3& p) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
            const V3 d = axis[i + 1] - axis[i];
            const double t = std::clamp((p - axis[i]).dot(d) / d.squaredNorm(), 0.0, 1.0);
            best = std::min(best, (axis[i] + t * d - p).norm());
        }
        return best;
    }

    UnionOracle(V3 p0_, V3 p1_, V3 p2_, V3 ca_, double rv_, double ra_, int stations = 600, int around = 192)
        : p0(p0_), p1(p1_), p2(p2_), ca(ca_), rv(rv_), ra(ra_), axis(sample_axis(p0_, p1_, p2_, stations)),
          mesh(build(around)) {}

    bool inside_tube(const V3& p) const { return axis_distance(axis, p) < rv; }
    bool inside_sphere(const V3& p) const { return (p - ca).norm() < ra; }

    /// Signed distance to the union surface: negative inside.
    double signed_distance(const V3& p) const {
        const double d = mesh.unsigned_distance(p);
        return inside_tube(p) || inside_sphere(p) ? -d : d;
    }

private:
    // Drops the part of t inside the other primitive; triangles crossing its
    // surface are split so the leftover seam is 2^-depth of a triangle wide.
    template <typename Inside>
    static void clip(const Tri& t, const Inside& inside, int depth, std::vector<Tri>& out) {
        const int n_in = int(inside(t.a)) + int(inside(t.b)) + int(inside(t.c));
        if (n_in == 0) {
            out.push_back(t);
            return;
        }
        if (n_in == 3) return;
        if (depth == 0) {
            if (!inside(V3((t.a + t.b + t.c) / 3.0))) out.push_back(t);
            return;
        }
        const V3 ab = 0.5 * (t.a + t.b), bc = 0.5 * (t.b + t.c), ca = 0.5 * (t.c + t.a);
        for (const Tri& s : {Tri{t.a, ab, ca}, Tri{ab, t.b, bc}, Tri{ca, bc, t.c}, Tri{ab, bc, ca}}) clip(s, inside, depth - 1, out);
    }

    std::vector<Tri> build(int around) const {
        constexpr double pi = std::numbers::pi;
        std::vector<Tri> out;
        std::vector<std::vector<V3>> rings;
        const V3 ex = V3::UnitX();
        for (std::size_t i = 0; i < axis.size(); ++i) {
            const double t = double(i) / double(axis.size() - 1);
            const V3 tan = (2 * (1 - t) * (p1 - p0) + 2 * t * (p2 - p1)).normalized();
            const V3 n = ex.cross(tan).normalized();
            std::vector<V3> ring;
            for (int k = 0; k < around; ++k) {
                const double phi = 2 * pi * k / around;
                ring.push_back(axis[i] + rv * (std::cos(phi) * n + std::sin(phi) * ex));
            }
            rings.push_back(ring);
        }
        auto in_sphere = [&](const V3& p) { return inside_sphere(p); };
        auto in_tube = [&](const V3& p) { return inside_tube(p); };
        for (std::size_t i = 0; i + 1 < rings.size(); ++i)
            for (int k = 0; k < around; ++k) {
                const int k1 = (k + 1) % around;
                for (const Tri& t : {Tri{rings[i][std::size_t(k)], rings[i + 1][std::size_t(k)], rings[i][std::size_t(k1)]},
                                     Tri{rings[i][std::size_t(k1)], rings[i + 1][std::size_t(k)], rings[i + 1][std::size_t(k1)]}})
                    clip(t, in_sphere, 5, out);
            }
        // hemispherical end caps
        for (int end = 0; end < 2; ++end) {
            const V3 c = end == 0 ? p0 : p2;
            const V3 outward = end == 0 ? V3((p0 - p1).normalized()) : V3((p2 - p1).normalized());
            const V3 n = ex.cross(outward).normalized();
            const int lat = around / 4;
            auto pt = [&](int r, int k) {
                const double th = 0.5 * pi * r / lat;
                const double phi = 2 * pi * k / around;
                return V3(c + rv * (std::cos(th) * (std::cos(phi) * n + std::sin(phi) * ex) + std::sin(th) * outward));
            };
            for (int r = 0; r < lat; ++r)
                for (int k = 0; k < around; ++k) {
                    const int k1 = (k + 1) % around;
                    out.push_back({pt(r, k), pt(r + 1, k), pt(r, k1)});
                    out.push_back({pt(r, k1), pt(r + 1, k), pt(r + 1, k1)});
                }
        }
        const int lat = around / 2;
        auto sp = [&](int r, int k) {
            const double th = pi * r / lat;
            const double phi = 2 * pi * k / around;
            return V3(ca + ra * V3(std::sin(th) * std::cos(phi), std::sin(th) * std::sin(phi), std::cos(th)));
        };
        for (int r = 0; r < lat; ++r)
            for (int k = 0; k < around; ++k) {
                const int k1 = (k + 1) % around;
                for (const Tri& t : {Tri{sp(r, k), sp(r, k1), sp(r + 1, k)}, Tri{sp(r, k1), sp(r + 1, k1), sp(r + 1, k)}})
                    clip(t, in_tube, 5, out);
            }
        return out;
    }
};

}  // namespace oracle
