#include "stentrom/io/mesh.hpp"
#include "stentrom/vessel.hpp"

#include "mesh_oracle.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace stentrom;

namespace {

VesselModel sample_vessel(int n_polyline = VesselModel::kDefaultPolyline) {
    return VesselModel::from_params({3.0, 10.0, 3.0, 7.0, 4.0}, Vec3(0, 0, 0), Vec3(0, 0, 20), n_polyline);
}

Vec3 random_in_box(std::mt19937_64& rng, const Vec3& lo, const Vec3& hi) {
    std::uniform_real_distribution<double> u(0, 1);
    return Vec3(lo.x() + u(rng) * (hi.x() - lo.x()), lo.y() + u(rng) * (hi.y() - lo.y()),
                lo.z() + u(rng) * (hi.z() - lo.z()));
}

}  // namespace

TEST(Bezier, Endpoints) {
    const BezierCenterline c{Vec3(0, 1, 2), Vec3(0, 5, 9), Vec3(0, -1, 20)};
    EXPECT_EQ(bezier_point(c, 0.0), c.p0);
    EXPECT_EQ(bezier_point(c, 1.0), c.p2);
}

TEST(Bezier, Midpoint) {
    const BezierCenterline c{Vec3(0, 0, 0), Vec3(0, 4, 10), Vec3(0, 0, 20)};
    EXPECT_LT((bezier_point(c, 0.5) - Vec3(0, 2, 10)).norm(), 1e-15);
}

TEST(Bezier, OutsideDomainThrows) {
    const BezierCenterline c;
    EXPECT_THROW(bezier_point(c, -0.01), DomainError);
    EXPECT_THROW(bezier_point(c, 1.01), DomainError);
}

TEST(Bezier, NonPlanarControlPointsRejected) {
    const BezierCenterline c{Vec3(0, 0, 0), Vec3(1, 4, 10), Vec3(0, 0, 20)};
    EXPECT_THROW(VesselModel(c, 3, 7, 4), DomainError);
}

TEST(Bezier, ArcLengthConvergesWithDiscretization) {
    const BezierCenterline c{Vec3(0, 0, 0), Vec3(0, 6, 10), Vec3(0, 0, 20)};
    const double a = discretize(c, 200).length();
    const double b = discretize(c, 2000).length();
    EXPECT_LT(std::abs(a - b) / b, 1e-3);
}

TEST(VesselGeometry, AneurysmCentreOffsetAlongYOnly) {
    const auto v = sample_vessel();
    const Vec3 d = v.aneurysm_center() - bezier_point(v.centerline(), 0.5);
    EXPECT_NEAR(d.x(), 0.0, 1e-15);
    EXPECT_NEAR(d.z(), 0.0, 1e-15);
    EXPECT_NEAR(d.y(), 4.0, 1e-14);
    EXPECT_NEAR(v.aneurysm_offset(), 4.0, 1e-14);
}

TEST(VesselGeometry, RejectsNonPositiveDiameters) {
    EXPECT_THROW(VesselModel(BezierCenterline{}, 0.0, 7, 4), DomainError);
    EXPECT_THROW(VesselModel(BezierCenterline{}, 3.0, -1, 4), DomainError);
}

TEST(Sdf, SphereCentre) {
    const auto v = sample_vessel();
    EXPECT_NEAR(sdf_eval(v, v.aneurysm_center()), -3.5, 1e-12);
}

TEST(Sdf, AxisPointOfStraightVessel) {
    const VesselModel v(BezierCenterline{Vec3(0, 0, 0), Vec3(0, 0, 25), Vec3(0, 0, 50)}, 3.0, 6.0, 5.0);
    EXPECT_NEAR(sdf_eval(v, Vec3(0, 0, 3)), -1.5, 1e-12);
    EXPECT_NEAR(sdf_eval(v, Vec3(0, 0, 47)), -1.5, 1e-12);
}

TEST(Sdf, UnionBoundsBothPrimitives) {
    const auto v = sample_vessel();
    const auto [lo, hi] = v.bounding_box();
    std::mt19937_64 rng(1);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p = random_in_box(rng, lo, hi);
        EXPECT_LE(v.distance(p), v.tube_distance(p));
        EXPECT_LE(v.distance(p), v.sphere_distance(p));
    }
}

TEST(Sdf, LipschitzOnRandomPairs) {
    const auto v = sample_vessel();
    const auto [lo, hi] = v.bounding_box();
    std::mt19937_64 rng(2);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 p = random_in_box(rng, lo, hi), q = random_in_box(rng, lo, hi);
        EXPECT_LE(std::abs(v.distance(p) - v.distance(q)), (p - q).norm() + 1e-12);
    }
}

// Outside the tube/sphere overlap the min-union is the exact distance to the
// union surface; compare with an independently tessellated mesh.
TEST(Sdf, MatchesDenseMeshOracle) {
    const auto v = sample_vessel();
    const oracle::UnionOracle o(v.centerline().p0, v.centerline().p1, v.centerline().p2, v.aneurysm_center(), 1.5, 3.5);
    const auto [lo, hi] = v.bounding_box();
    std::mt19937_64 rng(3);
    double worst = 0;
    int n = 0;
    while (n < 1000) {
        const Vec3 p = random_in_box(rng, lo, hi);
        if (o.inside_tube(p) && o.inside_sphere(p)) continue;
        worst = std::max(worst, std::abs(sdf_eval(v, p) - o.signed_distance(p)));
        ++n;
    }
    EXPECT_LT(worst, 0.1);
}

TEST(SdfGradient, AboveStraightTubeIsPlusY) {
    const VesselModel v(BezierCenterline{Vec3(0, 0, 0), Vec3(0, 0, 25), Vec3(0, 0, 50)}, 3.0, 6.0, -20.0);
    const Vec3 g = sdf_gradient(v, Vec3(0, 0.7, 10));
    EXPECT_LT((g - Vec3::UnitY()).norm(), 1e-9);
}

TEST(SdfGradient, RadialOutsideSphere) {
    const auto v = sample_vessel();
    const Vec3 e = Vec3(0.3, 1.0, 0.2).normalized();
    const Vec3 g = sdf_gradient(v, v.aneurysm_center() + 4.5 * e);
    EXPECT_LT((g - e).norm(), 1e-9);
}

TEST(SdfGradient, DirectionalDerivativeIsOne) {
    const auto v = sample_vessel();
    const auto [lo, hi] = v.bounding_box();
    std::mt19937_64 rng(4);
    const double h = 1e-6;
    int checked = 0;
    for (int i = 0; i < 3000 && checked < 1000; ++i) {
        const Vec3 p = random_in_box(rng, lo, hi);
        // skip the switching surface between the primitives, where the field has a kink
        if (std::abs(v.tube_distance(p) - v.sphere_distance(p)) < 1e-3) continue;
        if (v.polyline().closest(p).distance < 1e-3) continue;
        const Vec3 g = sdf_gradient(v, p);
        EXPECT_NEAR(g.norm(), 1.0, 1e-12);
        const double dd = (v.distance(p + h * g) - v.distance(p - h * g)) / (2 * h);
        EXPECT_NEAR(dd, 1.0, 1e-3);
        ++checked;
    }
    EXPECT_GE(checked, 1000);
}

TEST(SdfGradient, DegenerateFieldThrows) {
    struct Flat {
        double distance(const Vec3&) const { return 1.0; }
    };
    EXPECT_THROW(sdf_gradient(Flat{}, Vec3::Zero()), GeometryError);
}

TEST(SdfNormalJacobian, AnalyticMatchesFiniteDifferences) {
    const auto v = sample_vessel();
    const auto [lo, hi] = v.bounding_box();
    std::mt19937_64 rng(5);
    struct NoAnalytic {
        const VesselModel* v;
        double distance(const Vec3& p) const { return v->distance(p); }
    };
    int checked = 0;
    for (int i = 0; i < 2000 && checked < 200; ++i) {
        const Vec3 p = random_in_box(rng, lo, hi);
        if (std::abs(v.tube_distance(p) - v.sphere_distance(p)) < 1e-2) continue;
        const auto c = v.polyline().closest(p);
        if (c.distance < 0.1 || c.t < 1e-3 || c.t > 1 - 1e-3) continue;
        const Mat3 a = v.normal_jacobian(p);
        // finite differences of the analytic normal
        Mat3 fd;
        const double h = 1e-6;
        for (int k = 0; k < 3; ++k) {
            Vec3 pp = p, pm = p;
            pp[k] += h;
            pm[k] -= h;
            fd.col(k) = (v.normal(pp) - v.normal(pm)) / (2 * h);
        }
        EXPECT_LT((a - fd).cwiseAbs().maxCoeff(), 1e-4 * std::max(1.0, a.norm())) << p.transpose();
        const Mat3 generic = sdf_normal_jacobian(NoAnalytic{&v}, p, 1e-4);
        EXPECT_LT((a - generic).cwiseAbs().maxCoeff(), 1e-2 * std::max(1.0, a.norm()));
        ++checked;
    }
    EXPECT_GE(checked, 100);
}

TEST(SdfGrid, NodeValuesReproducedExactly) {
    const auto v = sample_vessel(100);
    const auto g = bake_sdf_grid(v, 0.25);
    const auto& d = g.dims();
    for (std::uint32_t k = 0; k < d[2]; k += 7)
        for (std::uint32_t j = 0; j < d[1]; j += 5)
            for (std::uint32_t i = 0; i < d[0]; i += 3) {
                const auto s = g.query(g.node(i, j, k));
                EXPECT_EQ(s.value, double(g.at(i, j, k)));
                EXPECT_FALSE(s.clamped);
            }
}

TEST(SdfGrid, NodeNearSphereCentre) {
    const auto v = sample_vessel();
    const auto g = bake_sdf_grid(v, 0.1);
    const Vec3 u = (v.aneurysm_center() - g.origin()) / g.spacing();
    const auto i = std::uint32_t(std::lround(u.x())), j = std::uint32_t(std::lround(u.y())),
               k = std::uint32_t(std::lround(u.z()));
    EXPECT_NEAR(g.at(i, j, k), -3.5, 0.1);
}

TEST(SdfGrid, BoxCoversVesselWithMargin) {
    const auto v = sample_vessel();
    const auto g = bake_sdf_grid(v, 0.1);
    const Vec3 far = g.origin() + g.spacing() * Vec3(g.dims()[0] - 1, g.dims()[1] - 1, g.dims()[2] - 1);
    const double pad = 3.5 + 2.0;
    EXPECT_LE(g.origin().z(), -pad + 1e-12);
    EXPECT_GE(far.z(), 20 + pad - 1e-12);
    EXPECT_GE(far.y(), v.aneurysm_center().y() + pad - 1e-12);
}

TEST(SdfGrid, InterpolationErrorBelowSpacing) {
    const auto v = sample_vessel();
    const double h = 0.1;
    const auto g = bake_sdf_grid(v, h);
    const auto [lo, hi] = v.bounding_box();
    std::mt19937_64 rng(6);
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 p = random_in_box(rng, lo, hi);
        const auto s = g.query(p);
        ASSERT_FALSE(s.clamped);
        worst = std::max(worst, std::abs(s.value - v.distance(p)));
    }
    EXPECT_LT(worst, h);
}

TEST(SdfGrid, OutOfBoundsIsClampedAndFlagged) {
    const auto v = sample_vessel(50);
    const auto g = bake_sdf_grid(v, 0.5);
    const auto s = g.query(g.origin() - Vec3(1, 1, 1));
    EXPECT_TRUE(s.clamped);
    EXPECT_EQ(s.value, double(g.at(0, 0, 0)));
}

TEST(SdfGrid, BinaryRoundTrip) {
    const auto v = sample_vessel(50);
    const auto g = bake_sdf_grid(v, 0.5);
    std::stringstream ss;
    g.write(ss);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 4), "SDF1");
    EXPECT_EQ(bytes.size(), 4 + 4 * 8 + 3 * 4 + g.values().size() * 4);
    const auto r = SdfGrid::read(ss);
    EXPECT_EQ(r.dims(), g.dims());
    EXPECT_EQ(r.origin(), g.origin());
    EXPECT_EQ(r.spacing(), g.spacing());
    EXPECT_EQ(r.values(), g.values());
}

TEST(SdfGrid, TruncatedFileRejected) {
    const auto g = bake_sdf_grid(sample_vessel(50), 0.5);
    std::stringstream ss;
    g.write(ss);
    std::stringstream cut(ss.str().substr(0, ss.str().size() - 10));
    EXPECT_THROW(SdfGrid::read(cut), DataError);
    std::stringstream bad("XXXX");
    EXPECT_THROW(SdfGrid::read(bad), DataError);
}

TEST(SdfGrid, InvalidConstruction) {
    EXPECT_THROW(SdfGrid(Vec3::Zero(), 0.0, {2, 2, 2}), DomainError);
    EXPECT_THROW(SdfGrid(Vec3::Zero(), 1.0, {1, 2, 2}), DomainError);
    EXPECT_THROW(bake_sdf_grid(sample_vessel(), -1), DomainError);
}

TEST(VesselMesh, VerticesLieOnUnionSurface) {
    const auto v = sample_vessel();
    const auto m = io::triangulate_vessel(v, 32, 16);
    ASSERT_FALSE(m.triangles.empty());
    for (const auto& t : m.triangles)
        for (auto id : t) {
            const Vec3& p = m.vertices[id];
            // tube distance is taken to the polyline, so chord error shows up
            EXPECT_LT(std::min(std::abs(v.tube_distance(p)), std::abs(v.sphere_distance(p))), 1e-5);
        }
}

TEST(VesselMesh, StlSizeMatchesTriangleCount) {
    const auto m = io::triangulate_vessel(sample_vessel(), 16, 8);
    std::ostringstream os;
    io::write_stl_binary(os, m);
    EXPECT_EQ(os.str().size(), 84 + 50 * m.triangles.size());
}
