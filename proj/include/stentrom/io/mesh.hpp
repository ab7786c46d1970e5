#pragma once

// Triangulated vessel surface plus STL / legacy-VTK writers.

#include "stentrom/vessel.hpp"

#include <array>
#include <cstdint>
#include <iomanip>
#include <ostream>

namespace stentrom::io {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// Tube swept along the centerline polyline plus a UV sphere; tube facets
/// fully inside the sphere and sphere facets fully inside the tube are culled.
inline TriangleMesh triangulate_vessel(const VesselModel& v, int n_around = 48, int sphere_rings = 32) {
    if (n_around < 3 || sphere_rings < 3) throw DomainError("mesh resolution too small");
    TriangleMesh mesh;
    const auto& pts = v.polyline().points();
    const double rv = 0.5 * v.vessel_diameter();
    const Vec3 binormal = Vec3::UnitX();  // centerline lies in a plane of constant x

    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 a = pts[i == 0 ? 0 : i - 1];
        const Vec3 b = pts[i + 1 < pts.size() ? i + 1 : i];
        const Vec3 t = (b - a).normalized();
        const Vec3 n = binormal.cross(t).normalized();
        for (int k = 0; k < n_around; ++k) {
            const double phi = 2.0 * kPi * k / n_around;
            mesh.vertices.push_back(pts[i] + rv * (std::cos(phi) * n + std::sin(phi) * binormal));
        }
    }
    auto inside_sphere = [&](std::uint32_t id) { return v.sphere_distance(mesh.vertices[id]) < 0.0; };
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        for (int k = 0; k < n_around; ++k) {
            const auto a = std::uint32_t(i * n_around + k);
            const auto b = std::uint32_t(i * n_around + (k + 1) % n_around);
            const auto c = std::uint32_t((i + 1) * n_around + k);
            const auto d = std::uint32_t((i + 1) * n_around + (k + 1) % n_around);
            for (const std::array<std::uint32_t, 3> tri : {std::array{a, c, b}, std::array{b, c, d}})
                if (!(inside_sphere(tri[0]) && inside_sphere(tri[1]) && inside_sphere(tri[2])))
                    mesh.triangles.push_back(tri);
        }

    const auto base = std::uint32_t(mesh.vertices.size());
    const double ra = 0.5 * v.aneurysm_diameter();
    const int n_lon = 2 * sphere_rings;
    for (int r = 0; r <= sphere_rings; ++r) {
        const double th = kPi * r / sphere_rings;
        for (int k = 0; k < n_lon; ++k) {
            const double ph = 2.0 * kPi * k / n_lon;
            mesh.vertices.push_back(v.aneurysm_center() +
                                    ra * Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)));
        }
    }
    auto inside_tube = [&](std::uint32_t id) { return v.tube_distance(mesh.vertices[id]) < 0.0; };
    for (int r = 0; r < sphere_rings; ++r)
        for (int k = 0; k < n_lon; ++k) {
            const auto a = base + std::uint32_t(r * n_lon + k);
            const auto b = base + std::uint32_t(r * n_lon + (k + 1) % n_lon);
            const auto c = base + std::uint32_t((r + 1) * n_lon + k);
            const auto d = base + std::uint32_t((r + 1) * n_lon + (k + 1) % n_lon);
            for (const std::array<std::uint32_t, 3> tri : {std::array{a, b, c}, std::array{b, d, c}}) {
                if (r == 0 && tri == std::array{a, b, c}) continue;                  // degenerate at the pole
                if (r == sphere_rings - 1 && tri == std::array{b, d, c}) continue;  // degenerate at the pole
                if (!(inside_tube(tri[0]) && inside_tube(tri[1]) && inside_tube(tri[2])))
                    mesh.triangles.push_back(tri);
            }
        }
    return mesh;
}

inline void write_stl_binary(std::ostream& os, const TriangleMesh& m) {
    std::array<char, 80> header{};
    const std::string tag = "stentrom vessel surface";
    std::copy(tag.begin(), tag.end(), header.begin());
    os.write(header.data(), header.size());
    BinaryWriter w(os);
    w.put<std::uint32_t>(std::uint32_t(m.triangles.size()));
    for (const auto& t : m.triangles) {
        const Vec3& a = m.vertices[t[0]];
        const Vec3& b = m.vertices[t[1]];
        const Vec3& c = m.vertices[t[2]];
        Vec3 n = (b - a).cross(c - a);
        if (n.norm() > 0) n.normalize();
        for (const Vec3& p : {n, a, b, c})
            for (int k = 0; k < 3; ++k) w.put<float>(float(p[k]));
        w.put<std::uint16_t>(0);
    }
    w.check();
}

inline void write_vtk_polydata(std::ostream& os, const TriangleMesh& m, const std::string& title = "vessel") {
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET POLYDATA\n";
    os << "POINTS " << m.vertices.size() << " double\n" << std::setprecision(10);
    for (const auto& p : m.vertices) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    os << "POLYGONS " << m.triangles.size() << ' ' << 4 * m.triangles.size() << '\n';
    for (const auto& t : m.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace stentrom::io
