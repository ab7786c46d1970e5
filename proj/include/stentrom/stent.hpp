#pragma once

// Braided stent lattice: two opposite-handed helical wire families whose
// nodes coincide at every wire crossing.

#include "stentrom/core.hpp"

#include <array>
#include <iomanip>
#include <ostream>

namespace stentrom {

struct StentSpec {
    int n_wires = 48;
    double stent_radius = 2.6;   // R_s [mm]
    double wire_radius = 0.014;  // R_w [mm]
    double length = 15.0;        // L_s [mm]
    int n_cells = 70;
    double young_gpa = 225.0;
    double poisson = 0.33;
    double density = 9.13e3;  // [kg/m^3]

    void validate() const {
        if (n_wires < 4 || n_wires % 2 != 0) throw ConfigError("n_wires must be even and >= 4");
        if (n_cells < 1) throw ConfigError("n_cells must be >= 1");
        if (!(stent_radius > 0 && wire_radius > 0 && length > 0)) throw ConfigError("stent lengths must be positive");
        if (!(young_gpa > 0 && density > 0)) throw ConfigError("material constants must be positive");
        if (!(poisson > 0.0 && poisson < 0.5)) throw ConfigError("Poisson ratio must lie in (0, 0.5)");
    }

    int wires_per_family() const { return n_wires / 2; }
    int node_count() const { return n_wires * (n_cells + 1); }
    int beam_count() const { return n_wires * n_cells; }
    double lattice_radius() const { return stent_radius + wire_radius; }

    // Consistent unit system: mm, N, tonne, s (stress in MPa, energy in mJ).
    double young_mpa() const { return young_gpa * 1e3; }
    double shear_mpa() const { return young_mpa() / (2.0 * (1.0 + poisson)); }
    double density_t_mm3() const { return density * 1e-12; }
    double area() const { return kPi * wire_radius * wire_radius; }
    double inertia() const { return 0.25 * kPi * std::pow(wire_radius, 4); }
    double polar_inertia() const { return 2.0 * inertia(); }
};

struct StentMesh {
    std::vector<Vec3> nodes;
    std::vector<std::array<int, 2>> beams;
    std::vector<std::array<int, 2>> crossings;  // (family +1 node, family -1 node)
    std::vector<std::vector<int>> rings;        // node ids per axial station
    std::vector<int> ring_of_node;
};

inline int stent_node_id(const StentSpec& s, int family, int wire, int station) {
    return (family * s.wires_per_family() + wire) * (s.n_cells + 1) + station;
}

inline StentMesh generate_stent(const StentSpec& spec) {
    spec.validate();
    const int half = spec.wires_per_family();
    const double dtheta = 2.0 * kPi / half;
    const double r = spec.lattice_radius();
    const double dz = spec.length / spec.n_cells;

    StentMesh m;
    m.nodes.resize(static_cast<std::size_t>(spec.node_count()));
    m.ring_of_node.resize(m.nodes.size());
    m.rings.assign(static_cast<std::size_t>(spec.n_cells + 1), {});
    for (int fam = 0; fam < 2; ++fam) {
        const double orient = fam == 0 ? 1.0 : -1.0;
        for (int n = 0; n < half; ++n) {
            const double theta_n = n * dtheta;
            for (int i = 0; i <= spec.n_cells; ++i) {
                const double a = orient * i * dtheta + theta_n;
                const int id = stent_node_id(spec, fam, n, i);
                m.nodes[std::size_t(id)] = Vec3(r * std::cos(a), r * std::sin(a), i * dz);
                m.ring_of_node[std::size_t(id)] = i;
                m.rings[std::size_t(i)].push_back(id);
                if (i > 0) m.beams.push_back({stent_node_id(spec, fam, n, i - 1), id});
            }
        }
    }
    // Crossings: coincident nodes of opposite families at the same station.
    for (int i = 0; i <= spec.n_cells; ++i)
        for (int n = 0; n < half; ++n) {
            const int a = stent_node_id(spec, 0, n, i);
            for (int k = 0; k < half; ++k) {
                const int b = stent_node_id(spec, 1, k, i);
                if ((m.nodes[std::size_t(a)] - m.nodes[std::size_t(b)]).norm() < 1e-9) m.crossings.push_back({a, b});
            }
        }
    return m;
}

/// Arithmetic mean of every ring, evaluated on the supplied positions.
inline std::vector<Vec3> ring_centers(const StentMesh& mesh, const std::vector<Vec3>& positions) {
    if (positions.size() != mesh.nodes.size()) throw DomainError("position count does not match the mesh");
    std::vector<Vec3> c;
    c.reserve(mesh.rings.size());
    for (const auto& ring : mesh.rings) {
        if (ring.empty()) throw DataError("empty ring in stent mesh");
        Vec3 s = Vec3::Zero();
        for (int id : ring) s += positions[std::size_t(id)];
        c.push_back(s / double(ring.size()));
    }
    return c;
}

inline std::vector<Vec3> ring_centers(const StentMesh& mesh) { return ring_centers(mesh, mesh.nodes); }

/// Legacy-VTK line cells, one per beam, with nodal displacements as point data.
inline void write_stent_vtk(std::ostream& os, const StentMesh& mesh, const std::vector<Vec3>& positions,
                            const std::vector<double>* node_scalar = nullptr, const std::string& scalar_name = "value") {
    os << "# vtk DataFile Version 3.0\nstent\nASCII\nDATASET POLYDATA\n";
    os << "POINTS " << positions.size() << " double\n" << std::setprecision(12);
    for (const auto& p : positions) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    os << "LINES " << mesh.beams.size() << ' ' << 3 * mesh.beams.size() << '\n';
    for (const auto& b : mesh.beams) os << "2 " << b[0] << ' ' << b[1] << '\n';
    os << "POINT_DATA " << positions.size() << "\nVECTORS displacement double\n";
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const Vec3 u = positions[i] - mesh.nodes[i];
        os << u.x() << ' ' << u.y() << ' ' << u.z() << '\n';
    }
    if (node_scalar) {
        os << "SCALARS " << scalar_name << " double 1\nLOOKUP_TABLE default\n";
        for (double v : *node_scalar) os << v << '\n';
    }
}

}  // namespace stentrom
