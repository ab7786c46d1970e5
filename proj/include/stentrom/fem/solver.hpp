#pragma once

// Quasi-static deployment of a braided stent: crimping, positioning along the
// vessel centerline, and free expansion against the rigid vessel wall.
//
// Equilibria are reached by damped pseudo-dynamics integrated with backward
// Euler (one Newton solve per step, adaptive step size) and stopped once the
// kinetic energy drops below ke_stop and the static residual vanishes.

#include "stentrom/fem/beam.hpp"
#include "stentrom/fem/centerline.hpp"
#include "stentrom/stent.hpp"
#include "stentrom/vessel.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>

namespace stentrom::fem {

struct SolverConfig {
    double k_contact = 1e-1;      // wall penalty [N/mm]
    double k_cross = 1e-2;        // crossing penalty [N/mm]
    double mu_f = 0.0;            // Coulomb friction coefficient
    double c_damp = 2e3;          // mass-proportional damping [1/s]
    double dt = 1e-3;             // largest pseudo-time step [s]
    double ke_stop = 1e-12;       // [mJ]
    long max_steps = 4000;
    double r_crimped = 0.45;      // [mm]
    int n_position_steps = 20;
    int n_crimp_steps = 10;
    double force_tol = 1e-8;      // static residual [N] / [N mm]
    int max_newton = 25;

    void validate() const {
        if (!(k_contact > 0 && k_cross > 0 && c_damp > 0 && dt > 0 && ke_stop > 0 && force_tol > 0))
            throw ConfigError("solver stiffnesses, damping, dt, ke_stop and force_tol must be positive");
        if (!(mu_f >= 0)) throw ConfigError("friction coefficient must be non-negative");
        if (max_steps < 1 || n_position_steps < 1 || n_crimp_steps < 1 || max_newton < 1)
            throw ConfigError("step counts must be positive");
        if (!(r_crimped > 0)) throw ConfigError("r_crimped must be positive");
    }
};

enum class Phase { free, crimped, positioned, deployed };

inline const char* to_string(Phase p) {
    switch (p) {
        case Phase::free: return "free";
        case Phase::crimped: return "crimped";
        case Phase::positioned: return "positioned";
        case Phase::deployed: return "deployed";
    }
    return "?";
}

/// Beam network with lumped masses; shared by stents and validation benches.
struct Structure {
    std::vector<Vec3> reference;
    std::vector<BeamElement> beams;
    std::vector<std::array<int, 2>> crossings;
    BeamSection section{};
    double wire_radius = 0.0;
    std::vector<double> mass;     // translational [t]
    std::vector<double> inertia;  // rotational [t mm^2]

    std::size_t nodes() const { return reference.size(); }

    static Structure build(const std::vector<Vec3>& nodes, const std::vector<std::array<int, 2>>& beams,
                           const std::vector<std::array<int, 2>>& crossings, double wire_radius, double young_mpa,
                           double poisson, double rho_t_mm3) {
        Structure s;
        s.reference = nodes;
        s.crossings = crossings;
        s.wire_radius = wire_radius;
        const double area = kPi * wire_radius * wire_radius;
        const double inert = 0.25 * kPi * std::pow(wire_radius, 4);
        const double shear = young_mpa / (2.0 * (1.0 + poisson));
        s.section = {young_mpa * area, shear * 2.0 * inert, young_mpa * inert};
        s.mass.assign(nodes.size(), 0.0);
        s.inertia.assign(nodes.size(), 0.0);
        for (const auto& b : beams) {
            auto e = make_beam(b[0], b[1], nodes[std::size_t(b[0])], nodes[std::size_t(b[1])]);
            const double m = 0.5 * rho_t_mm3 * area * e.l0;
            const double j = m * (e.l0 * e.l0 / 12.0 + 0.5 * wire_radius * wire_radius);
            for (int n : b) {
                s.mass[std::size_t(n)] += m;
                s.inertia[std::size_t(n)] += j;
            }
            s.beams.push_back(e);
        }
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (!(s.mass[i] > 0)) throw GeometryError("node without beams");
        return s;
    }

    static Structure from_stent(const StentMesh& m, const StentSpec& spec) {
        return build(m.nodes, m.beams, m.crossings, spec.wire_radius, spec.young_mpa(), spec.poisson,
                     spec.density_t_mm3());
    }
};

struct SimulationState {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    std::vector<Vec3> angular_velocities;
    std::vector<Mat3> rotations;
    std::vector<std::uint8_t> fixed;  // 6 flags per node: translations then spins
    double kinetic_energy = 0.0;
    Phase phase = Phase::free;

    static SimulationState rest(const Structure& s) {
        SimulationState st;
        const std::size_t n = s.nodes();
        st.positions = s.reference;
        st.velocities.assign(n, Vec3::Zero());
        st.angular_velocities.assign(n, Vec3::Zero());
        st.rotations.assign(n, Mat3::Identity());
        st.fixed.assign(6 * n, 0);
        return st;
    }

    void release() { std::fill(fixed.begin(), fixed.end(), std::uint8_t{0}); }
    void stop() {
        for (auto& v : velocities) v.setZero();
        for (auto& w : angular_velocities) w.setZero();
        kinetic_energy = 0.0;
    }
};

inline double kinetic_energy(const Structure& s, const std::vector<Vec3>& v) {
    double ke = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) ke += 0.5 * s.mass[i] * v[i].squaredNorm();
    return ke;
}

/// Placeholder field for runs without wall contact.
struct NoContact {
    double distance(const Vec3&) const { return -std::numeric_limits<double>::infinity(); }
};

struct RelaxReport {
    long steps = 0;
    long newton_iterations = 0;
    double kinetic_energy = 0.0;
    double residual = 0.0;
    double final_dt = 0.0;
    bool converged = false;
    double seconds = 0.0;
};

namespace detail {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Internal force f (size 6N) and tangent triplets at the given state.
/// `step_start` enables incremental friction relative to the step origin.
template <typename F>
double assemble(const Structure& s, const std::vector<Vec3>& x, const std::vector<Mat3>& r, const SolverConfig& cfg,
                const F* field, const std::vector<Vec3>* step_start, Eigen::VectorXd& f, Triplets* k,
                std::vector<double>* contact_gap = nullptr) {
    const std::size_t n = s.nodes();
    f.setZero(6 * Index(n));
    if (k) k->clear();
    double energy = 0.0;
    Vec12 fe;
    Mat12 ke;
    for (const auto& e : s.beams) {
        const std::size_t a = std::size_t(e.a), b = std::size_t(e.b);
        energy += corotational_force_tangent(e, s.section, x[a], x[b], r[a], r[b], fe, k ? &ke : nullptr);
        const Index base[2] = {6 * Index(a), 6 * Index(b)};
        for (int i = 0; i < 2; ++i) f.segment<6>(base[i]) += fe.segment<6>(6 * i);
        if (k)
            for (int i = 0; i < 12; ++i)
                for (int j = 0; j < 12; ++j)
                    k->emplace_back(base[i / 6] + i % 6, base[j / 6] + j % 6, ke(i, j));
    }
    for (const auto& c : s.crossings) {
        const std::size_t a = std::size_t(c[0]), b = std::size_t(c[1]);
        const Vec3 d = x[a] - x[b];
        energy += 0.5 * cfg.k_cross * d.squaredNorm();
        f.segment<3>(6 * Index(a)) += cfg.k_cross * d;
        f.segment<3>(6 * Index(b)) -= cfg.k_cross * d;
        if (k)
            for (int i = 0; i < 3; ++i) {
                k->emplace_back(6 * Index(a) + i, 6 * Index(a) + i, cfg.k_cross);
                k->emplace_back(6 * Index(b) + i, 6 * Index(b) + i, cfg.k_cross);
                k->emplace_back(6 * Index(a) + i, 6 * Index(b) + i, -cfg.k_cross);
                k->emplace_back(6 * Index(b) + i, 6 * Index(a) + i, -cfg.k_cross);
            }
    }
    if (contact_gap) contact_gap->assign(n, -std::numeric_limits<double>::infinity());
    if (field) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = field->distance(x[i]) + s.wire_radius;
            if (contact_gap) (*contact_gap)[i] = g;
            if (!(g > 0.0)) continue;
            const Vec3 nrm = sdf_gradient(*field, x[i]);
            const double fn = cfg.k_contact * g;
            energy += 0.5 * cfg.k_contact * g * g;
            Vec3 force = fn * nrm;
            Mat3 kk = cfg.k_contact * nrm * nrm.transpose();
            if (k) kk += fn * sdf_normal_jacobian(*field, x[i]);
            if (cfg.mu_f > 0.0 && step_start) {
                // regularized Coulomb: tangential penalty capped at mu * |F_n|
                const Mat3 proj = Mat3::Identity() - nrm * nrm.transpose();
                const Vec3 slip = proj * (x[i] - (*step_start)[i]);
                Vec3 ft = cfg.k_contact * slip;
                double scale = 1.0;
                const double cap = cfg.mu_f * fn;
                if (ft.norm() > cap) scale = cap / ft.norm();
                force += scale * ft;
                kk += scale * cfg.k_contact * proj;
            }
            f.segment<3>(6 * Index(i)) += force;
            if (k)
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) k->emplace_back(6 * Index(i) + a, 6 * Index(i) + b, kk(a, b));
        }
    }
    return energy;
}

inline double max_abs_free(const Eigen::VectorXd& v, const std::vector<std::uint8_t>& fixed) {
    double m = 0.0;
    for (Index i = 0; i < v.size(); ++i)
        if (!fixed[std::size_t(i)]) m = std::max(m, std::abs(v[i]));
    return m;
}

}  // namespace detail

/// Damped backward-Euler relaxation to static equilibrium.
///
/// Fixed DOFs keep the values currently stored in `st`. Throws
/// NonConvergenceError when max_steps is exhausted.
template <typename F = NoContact>
RelaxReport relax(const Structure& s, SimulationState& st, const SolverConfig& cfg, const F* field = nullptr,
                  const Eigen::VectorXd* f_ext = nullptr, double dt_start = 0.0) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = s.nodes();
    const Index ndof = 6 * Index(n);
    std::vector<Index> map(std::size_t(ndof), -1);
    Index nf = 0;
    for (Index i = 0; i < ndof; ++i)
        if (!st.fixed[std::size_t(i)]) map[std::size_t(i)] = nf++;
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) {
            if (st.fixed[6 * i + std::size_t(c)]) st.velocities[i][c] = 0.0;
            if (st.fixed[6 * i + 3 + std::size_t(c)]) st.angular_velocities[i][c] = 0.0;
        }

    RelaxReport rep;
    Eigen::VectorXd f, r(nf), delta;
    detail::Triplets trip, red;
    Eigen::SparseMatrix<double> a(nf, nf);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool pattern_ready = false;
    double dt = dt_start > 0.0 ? std::min(cfg.dt, dt_start) : cfg.dt * 1e-3;
    const double dt_min = cfg.dt * 1e-14;

    if (nf == 0) {
        st.stop();
        rep.converged = true;
        return rep;
    }

    auto residual = [&](const std::vector<Vec3>& x, const std::vector<Mat3>& rot, const std::vector<Vec3>& x0,
                        const std::vector<Vec3>& th, double h, bool with_tangent, double& static_res, double& phi) {
        // phi: incremental potential whose gradient is the residual (up to friction)
        phi = detail::assemble(s, x, rot, cfg, field, &x0, f, with_tangent ? &trip : nullptr);
        if (f_ext) {
            f -= *f_ext;
            for (std::size_t i = 0; i < n; ++i)
                phi -= f_ext->segment<3>(6 * Index(i)).dot(x[i] - x0[i]) + f_ext->segment<3>(6 * Index(i) + 3).dot(th[i]);
        }
        static_res = detail::max_abs_free(f, st.fixed);
        const double ci = 1.0 / (h * h) + cfg.c_damp / h;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 dx = x[i] - x0[i];
            const Vec3 ft = s.mass[i] * (ci * dx - st.velocities[i] / h);
            const Vec3 fr = s.inertia[i] * (ci * th[i] - st.angular_velocities[i] / h);
            phi += s.mass[i] * (0.5 * ci * dx.squaredNorm() - st.velocities[i].dot(dx) / h) +
                   s.inertia[i] * (0.5 * ci * th[i].squaredNorm() - st.angular_velocities[i].dot(th[i]) / h);
            for (int c = 0; c < 3; ++c) {
                const Index it = map[6 * i + std::size_t(c)];
                const Index ir = map[6 * i + 3 + std::size_t(c)];
                if (it >= 0) r[it] = f[6 * Index(i) + c] + ft[c];
                if (ir >= 0) r[ir] = f[6 * Index(i) + 3 + c] + fr[c];
            }
        }
        return r.lpNorm<Eigen::Infinity>();
    };

    while (rep.steps < cfg.max_steps) {
        const std::vector<Vec3> x0 = st.positions;
        const std::vector<Mat3> r0 = st.rotations;
        std::vector<Vec3> x = x0;
        std::vector<Mat3> rot = r0;
        std::vector<Vec3> th(n, Vec3::Zero());
        double static_res = 0.0;
        bool ok = false;
        int it = 0;
        double phi = 0.0;
        double rn = residual(x, rot, x0, th, dt, false, static_res, phi);
        for (; it < cfg.max_newton && std::isfinite(rn); ++it) {
            if (rn < cfg.force_tol) {
                ok = true;
                break;
            }
            detail::assemble(s, x, rot, cfg, field, &x0, f, &trip);
            const double ci = 1.0 / (dt * dt) + cfg.c_damp / dt;
            red.clear();
            for (const auto& t : trip) {
                const Index i = map[std::size_t(t.row())], j = map[std::size_t(t.col())];
                if (i >= 0 && j >= 0) red.emplace_back(i, j, t.value());
            }
            for (std::size_t i = 0; i < n; ++i)
                for (int c = 0; c < 6; ++c) {
                    const Index k = map[6 * i + std::size_t(c)];
                    if (k >= 0) red.emplace_back(k, k, ci * (c < 3 ? s.mass[i] : s.inertia[i]));
                }
            a.setFromTriplets(red.begin(), red.end());
            if (!pattern_ready) {
                lu.analyzePattern(a);
                pattern_ready = true;
            }
            lu.factorize(a);
            if (lu.info() != Eigen::Success) break;
            delta = lu.solve(-r);
            if (!delta.allFinite()) break;
            const double slope = r.dot(delta);

            // Armijo backtracking on phi when delta descends
            double lambda = 1.0;
            std::vector<Vec3> xt;
            std::vector<Mat3> rt;
            std::vector<Vec3> tht;
            double rt_norm = 0.0, phit = 0.0;
            for (int ls = 0; ls < 8; ++ls) {
                xt = x;
                rt = rot;
                tht = th;
                for (std::size_t i = 0; i < n; ++i) {
                    Vec3 dx = Vec3::Zero(), dw = Vec3::Zero();
                    for (int c = 0; c < 3; ++c) {
                        const Index kt = map[6 * i + std::size_t(c)];
                        const Index kr = map[6 * i + 3 + std::size_t(c)];
                        if (kt >= 0) dx[c] = lambda * delta[kt];
                        if (kr >= 0) dw[c] = lambda * delta[kr];
                    }
                    xt[i] += dx;
                    if (dw.squaredNorm() > 0) {
                        rt[i] = exp_so3(dw) * rt[i];
                        tht[i] += dw;
                    }
                }
                rt_norm = residual(xt, rt, x0, tht, dt, false, static_res, phit);
                if (!std::isfinite(rt_norm)) {
                    lambda *= 0.5;
                    continue;
                }
                // near convergence phi decrements drown in roundoff; a residual decrease also counts
                const bool accept =
                    rt_norm < rn || (slope < 0.0 && phit <= phi + 1e-4 * lambda * slope + 1e-14 * std::abs(phi));
                if (accept || rt_norm < cfg.force_tol || ls == 7) break;
                lambda *= 0.5;
            }
            x.swap(xt);
            rot.swap(rt);
            th.swap(tht);
            rn = rt_norm;
            phi = phit;
            ++rep.newton_iterations;
        }
        if (!ok && std::isfinite(rn) && rn < cfg.force_tol) ok = true;
        if (!ok) {
            dt *= 0.25;
            if (dt < dt_min) throw NumericalError("relaxation step size underflow (Newton failed repeatedly)");
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            st.velocities[i] = (x[i] - x0[i]) / dt;
            st.angular_velocities[i] = th[i] / dt;
            for (int c = 0; c < 3; ++c) {
                if (st.fixed[6 * i + std::size_t(c)]) st.velocities[i][c] = 0.0;
                if (st.fixed[6 * i + 3 + std::size_t(c)]) st.angular_velocities[i][c] = 0.0;
            }
        }
        st.positions.swap(x);
        st.rotations.swap(rot);
        st.kinetic_energy = kinetic_energy(s, st.velocities);
        if (!std::isfinite(st.kinetic_energy)) throw NumericalError("kinetic energy is not finite");
        ++rep.steps;
        rep.kinetic_energy = st.kinetic_energy;
        rep.residual = static_res;
        rep.final_dt = dt;
        if (st.kinetic_energy < cfg.ke_stop && static_res < cfg.force_tol) {
            rep.converged = true;
            break;
        }
        if (it <= 4) dt = std::min(cfg.dt, 2.0 * dt);
        else if (it > 12) dt *= 0.5;
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!rep.converged)
        throw NonConvergenceError("relaxation reached max_steps with kinetic energy " +
                                      std::to_string(rep.kinetic_energy) + " mJ",
                                  rep.kinetic_energy, rep.steps);
    return rep;
}

/// Stent bundled with the structure used by the solver.
struct StentModel {
    StentSpec spec;
    StentMesh mesh;
    Structure structure;

    explicit StentModel(const StentSpec& s) : spec(s), mesh(generate_stent(s)), structure(Structure::from_stent(mesh, s)) {}
};

/// Radial compression to r_crimped + R_w with circumferential DOFs blocked.
/// Axial coordinates stay free (only one node is pinned axially), so the braid
/// elongates.
inline SimulationState crimp(const StentModel& m, const SolverConfig& cfg, RelaxReport* report = nullptr) {
    cfg.validate();
    if (cfg.r_crimped > m.spec.stent_radius) throw ConfigError("r_crimped must not exceed the stent radius");
    SimulationState st = SimulationState::rest(m.structure);
    const std::size_t n = m.structure.nodes();
    const double r_free = m.spec.lattice_radius();
    const double r_target = cfg.r_crimped + m.spec.wire_radius;
    std::vector<double> phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        phi[i] = std::atan2(m.mesh.nodes[i].y(), m.mesh.nodes[i].x());
        st.fixed[6 * i] = st.fixed[6 * i + 1] = 1;
    }
    st.fixed[2] = 1;  // axial pin on node 0

    // axial pitch of a helix of fixed beam length at radius r
    const double l0 = m.structure.beams.front().l0;
    const double dth = 2.0 * kPi / m.spec.wires_per_family();
    auto pitch = [&](double r) {
        const double chord = 2.0 * r * std::sin(0.5 * dth);
        return std::sqrt(std::max(l0 * l0 - chord * chord, 1e-12 * l0 * l0));
    };
    RelaxReport total;
    double r_prev = r_free;
    double dt_carry = 0.0;
    for (int k = 1; k <= cfg.n_crimp_steps; ++k) {
        const double rk = r_free + (r_target - r_free) * double(k) / cfg.n_crimp_steps;
        const double scale = pitch(rk) / pitch(r_prev);
        const double z0 = st.positions[0].z();
        for (std::size_t i = 0; i < n; ++i) {
            auto& p = st.positions[i];
            p = Vec3(rk * std::cos(phi[i]), rk * std::sin(phi[i]), z0 + (p.z() - z0) * scale);
        }
        st.stop();
        const auto rep = relax<NoContact>(m.structure, st, cfg, nullptr, nullptr, dt_carry);
        dt_carry = rep.final_dt;
        total.steps += rep.steps;
        total.newton_iterations += rep.newton_iterations;
        total.seconds += rep.seconds;
        total.kinetic_energy = rep.kinetic_energy;
        total.residual = rep.residual;
        r_prev = rk;
    }
    total.converged = true;
    if (report) *report = total;
    st.phase = Phase::crimped;
    return st;
}

/// Straight centerline of the crimped stent (ring centres).
inline CenterlinePath crimped_centerline(const StentModel& m, const SimulationState& crimped) {
    return CenterlinePath{ring_centers(m.mesh, crimped.positions)};
}

/// Drives every ring rigidly along the successive centerlines; nodal
/// translations are tied to the ring, nodal rotations relax at every step.
inline SimulationState position(const StentModel& m, const SimulationState& crimped,
                                const std::vector<CenterlinePath>& paths, const SolverConfig& cfg,
                                RelaxReport* report = nullptr) {
    if (crimped.phase != Phase::crimped) throw StateError("position() expects a crimped state");
    const auto base_centers = ring_centers(m.mesh, crimped.positions);
    SimulationState st = crimped;
    std::fill(st.fixed.begin(), st.fixed.end(), std::uint8_t{0});
    for (std::size_t i = 0; i < st.positions.size(); ++i) st.fixed[6 * i] = st.fixed[6 * i + 1] = st.fixed[6 * i + 2] = 1;
    RelaxReport total;
    double dt_carry = 0.0;
    for (const auto& path : paths) {
        if (path.size() != m.mesh.rings.size()) throw GeometryError("path point count differs from the ring count");
        const auto frames = ring_frames(path);
        for (std::size_t ring = 0; ring < m.mesh.rings.size(); ++ring)
            for (int id : m.mesh.rings[ring]) {
                const auto j = std::size_t(id);
                st.positions[j] = path.points[ring] + frames[ring] * (crimped.positions[j] - base_centers[ring]);
                st.rotations[j] = frames[ring] * crimped.rotations[j];
            }
        st.stop();
        const auto rep = relax<NoContact>(m.structure, st, cfg, nullptr, nullptr, dt_carry);
        dt_carry = rep.final_dt;
        total.steps += rep.steps;
        total.newton_iterations += rep.newton_iterations;
        total.seconds += rep.seconds;
        total.kinetic_energy = rep.kinetic_energy;
        if (!std::isfinite(rep.kinetic_energy)) throw NumericalError("positioning diverged");
    }
    total.converged = true;
    if (report) *report = total;
    st.phase = Phase::positioned;
    return st;
}

struct DeployResult {
    SimulationState state;
    Eigen::VectorXd u_h;  // (u_x1, u_y1, u_z1, ...)
    RelaxReport report;
};

/// Releases all ties and relaxes against the wall.
template <SignedDistanceField F>
DeployResult deploy(const StentModel& m, const SimulationState& positioned, const F& field, const SolverConfig& cfg) {
    if (positioned.phase != Phase::positioned && positioned.phase != Phase::crimped)
        throw StateError("deploy() expects a positioned (or crimped) state");
    DeployResult out{positioned, {}, {}};
    out.state.release();
    out.state.stop();
    out.report = relax(m.structure, out.state, cfg, &field);
    out.state.phase = Phase::deployed;
    const std::size_t n = m.structure.nodes();
    out.u_h.resize(3 * Index(n));
    for (std::size_t i = 0; i < n; ++i)
        out.u_h.segment<3>(3 * Index(i)) = out.state.positions[i] - m.mesh.nodes[i];
    return out;
}

/// Straight wire clamped at one end with a transverse tip force; returns the
/// tip deflection along the load.
inline double beam_bench_cantilever(double length, double wire_radius, double young_gpa, double tip_load,
                                    int n_elements = 10, SolverConfig cfg = {}) {
    if (!(length > 0 && wire_radius > 0 && young_gpa > 0)) throw DomainError("invalid cantilever bench input");
    std::vector<Vec3> nodes;
    std::vector<std::array<int, 2>> beams;
    for (int i = 0; i <= n_elements; ++i) {
        nodes.emplace_back(length * i / n_elements, 0.0, 0.0);
        if (i > 0) beams.push_back({i - 1, i});
    }
    const auto s = Structure::build(nodes, beams, {}, wire_radius, young_gpa * 1e3, 0.33, 9.13e-9);
    auto st = SimulationState::rest(s);
    for (int c = 0; c < 6; ++c) st.fixed[std::size_t(c)] = 1;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(6 * Index(nodes.size()));
    f[6 * n_elements + 1] = tip_load;
    cfg.force_tol = std::min(cfg.force_tol, 1e-6 * std::max(std::abs(tip_load), 1e-12));
    relax<NoContact>(s, st, cfg, nullptr, &f);
    return st.positions.back().y();
}

/// Rigid straight tube along z; negative inside.
struct StraightTube {
    double radius = 1.0;
    double distance(const Vec3& p) const { return std::hypot(p.x(), p.y()) - radius; }
};

struct FreeExpansionResult {
    double max_radius_error = 0.0;  // max |r_i - (R_s + R_w)| after deployment [mm]
    double crimped_radius_error = 0.0;
    double kinetic_energy = 0.0;
};

/// Crimps the stent and releases it inside a straight tube wider than the
/// free stent; the braid should recover its free radius.
inline FreeExpansionResult free_expansion_bench(const StentSpec& spec, const SolverConfig& cfg, double tube_clearance = 1.0) {
    const StentModel m(spec);
    const auto crimped = crimp(m, cfg);
    FreeExpansionResult r;
    for (const auto& p : crimped.positions)
        r.crimped_radius_error =
            std::max(r.crimped_radius_error, std::abs(std::hypot(p.x(), p.y()) - (cfg.r_crimped + spec.wire_radius)));
    const StraightTube tube{spec.lattice_radius() + tube_clearance};
    const auto d = deploy(m, crimped, tube, cfg);
    for (const auto& p : d.state.positions)
        r.max_radius_error = std::max(r.max_radius_error, std::abs(std::hypot(p.x(), p.y()) - spec.lattice_radius()));
    r.kinetic_energy = d.report.kinetic_energy;
    return r;
}

}  // namespace stentrom::fem
