#include "stentrom/fem/solver.hpp"

#include <gtest/gtest.h>

using namespace stentrom;

namespace {

StentSpec coarse() {
    StentSpec s;
    s.n_wires = 16;
    s.n_cells = 20;
    return s;
}

double euler_bernoulli_tip(double p, double l, double r, double e_gpa) {
    const double i = kPi * std::pow(r, 4) / 4.0;
    return p * l * l * l / (3.0 * e_gpa * 1e3 * i);
}

double total_wire_length(const fem::StentModel& m, const std::vector<Vec3>& x) {
    double l = 0;
    for (const auto& b : m.mesh.beams) l += (x[std::size_t(b[1])] - x[std::size_t(b[0])]).norm();
    return l;
}

// Shared crimped coarse stent; crimping takes a few seconds.
struct CrimpedFixture {
    fem::StentModel model;
    fem::SolverConfig cfg;
    fem::SimulationState state;
    CrimpedFixture() : model(coarse()) { state = fem::crimp(model, cfg); }
};

const CrimpedFixture& crimped() {
    static const CrimpedFixture c;
    return c;
}

}  // namespace

TEST(CantileverBench, MatchesEulerBernoulli) {
    const double d = fem::beam_bench_cantilever(10.0, 0.1, 225.0, 1e-4);
    const double want = euler_bernoulli_tip(1e-4, 10.0, 0.1, 225.0);
    EXPECT_LT(std::abs(d - want) / want, 0.01);
}

TEST(CantileverBench, ZeroLoadZeroDeflection) { EXPECT_EQ(fem::beam_bench_cantilever(10.0, 0.1, 225.0, 0.0), 0.0); }

TEST(CantileverBench, DeflectionInverseInStiffness) {
    const double a = fem::beam_bench_cantilever(10.0, 0.1, 225.0, 1e-4);
    const double b = fem::beam_bench_cantilever(10.0, 0.1, 450.0, 1e-4);
    EXPECT_LT(std::abs(a / b - 2.0) / 2.0, 0.01);
}

TEST(CantileverBench, InvalidInput) { EXPECT_THROW(fem::beam_bench_cantilever(-1.0, 0.1, 225.0, 1e-4), DomainError); }

TEST(Crimp, ReachesCrimpedRadiusAndElongates) {
    const auto& c = crimped();
    const double target = c.cfg.r_crimped + c.model.spec.wire_radius;
    double worst = 0;
    for (const auto& p : c.state.positions) worst = std::max(worst, std::abs(std::hypot(p.x(), p.y()) - target));
    EXPECT_LT(worst, 1e-6);
    const auto rc = ring_centers(c.model.mesh, c.state.positions);
    EXPECT_GE(rc.back().z() - rc.front().z(), c.model.spec.length);
    EXPECT_EQ(c.state.phase, fem::Phase::crimped);
}

TEST(Crimp, ToFreeRadiusIsIdentity) {
    StentSpec s;
    s.n_wires = 8;
    s.n_cells = 6;
    const fem::StentModel m(s);
    fem::SolverConfig cfg;
    cfg.r_crimped = s.stent_radius;
    const auto st = fem::crimp(m, cfg);
    for (std::size_t i = 0; i < st.positions.size(); ++i) EXPECT_LT((st.positions[i] - m.mesh.nodes[i]).norm(), 1e-9);
}

TEST(Crimp, InvalidRadiusRejected) {
    const fem::StentModel m(coarse());
    fem::SolverConfig cfg;
    cfg.r_crimped = 0.0;
    EXPECT_THROW(fem::crimp(m, cfg), ConfigError);
    cfg.r_crimped = 3.0;
    EXPECT_THROW(fem::crimp(m, cfg), ConfigError);
}

TEST(Crimp, Deterministic) {
    StentSpec s;
    s.n_wires = 8;
    s.n_cells = 8;
    const fem::StentModel m(s);
    const fem::SolverConfig cfg;
    const auto a = fem::crimp(m, cfg);
    const auto b = fem::crimp(m, cfg);
    for (std::size_t i = 0; i < a.positions.size(); ++i) EXPECT_EQ(a.positions[i], b.positions[i]);
}

TEST(Position, StraightVesselIsRigidTranslation) {
    const auto& c = crimped();
    const fem::CenterlinePath c0 = fem::crimped_centerline(c.model, c.state);
    const Vec3 shift(0.0, 1.0, 3.0);
    const auto ct = c0.translated(shift);
    auto cfg = c.cfg;
    cfg.n_position_steps = 4;
    const auto st = fem::position(c.model, c.state, fem::interpolate_path(c0, ct, cfg.n_position_steps), cfg);
    for (std::size_t i = 0; i < st.positions.size(); ++i)
        EXPECT_LT((st.positions[i] - (c.state.positions[i] + shift)).norm(), 1e-6);
    EXPECT_EQ(st.phase, fem::Phase::positioned);
}

TEST(Position, RingCentresFollowCurvedPath) {
    const auto& c = crimped();
    const fem::CenterlinePath c0 = fem::crimped_centerline(c.model, c.state);
    const auto line = discretize(BezierCenterline{Vec3(0, 0, 0), Vec3(0, 6, 50), Vec3(0, 0, 100)}, 400);
    const auto ct = fem::project_centerline(c0.translated(-c0.points.front()), line, 0.3);
    const auto st = fem::position(c.model, c.state, fem::interpolate_path(c0, ct, c.cfg.n_position_steps), c.cfg);
    const auto rc = ring_centers(c.model.mesh, st.positions);
    for (std::size_t i = 0; i < rc.size(); ++i) EXPECT_LT((rc[i] - ct.points[i]).norm(), 1e-3) << "ring " << i;
    const double l0 = total_wire_length(c.model, c.state.positions);
    const double l1 = total_wire_length(c.model, st.positions);
    EXPECT_LT(std::abs(l1 - l0) / l0, 0.01);
}

TEST(Position, RequiresCrimpedState) {
    const fem::StentModel m(coarse());
    const auto rest = fem::SimulationState::rest(m.structure);
    EXPECT_THROW(fem::position(m, rest, {}, fem::SolverConfig{}), StateError);
}

TEST(Deploy, RequiresPositionedState) {
    const fem::StentModel m(coarse());
    const auto rest = fem::SimulationState::rest(m.structure);
    EXPECT_THROW(fem::deploy(m, rest, fem::StraightTube{3.0}, fem::SolverConfig{}), StateError);
}

TEST(Deploy, FreeExpansionRecoversFreeRadius) {
    const auto r = fem::free_expansion_bench(coarse(), fem::SolverConfig{});
    EXPECT_LT(r.crimped_radius_error, 1e-6);
    EXPECT_LT(r.max_radius_error, 0.05);
    EXPECT_LT(r.kinetic_energy, 1e-12);
}

// Stent released in a tube narrower than its free diameter presses on the wall.
TEST(Deploy, NarrowTubeContactEquilibrium) {
    const auto& c = crimped();
    const fem::StraightTube tube{2.0};
    const auto d = fem::deploy(c.model, c.state, tube, c.cfg);
    EXPECT_LT(d.report.kinetic_energy, 1e-12);
    EXPECT_TRUE(d.report.converged);
    EXPECT_EQ(d.state.phase, fem::Phase::deployed);
    const double rw = c.model.spec.wire_radius;
    int in_contact = 0;
    double worst_penetration = 0;
    for (const auto& p : d.state.positions) {
        const double g = tube.distance(p) + rw;
        if (g > 0) {
            ++in_contact;
            worst_penetration = std::max(worst_penetration, g);
        }
    }
    EXPECT_GT(in_contact, 0);
    EXPECT_LT(worst_penetration, 0.01);
    // u_h is final minus undeformed positions, node-major
    ASSERT_EQ(d.u_h.size(), Index(3 * c.model.mesh.nodes.size()));
    for (std::size_t i = 0; i < c.model.mesh.nodes.size(); i += 37)
        EXPECT_EQ(Vec3(d.u_h.segment<3>(3 * Index(i))), Vec3(d.state.positions[i] - c.model.mesh.nodes[i]));
}

TEST(Deploy, MaxStepsRaisesNonConvergence) {
    const auto& c = crimped();
    auto cfg = c.cfg;
    cfg.max_steps = 2;
    try {
        fem::deploy(c.model, c.state, fem::StraightTube{4.0}, cfg);
        FAIL() << "expected NonConvergenceError";
    } catch (const NonConvergenceError& e) {
        EXPECT_GT(e.final_kinetic_energy, cfg.ke_stop);
        EXPECT_EQ(e.steps_taken, 2);
    }
}

TEST(SolverState, KineticEnergyDefinition) {
    const fem::StentModel m(coarse());
    std::vector<Vec3> v(m.structure.nodes());
    double want = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = Vec3(0.1 * double(i % 7), -0.2, 0.05 * double(i % 3));
        want += 0.5 * m.structure.mass[i] * v[i].squaredNorm();
    }
    EXPECT_NEAR(fem::kinetic_energy(m.structure, v), want, 1e-12 * want);
}

TEST(SolverConfigValidation, RejectsNonPositive) {
    fem::SolverConfig c;
    c.k_contact = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.dt = -1;
    EXPECT_THROW(c.validate(), ConfigError);
}
