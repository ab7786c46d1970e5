#pragma once

// Sampling of the deployment-parameter space, high-fidelity campaigns,
// outcome labelling and snapshot assembly.
//
// mu_B = [y_P1, z_P1, D_v, D_a, y_Ca, eta]; mu_cl = [y_Q1, z_Q1, ..., D_v, D_a, y_Ca].

#include "stentrom/fem/solver.hpp"
#include "stentrom/io/binary.hpp"
#include "stentrom/io/files.hpp"
#include "stentrom/io/json.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace stentrom::dataset {

namespace fs = std::filesystem;
using io::Json;

enum class Label { failure = 0, success = 1 };

inline const char* to_string(Label l) { return l == Label::success ? "success" : "failure"; }

inline Label label_from_string(const std::string& s) {
    if (s == "success") return Label::success;
    if (s == "failure") return Label::failure;
    throw DataError("unknown label '" + s + "'");
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
    double lerp(double u) const { return lo + u * (hi - lo); }
    double unlerp(double x) const { return (x - lo) / (hi - lo); }
};

/// Ranges of the six deployment parameters. With y_ca_relative the y_Ca range
/// is a fraction of the diameter-dependent interval
/// [0.6 D_v/2 + 0.3 D_a, 0.9 (D_v/2 + D_a/2)], which keeps a neck opening.
struct ParamSpace {
    static constexpr int kDims = 6;
    static constexpr std::array<const char*, kDims> kNames = {"y_p1", "z_p1", "d_vessel", "d_aneurysm", "y_ca", "eta"};

    std::array<Range, kDims> ranges = {Range{0.0, 8.0}, Range{45.0, 55.0}, Range{2.0, 4.0},
                                       Range{5.0, 10.0}, Range{0.0, 1.0},  Range{0.3, 0.5}};
    bool y_ca_relative = true;
    std::uint64_t seed = 1;

    void validate() const {
        for (int d = 0; d < kDims; ++d)
            if (!(ranges[std::size_t(d)].lo < ranges[std::size_t(d)].hi))
                throw ConfigError(std::string("range of ") + kNames[std::size_t(d)] + " must satisfy lower < upper");
        if (!(ranges[2].lo > 0.0 && ranges[3].lo > 0.0)) throw ConfigError("diameters must be positive");
        if (ranges[5].lo < 0.0 || ranges[5].hi > 1.0) throw ConfigError("eta range must lie in [0,1]");
        if (y_ca_relative && (ranges[4].lo < 0.0 || ranges[4].hi > 1.0))
            throw ConfigError("relative y_ca range must lie in [0,1]");
    }

    static Range y_ca_bounds(double dv, double da) { return {0.6 * 0.5 * dv + 0.3 * da, 0.9 * (0.5 * dv + 0.5 * da)}; }

    /// Unit hypercube point -> physical mu_B.
    Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const {
        require(u.size() == kDims, "expected a 6-dimensional point");
        Eigen::VectorXd mu(kDims);
        for (int d = 0; d < kDims; ++d) mu[d] = ranges[std::size_t(d)].lerp(u[d]);
        if (y_ca_relative) mu[4] = y_ca_bounds(mu[2], mu[3]).lerp(mu[4]);
        return mu;
    }

    Eigen::VectorXd to_unit(const Eigen::VectorXd& mu) const {
        require(mu.size() == kDims, "expected a 6-dimensional point");
        Eigen::VectorXd m = mu;
        if (y_ca_relative) m[4] = y_ca_bounds(mu[2], mu[3]).unlerp(mu[4]);
        Eigen::VectorXd u(kDims);
        for (int d = 0; d < kDims; ++d) u[d] = ranges[std::size_t(d)].unlerp(m[d]);
        return u;
    }

    bool contains(const Eigen::VectorXd& mu, double tol = 1e-9) const {
        const auto u = to_unit(mu);
        return (u.array() >= -tol).all() && (u.array() <= 1.0 + tol).all();
    }
};

inline Json to_json(const ParamSpace& s) {
    Json r = Json::object();
    for (int d = 0; d < ParamSpace::kDims; ++d)
        r[ParamSpace::kNames[std::size_t(d)]] = {s.ranges[std::size_t(d)].lo, s.ranges[std::size_t(d)].hi};
    return {{"ranges", r}, {"y_ca_relative", s.y_ca_relative}, {"seed", s.seed}};
}

inline ParamSpace param_space_from_json(const Json& j) {
    ParamSpace s;
    io::StrictObject o(j, "space");
    if (const Json* r = o.child("ranges")) {
        io::StrictObject ro(*r, "space.ranges");
        for (int d = 0; d < ParamSpace::kDims; ++d) {
            std::array<double, 2> v{s.ranges[std::size_t(d)].lo, s.ranges[std::size_t(d)].hi};
            ro.read(ParamSpace::kNames[std::size_t(d)], v);
            s.ranges[std::size_t(d)] = {v[0], v[1]};
        }
        ro.finish();
    }
    o.read("y_ca_relative", s.y_ca_relative);
    o.read("seed", s.seed);
    o.finish();
    s.validate();
    return s;
}

/// Latin hypercube in [0,1]^d: one point per stratum and dimension.
inline Eigen::MatrixXd lhs_unit(int n, int d, std::uint64_t seed) {
    require(n >= 2, "LHS needs at least two samples");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd u(n, d);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int k = 0; k < d; ++k) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) u(i, k) = (perm[std::size_t(i)] + unif(rng)) / n;
    }
    return u;
}

/// N_s x 6 plan of physical mu_B rows.
inline Eigen::MatrixXd lhs_plan(const ParamSpace& space, int n) {
    space.validate();
    const Eigen::MatrixXd u = lhs_unit(n, ParamSpace::kDims, space.seed);
    Eigen::MatrixXd plan(n, ParamSpace::kDims);
    for (int i = 0; i < n; ++i) plan.row(i) = space.from_unit(u.row(i).transpose()).transpose();
    return plan;
}

/// Smallest pairwise distance between rows, columns scaled to unit span.
inline double min_pairwise_distance(const Eigen::MatrixXd& x) {
    if (x.rows() < 2) return std::numeric_limits<double>::infinity();
    Eigen::RowVectorXd span = (x.colwise().maxCoeff() - x.colwise().minCoeff()).cwiseMax(1e-300);
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = i + 1; j < x.rows(); ++j)
            best = std::min(best, ((x.row(i) - x.row(j)).array() / span.array()).matrix().norm());
    return best;
}

/// Row indices of a maximin subset chosen greedily from random starts.
inline std::vector<int> sub_plan_indices(const Eigen::MatrixXd& plan, int n, std::uint64_t seed, int restarts = 20) {
    const int rows = int(plan.rows());
    if (n < 1 || n >= rows) throw DomainError("sub_plan needs 1 <= n < rows(plan)");
    Eigen::RowVectorXd span = (plan.colwise().maxCoeff() - plan.colwise().minCoeff()).cwiseMax(1e-300);
    Eigen::MatrixXd z = plan.array().rowwise() / span.array();
    Eigen::MatrixXd dist(rows, rows);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < rows; ++j) dist(i, j) = (z.row(i) - z.row(j)).norm();

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, rows - 1);
    std::vector<int> best;
    double best_score = -1.0;
    for (int r = 0; r < std::max(1, restarts); ++r) {
        std::vector<int> sel{pick(rng)};
        Eigen::VectorXd dmin = dist.col(sel[0]);
        while (int(sel.size()) < n) {
            Index next = 0;
            dmin.maxCoeff(&next);
            sel.push_back(int(next));
            dmin = dmin.cwiseMin(dist.col(next));
        }
        double score = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < sel.size(); ++a)
            for (std::size_t b = a + 1; b < sel.size(); ++b) score = std::min(score, dist(sel[a], sel[b]));
        if (score > best_score) {
            best_score = score;
            best = sel;
        }
    }
    std::sort(best.begin(), best.end());
    return best;
}

inline Eigen::MatrixXd sub_plan(const Eigen::MatrixXd& plan, int n, std::uint64_t seed, int restarts = 20) {
    const auto idx = sub_plan_indices(plan, n, seed, restarts);
    Eigen::MatrixXd out(Index(idx.size()), plan.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(Index(i)) = plan.row(idx[i]);
    return out;
}

/// Fixed ends of the vessel centerline.
struct VesselFrame {
    Vec3 p0 = Vec3(0.0, 0.0, 0.0);
    Vec3 p2 = Vec3(0.0, 0.0, 100.0);
    int n_polyline = 400;
};

inline Json to_json(const VesselFrame& f) {
    return {{"p0", io::to_json(f.p0)}, {"p2", io::to_json(f.p2)}, {"n_polyline", f.n_polyline}};
}

inline VesselFrame vessel_frame_from_json(const Json& j) {
    VesselFrame f;
    io::StrictObject o(j, "vessel");
    if (const Json* p = o.child("p0")) f.p0 = io::vec3_from_json(*p);
    if (const Json* p = o.child("p2")) f.p2 = io::vec3_from_json(*p);
    o.read("n_polyline", f.n_polyline);
    o.finish();
    if (f.n_polyline < 1) throw ConfigError("vessel.n_polyline must be positive");
    return f;
}

inline VesselParams vessel_params(const Eigen::VectorXd& mu_b) {
    require(mu_b.size() == ParamSpace::kDims, "mu_B must have 6 entries");
    return {mu_b[0], mu_b[1], mu_b[2], mu_b[3], mu_b[4]};
}

inline VesselModel make_vessel(const Eigen::VectorXd& mu_b, const VesselFrame& f) {
    return VesselModel::from_params(vessel_params(mu_b), f.p0, f.p2, f.n_polyline);
}

/// Failure iff a node of the first or last ring lies inside the aneurysm
/// sphere shrunk by the wire radius.
inline Label label_outcome(const std::vector<Vec3>& positions, const VesselModel& v, const StentSpec& spec) {
    if (positions.size() != std::size_t(spec.node_count())) throw DomainError("position count does not match the stent");
    const double limit = 0.5 * v.aneurysm_diameter() - spec.wire_radius;
    for (int station : {0, spec.n_cells})
        for (int fam = 0; fam < 2; ++fam)
            for (int w = 0; w < spec.wires_per_family(); ++w) {
                const Vec3& x = positions[std::size_t(stent_node_id(spec, fam, w, station))];
                if ((v.aneurysm_center() - x).norm() < limit) return Label::failure;
            }
    return Label::success;
}

/// N_cl points equally spaced by arc length along the path (ends included),
/// followed by the three diameters/offset.
inline Eigen::VectorXd mu_cl_from(const std::vector<Vec3>& path, int n_cl, double d_vessel, double d_aneurysm,
                                  double y_ca) {
    if (n_cl < 2) throw DomainError("N_cl must be >= 2");
    if (path.size() < 2) throw GeometryError("centerline needs at least two points");
    Polyline line(path);
    Eigen::VectorXd out(2 * n_cl + 3);
    for (int i = 0; i < n_cl; ++i) {
        const Vec3 q = i == n_cl - 1 ? path.back() : line.point_at(line.length() * i / (n_cl - 1));
        out[2 * i] = q.y();
        out[2 * i + 1] = q.z();
    }
    out[2 * n_cl] = d_vessel;
    out[2 * n_cl + 1] = d_aneurysm;
    out[2 * n_cl + 2] = y_ca;
    return out;
}

inline Eigen::VectorXd extract_mu_cl(const fem::CenterlinePath& ct, int n_cl, const VesselModel& v) {
    return mu_cl_from(ct.points, n_cl, v.vessel_diameter(), v.aneurysm_diameter(), v.aneurysm_offset());
}

enum class PredictorKind { mu_b, mu_cl };

inline const char* to_string(PredictorKind k) { return k == PredictorKind::mu_b ? "mu_B" : "mu_cl"; }

inline PredictorKind predictor_from_string(const std::string& s) {
    if (s == "mu_B" || s == "mu_b") return PredictorKind::mu_b;
    if (s == "mu_cl") return PredictorKind::mu_cl;
    throw ConfigError("unknown predictor kind '" + s + "' (expected mu_B or mu_cl)");
}

/// Crimped stent plus the straight centerline every sample starts from; a
/// deterministic function of the stent spec and solver config.
struct CrimpedStent {
    fem::StentModel model;
    fem::SimulationState state;
    fem::CenterlinePath c0;
    fem::RelaxReport report;

    CrimpedStent(const StentSpec& spec, const fem::SolverConfig& cfg) : model(spec) {
        state = fem::crimp(model, cfg, &report);
        c0 = fem::crimped_centerline(model, state);
    }
};

/// Geometric final centerline C_T for a parameter point (no FE run).
inline fem::CenterlinePath target_centerline(const fem::CenterlinePath& c0, const Eigen::VectorXd& mu_b,
                                             const VesselFrame& frame) {
    const auto v = make_vessel(mu_b, frame);
    return fem::project_centerline(c0.translated(-c0.points.front()), v.polyline(), mu_b[5]);
}

struct HFSample {
    int id = 0;
    Eigen::VectorXd mu_b;
    Eigen::VectorXd mu_cl;
    std::vector<Vec3> centerline;  // C_T
    Eigen::VectorXd u_h;           // empty unless converged
    Label label = Label::failure;
    bool converged = false;
    double runtime = 0.0;
    double final_ke = 0.0;
    long steps = 0;
    std::string error;

    bool usable() const { return converged && u_h.size() > 0; }
};

struct CampaignConfig {
    ParamSpace space;
    int n_samples = 60;
    StentSpec stent;
    fem::SolverConfig solver;
    VesselFrame frame;
    int n_cl = 3;
    int workers = 0;  // 0: hardware concurrency

    void validate() const {
        space.validate();
        stent.validate();
        solver.validate();
        if (n_samples < 2) throw ConfigError("n_samples must be >= 2");
        if (n_cl < 2) throw ConfigError("n_cl must be >= 2");
    }
};

inline Json to_json(const CampaignConfig& c) {
    return {{"space", to_json(c.space)},           {"n_samples", c.n_samples},     {"stent", io::to_json(c.stent)},
            {"solver", io::to_json(c.solver)},      {"vessel", to_json(c.frame)},  {"n_cl", c.n_cl}};
}

/// Fingerprint of everything that determines sample results.
inline std::string config_hash(const CampaignConfig& c) { return io::hex64(io::fnv1a(to_json(c).dump())); }

struct HFDataset {
    CampaignConfig config;
    std::vector<HFSample> samples;
    std::vector<Vec3> c0;  // crimped centerline shared by all samples

    std::vector<int> usable_ids() const {
        std::vector<int> r;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].usable()) r.push_back(int(i));
        return r;
    }
};

/// Disjoint random train/test index split over `ids`.
inline std::pair<std::vector<int>, std::vector<int>> split_indices(std::vector<int> ids, int n_test, std::uint64_t seed) {
    if (n_test < 0 || n_test >= int(ids.size())) throw DomainError("test split must leave training samples");
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<int> test(ids.begin(), ids.begin() + n_test);
    std::vector<int> train(ids.begin() + n_test, ids.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {train, test};
}

/// Snapshot matrix: one column per usable success sample among `ids`.
inline Eigen::MatrixXd assemble_snapshots(const HFDataset& ds, const std::vector<int>& ids) {
    std::vector<const HFSample*> cols;
    for (int i : ids) {
        const auto& s = ds.samples.at(std::size_t(i));
        if (s.usable() && s.label == Label::success) cols.push_back(&s);
    }
    if (cols.empty()) throw DataError("no successful converged samples to assemble");
    Eigen::MatrixXd S(cols.front()->u_h.size(), Index(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j]->u_h.size() != S.rows()) throw DataError("inconsistent snapshot lengths");
        S.col(Index(j)) = cols[j]->u_h;
    }
    return S;
}

inline Eigen::MatrixXd assemble_snapshots(const HFDataset& ds) {
    std::vector<int> all(ds.samples.size());
    std::iota(all.begin(), all.end(), 0);
    return assemble_snapshots(ds, all);
}

/// Predictor vector of a sample for the requested kind.
inline Eigen::VectorXd predictor(const HFSample& s, PredictorKind kind, int n_cl) {
    if (kind == PredictorKind::mu_b) return s.mu_b;
    return mu_cl_from(s.centerline, n_cl, s.mu_b[2], s.mu_b[3], s.mu_b[4]);
}

inline Eigen::MatrixXd predictor_matrix(const HFDataset& ds, const std::vector<int>& ids, PredictorKind kind, int n_cl) {
    if (ids.empty()) throw DataError("empty sample selection");
    const auto first = predictor(ds.samples.at(std::size_t(ids[0])), kind, n_cl);
    Eigen::MatrixXd x(Index(ids.size()), first.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        x.row(Index(i)) = predictor(ds.samples.at(std::size_t(ids[i])), kind, n_cl).transpose();
    return x;
}

/// Crimped stent -> position -> deploy for one parameter point. Failures are
/// recorded on the sample rather than thrown.
inline HFSample simulate_sample(const CrimpedStent& crimped, const CampaignConfig& cfg, const Eigen::VectorXd& mu_b,
                                int id) {
    HFSample s;
    s.id = id;
    s.mu_b = mu_b;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const auto v = make_vessel(mu_b, cfg.frame);
        // C_0 starts at the origin; ring offsets are taken relative to it
        const auto ct = fem::project_centerline(crimped.c0.translated(-crimped.c0.points.front()), v.polyline(), mu_b[5]);
        s.centerline = ct.points;
        s.mu_cl = extract_mu_cl(ct, cfg.n_cl, v);
        const auto paths = fem::interpolate_path(crimped.c0, ct, cfg.solver.n_position_steps);
        const auto positioned = fem::position(crimped.model, crimped.state, paths, cfg.solver);
        const auto d = fem::deploy(crimped.model, positioned, v, cfg.solver);
        s.u_h = d.u_h;
        s.final_ke = d.report.kinetic_energy;
        s.steps = d.report.steps;
        s.converged = true;
        s.label = label_outcome(d.state.positions, v, crimped.model.spec);
    } catch (const NonConvergenceError& e) {
        s.error = e.what();
        s.final_ke = e.final_kinetic_energy;
        s.steps = e.steps_taken;
    } catch (const Error& e) {
        s.error = e.what();
    }
    s.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

// --- on-disk layout -------------------------------------------------------

inline fs::path sample_dir(const fs::path& root, int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample_%05d", id);
    return root / buf;
}

inline void write_sample(const fs::path& root, const HFSample& s) {
    const fs::path d = sample_dir(root, s.id);
    fs::create_directories(d);
    Json cl = Json::array();
    for (const auto& p : s.centerline) cl.push_back(io::to_json(p));
    Json mu = {{"id", s.id},           {"mu_B", io::to_json(s.mu_b)}, {"mu_cl", io::to_json(s.mu_cl)},
               {"centerline", cl},      {"runtime", s.runtime},         {"final_ke", s.final_ke},
               {"steps", s.steps},      {"error", s.error}};
    io::write_file_atomic(d / "mu.json", mu.dump(1));
    if (s.usable()) {
        std::ostringstream os;
        os.write(reinterpret_cast<const char*>(s.u_h.data()), std::streamsize(s.u_h.size() * sizeof(double)));
        io::write_file_atomic(d / "u_h.bin", os.str());
    }
    // written last: its presence marks the sample complete
    io::write_file_atomic(d / "label.json", Json{{"label", to_string(s.label)}, {"converged", s.converged}}.dump());
}

inline bool sample_complete(const fs::path& root, int id) { return fs::exists(sample_dir(root, id) / "label.json"); }

inline HFSample read_sample(const fs::path& root, int id, Index n_dof) {
    const fs::path d = sample_dir(root, id);
    HFSample s;
    try {
        const Json mu = Json::parse(io::read_file(d / "mu.json"));
        const Json lab = Json::parse(io::read_file(d / "label.json"));
        s.id = mu.at("id").get<int>();
        s.mu_b = io::vector_from_json(mu.at("mu_B"));
        s.mu_cl = io::vector_from_json(mu.at("mu_cl"));
        for (const auto& p : mu.at("centerline")) s.centerline.push_back(io::vec3_from_json(p));
        s.runtime = mu.at("runtime").get<double>();
        s.final_ke = mu.at("final_ke").get<double>();
        s.steps = mu.at("steps").get<long>();
        s.error = mu.at("error").get<std::string>();
        s.label = label_from_string(lab.at("label").get<std::string>());
        s.converged = lab.at("converged").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt sample " + d.string() + ": " + e.what());
    }
    if (s.id != id) throw DataError("sample id mismatch in " + d.string());
    if (s.converged) {
        const std::string raw = io::read_file(d / "u_h.bin");
        if (Index(raw.size()) != n_dof * Index(sizeof(double)))
            throw DataError("u_h.bin has wrong length in " + d.string());
        s.u_h.resize(n_dof);
        std::memcpy(s.u_h.data(), raw.data(), raw.size());
    }
    return s;
}

inline Json manifest_json(const CampaignConfig& cfg, const Eigen::MatrixXd& plan) {
    Json rows = Json::array();
    for (Index i = 0; i < plan.rows(); ++i) rows.push_back(io::to_json(Eigen::VectorXd(plan.row(i).transpose())));
    Json m = to_json(cfg);
    m["format"] = "stentrom-dataset";
    m["version"] = 1;
    m["seed"] = cfg.space.seed;
    m["config_hash"] = config_hash(cfg);
    m["plan"] = rows;
    return m;
}

inline CampaignConfig campaign_config_from_json(const Json& j) {
    CampaignConfig c;
    c.space = param_space_from_json(j.at("space"));
    c.n_samples = j.at("n_samples").get<int>();
    c.stent = io::stent_spec_from_json(j.at("stent"));
    c.solver = io::solver_config_from_json(j.at("solver"));
    c.frame = vessel_frame_from_json(j.at("vessel"));
    c.n_cl = j.at("n_cl").get<int>();
    return c;
}

inline Json crimped_json(const std::vector<Vec3>& c0) {
    Json pts = Json::array();
    for (const auto& p : c0) pts.push_back(io::to_json(p));
    return {{"centerline", pts}};
}

/// Loads every completed sample of a campaign directory.
inline HFDataset load_dataset(const fs::path& root) {
    Json m;
    try {
        m = Json::parse(io::read_file(root / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt manifest: " + std::string(e.what()));
    }
    HFDataset ds;
    try {
        ds.config = campaign_config_from_json(m);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest missing fields: " + std::string(e.what()));
    }
    if (fs::exists(root / "crimped.json")) {
        try {
            const Json c = Json::parse(io::read_file(root / "crimped.json"));
            for (const auto& p : c.at("centerline")) ds.c0.push_back(io::vec3_from_json(p));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("corrupt crimped.json: " + std::string(e.what()));
        }
    }
    const Index n_dof = 3 * Index(ds.config.stent.node_count());
    for (int id = 0; id < ds.config.n_samples; ++id)
        if (sample_complete(root, id)) ds.samples.push_back(read_sample(root, id, n_dof));
    return ds;
}

using Progress = std::function<void(const HFSample&, int done, int total)>;

/// Runs (or resumes) a campaign into `root`. Samples already on disk are
/// reused; a manifest from a different configuration is refused.
inline HFDataset run_campaign(const CampaignConfig& cfg, const fs::path& root, const Progress& progress = {}) {
    cfg.validate();
    fs::create_directories(root);
    const Eigen::MatrixXd plan = lhs_plan(cfg.space, cfg.n_samples);
    const Json manifest = manifest_json(cfg, plan);
    const fs::path mpath = root / "manifest.json";
    if (fs::exists(mpath)) {
        const Json old = Json::parse(io::read_file(mpath));
        if (old.value("config_hash", "") != manifest["config_hash"])
            throw DataError("dataset directory holds a campaign with a different configuration");
    } else {
        io::write_file_atomic(mpath, manifest.dump(1));
    }

    std::vector<int> todo;
    for (int id = 0; id < cfg.n_samples; ++id)
        if (!sample_complete(root, id)) todo.push_back(id);

    const fs::path cpath = root / "crimped.json";
    if (!todo.empty() || !fs::exists(cpath)) {
        const CrimpedStent crimped(cfg.stent, cfg.solver);
        io::write_file_atomic(cpath, crimped_json(crimped.c0.points).dump());
        std::atomic<std::size_t> next{0};
        std::atomic<int> done{cfg.n_samples - int(todo.size())};
        std::mutex report_mutex;
        auto worker = [&] {
            for (std::size_t k = next++; k < todo.size(); k = next++) {
                const int id = todo[k];
                const HFSample s = simulate_sample(crimped, cfg, plan.row(id).transpose(), id);
                write_sample(root, s);
                const int n = ++done;
                if (progress) {
                    std::lock_guard lock(report_mutex);
                    progress(s, n, cfg.n_samples);
                }
            }
        };
        const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        const std::size_t n_workers = std::min<std::size_t>(todo.size(), cfg.workers > 0 ? std::size_t(cfg.workers) : hw);
        if (n_workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
    }
    return load_dataset(root);
}

// --- single-file archive ---------------------------------------------------

inline constexpr std::string_view kArchiveMagic = "SDS1";

inline void export_archive(const fs::path& root, const fs::path& file) {
    const HFDataset ds = load_dataset(root);
    std::ostringstream os;
    io::BinaryWriter w(os);
    w.magic(kArchiveMagic);
    w.put_string(io::read_file(root / "manifest.json"));
    w.put_string(crimped_json(ds.c0).dump());
    w.put<std::uint64_t>(ds.samples.size());
    for (const auto& s : ds.samples) {
        w.put<std::int32_t>(s.id);
        w.put_string(io::read_file(sample_dir(root, s.id) / "mu.json"));
        w.put_string(io::read_file(sample_dir(root, s.id) / "label.json"));
        w.put_vector(s.u_h);
    }
    w.check();
    io::write_file_atomic(file, os.str());
}

inline HFDataset import_archive(const fs::path& file, const fs::path& root) {
    std::istringstream is(io::read_file(file));
    io::BinaryReader r(is);
    r.expect_magic(kArchiveMagic);
    fs::create_directories(root);
    io::write_file_atomic(root / "manifest.json", r.get_string());
    const std::string crimped = r.get_string();
    if (!Json::parse(crimped).at("centerline").empty()) io::write_file_atomic(root / "crimped.json", crimped);
    const auto n = r.get<std::uint64_t>();
    for (std::uint64_t k = 0; k < n; ++k) {
        const int id = r.get<std::int32_t>();
        const fs::path d = sample_dir(root, id);
        fs::create_directories(d);
        const std::string mu = r.get_string();
        const std::string label = r.get_string();
        const Eigen::VectorXd u = r.get_vector();
        io::write_file_atomic(d / "mu.json", mu);
        if (u.size() > 0) {
            std::ostringstream os;
            os.write(reinterpret_cast<const char*>(u.data()), std::streamsize(u.size() * sizeof(double)));
            io::write_file_atomic(d / "u_h.bin", os.str());
        }
        io::write_file_atomic(d / "label.json", label);
    }
    return load_dataset(root);
}

}  // namespace stentrom::dataset
