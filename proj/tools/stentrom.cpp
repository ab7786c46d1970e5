// stentrom: dataset campaigns, training, evaluation, prediction and the HTTP
// prediction service.

#include "stentrom/io/mesh.hpp"
#include "stentrom/pipeline.hpp"
#include "stentrom/server.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace stentrom;
namespace fs = std::filesystem;
using io::Json;

namespace {

enum Exit { ok = 0, other = 1, config = 2, data = 3, numerical = 4 };

Eigen::VectorXd parse_mu(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Index(v.size()));
}

pipeline::PipelineConfig config_or_default(const std::string& path) {
    if (path.empty()) {
        pipeline::PipelineConfig c;
        c.validate();
        return c;
    }
    return pipeline::load_config(path);
}

void write_json(const fs::path& p, const Json& j) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    io::write_file_atomic(p, j.dump(1));
}

int cmd_generate(const pipeline::PipelineConfig& cfg_in, int n, std::uint64_t seed, bool seed_set, int workers,
                 const std::string& out) {
    auto cfg = cfg_in;
    if (n > 0) cfg.campaign.n_samples = n;
    if (seed_set) cfg.campaign.space.seed = seed;
    if (workers >= 0) cfg.campaign.workers = workers;
    const fs::path root = out.empty() ? cfg.paths.dataset : fs::path(out);
    std::cout << "campaign: " << cfg.campaign.n_samples << " samples into " << root << " (config "
              << dataset::config_hash(cfg.campaign) << ")\n";
    const auto ds = dataset::run_campaign(cfg.campaign, root, [](const dataset::HFSample& s, int done, int total) {
        std::cout << "[" << done << "/" << total << "] sample " << s.id << ": "
                  << (s.converged ? dataset::to_string(s.label) : "not converged") << "  " << std::fixed
                  << std::setprecision(1) << s.runtime << " s" << (s.error.empty() ? "" : "  (" + s.error + ")")
                  << std::endl;
    });
    int succ = 0;
    for (const auto& s : ds.samples) succ += s.usable() && s.label == dataset::Label::success;
    std::cout << "done: " << ds.usable_ids().size() << " converged, " << succ << " successes\n";
    return ok;
}

int cmd_train(pipeline::PipelineConfig cfg, const std::string& dataset_dir, const std::string& models_dir) {
    const auto ds = dataset::load_dataset(dataset_dir.empty() ? cfg.paths.dataset : fs::path(dataset_dir));
    auto res = pipeline::train_all(ds, cfg, &std::cerr);
    const fs::path out = models_dir.empty() ? cfg.paths.models : fs::path(models_dir);
    pipeline::save_models(res.models, out);
    write_json(out / "train_report.json", res.report);
    std::cout << "reduced model: L = " << res.models.rom.basis.L << ", predictor "
              << dataset::to_string(res.models.rom.kind) << " (dimension " << res.models.rom.input_dim() << ")\n";
    std::cout << res.report["classifier_table"].get<std::string>();
    std::cout << "models written to " << out << "\n";
    return ok;
}

int cmd_evaluate(const pipeline::PipelineConfig& cfg, const std::string& dataset_dir, int sweep_max,
                 const std::string& vtk_dir) {
    const auto ds = dataset::load_dataset(dataset_dir.empty() ? cfg.paths.dataset : fs::path(dataset_dir));
    const auto split = pipeline::make_split(ds, cfg.split);
    const auto c0 = pipeline::crimped_centerline(ds);
    Json report;

    const auto evals = pipeline::evaluate_classifiers(ds, split, cfg.classifier, cfg.rom.n_cl);
    Json cls = Json::array();
    for (const auto& e : evals) cls.push_back(classify::to_json(e));
    report["classifiers"] = cls;
    report["majority_baseline"] = pipeline::majority_baseline(ds, split);
    std::cout << classify::table(evals) << "majority baseline accuracy: " << report["majority_baseline"] << "\n\n";

    std::vector<std::pair<std::string, evaluation::Summary>> rows;
    Json roms = Json::array();
    for (auto kind : {dataset::PredictorKind::mu_b, dataset::PredictorKind::mu_cl}) {
        auto r = cfg.rom;
        r.predictor = kind;
        const auto m = pipeline::train_rom(ds, split.train, r, c0);
        const auto ev = pipeline::evaluate_rom(m, ds, split.test);
        rows.emplace_back(std::string(dataset::to_string(kind)) + " L=" + std::to_string(ev.L), ev.summary);
        Json per = Json::array();
        for (std::size_t i = 0; i < ev.ids.size(); ++i) {
            Json e = evaluation::to_json(ev.solutions[i]);
            e["sample"] = ds.samples[std::size_t(ev.ids[i])].id;
            per.push_back(e);
        }
        roms.push_back({{"predictor", dataset::to_string(kind)}, {"L", ev.L}, {"summary", evaluation::to_json(ev.summary)},
                        {"solutions", per}});
        if (!vtk_dir.empty() && kind == cfg.rom.predictor) {
            fs::create_directories(vtk_dir);
            const StentMesh mesh = generate_stent(ds.config.stent);
            for (int id : ev.ids) {
                const auto& s = ds.samples[std::size_t(id)];
                const auto p = rom::predict(m, dataset::predictor(s, m.kind, m.n_cl));
                const Eigen::VectorXd u_rb = m.basis.V * (m.basis.V.transpose() * s.u_h);
                const auto e = evaluation::nodal_errors(s.u_h, u_rb, p.u_p);
                const std::vector<double> ep(e.e_p.data(), e.e_p.data() + e.e_p.size());
                std::vector<Vec3> pos = mesh.nodes;
                for (std::size_t i = 0; i < pos.size(); ++i) pos[i] += p.u_p.segment<3>(3 * Index(i));
                std::ofstream os(fs::path(vtk_dir) / ("predicted_" + std::to_string(s.id) + ".vtk"));
                write_stent_vtk(os, mesh, pos, &ep, "E_p");
            }
        }
    }
    report["rom"] = roms;
    std::cout << evaluation::table(rows);

    if (sweep_max > 0) {
        auto r = cfg.rom;
        Json sw = Json::array();
        std::cout << "\nAE_p vs L (" << dataset::to_string(r.predictor) << ")\n";
        for (const auto& [L, ae] : pipeline::sweep_L(ds, split, r, c0, sweep_max)) {
            sw.push_back({{"L", L}, {"ae_p", ae}});
            std::cout << "  L=" << L << "  " << ae << " mm\n";
        }
        report["sweep_L"] = sw;
    }
    report["table"] = evaluation::table(rows);
    write_json(cfg.paths.reports / "evaluation.json", report);
    std::cout << "report written to " << (cfg.paths.reports / "evaluation.json") << "\n";
    return ok;
}

int cmd_predict(const std::string& models_dir, const std::vector<double>& mu, bool force, int samples,
                std::uint64_t seed) {
    const auto models = pipeline::load_models(models_dir);
    if (!models.rom.geometry.space.contains(parse_mu(mu))) throw DomainError("mu lies outside the trained parameter ranges");
    const auto r = pipeline::predict(models, parse_mu(mu), force);
    Json out = {{"label", r.label ? "success" : "failure"}, {"score", r.score}, {"latency_ms", r.latency_ms}};
    if (r.regression) {
        out["u_p"] = io::to_json(r.prediction.u_p);
        out["node_std"] = io::to_json(r.prediction.node_std);
        if (r.forced) out["warning"] = "regression forced on a predicted failure";
        if (samples > 0) {
            Json s = Json::array();
            for (const auto& u : rom::sample_posterior(models.rom, r.prediction, samples, seed)) s.push_back(io::to_json(u));
            out["samples"] = s;
        }
    }
    std::cout << out.dump() << "\n";
    return ok;
}

int cmd_serve(const pipeline::PipelineConfig& cfg, const std::string& models_dir, const std::string& bind, int port,
              const std::string& static_dir) {
    server::Service svc(pipeline::load_models(models_dir.empty() ? cfg.paths.models : fs::path(models_dir)));
    const fs::path statics = static_dir.empty() ? cfg.service.static_dir : fs::path(static_dir);
    const std::string host = bind.empty() ? cfg.service.bind : bind;
    const int p = port >= 0 ? port : cfg.service.port;
    return svc.listen(host, p, statics, std::cout) ? ok : config;
}

int cmd_simulate(const pipeline::PipelineConfig& cfg, const std::vector<double>& mu, const std::string& out) {
    const dataset::CrimpedStent crimped(cfg.campaign.stent, cfg.campaign.solver);
    const auto s = dataset::simulate_sample(crimped, cfg.campaign, parse_mu(mu), 0);
    Json j = {{"converged", s.converged},        {"label", dataset::to_string(s.label)}, {"runtime", s.runtime},
              {"steps", s.steps},                {"final_ke", s.final_ke},               {"error", s.error},
              {"mu_cl", io::to_json(s.mu_cl)}};
    if (!out.empty()) {
        fs::create_directories(out);
        write_json(fs::path(out) / "result.json", j);
        if (s.usable()) {
            std::vector<Vec3> pos = crimped.model.mesh.nodes;
            for (std::size_t i = 0; i < pos.size(); ++i) pos[i] += s.u_h.segment<3>(3 * Index(i));
            std::ofstream os(fs::path(out) / "deployed.vtk");
            write_stent_vtk(os, crimped.model.mesh, pos);
        }
        std::ofstream vs(fs::path(out) / "vessel.stl", std::ios::binary);
        io::write_stl_binary(vs, io::triangulate_vessel(dataset::make_vessel(parse_mu(mu), cfg.campaign.frame)));
    }
    std::cout << j.dump(1) << "\n";
    if (!s.converged) return numerical;
    return ok;
}

int cmd_vessel(const pipeline::PipelineConfig& cfg, std::vector<double> mu, const std::string& out, double sdf_spacing,
               const std::string& sdf_out) {
    if (mu.size() == 5) mu.push_back(0.4);
    const auto v = dataset::make_vessel(parse_mu(mu), cfg.campaign.frame);
    const auto mesh = io::triangulate_vessel(v);
    if (!out.empty()) {
        std::ofstream os(out, std::ios::binary);
        if (!os) throw DataError("cannot write " + out);
        if (fs::path(out).extension() == ".vtk") io::write_vtk_polydata(os, mesh);
        else io::write_stl_binary(os, mesh);
    }
    if (!sdf_out.empty()) {
        std::ofstream os(sdf_out, std::ios::binary);
        if (!os) throw DataError("cannot write " + sdf_out);
        bake_sdf_grid(v, sdf_spacing).write(os);
    }
    std::cout << "vessel: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size()
              << " triangles, aneurysm centre " << v.aneurysm_center().transpose() << "\n";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Braided-stent deployment simulation and reduced-order surrogate"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("-c,--config", config_path, "pipeline configuration (JSON)");

    auto* gen = app.add_subcommand("generate", "run or resume a simulation campaign");
    int n = 0, workers = -1;
    std::uint64_t seed = 0;
    std::string out;
    gen->add_option("-n,--n", n, "number of samples");
    auto* seed_opt = gen->add_option("--seed", seed, "sampling seed");
    gen->add_option("--workers", workers, "worker threads (0: all cores)");
    gen->add_option("-o,--out", out, "dataset directory");

    auto* train = app.add_subcommand("train", "train classifiers and the reduced model");
    std::string dataset_dir, models_dir, predictors;
    double eps_pod = -1;
    int l_override = -1, ncl = -1;
    train->add_option("--dataset", dataset_dir);
    train->add_option("--models", models_dir);
    train->add_option("--eps-pod", eps_pod, "POD truncation tolerance");
    train->add_option("-L,--L", l_override, "fixed number of modes");
    train->add_option("--predictors", predictors, "mu_B or mu_cl")->check(CLI::IsMember({"mu_B", "mu_cl"}));
    train->add_option("--ncl", ncl, "centerline points for mu_cl");

    auto* eval = app.add_subcommand("evaluate", "held-out errors and classifier metrics");
    int sweep = 0;
    std::string vtk;
    eval->add_option("--dataset", dataset_dir);
    eval->add_option("--sweep-L", sweep, "also report AE_p for L = 1..N");
    eval->add_option("--vtk", vtk, "directory for per-node error VTK files");

    auto* pred = app.add_subcommand("predict", "classify and predict one parameter point");
    std::vector<double> mu;
    bool force = false;
    int samples = 0;
    std::uint64_t sample_seed = 1;
    pred->add_option("--models", models_dir)->required();
    pred->add_option("--mu", mu, "y_P1 z_P1 D_v D_a y_Ca eta")->required()->expected(6);
    pred->add_flag("--force", force, "run the regression even on predicted failure");
    pred->add_option("--samples", samples, "posterior samples to draw");
    pred->add_option("--sample-seed", sample_seed);

    auto* serve = app.add_subcommand("serve", "HTTP prediction service");
    std::string bind, statics;
    int port = -1;
    serve->add_option("--models", models_dir);
    serve->add_option("--bind", bind);
    serve->add_option("--port", port);
    serve->add_option("--static", statics, "directory of static UI assets");

    auto* sim = app.add_subcommand("simulate", "run one deployment simulation");
    sim->add_option("--mu", mu, "y_P1 z_P1 D_v D_a y_Ca eta")->required()->expected(6);
    sim->add_option("-o,--out", out, "output directory");

    auto* ves = app.add_subcommand("vessel", "export a vessel surface or SDF grid");
    double spacing = 0.2;
    std::string sdf;
    ves->add_option("--mu", mu, "y_P1 z_P1 D_v D_a y_Ca [eta]")->required()->expected(5, 6);
    ves->add_option("-o,--out", out, "surface file (.stl or .vtk)");
    ves->add_option("--sdf", sdf, "signed-distance grid file");
    ves->add_option("--spacing", spacing, "grid spacing [mm]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : config;
    }

    try {
        auto cfg = config_or_default(config_path);
        if (*gen) return cmd_generate(cfg, n, seed, bool(*seed_opt), workers, out);
        if (*train) {
            if (eps_pod >= 0) cfg.rom.eps_pod = eps_pod;
            if (l_override >= 0) cfg.rom.l_override = l_override;
            if (!predictors.empty()) cfg.rom.predictor = dataset::predictor_from_string(predictors);
            if (ncl > 0) cfg.rom.n_cl = ncl;
            cfg.validate();
            return cmd_train(cfg, dataset_dir, models_dir);
        }
        if (*eval) return cmd_evaluate(cfg, dataset_dir, sweep, vtk);
        if (*pred) return cmd_predict(models_dir, mu, force, samples, sample_seed);
        if (*serve) return cmd_serve(cfg, models_dir, bind, port, statics);
        if (*sim) return cmd_simulate(cfg, mu, out);
        if (*ves) return cmd_vessel(cfg, mu, out, spacing, sdf);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return config;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return config;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return data;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return other;
    }
    return other;
}
