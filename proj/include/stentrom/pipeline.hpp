#pragma once

// End-to-end plumbing shared by the command-line tool and the acceptance
// runner: configuration, training with a held-out split, ROM evaluation and
// classification-gated prediction.

#include "stentrom/classify.hpp"
#include "stentrom/evaluation.hpp"
#include "stentrom/io/files.hpp"
#include "stentrom/rom.hpp"

#include <fstream>
#include <iostream>

namespace stentrom::pipeline {

namespace fs = std::filesystem;
using io::Json;
using dataset::PredictorKind;

struct Paths {
    fs::path dataset = "dataset";
    fs::path models = "models";
    fs::path reports = "reports";
};

struct RomSettings {
    double eps_pod = 0.01;
    int l_override = 0;
    PredictorKind predictor = PredictorKind::mu_cl;
    int n_cl = 3;
    bool energy_truncation = false;
    int restarts = 5;
    std::uint64_t seed = 7;
};

struct ClassifierSettings {
    std::vector<classify::Kind> kinds{classify::kAllKinds.begin(), classify::kAllKinds.end()};
    classify::Kind serve = classify::Kind::svm;
    PredictorKind predictor = PredictorKind::mu_b;
    classify::Options options;
};

struct SplitSettings {
    double test_fraction = 0.25;
    std::uint64_t seed = 1;
};

struct ServiceSettings {
    std::string bind = "127.0.0.1";
    int port = 8080;
    fs::path static_dir = "webui";
};

struct PipelineConfig {
    Paths paths;
    dataset::CampaignConfig campaign;
    RomSettings rom;
    ClassifierSettings classifier;
    SplitSettings split;
    ServiceSettings service;

    void validate() const {
        campaign.validate();
        classifier.options.validate();
        if (!(rom.eps_pod >= 0.0 && rom.eps_pod < 1.0)) throw ConfigError("rom.eps_pod must lie in [0,1)");
        if (rom.l_override < 0) throw ConfigError("rom.l_override must be >= 0");
        if (rom.n_cl < 2) throw ConfigError("rom.n_cl must be >= 2");
        if (rom.restarts < 1) throw ConfigError("rom.restarts must be >= 1");
        if (classifier.kinds.empty()) throw ConfigError("classifier.kinds must not be empty");
        if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0))
            throw ConfigError("split.test_fraction must lie in (0,1)");
        if (service.port < 0 || service.port > 65535) throw ConfigError("service.port out of range");
    }
};

inline Json to_json(const PipelineConfig& c) {
    Json kinds = Json::array();
    for (auto k : c.classifier.kinds) kinds.push_back(classify::to_string(k));
    const auto& o = c.classifier.options;
    return {
        {"paths", {{"dataset", c.paths.dataset.string()}, {"models", c.paths.models.string()}, {"reports", c.paths.reports.string()}}},
        {"campaign",
         {{"n_samples", c.campaign.n_samples},
          {"n_cl", c.campaign.n_cl},
          {"workers", c.campaign.workers},
          {"space", dataset::to_json(c.campaign.space)},
          {"stent", io::to_json(c.campaign.stent)},
          {"solver", io::to_json(c.campaign.solver)},
          {"vessel", dataset::to_json(c.campaign.frame)}}},
        {"rom",
         {{"eps_pod", c.rom.eps_pod},
          {"l_override", c.rom.l_override},
          {"predictor", dataset::to_string(c.rom.predictor)},
          {"n_cl", c.rom.n_cl},
          {"energy_truncation", c.rom.energy_truncation},
          {"restarts", c.rom.restarts},
          {"seed", c.rom.seed}}},
        {"classifier",
         {{"kinds", kinds},
          {"serve", classify::to_string(c.classifier.serve)},
          {"predictor", dataset::to_string(c.classifier.predictor)},
          {"knn_k", o.knn_k},
          {"tree_max_depth", o.tree_max_depth},
          {"tree_min_leaf", o.tree_min_leaf},
          {"ann_max_epochs", o.ann_max_epochs},
          {"svm_c", o.svm_c},
          {"threshold", o.threshold},
          {"seed", o.seed}}},
        {"split", {{"test_fraction", c.split.test_fraction}, {"seed", c.split.seed}}},
        {"service", {{"bind", c.service.bind}, {"port", c.service.port}, {"static_dir", c.service.static_dir.string()}}}};
}

/// Strict reader; relative paths are resolved against `base`.
inline PipelineConfig pipeline_config_from_json(const Json& j, const fs::path& base = {}) {
    PipelineConfig c;
    io::StrictObject top(j, "config");
    auto resolve = [&](const std::string& s) {
        fs::path p(s);
        return p.is_absolute() || base.empty() ? p : base / p;
    };
    if (const Json* p = top.child("paths")) {
        io::StrictObject o(*p, "paths");
        std::string d = c.paths.dataset.string(), m = c.paths.models.string(), r = c.paths.reports.string();
        o.read("dataset", d);
        o.read("models", m);
        o.read("reports", r);
        o.finish();
        c.paths = {d, m, r};
    }
    c.paths = {resolve(c.paths.dataset.string()), resolve(c.paths.models.string()), resolve(c.paths.reports.string())};
    if (const Json* p = top.child("campaign")) {
        io::StrictObject o(*p, "campaign");
        o.read("n_samples", c.campaign.n_samples);
        o.read("n_cl", c.campaign.n_cl);
        o.read("workers", c.campaign.workers);
        if (const Json* q = o.child("space")) c.campaign.space = dataset::param_space_from_json(*q);
        if (const Json* q = o.child("stent")) c.campaign.stent = io::stent_spec_from_json(*q);
        if (const Json* q = o.child("solver")) c.campaign.solver = io::solver_config_from_json(*q);
        if (const Json* q = o.child("vessel")) c.campaign.frame = dataset::vessel_frame_from_json(*q);
        o.finish();
    }
    if (const Json* p = top.child("rom")) {
        io::StrictObject o(*p, "rom");
        std::string pred = dataset::to_string(c.rom.predictor);
        o.read("eps_pod", c.rom.eps_pod);
        o.read("l_override", c.rom.l_override);
        o.read("predictor", pred);
        o.read("n_cl", c.rom.n_cl);
        o.read("energy_truncation", c.rom.energy_truncation);
        o.read("restarts", c.rom.restarts);
        o.read("seed", c.rom.seed);
        o.finish();
        c.rom.predictor = dataset::predictor_from_string(pred);
    }
    if (const Json* p = top.child("classifier")) {
        io::StrictObject o(*p, "classifier");
        std::vector<std::string> kinds;
        std::string serve = classify::to_string(c.classifier.serve);
        std::string pred = dataset::to_string(c.classifier.predictor);
        auto& opt = c.classifier.options;
        o.read("kinds", kinds);
        o.read("serve", serve);
        o.read("predictor", pred);
        o.read("knn_k", opt.knn_k);
        o.read("tree_max_depth", opt.tree_max_depth);
        o.read("tree_min_leaf", opt.tree_min_leaf);
        o.read("ann_max_epochs", opt.ann_max_epochs);
        o.read("svm_c", opt.svm_c);
        o.read("threshold", opt.threshold);
        o.read("seed", opt.seed);
        o.finish();
        if (!kinds.empty() || p->contains("kinds")) {
            c.classifier.kinds.clear();
            for (const auto& k : kinds) c.classifier.kinds.push_back(classify::kind_from_string(k));
        }
        c.classifier.serve = classify::kind_from_string(serve);
        c.classifier.predictor = dataset::predictor_from_string(pred);
    }
    if (const Json* p = top.child("split")) {
        io::StrictObject o(*p, "split");
        o.read("test_fraction", c.split.test_fraction);
        o.read("seed", c.split.seed);
        o.finish();
    }
    if (const Json* p = top.child("service")) {
        io::StrictObject o(*p, "service");
        std::string dir = c.service.static_dir.string();
        o.read("bind", c.service.bind);
        o.read("port", c.service.port);
        o.read("static_dir", dir);
        o.finish();
        c.service.static_dir = dir;
    }
    c.service.static_dir = resolve(c.service.static_dir.string());
    top.finish();
    c.validate();
    return c;
}

inline PipelineConfig load_config(const fs::path& file) {
    Json j;
    try {
        j = Json::parse(io::read_file(file));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("cannot parse " + file.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    return pipeline_config_from_json(j, fs::absolute(file).parent_path());
}

// --- data preparation -------------------------------------------------------

/// Crimped centerline of the dataset, recomputed when the dataset lacks it.
inline std::vector<Vec3> crimped_centerline(const dataset::HFDataset& ds) {
    if (ds.c0.size() >= 2) return ds.c0;
    const dataset::CrimpedStent c(ds.config.stent, ds.config.solver);
    return c.c0.points;
}

inline std::vector<int> labels_of(const dataset::HFDataset& ds, const std::vector<int>& ids) {
    std::vector<int> y;
    for (int i : ids) y.push_back(ds.samples.at(std::size_t(i)).label == dataset::Label::success ? 1 : 0);
    return y;
}

inline std::vector<int> successes(const dataset::HFDataset& ds, const std::vector<int>& ids) {
    std::vector<int> out;
    for (int i : ids)
        if (ds.samples.at(std::size_t(i)).label == dataset::Label::success) out.push_back(i);
    return out;
}

struct Split {
    std::vector<int> train, test;
};

/// Held-out split over converged samples; n_test = round(fraction * N).
inline Split make_split(const dataset::HFDataset& ds, const SplitSettings& s) {
    const auto ids = ds.usable_ids();
    if (ids.size() < 4) throw DataError("need at least 4 converged samples, have " + std::to_string(ids.size()));
    const int n_test = std::clamp(int(std::lround(s.test_fraction * double(ids.size()))), 1, int(ids.size()) - 2);
    auto [train, test] = dataset::split_indices(ids, n_test, s.seed);
    return {train, test};
}

// --- classifiers ------------------------------------------------------------

inline Eigen::MatrixXd classifier_inputs(const dataset::HFDataset& ds, const std::vector<int>& ids,
                                         const ClassifierSettings& c, int n_cl) {
    return dataset::predictor_matrix(ds, ids, c.predictor, n_cl);
}

inline std::vector<classify::Evaluation> evaluate_classifiers(const dataset::HFDataset& ds, const Split& split,
                                                              const ClassifierSettings& c, int n_cl) {
    const Eigen::MatrixXd xtr = classifier_inputs(ds, split.train, c, n_cl);
    const Eigen::MatrixXd xte = classifier_inputs(ds, split.test, c, n_cl);
    const auto ytr = labels_of(ds, split.train), yte = labels_of(ds, split.test);
    const auto bank = classify::train_bank(c.kinds, xtr, ytr, c.options);
    std::vector<classify::Evaluation> out;
    for (const auto& m : bank) out.push_back(classify::evaluate(*m, xte, yte));
    return out;
}

/// Accuracy of always predicting the most frequent training label on the test split.
inline double majority_baseline(const dataset::HFDataset& ds, const Split& split) {
    const auto ytr = labels_of(ds, split.train), yte = labels_of(ds, split.test);
    const int pos = int(std::count(ytr.begin(), ytr.end(), 1));
    const int majority = 2 * pos >= int(ytr.size()) ? 1 : 0;
    return double(std::count(yte.begin(), yte.end(), majority)) / double(yte.size());
}

// --- reduced model ----------------------------------------------------------

inline rom::GprOptions gpr_options(const RomSettings& r) { return {r.restarts, r.seed, true, rom::kNoiseFloor, 400}; }

/// Trains the ROM on the successful samples among `ids`.
inline rom::ReducedModel train_rom(const dataset::HFDataset& ds, const std::vector<int>& ids, const RomSettings& r,
                                   const std::vector<Vec3>& c0, int l_override = -1) {
    const auto succ = successes(ds, ids);
    if (succ.size() < 2) throw DataError("need at least 2 successful samples to train the reduced model");
    const Eigen::MatrixXd S = dataset::assemble_snapshots(ds, succ);
    const Eigen::MatrixXd x = dataset::predictor_matrix(ds, succ, r.predictor, r.n_cl);
    auto m = rom::train_reduced_model(S, x, r.eps_pod, l_override >= 0 ? l_override : r.l_override,
                                      r.energy_truncation ? rom::Truncation::energy : rom::Truncation::singular_sum,
                                      gpr_options(r));
    m.kind = r.predictor;
    m.n_cl = r.n_cl;
    m.geometry = {ds.config.stent, ds.config.frame, c0, ds.config.space};
    return m;
}

/// Keeps the first L modes and their regressors.
inline rom::ReducedModel truncated(const rom::ReducedModel& m, int L) {
    if (L < 1 || L > int(m.regressors.size())) throw DomainError("truncation outside the trained rank");
    rom::ReducedModel t = m;
    t.basis.V = m.basis.V.leftCols(L);
    t.basis.L = L;
    t.regressors.resize(std::size_t(L));
    return t;
}

struct RomEvaluation {
    int L = 0;
    std::vector<int> ids;
    std::vector<evaluation::SolutionErrors> solutions;
    evaluation::Summary summary;
};

/// Errors of the model on the successful samples among `test_ids`.
inline RomEvaluation evaluate_rom(const rom::ReducedModel& m, const dataset::HFDataset& ds,
                                  const std::vector<int>& test_ids) {
    RomEvaluation out;
    out.L = m.basis.L;
    for (int i : successes(ds, test_ids)) {
        const auto& s = ds.samples.at(std::size_t(i));
        if (!s.usable()) continue;
        const Eigen::VectorXd u_rb = m.basis.V * (m.basis.V.transpose() * s.u_h);
        const auto p = rom::predict(m, dataset::predictor(s, m.kind, m.n_cl));
        out.solutions.push_back(evaluation::summarize(evaluation::nodal_errors(s.u_h, u_rb, p.u_p)));
        out.ids.push_back(i);
    }
    if (out.solutions.empty()) throw DataError("no successful test samples to evaluate");
    out.summary = evaluation::aggregate(out.solutions);
    return out;
}

/// Mean AE_p on the test successes for L = 1..max_L (one training, truncated).
inline std::vector<std::pair<int, double>> sweep_L(const dataset::HFDataset& ds, const Split& split,
                                                   const RomSettings& r, const std::vector<Vec3>& c0, int max_L) {
    const auto full = train_rom(ds, split.train, r, c0, max_L);
    std::vector<std::pair<int, double>> out;
    for (int L = 1; L <= int(full.regressors.size()); ++L)
        out.emplace_back(L, evaluate_rom(truncated(full, L), ds, split.test).summary.ae_p.mean);
    return out;
}

// --- models on disk ---------------------------------------------------------

struct Models {
    rom::ReducedModel rom;
    std::vector<std::unique_ptr<classify::Classifier>> classifiers;
    classify::Kind serve = classify::Kind::svm;
    PredictorKind classifier_predictor = PredictorKind::mu_b;

    const classify::Classifier& gate() const {
        for (const auto& c : classifiers)
            if (c->kind() == serve) return *c;
        throw StateError(std::string("served classifier ") + classify::to_string(serve) + " is not in the bank");
    }
};

inline void save_models(const Models& m, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream a, b;
    rom::save_model(a, m.rom);
    classify::save_classifiers(b, m.classifiers);
    io::write_file_atomic(dir / "rom.srom", a.str());
    io::write_file_atomic(dir / "classifiers.scls", b.str());
    const Json meta = {{"serve", classify::to_string(m.serve)},
                       {"classifier_predictor", dataset::to_string(m.classifier_predictor)}};
    io::write_file_atomic(dir / "models.json", meta.dump(1));
}

inline Models load_models(const fs::path& dir) {
    for (const char* f : {"rom.srom", "classifiers.scls", "models.json"})
        if (!fs::exists(dir / f)) throw DataError("missing model file " + (dir / f).string());
    Models m;
    {
        std::istringstream is(io::read_file(dir / "rom.srom"));
        m.rom = rom::load_model(is);
    }
    {
        std::istringstream is(io::read_file(dir / "classifiers.scls"));
        m.classifiers = classify::load_classifiers(is);
    }
    try {
        const Json meta = Json::parse(io::read_file(dir / "models.json"));
        m.serve = classify::kind_from_string(meta.at("serve").get<std::string>());
        m.classifier_predictor = dataset::predictor_from_string(meta.at("classifier_predictor").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt models.json: ") + e.what());
    }
    m.gate();
    return m;
}

struct TrainResult {
    Models models;
    Json report;
};

/// Held-out evaluation on the split, then final models on all data.
inline TrainResult train_all(const dataset::HFDataset& ds, const PipelineConfig& cfg, std::ostream* log = nullptr) {
    const Split split = make_split(ds, cfg.split);
    const auto all = ds.usable_ids();
    const auto y_all = labels_of(ds, all);
    if (std::count(y_all.begin(), y_all.end(), 1) < 2) throw DataError("need at least 2 successful samples");
    if (std::count(y_all.begin(), y_all.end(), 0) < 1) throw DataError("dataset contains no failures; classifiers need both labels");

    const auto c0 = crimped_centerline(ds);
    Json cls = Json::array();
    const auto evals = evaluate_classifiers(ds, split, cfg.classifier, cfg.rom.n_cl);
    for (const auto& e : evals) cls.push_back(classify::to_json(e));

    Json rom_eval = nullptr;
    if (successes(ds, split.train).size() >= 2 && !successes(ds, split.test).empty()) {
        const auto held = train_rom(ds, split.train, cfg.rom, c0);
        const auto ev = evaluate_rom(held, ds, split.test);
        rom_eval = {{"L", ev.L}, {"summary", evaluation::to_json(ev.summary)}};
    }

    TrainResult out;
    out.models.rom = train_rom(ds, all, cfg.rom, c0);
    if (cfg.rom.eps_pod == 0.0 && log) *log << "warning: eps_pod = 0 keeps every mode (L = rank)\n";
    out.models.classifiers = classify::train_bank(cfg.classifier.kinds, classifier_inputs(ds, all, cfg.classifier, cfg.rom.n_cl),
                                                  y_all, cfg.classifier.options);
    out.models.serve = cfg.classifier.serve;
    out.models.classifier_predictor = cfg.classifier.predictor;
    out.models.gate();

    out.report = {{"n_samples", ds.samples.size()},
                  {"n_usable", all.size()},
                  {"n_success", std::count(y_all.begin(), y_all.end(), 1)},
                  {"split", {{"train", split.train}, {"test", split.test}}},
                  {"L", out.models.rom.basis.L},
                  {"singular_values", io::to_json(out.models.rom.basis.singular_values)},
                  {"predictor", dataset::to_string(cfg.rom.predictor)},
                  {"input_dim", out.models.rom.input_dim()},
                  {"classifiers", cls},
                  {"classifier_table", classify::table(evals)},
                  {"rom_held_out", rom_eval},
                  {"majority_baseline", majority_baseline(ds, split)}};
    return out;
}

// --- prediction -------------------------------------------------------------

struct PredictResult {
    int label = 0;
    double score = 0.0;
    bool regression = false;  // u_p present
    bool forced = false;      // regression ran despite a failure label
    rom::Prediction prediction;
    double latency_ms = 0.0;
};

inline void check_mu_b(const Eigen::VectorXd& mu_b) {
    if (mu_b.size() != 6) throw DomainError("mu must have 6 entries (y_P1, z_P1, D_v, D_a, y_Ca, eta)");
    if (!mu_b.allFinite()) throw DomainError("mu has non-finite entries");
}

/// Classification first; the ROM runs only on predicted success unless forced.
inline PredictResult predict(const Models& m, const Eigen::VectorXd& mu_b, bool force = false) {
    const auto t0 = std::chrono::steady_clock::now();
    check_mu_b(mu_b);
    PredictResult r;
    const auto& gate = m.gate();
    const Eigen::VectorXd xc = rom::predictor_from_mu_b(m.classifier_predictor, m.rom.n_cl, m.rom.geometry, mu_b);
    const auto d = gate.decide(xc.transpose());
    r.label = d.label;
    r.score = d.score;
    if (r.label == 1 || force) {
        r.prediction = rom::predict(m.rom, m.rom.predictor_from_mu_b(mu_b));
        r.regression = true;
        r.forced = r.label == 0;
    }
    r.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace stentrom::pipeline
