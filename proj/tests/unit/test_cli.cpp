#include "stentrom/pipeline.hpp"
#include "synthetic.hpp"
#include "tmpdir.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>

using namespace stentrom;
using io::Json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run run(const std::string& args) {
    testing_support::TempDir tmp;
    const std::string cmd = std::string(STENTROM_CLI) + " " + args + " 2>" + (tmp / "err").string();
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int st = pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    r.err = io::read_file(tmp / "err");
    return r;
}

std::string mu_args(const Eigen::VectorXd& mu) {
    std::ostringstream os;
    os.precision(17);
    os << "--mu";
    for (Index i = 0; i < mu.size(); ++i) os << " " << mu[i];
    return os.str();
}

// synthetic dataset and models trained through the CLI, shared by the tests
struct Trained {
    testing_support::TempDir dir;
    dataset::HFDataset ds = testing_support::synthetic_dataset();
    Run train;
    Trained() {
        testing_support::write_dataset(ds, dir / "data");
        io::write_file_atomic(dir / "cfg.json", R"({"rom": {"restarts": 2}, "classifier": {"ann_max_epochs": 300}})");
        train = run("-c " + (dir / "cfg.json").string() + " train --dataset " + (dir / "data").string() + " --models " +
                    (dir / "models").string() + " --predictors mu_cl --ncl 3");
    }
    Eigen::VectorXd mu(double eta) const {
        Eigen::VectorXd m = ds.config.space.from_unit(Eigen::VectorXd::Constant(6, 0.5));
        m[5] = eta;
        return m;
    }
};

const Trained& trained() {
    static const Trained t;
    return t;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("predict --models x --mu 1 2 3").code, 2);
}

TEST(Cli, BadConfigExitsTwo) {
    testing_support::TempDir tmp;
    io::write_file_atomic(tmp / "c.json", R"({"rom": {"unknown": 1}})");
    const auto r = run("-c " + (tmp / "c.json").string() + " vessel --mu 4 50 3 7 0.5");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("configuration error"), std::string::npos);
    EXPECT_EQ(run("-c " + (tmp / "absent.json").string() + " vessel --mu 4 50 3 7 0.5").code, 2);
}

TEST(Cli, InvalidRangeExitsNonZero) {
    testing_support::TempDir tmp;
    io::write_file_atomic(tmp / "c.json", R"({"campaign": {"space": {"ranges": {"eta": [0.6, 0.2]}}}})");
    const auto r = run("-c " + (tmp / "c.json").string() + " generate --n 2 -o " + (tmp / "d").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(fs::exists(tmp / "d" / "manifest.json"));
}

TEST(Cli, MissingModelsExitsThree) {
    testing_support::TempDir tmp;
    const auto r = run("predict --models " + (tmp / "none").string() + " --mu 4 50 3 7 0.5 0.4");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("data error"), std::string::npos);
}

TEST(Cli, MissingDatasetExitsThree) {
    testing_support::TempDir tmp;
    EXPECT_EQ(run("train --dataset " + (tmp / "none").string() + " --models " + (tmp / "m").string()).code, 3);
}

TEST(Cli, VesselExport) {
    testing_support::TempDir tmp;
    const auto r = run("vessel --mu 4 50 3 7 0.5 -o " + (tmp / "v.stl").string() + " --sdf " + (tmp / "v.sdf").string() +
                       " --spacing 1.0");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto stl = io::read_file(tmp / "v.stl");
    ASSERT_GT(stl.size(), 84u);
    std::uint32_t n_tri = 0;
    std::memcpy(&n_tri, stl.data() + 80, 4);
    EXPECT_EQ(stl.size(), 84u + 50u * n_tri);
    EXPECT_GT(fs::file_size(tmp / "v.sdf"), 0u);
    ASSERT_EQ(run("vessel --mu 4 50 3 7 0.5 -o " + (tmp / "v.vtk").string()).code, 0);
    EXPECT_EQ(io::read_file(tmp / "v.vtk").rfind("# vtk DataFile", 0), 0u);
}

TEST(Cli, TrainReportsDimensionNine) {
    const auto& t = trained();
    ASSERT_EQ(t.train.code, 0) << t.train.err;
    EXPECT_NE(t.train.out.find("predictor mu_cl (dimension 9)"), std::string::npos) << t.train.out;
    const Json rep = Json::parse(io::read_file(t.dir / "models" / "train_report.json"));
    EXPECT_EQ(rep["input_dim"], 9);
}

TEST(Cli, EpsPodZeroWarnsWithFullRank) {
    const auto& t = trained();
    const auto r = run("train --dataset " + (t.dir / "data").string() + " --models " + (t.dir / "m0").string() +
                       " --eps-pod 0");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_NE(r.out.find("L = 4"), std::string::npos) << r.out;
}

TEST(Cli, PredictMatchesLibraryBitwise) {
    const auto& t = trained();
    const auto models = pipeline::load_models(t.dir / "models");
    const auto mu = t.mu(0.32);
    const auto r = run("predict --models " + (t.dir / "models").string() + " " + mu_args(mu));
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(r.out);
    ASSERT_EQ(j["label"], "success");
    const auto lib = pipeline::predict(models, mu);
    ASSERT_EQ(j["u_p"].size(), std::size_t(lib.prediction.u_p.size()));
    for (Index i = 0; i < lib.prediction.u_p.size(); ++i) ASSERT_EQ(j["u_p"][std::size_t(i)].get<double>(), lib.prediction.u_p[i]);
}

TEST(Cli, PredictedFailureNeedsForce) {
    const auto& t = trained();
    const std::string base = "predict --models " + (t.dir / "models").string() + " " + mu_args(t.mu(0.495));
    const auto a = run(base);
    ASSERT_EQ(a.code, 0) << a.err;
    const Json ja = Json::parse(a.out);
    EXPECT_EQ(ja["label"], "failure");
    EXPECT_FALSE(ja.contains("u_p"));
    const auto b = run(base + " --force --samples 2");
    ASSERT_EQ(b.code, 0) << b.err;
    const Json jb = Json::parse(b.out);
    EXPECT_TRUE(jb.contains("u_p"));
    EXPECT_TRUE(jb.contains("warning"));
    EXPECT_EQ(jb["samples"].size(), 2u);
}

TEST(Cli, PredictOutOfRangeExitsTwo) {
    const auto& t = trained();
    EXPECT_EQ(run("predict --models " + (t.dir / "models").string() + " " + mu_args(t.mu(0.9))).code, 2);
}

TEST(Cli, EvaluateWritesReport) {
    const auto& t = trained();
    testing_support::TempDir tmp;
    io::write_file_atomic(tmp / "c.json", R"({"paths": {"reports": "rep"}, "rom": {"restarts": 1}, "classifier": {"kinds": ["LR", "SVM"]}})");
    const auto r = run("-c " + (tmp / "c.json").string() + " evaluate --dataset " + (t.dir / "data").string() +
                       " --sweep-L 3");
    ASSERT_EQ(r.code, 0) << r.err;
    const Json j = Json::parse(io::read_file(tmp / "rep" / "evaluation.json"));
    EXPECT_EQ(j["rom"].size(), 2u);
    EXPECT_EQ(j["classifiers"].size(), 2u);
    EXPECT_EQ(j["sweep_L"].size(), 3u);
}

TEST(Cli, GenerateIsReproducible) {
    testing_support::TempDir tmp;
    io::write_file_atomic(tmp / "c.json",
                          R"({"campaign": {"stent": {"n_wires": 8, "n_cells": 10}, "workers": 1}})");
    const std::string cfg = "-c " + (tmp / "c.json").string();
    ASSERT_EQ(run(cfg + " generate --n 4 --seed 7 -o " + (tmp / "a").string()).code, 0);
    ASSERT_EQ(run(cfg + " generate --n 4 --seed 7 -o " + (tmp / "b").string()).code, 0);
    const Json ma = Json::parse(io::read_file(tmp / "a" / "manifest.json"));
    const Json mb = Json::parse(io::read_file(tmp / "b" / "manifest.json"));
    EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
    EXPECT_EQ(ma["plan"], mb["plan"]);
    for (int id = 0; id < 4; ++id) {
        const auto d = dataset::sample_dir("", id);
        EXPECT_EQ(io::read_file(tmp / "a" / d / "label.json"), io::read_file(tmp / "b" / d / "label.json"));
        if (fs::exists(tmp / "a" / d / "u_h.bin"))
            EXPECT_EQ(io::read_file(tmp / "a" / d / "u_h.bin"), io::read_file(tmp / "b" / d / "u_h.bin"));
    }
}
