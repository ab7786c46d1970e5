#include "stentrom/rom.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <random>
#include <sstream>

using namespace stentrom;
using namespace stentrom::rom;

namespace {

// Low-rank-plus-noise snapshot matrix with a decaying spectrum.
Eigen::MatrixXd decaying_snapshots(Index rows, Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(rows, cols), b(cols, cols);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    for (Index i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    Eigen::VectorXd d(cols);
    for (Index i = 0; i < cols; ++i) d[i] = std::pow(0.6, double(i));
    return q * d.asDiagonal() * b;
}

// Squared singular values from the eigenvalues of S^T S, descending.
Eigen::VectorXd gram_spectrum(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S.transpose() * S);
    Eigen::VectorXd ev = es.eigenvalues().reverse();
    return ev.cwiseMax(0.0);
}

double matern_by_hand(double r, double sk, double sl) {
    const double a = std::sqrt(5.0) * r / sl;
    return sk * sk * (1 + a + a * a / 3) * std::exp(-a);
}

GprOptions exact_interp() {
    GprOptions o;
    o.fit_noise = false;
    o.sigma_n = 1e-6;
    return o;
}

}  // namespace

TEST(Pod, SpectrumMatchesGramEigenvalues) {
    const auto S = decaying_snapshots(300, 12, 1);
    const auto b = pod(S, 0.0);
    const auto lam = gram_spectrum(S);
    for (Index i = 0; i < 12; ++i)
        EXPECT_NEAR(b.singular_values[i] * b.singular_values[i], lam[i], 1e-10 * lam[0]) << i;
}

TEST(Pod, ResidualEqualsDiscardedEnergy) {
    const auto S = decaying_snapshots(300, 12, 2);
    const auto lam = gram_spectrum(S);
    for (int L = 1; L <= 11; ++L) {
        const auto b = pod(S, 0.0, Truncation::singular_sum, L);
        ASSERT_EQ(b.V.cols(), L);
        const double resid = (S - b.V * (b.V.transpose() * S)).squaredNorm();
        const double tail = lam.tail(12 - L).sum();
        EXPECT_NEAR(resid, tail, 1e-9 * lam.sum()) << "L=" << L;
    }
}

TEST(Pod, BasisOrthonormal) {
    const auto b = pod(decaying_snapshots(200, 10, 3), 1e-3);
    EXPECT_LT((b.V.transpose() * b.V - Eigen::MatrixXd::Identity(b.L, b.L)).cwiseAbs().maxCoeff(), 1e-12);
}

// Brute force: smallest L with (sum_{i<=L} sigma_i)/(sum sigma_i) >= 1 - eps.
TEST(Pod, TruncationRankMatchesBruteForce) {
    const auto S = decaying_snapshots(150, 15, 4);
    const Eigen::VectorXd sig = gram_spectrum(S).cwiseSqrt();
    for (double eps : {0.3, 0.1, 1e-2, 1e-3, 1e-4}) {
        for (auto t : {Truncation::singular_sum, Truncation::energy}) {
            const Eigen::VectorXd w = t == Truncation::energy ? Eigen::VectorXd(sig.array().square()) : sig;
            int want = int(w.size());
            for (int L = 1; L <= w.size(); ++L)
                if (w.head(L).sum() / w.sum() >= 1 - eps) {
                    want = L;
                    break;
                }
            EXPECT_EQ(pod(S, eps, t).L, want) << "eps=" << eps;
        }
    }
    EXPECT_EQ(pod(S, 0.0).L, 15);
    EXPECT_THROW(pod(S, 1.0), DomainError);
}

// No other rank-L orthonormal basis reconstructs the snapshots better.
TEST(Pod, EckartYoungAgainstRandomBases) {
    const auto S = decaying_snapshots(120, 10, 5);
    const int L = 4;
    const auto b = pod(S, 0.0, Truncation::singular_sum, L);
    const double best = (S - b.V * (b.V.transpose() * S)).norm();
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::MatrixXd a(120, L);
        for (Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
        // perturb the optimal basis half the time to probe its neighbourhood
        if (trial % 2) a = b.V + 0.05 * a;
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() * Eigen::MatrixXd::Identity(120, L);
        EXPECT_GE((S - q * (q.transpose() * S)).norm(), best - 1e-12);
    }
}

TEST(Pod, ProjectReconstructProperties) {
    const auto S = decaying_snapshots(90, 8, 7);
    const auto b = pod(S, 0.0, Truncation::singular_sum, 5);
    const Eigen::VectorXd u = S.col(3);
    const Eigen::VectorXd c = project(b, u);
    const Eigen::VectorXd r = reconstruct(b, c);
    // idempotent projection, residual orthogonal to the basis
    EXPECT_LT((project(b, r) - c).norm(), 1e-12);
    EXPECT_LT((b.V.transpose() * (u - r)).norm(), 1e-12);
    EXPECT_LE(r.norm(), u.norm() + 1e-12);
    EXPECT_THROW(project(b, Eigen::VectorXd::Zero(3)), DomainError);
    EXPECT_THROW(reconstruct(b, Eigen::VectorXd::Zero(2)), DomainError);
}

TEST(Pod, RankDeficientClampsOverride) {
    Eigen::MatrixXd S(50, 6);
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(50, 0, 1), c = Eigen::VectorXd::LinSpaced(50, 1, -2).array().square();
    for (Index j = 0; j < 6; ++j) S.col(j) = double(j + 1) * a + double(j % 2) * c;
    EXPECT_EQ(numerical_rank(pod(S, 0.0).singular_values, S.rows()), 2);
    EXPECT_EQ(pod(S, 0.0, Truncation::singular_sum, 5).L, 2);
    EXPECT_THROW(pod(Eigen::MatrixXd(0, 0), 0.1), DataError);
}

TEST(Matern, ClosedFormValues) {
    const Eigen::RowVectorXd x0 = Eigen::RowVectorXd::Zero(3);
    for (double r : {0.0, 0.3, 1.0, 2.5}) {
        const Eigen::RowVectorXd x1 = (Eigen::RowVectorXd(3) << r * 0.6, 0.0, r * 0.8).finished();
        EXPECT_NEAR(kernel_matern52(x0, x1, 1.7, 0.9), matern_by_hand(r, 1.7, 0.9), 1e-14);
    }
    EXPECT_NEAR(kernel_matern52(x0, x0, 2.0, 1.0), 4.0, 1e-15);
    EXPECT_THROW(kernel_matern52(x0, x0, 0.0, 1.0), DomainError);
    EXPECT_THROW(kernel_matern52(x0, x0, 1.0, -1.0), DomainError);
}

TEST(Matern, GramSymmetricPositiveDefinite) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2, 2);
    Eigen::MatrixXd x(40, 4);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    const auto k = gram_matern52(x, 1.3, 0.8);
    EXPECT_LT((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    for (Index i = 0; i < 40; ++i) EXPECT_EQ(k(i, i), 1.3 * 1.3);
}

TEST(Gpr, InterpolatesSmoothFunction) {
    const int n = 15;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 2 * kPi * i / (n - 1);
        y[i] = std::sin(x(i, 0));
    }
    const auto m = train_gpr(x, y, exact_interp());
    for (int i = 0; i < n; ++i) EXPECT_NEAR(m.predict(x.row(i)).first, y[i], 1e-6);
    double worst = 0;
    for (int k = 0; k < 200; ++k) {
        const double t = 2 * kPi * (k + 0.5) / 200;
        worst = std::max(worst, std::abs(m.predict(Eigen::RowVectorXd::Constant(1, t)).first - std::sin(t)));
    }
    EXPECT_LT(worst, 1e-2);
}

TEST(Gpr, ConstantTargetPredictsConstant) {
    Eigen::MatrixXd x(6, 2);
    x << 0, 0, 1, 0, 0, 1, 1, 1, 0.5, 0.2, 0.3, 0.9;
    const auto m = train_gpr(x, Eigen::VectorXd::Constant(6, 3.25));
    for (double a : {-1.0, 0.4, 5.0}) {
        const auto [mean, var] = m.predict(Eigen::RowVector2d(a, 0.5 * a));
        EXPECT_NEAR(mean, 3.25, 1e-12);
        EXPECT_GE(var, 0.0);
    }
}

TEST(Gpr, InvariantToRowPermutation) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    Eigen::MatrixXd x(20, 3);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    Eigen::VectorXd y = (x.col(0).array() * 3).sin() + x.col(1).array().square() - x.col(2).array();
    std::vector<int> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd xp(20, 3);
    Eigen::VectorXd yp(20);
    for (int i = 0; i < 20; ++i) {
        xp.row(i) = x.row(perm[std::size_t(i)]);
        yp[i] = y[perm[std::size_t(i)]];
    }
    const auto a = train_gpr(x, y);
    const auto b = train_gpr(xp, yp);
    EXPECT_NEAR(a.log_marginal, b.log_marginal, 1e-6 * std::abs(a.log_marginal) + 1e-8);
    for (int k = 0; k < 10; ++k) {
        const Eigen::RowVectorXd q = Eigen::RowVectorXd::NullaryExpr(3, [&] { return u(rng); });
        EXPECT_NEAR(a.predict(q).first, b.predict(q).first, 1e-4);
    }
}

TEST(Gpr, VarianceBoundedByPriorAndSmallAtData) {
    Eigen::MatrixXd x(10, 1);
    Eigen::VectorXd y(10);
    for (int i = 0; i < 10; ++i) {
        x(i, 0) = i;
        y[i] = std::cos(0.7 * i);
    }
    const auto m = train_gpr(x, y, exact_interp());
    const double prior = m.sigma_k * m.sigma_k * m.y_scale * m.y_scale;
    for (double t = -20; t <= 30; t += 0.37) {
        const double v = m.predict(Eigen::RowVectorXd::Constant(1, t)).second;
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, prior * (1 + 1e-12));
    }
    EXPECT_LT(m.predict(x.row(4)).second, 1e-6 * prior);
    EXPECT_NEAR(m.predict(Eigen::RowVectorXd::Constant(1, 1e4)).second, prior, 1e-9 * prior);
}

TEST(Gpr, InputValidation) {
    EXPECT_THROW(train_gpr(Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1)), DataError);
    EXPECT_THROW(train_gpr(Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(2)), DomainError);
    Eigen::MatrixXd x = Eigen::MatrixXd::Identity(3, 3);
    x(0, 0) = std::nan("");
    EXPECT_THROW(train_gpr(x, Eigen::VectorXd::Ones(3)), DataError);
}

namespace {

struct RomFixture {
    Eigen::MatrixXd S, x;
    ReducedModel m;
    RomFixture() {
        std::mt19937_64 rng(10);
        std::uniform_real_distribution<double> u(0, 1);
        const int ns = 18, nh = 3 * 40;
        x.resize(ns, 2);
        for (Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
        S.resize(nh, ns);
        for (int j = 0; j < ns; ++j)
            for (int i = 0; i < nh; ++i)
                S(i, j) = std::sin(0.05 * i * (1 + x(j, 0))) + x(j, 1) * std::cos(0.11 * i) + 0.2 * x(j, 0) * x(j, 1);
        m = train_reduced_model(S, x, 1e-4, 0, Truncation::singular_sum, exact_interp());
    }
};

const RomFixture& rom_fixture() {
    static const RomFixture f;
    return f;
}

}  // namespace

TEST(ReducedModelTest, ReproducesProjectedSnapshots) {
    const auto& f = rom_fixture();
    ASSERT_GE(f.m.basis.L, 1);
    ASSERT_EQ(int(f.m.regressors.size()), f.m.basis.L);
    for (Index j = 0; j < f.S.cols(); ++j) {
        const auto p = predict(f.m, f.x.row(j).transpose());
        const Eigen::VectorXd target = f.m.basis.V * (f.m.basis.V.transpose() * f.S.col(j));
        EXPECT_LT((p.u_p - target).norm(), 1e-4 * f.S.col(j).norm());
    }
}

TEST(ReducedModelTest, PredictionIsLinearInCoefficients) {
    const auto& f = rom_fixture();
    const Eigen::VectorXd q = Eigen::Vector2d(0.37, 0.61);
    const auto p = predict(f.m, q);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(f.S.rows());
    for (int l = 0; l < f.m.basis.L; ++l) {
        const double mean = f.m.regressors[std::size_t(l)].predict(q.transpose()).first;
        EXPECT_EQ(p.coeff_mean[l], mean);
        u += mean * f.m.basis.V.col(l);
    }
    EXPECT_LT((p.u_p - u).norm(), 1e-12 * (1 + u.norm()));
    // per-node std from the diagonal of V diag(var) V^T
    const Eigen::MatrixXd cov = f.m.basis.V * p.coeff_var.asDiagonal() * f.m.basis.V.transpose();
    for (Index i = 0; i < p.node_std.size(); ++i)
        EXPECT_NEAR(p.node_std[i], std::sqrt(cov.diagonal().segment<3>(3 * i).sum()), 1e-12);
}

TEST(ReducedModelTest, PosteriorSampleMoments) {
    const auto& f = rom_fixture();
    const auto p = predict(f.m, Eigen::Vector2d(1.4, -0.2));
    const int n = 40000;
    const auto c = sample_coefficients(p, n, 3);
    for (Index l = 0; l < c.cols(); ++l) {
        const double mean = c.col(l).mean();
        const double var = (c.col(l).array() - mean).square().sum() / (n - 1);
        const double sd = std::sqrt(p.coeff_var[l]);
        EXPECT_NEAR(mean, p.coeff_mean[l], 5 * sd / std::sqrt(n) + 1e-15);
        EXPECT_NEAR(var, p.coeff_var[l], 0.05 * p.coeff_var[l] + 1e-30);
    }
    // same seed, same draws mapped through the basis
    const auto u = sample_posterior(f.m, p, 5, 3);
    const auto c5 = sample_coefficients(p, 5, 3);
    for (int s = 0; s < 5; ++s) EXPECT_LT((u[std::size_t(s)] - f.m.basis.V * c5.row(s).transpose()).norm(), 1e-12);
}

TEST(ReducedModelTest, SaveLoadRoundTrip) {
    const auto& f = rom_fixture();
    std::stringstream ss;
    save_model(ss, f.m);
    const auto back = load_model(ss);
    EXPECT_EQ(back.basis.L, f.m.basis.L);
    EXPECT_EQ(back.basis.V, f.m.basis.V);
    for (double a : {0.1, 0.5, 0.9}) {
        const Eigen::VectorXd q = Eigen::Vector2d(a, 1 - a);
        const auto p0 = predict(f.m, q), p1 = predict(back, q);
        EXPECT_EQ(p0.u_p, p1.u_p);
        EXPECT_EQ(p0.coeff_var, p1.coeff_var);
    }
    std::stringstream bad("XXXX");
    EXPECT_THROW(load_model(bad), DataError);
    std::string blob;
    {
        std::stringstream s2;
        save_model(s2, f.m);
        blob = s2.str();
    }
    std::stringstream truncated(blob.substr(0, blob.size() / 2));
    EXPECT_THROW(load_model(truncated), DataError);
}

TEST(ReducedModelTest, ErrorsOnMisuse) {
    const auto& f = rom_fixture();
    EXPECT_THROW(predict(ReducedModel{}, Eigen::Vector2d(0, 0)), StateError);
    EXPECT_THROW(predict(f.m, Eigen::Vector3d(0, 0, 0)), DomainError);
    EXPECT_THROW(train_reduced_model(f.S, f.x.topRows(3), 1e-3), DomainError);
}
