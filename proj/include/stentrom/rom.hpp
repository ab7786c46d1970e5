#pragma once

// Non-intrusive reduced-order model: POD basis from snapshots plus one
// Gaussian-process regressor (Matérn 5/2) per retained projection coefficient.

#include "stentrom/dataset.hpp"
#include "stentrom/io/binary.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <memory>
#include <optional>

namespace stentrom::rom {

using io::Json;

enum class Truncation { singular_sum, energy };

struct ReducedBasis {
    Eigen::MatrixXd V;                // N_h x L
    Eigen::VectorXd singular_values;  // all of them, descending
    int L = 0;
    double eps_pod = 0.0;
    Truncation truncation = Truncation::singular_sum;
};

/// Numerical rank of a descending singular-value list.
inline int numerical_rank(const Eigen::VectorXd& sigma, Index rows) {
    if (sigma.size() == 0) return 0;
    const double tol = sigma[0] * double(std::max<Index>(rows, sigma.size())) * std::numeric_limits<double>::epsilon();
    int r = 0;
    while (r < sigma.size() && sigma[r] > tol) ++r;
    return r;
}

/// Smallest L whose retained fraction reaches 1 - eps. The fraction uses sums
/// of singular values (or of their squares for the energy criterion) over the
/// numerically non-zero spectrum.
inline int truncation_rank(const Eigen::VectorXd& sigma, double eps, Truncation t, Index rows) {
    if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("eps_pod must lie in [0,1)");
    const int r = numerical_rank(sigma, rows);
    if (r == 0) return 0;
    std::vector<double> cum(static_cast<std::size_t>(r));
    double acc = 0.0;
    for (int i = 0; i < r; ++i) {
        acc += t == Truncation::energy ? sigma[i] * sigma[i] : sigma[i];
        cum[std::size_t(i)] = acc;
    }
    for (int l = 1; l <= r; ++l)
        if (cum[std::size_t(l - 1)] / acc >= 1.0 - eps) return l;
    return r;
}

/// Thin SVD of S; keeps L columns by the truncation rule, or `l_override`
/// columns (clamped to the rank) when positive.
inline ReducedBasis pod(const Eigen::MatrixXd& S, double eps_pod, Truncation t = Truncation::singular_sum,
                        int l_override = 0) {
    if (S.size() == 0) throw DataError("empty snapshot matrix");
    if (!S.allFinite()) throw DataError("snapshot matrix has non-finite entries");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
    ReducedBasis b;
    b.singular_values = svd.singularValues();
    b.eps_pod = eps_pod;
    b.truncation = t;
    const int rank = numerical_rank(b.singular_values, S.rows());
    b.L = l_override > 0 ? std::min(l_override, std::max(rank, 1)) : truncation_rank(b.singular_values, eps_pod, t, S.rows());
    b.L = std::max(b.L, 1);
    b.V = svd.matrixU().leftCols(b.L);
    return b;
}

inline Eigen::VectorXd project(const ReducedBasis& b, const Eigen::VectorXd& u) {
    if (u.size() != b.V.rows()) throw DomainError("vector length does not match the basis");
    return b.V.transpose() * u;
}

inline Eigen::VectorXd reconstruct(const ReducedBasis& b, const Eigen::VectorXd& coeff) {
    if (coeff.size() != b.V.cols()) throw DomainError("coefficient count does not match the basis");
    return b.V * coeff;
}

/// Column-wise affine standardization; constant columns get unit scale.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& x) {
        if (x.rows() < 1) throw DataError("cannot standardize an empty matrix");
        Standardizer s;
        s.mean = x.colwise().mean();
        const Eigen::MatrixXd c = x.rowwise() - s.mean;
        s.scale = (c.colwise().squaredNorm() / double(std::max<Index>(x.rows() - 1, 1))).cwiseSqrt();
        for (Index j = 0; j < s.scale.size(); ++j)
            if (!(s.scale[j] > 1e-12 * std::max(1.0, std::abs(s.mean[j])))) s.scale[j] = 1.0;
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        if (x.cols() != mean.size()) throw DomainError("feature count does not match the standardizer");
        return (x.rowwise() - mean).array().rowwise() / scale.array();
    }
    Eigen::RowVectorXd apply_row(const Eigen::RowVectorXd& x) const {
        if (x.size() != mean.size()) throw DomainError("feature count does not match the standardizer");
        return (x - mean).array() / scale.array();
    }
    Eigen::MatrixXd invert(const Eigen::MatrixXd& z) const {
        return (z.array().rowwise() * scale.array()).matrix().rowwise() + mean;
    }
};

inline double kernel_matern52(const Eigen::RowVectorXd& xi, const Eigen::RowVectorXd& xj, double sigma_k, double sigma_l) {
    if (!(sigma_k > 0.0 && sigma_l > 0.0)) throw DomainError("kernel hyperparameters must be positive");
    const double r = (xi - xj).norm();
    const double a = std::sqrt(5.0) * r / sigma_l;
    return sigma_k * sigma_k * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

inline Eigen::MatrixXd gram_matern52(const Eigen::MatrixXd& x, double sigma_k, double sigma_l) {
    const Index n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Index i = 0; i < n; ++i) {
        k(i, i) = sigma_k * sigma_k;
        for (Index j = 0; j < i; ++j) k(i, j) = k(j, i) = kernel_matern52(x.row(i), x.row(j), sigma_k, sigma_l);
    }
    return k;
}

inline constexpr double kNoiseFloor = 1e-8;

struct GprOptions {
    int restarts = 5;
    std::uint64_t seed = 7;
    bool fit_noise = true;
    double sigma_n = kNoiseFloor;  // used when fit_noise is false
    int max_iter = 400;
};

/// Single-output GPR on standardized inputs and outputs.
struct GPRModel {
    double sigma_k = 1.0;
    double sigma_l = 1.0;
    double sigma_n = kNoiseFloor;
    Eigen::MatrixXd x;      // standardized training inputs
    Eigen::VectorXd alpha;  // K_y^{-1} y
    Eigen::MatrixXd chol;   // lower Cholesky factor of K_y
    Standardizer x_std;
    double y_mean = 0.0;
    double y_scale = 1.0;
    double log_marginal = 0.0;

    /// Posterior mean and latent variance at one raw input row.
    std::pair<double, double> predict(const Eigen::RowVectorXd& raw) const {
        const Eigen::RowVectorXd z = x_std.apply_row(raw);
        Eigen::VectorXd ks(x.rows());
        for (Index i = 0; i < x.rows(); ++i) ks[i] = kernel_matern52(z, x.row(i), sigma_k, sigma_l);
        const double m = ks.dot(alpha);
        const Eigen::VectorXd v = chol.triangularView<Eigen::Lower>().solve(ks);
        const double var = std::max(0.0, sigma_k * sigma_k - v.squaredNorm());
        return {y_mean + y_scale * m, y_scale * y_scale * var};
    }
};

namespace detail {

struct NllData {
    const Eigen::MatrixXd* x;
    const Eigen::VectorXd* y;
    bool fit_noise;
    double fixed_noise;
};

inline bool factor(const Eigen::MatrixXd& x, double sk, double sl, double sn, Eigen::LLT<Eigen::MatrixXd>& llt) {
    Eigen::MatrixXd k = gram_matern52(x, sk, sl);
    k.diagonal().array() += sn * sn;
    llt.compute(k);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd d = Eigen::MatrixXd(llt.matrixL()).diagonal();
    return d.allFinite() && d.minCoeff() > 0.0;
}

inline void unpack(const gsl_vector* p, const NllData& d, double& sk, double& sl, double& sn) {
    sk = std::exp(gsl_vector_get(p, 0));
    sl = std::exp(gsl_vector_get(p, 1));
    sn = d.fit_noise ? kNoiseFloor + std::exp(gsl_vector_get(p, 2)) : d.fixed_noise;
}

inline double nll(const gsl_vector* p, void* params) {
    const auto& d = *static_cast<const NllData*>(params);
    for (std::size_t i = 0; i < p->size; ++i) {
        const double v = gsl_vector_get(p, i);
        if (!(v > -25.0 && v < 10.0)) return 1e30;
    }
    double sk, sl, sn;
    unpack(p, d, sk, sl, sn);
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!factor(*d.x, sk, sl, sn, llt)) return 1e30;
    const Eigen::VectorXd a = llt.solve(*d.y);
    const Eigen::MatrixXd l = llt.matrixL();
    const double v = 0.5 * d.y->dot(a) + l.diagonal().array().log().sum() +
                     0.5 * double(d.y->size()) * std::log(2.0 * kPi);
    return std::isfinite(v) ? v : 1e30;
}

}  // namespace detail

/// Fits hyperparameters by maximizing the log marginal likelihood (simplex
/// search in log space from several starts) and stores the solve state.
inline GPRModel train_gpr(const Eigen::MatrixXd& x_raw, const Eigen::VectorXd& y_raw, const GprOptions& opt = {}) {
    const Index n = x_raw.rows();
    if (n < 2) throw DataError("GPR needs at least two training points");
    if (y_raw.size() != n) throw DomainError("GPR input and output counts differ");
    if (!x_raw.allFinite() || !y_raw.allFinite()) throw DataError("GPR training data is not finite");

    GPRModel m;
    m.x_std = Standardizer::fit(x_raw);
    m.x = m.x_std.apply(x_raw);
    m.y_mean = y_raw.mean();
    const double sd = std::sqrt((y_raw.array() - m.y_mean).square().sum() / double(n - 1));
    m.y_scale = sd > 1e-300 && sd > 1e-12 * std::abs(m.y_mean) ? sd : 1.0;
    const Eigen::VectorXd y = (y_raw.array() - m.y_mean) / m.y_scale;

    if (y.cwiseAbs().maxCoeff() == 0.0) {
        // constant target: posterior mean is exactly the constant
        m.sigma_k = 1.0;
        m.sigma_l = 1.0;
        m.sigma_n = opt.fit_noise ? kNoiseFloor : opt.sigma_n;
    } else {
        detail::NllData data{&m.x, &y, opt.fit_noise, std::max(opt.sigma_n, kNoiseFloor)};
        const std::size_t dim = opt.fit_noise ? 3 : 2;
        gsl_set_error_handler_off();
        gsl_multimin_function fn{&detail::nll, dim, &data};
        std::mt19937_64 rng(opt.seed);
        std::uniform_real_distribution<double> jitter(-1.0, 1.0);
        double best = std::numeric_limits<double>::infinity();
        std::vector<double> best_p;
        const double log_span = std::log(std::sqrt(double(m.x.cols())));
        for (int r = 0; r < std::max(1, opt.restarts); ++r) {
            gsl_vector* p = gsl_vector_alloc(dim);
            gsl_vector* step = gsl_vector_alloc(dim);
            gsl_vector_set(p, 0, r == 0 ? 0.0 : 1.0 * jitter(rng));
            gsl_vector_set(p, 1, r == 0 ? log_span : log_span + 1.5 * jitter(rng));
            if (dim == 3) gsl_vector_set(p, 2, r == 0 ? std::log(1e-3) : std::log(1e-3) + 3.0 * jitter(rng));
            gsl_vector_set_all(step, 0.5);
            gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
            gsl_multimin_fminimizer_set(s, &fn, p, step);
            for (int it = 0; it < opt.max_iter; ++it) {
                if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
                if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-6) == GSL_SUCCESS) break;
            }
            if (s->fval < best) {
                best = s->fval;
                best_p.assign(s->x->data, s->x->data + dim);
            }
            gsl_multimin_fminimizer_free(s);
            gsl_vector_free(step);
            gsl_vector_free(p);
        }
        if (best_p.empty() || !(best < 1e29)) throw NumericalError("GPR hyperparameter search found no positive-definite K_y");
        gsl_vector_view v = gsl_vector_view_array(best_p.data(), dim);
        detail::unpack(&v.vector, data, m.sigma_k, m.sigma_l, m.sigma_n);
        m.log_marginal = -best;
    }

    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!detail::factor(m.x, m.sigma_k, m.sigma_l, m.sigma_n, llt))
        throw NumericalError("K_y is not positive definite (duplicate inputs with noise at the floor?)");
    m.chol = llt.matrixL();
    const double dmin = m.chol.diagonal().minCoeff();
    if (dmin * dmin < 1e-15 * m.sigma_k * m.sigma_k)
        throw NumericalError("K_y is numerically singular (duplicate inputs with noise at the floor?)");
    m.alpha = llt.solve(y);
    return m;
}

/// One independent regressor per output column.
inline std::vector<GPRModel> train_igpr(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GprOptions& opt = {}) {
    if (x.rows() != y.rows()) throw DomainError("input and output row counts differ");
    std::vector<GPRModel> out;
    out.reserve(std::size_t(y.cols()));
    for (Index l = 0; l < y.cols(); ++l) {
        GprOptions o = opt;
        o.seed = opt.seed + std::uint64_t(l);
        out.push_back(train_gpr(x, y.col(l), o));
    }
    return out;
}

/// Geometry needed to turn mu_B into mu_cl at prediction time (no FE run).
struct GeometryContext {
    StentSpec stent;
    dataset::VesselFrame frame;
    std::vector<Vec3> c0;  // crimped straight centerline
    dataset::ParamSpace space;
};

struct Prediction {
    Eigen::VectorXd u_p;
    Eigen::VectorXd coeff_mean;
    Eigen::VectorXd coeff_var;
    Eigen::VectorXd node_std;
};

/// Predictor vector of the requested kind for a mu_B query.
inline Eigen::VectorXd predictor_from_mu_b(dataset::PredictorKind kind, int n_cl, const GeometryContext& g,
                                           const Eigen::VectorXd& mu_b) {
    if (kind == dataset::PredictorKind::mu_b) return mu_b;
    if (g.c0.size() < 2) throw StateError("model carries no crimped centerline");
    const auto ct = dataset::target_centerline(fem::CenterlinePath{g.c0}, mu_b, g.frame);
    return dataset::mu_cl_from(ct.points, n_cl, mu_b[2], mu_b[3], mu_b[4]);
}

struct ReducedModel {
    ReducedBasis basis;
    std::vector<GPRModel> regressors;
    dataset::PredictorKind kind = dataset::PredictorKind::mu_b;
    int n_cl = 3;
    GeometryContext geometry;

    Index input_dim() const { return regressors.empty() ? 0 : regressors.front().x.cols(); }

    Eigen::VectorXd predictor_from_mu_b(const Eigen::VectorXd& mu_b) const {
        return rom::predictor_from_mu_b(kind, n_cl, geometry, mu_b);
    }
};

/// Builds the reduced model from snapshot columns and matching predictor rows.
inline ReducedModel train_reduced_model(const Eigen::MatrixXd& S, const Eigen::MatrixXd& x, double eps_pod,
                                        int l_override = 0, Truncation t = Truncation::singular_sum,
                                        const GprOptions& opt = {}) {
    if (S.cols() != x.rows()) throw DomainError("snapshot count differs from predictor rows");
    ReducedModel m;
    m.basis = pod(S, eps_pod, t, l_override);
    const Eigen::MatrixXd coeff = (m.basis.V.transpose() * S).transpose();  // N_s x L
    m.regressors = train_igpr(x, coeff, opt);
    return m;
}

inline Prediction predict(const ReducedModel& m, const Eigen::VectorXd& x_star) {
    if (m.regressors.empty() || m.basis.V.size() == 0) throw StateError("reduced model is not trained");
    if (x_star.size() != m.input_dim()) throw DomainError("predictor dimension does not match the model");
    const int L = int(m.regressors.size());
    Prediction p;
    p.coeff_mean.resize(L);
    p.coeff_var.resize(L);
    const Eigen::RowVectorXd row = x_star.transpose();
    for (int l = 0; l < L; ++l) {
        const auto [mean, var] = m.regressors[std::size_t(l)].predict(row);
        p.coeff_mean[l] = mean;
        p.coeff_var[l] = var;
    }
    p.u_p = m.basis.V * p.coeff_mean;
    const Index nn = m.basis.V.rows() / 3;
    p.node_std.resize(nn);
    // diagonal of V diag(var) V^T, summed over the three components of a node
    const Eigen::VectorXd dof_var = m.basis.V.array().square().matrix() * p.coeff_var;
    for (Index i = 0; i < nn; ++i) p.node_std[i] = std::sqrt(dof_var.segment<3>(3 * i).sum());
    return p;
}

/// Draws coefficient vectors from N(mean, diag(var)) and maps them through V.
inline std::vector<Eigen::VectorXd> sample_posterior(const ReducedModel& m, const Prediction& p, int n_samples,
                                                     std::uint64_t seed) {
    if (n_samples < 0) throw DomainError("sample count must be non-negative");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    out.reserve(std::size_t(n_samples));
    const Eigen::VectorXd sd = p.coeff_var.cwiseMax(0.0).cwiseSqrt();
    for (int s = 0; s < n_samples; ++s) {
        Eigen::VectorXd c = p.coeff_mean;
        for (Index l = 0; l < c.size(); ++l) c[l] += sd[l] * g(rng);
        out.push_back(m.basis.V * c);
    }
    return out;
}

/// Coefficient draws only (used to check the sampling moments).
inline Eigen::MatrixXd sample_coefficients(const Prediction& p, int n_samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd out(n_samples, p.coeff_mean.size());
    const Eigen::VectorXd sd = p.coeff_var.cwiseMax(0.0).cwiseSqrt();
    for (int s = 0; s < n_samples; ++s)
        for (Index l = 0; l < p.coeff_mean.size(); ++l) out(s, l) = p.coeff_mean[l] + sd[l] * g(rng);
    return out;
}

// --- serialization ----------------------------------------------------------

inline constexpr std::string_view kModelMagic = "SROM";
inline constexpr std::uint32_t kModelVersion = 1;

inline void write_standardizer(io::BinaryWriter& w, const Standardizer& s) {
    w.put_vector(s.mean.transpose());
    w.put_vector(s.scale.transpose());
}

inline Standardizer read_standardizer(io::BinaryReader& r) {
    Standardizer s;
    s.mean = r.get_vector().transpose();
    s.scale = r.get_vector().transpose();
    return s;
}

inline Json to_json(const GeometryContext& g) {
    Json c0 = Json::array();
    for (const auto& p : g.c0) c0.push_back(io::to_json(p));
    return {{"stent", io::to_json(g.stent)}, {"vessel", dataset::to_json(g.frame)}, {"c0", c0},
            {"space", dataset::to_json(g.space)}};
}

inline GeometryContext geometry_from_json(const Json& j) {
    GeometryContext g;
    g.stent = io::stent_spec_from_json(j.at("stent"));
    g.frame = dataset::vessel_frame_from_json(j.at("vessel"));
    for (const auto& p : j.at("c0")) g.c0.push_back(io::vec3_from_json(p));
    g.space = dataset::param_space_from_json(j.at("space"));
    return g;
}

inline void save_model(std::ostream& os, const ReducedModel& m) {
    io::BinaryWriter w(os);
    w.magic(kModelMagic);
    w.put<std::uint32_t>(kModelVersion);
    w.put<std::uint8_t>(m.kind == dataset::PredictorKind::mu_b ? 0 : 1);
    w.put<std::uint32_t>(std::uint32_t(m.basis.L));
    w.put<std::uint64_t>(std::uint64_t(m.basis.V.rows()));
    w.put<std::uint32_t>(std::uint32_t(m.input_dim()));
    w.put<std::int32_t>(m.n_cl);
    w.put<double>(m.basis.eps_pod);
    w.put<std::uint8_t>(m.basis.truncation == Truncation::energy ? 1 : 0);
    w.put_matrix(m.basis.V);
    w.put_vector(m.basis.singular_values);
    for (const auto& g : m.regressors) {
        w.put<double>(g.sigma_k);
        w.put<double>(g.sigma_l);
        w.put<double>(g.sigma_n);
        w.put<double>(g.y_mean);
        w.put<double>(g.y_scale);
        w.put<double>(g.log_marginal);
        w.put_matrix(g.x);
        w.put_vector(g.alpha);
        w.put_matrix(g.chol);
        write_standardizer(w, g.x_std);
    }
    w.put_string(to_json(m.geometry).dump());
    w.check();
}

inline ReducedModel load_model(std::istream& is) {
    io::BinaryReader r(is);
    r.expect_magic(kModelMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kModelVersion) throw DataError("unsupported model version " + std::to_string(version));
    ReducedModel m;
    m.kind = r.get<std::uint8_t>() == 0 ? dataset::PredictorKind::mu_b : dataset::PredictorKind::mu_cl;
    const auto L = r.get<std::uint32_t>();
    const auto n_h = r.get<std::uint64_t>();
    const auto d = r.get<std::uint32_t>();
    m.n_cl = r.get<std::int32_t>();
    m.basis.eps_pod = r.get<double>();
    m.basis.truncation = r.get<std::uint8_t>() ? Truncation::energy : Truncation::singular_sum;
    m.basis.V = r.get_matrix();
    m.basis.singular_values = r.get_vector();
    m.basis.L = int(L);
    if (std::uint64_t(m.basis.V.rows()) != n_h || m.basis.V.cols() != Index(L)) throw DataError("basis shape mismatch");
    for (std::uint32_t l = 0; l < L; ++l) {
        GPRModel g;
        g.sigma_k = r.get<double>();
        g.sigma_l = r.get<double>();
        g.sigma_n = r.get<double>();
        g.y_mean = r.get<double>();
        g.y_scale = r.get<double>();
        g.log_marginal = r.get<double>();
        g.x = r.get_matrix();
        g.alpha = r.get_vector();
        g.chol = r.get_matrix();
        g.x_std = read_standardizer(r);
        if (g.x.cols() != Index(d)) throw DataError("regressor input dimension mismatch");
        m.regressors.push_back(std::move(g));
    }
    try {
        m.geometry = geometry_from_json(Json::parse(r.get_string()));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt model geometry block: ") + e.what());
    }
    return m;
}

}  // namespace stentrom::rom
