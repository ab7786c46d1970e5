#pragma once

// Binary success/failure classifiers with confusion-matrix metrics and ROC.
// Labels: 1 = success (positive class), 0 = failure.

#include "stentrom/io/binary.hpp"
#include "stentrom/rom.hpp"

#include <Eigen/Cholesky>

#include <future>
#include <numeric>

namespace stentrom::classify {

using io::Json;
using rom::Standardizer;

enum class Kind { lr, knn, nb, dt, ann, svm };

inline constexpr std::array<Kind, 6> kAllKinds = {Kind::lr, Kind::knn, Kind::nb, Kind::dt, Kind::ann, Kind::svm};

inline const char* to_string(Kind k) {
    switch (k) {
        case Kind::lr: return "LR";
        case Kind::knn: return "kNN";
        case Kind::nb: return "NB";
        case Kind::dt: return "DT";
        case Kind::ann: return "ANN";
        case Kind::svm: return "SVM";
    }
    return "?";
}

inline Kind kind_from_string(const std::string& s) {
    for (Kind k : kAllKinds)
        if (s == to_string(k)) return k;
    throw ConfigError("unknown classifier kind '" + s + "'");
}

struct Options {
    int knn_k = 5;
    int tree_max_depth = 12;
    int tree_min_leaf = 2;
    std::array<int, 3> ann_hidden = {10, 10, 10};
    int ann_max_epochs = 4000;
    double ann_learning_rate = 0.05;
    double ann_momentum = 0.9;
    int ann_patience = 300;
    double svm_c = 1.0;
    double svm_tol = 1e-3;
    double threshold = 0.5;  // decision threshold on probability-like scores
    std::uint64_t seed = 11;

    void validate() const {
        require(knn_k >= 1, "knn_k must be >= 1");
        require(tree_max_depth >= 1 && tree_min_leaf >= 1, "tree controls must be positive");
        require(ann_max_epochs >= 1 && ann_learning_rate > 0.0 && ann_momentum >= 0.0 && ann_momentum < 1.0,
                "invalid ANN training settings");
        require(svm_c > 0.0 && svm_tol > 0.0, "invalid SVM settings");
        require(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0,1)");
    }
};

struct Decision {
    int label;
    double score;
};

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual Kind kind() const = 0;

    /// Real-valued score, monotone in the confidence of success.
    double score(const Eigen::RowVectorXd& raw) const {
        if (raw.size() != std_.mean.size()) throw DomainError("feature count does not match the classifier");
        return score_standardized(std_.apply_row(raw));
    }

    Decision decide(const Eigen::RowVectorXd& raw) const {
        const double s = score(raw);
        return {s >= cut() ? 1 : 0, s};
    }

    Eigen::VectorXd scores(const Eigen::MatrixXd& raw) const {
        Eigen::VectorXd out(raw.rows());
        for (Index i = 0; i < raw.rows(); ++i) out[i] = score(raw.row(i));
        return out;
    }

    std::vector<int> labels(const Eigen::MatrixXd& raw) const {
        std::vector<int> out(std::size_t(raw.rows()));
        for (Index i = 0; i < raw.rows(); ++i) out[std::size_t(i)] = decide(raw.row(i)).label;
        return out;
    }

    /// Score at which the label flips to success.
    virtual double cut() const { return threshold_; }

    const Standardizer& standardizer() const { return std_; }
    Index features() const { return std_.mean.size(); }

    void save(io::BinaryWriter& w) const {
        w.put<std::uint8_t>(std::uint8_t(kind()));
        w.put<double>(threshold_);
        rom::write_standardizer(w, std_);
        save_params(w);
    }

    /// Reads what save() wrote after the kind tag.
    void load(io::BinaryReader& r) {
        threshold_ = r.get<double>();
        std_ = rom::read_standardizer(r);
        load_params(r);
    }

    void configure(Standardizer s, double threshold) {
        std_ = std::move(s);
        threshold_ = threshold;
    }

protected:
    virtual double score_standardized(const Eigen::RowVectorXd& z) const = 0;
    virtual void save_params(io::BinaryWriter& w) const = 0;
    virtual void load_params(io::BinaryReader& r) = 0;

    Standardizer std_;
    double threshold_ = 0.5;
};

inline double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

// --- logistic regression ----------------------------------------------------

class LogisticRegression final : public Classifier {
public:
    Eigen::VectorXd w;  // weights on standardized features
    double b = 0.0;

    Kind kind() const override { return Kind::lr; }

    /// Newton (IRLS) maximum likelihood; a 1e-6 ridge keeps separable data finite.
    void fit(const Eigen::MatrixXd& z, const std::vector<int>& y) {
        const Index n = z.rows(), d = z.cols();
        Eigen::MatrixXd a(n, d + 1);
        a.leftCols(d) = z;
        a.col(d).setOnes();
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
        for (int it = 0; it < 100; ++it) {
            Eigen::VectorXd p(n), g = Eigen::VectorXd::Zero(d + 1);
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d + 1, d + 1);
            for (Index i = 0; i < n; ++i) {
                p[i] = sigmoid(a.row(i).dot(beta));
                const double wi = std::max(p[i] * (1.0 - p[i]), 1e-12);
                g += (p[i] - y[std::size_t(i)]) * a.row(i).transpose();
                h.noalias() += wi * a.row(i).transpose() * a.row(i);
            }
            g.head(d) += 1e-6 * beta.head(d);
            h.diagonal().head(d).array() += 1e-6;
            const Eigen::VectorXd step = h.ldlt().solve(g);
            if (!step.allFinite()) break;
            beta -= step;
            if (step.lpNorm<Eigen::Infinity>() < 1e-10 * std::max(1.0, beta.lpNorm<Eigen::Infinity>())) break;
        }
        w = beta.head(d);
        b = beta[d];
    }

protected:
    double score_standardized(const Eigen::RowVectorXd& z) const override { return sigmoid(z.dot(w) + b); }
    void save_params(io::BinaryWriter& o) const override {
        o.put_vector(w);
        o.put<double>(b);
    }
    void load_params(io::BinaryReader& r) override {
        w = r.get_vector();
        b = r.get<double>();
    }
};

// --- k nearest neighbours ---------------------------------------------------

class KNearest final : public Classifier {
public:
    Eigen::MatrixXd x;
    std::vector<int> y;
    int k = 5;

    Kind kind() const override { return Kind::knn; }

    void fit(const Eigen::MatrixXd& z, const std::vector<int>& labels, int k_) {
        x = z;
        y = labels;
        k = std::min<int>(k_, int(z.rows()));
    }

protected:
    double score_standardized(const Eigen::RowVectorXd& z) const override {
        std::vector<std::pair<double, Index>> d(std::size_t(x.rows()));
        for (Index i = 0; i < x.rows(); ++i) d[std::size_t(i)] = {(x.row(i) - z).squaredNorm(), i};
        std::partial_sort(d.begin(), d.begin() + k, d.end());
        int votes = 0;
        for (int i = 0; i < k; ++i) votes += y[std::size_t(d[std::size_t(i)].second)];
        return double(votes) / k;
    }
    void save_params(io::BinaryWriter& o) const override {
        o.put<std::int32_t>(k);
        o.put_matrix(x);
        Eigen::VectorXd yy(Index(y.size()));
        for (std::size_t i = 0; i < y.size(); ++i) yy[Index(i)] = y[i];
        o.put_vector(yy);
    }
    void load_params(io::BinaryReader& r) override {
        k = r.get<std::int32_t>();
        x = r.get_matrix();
        const Eigen::VectorXd yy = r.get_vector();
        y.assign(std::size_t(yy.size()), 0);
        for (Index i = 0; i < yy.size(); ++i) y[std::size_t(i)] = int(yy[i]);
        if (yy.size() != x.rows() || k < 1 || k > x.rows()) throw DataError("corrupt kNN parameters");
    }
};

// --- Gaussian naive Bayes ---------------------------------------------------

class NaiveBayes final : public Classifier {
public:
    std::array<Eigen::RowVectorXd, 2> mean, var;
    std::array<double, 2> log_prior{};

    Kind kind() const override { return Kind::nb; }

    void fit(const Eigen::MatrixXd& z, const std::vector<int>& y) {
        const Index d = z.cols();
        double max_var = 0.0;
        for (Index j = 0; j < d; ++j) {
            const double m = z.col(j).mean();
            max_var = std::max(max_var, (z.col(j).array() - m).square().mean());
        }
        for (int c = 0; c < 2; ++c) {
            std::vector<Index> rows;
            for (Index i = 0; i < z.rows(); ++i)
                if (y[std::size_t(i)] == c) rows.push_back(i);
            const Eigen::MatrixXd zc = z(rows, Eigen::all);
            mean[c] = zc.colwise().mean();
            var[c] = (zc.rowwise() - mean[c]).array().square().colwise().mean();
            var[c].array() += 1e-9 * std::max(max_var, 1e-300);
            log_prior[std::size_t(c)] = std::log(double(rows.size()) / double(z.rows()));
        }
    }

protected:
    double score_standardized(const Eigen::RowVectorXd& z) const override {
        std::array<double, 2> ll{};
        for (int c = 0; c < 2; ++c)
            ll[std::size_t(c)] = log_prior[std::size_t(c)] -
                                 0.5 * ((z - mean[c]).array().square() / var[c].array() +
                                        (2.0 * kPi * var[c].array()).log())
                                           .sum();
        return sigmoid(ll[1] - ll[0]);
    }
    void save_params(io::BinaryWriter& o) const override {
        for (int c = 0; c < 2; ++c) {
            o.put_vector(mean[c].transpose());
            o.put_vector(var[c].transpose());
            o.put<double>(log_prior[std::size_t(c)]);
        }
    }
    void load_params(io::BinaryReader& r) override {
        for (int c = 0; c < 2; ++c) {
            mean[c] = r.get_vector().transpose();
            var[c] = r.get_vector().transpose();
            log_prior[std::size_t(c)] = r.get<double>();
        }
    }
};

// --- CART decision tree -----------------------------------------------------

class DecisionTree final : public Classifier {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double split = 0.0;
        int left = -1, right = -1;
        double purity = 0.0;  // fraction of successes in the node
    };
    std::vector<Node> nodes;

    Kind kind() const override { return Kind::dt; }

    void fit(const Eigen::MatrixXd& z, const std::vector<int>& y, int max_depth, int min_leaf) {
        nodes.clear();
        std::vector<Index> idx(std::size_t(z.rows()));
        std::iota(idx.begin(), idx.end(), Index{0});
        grow(z, y, idx, 0, max_depth, min_leaf);
    }

protected:
    static double gini(double pos, double n) {
        if (n <= 0) return 0.0;
        const double p = pos / n;
        return 2.0 * p * (1.0 - p);
    }

    int grow(const Eigen::MatrixXd& z, const std::vector<int>& y, std::vector<Index>& idx, int depth, int max_depth,
             int min_leaf) {
        const int id = int(nodes.size());
        nodes.emplace_back();
        double pos = 0;
        for (Index i : idx) pos += y[std::size_t(i)];
        const double n = double(idx.size());
        nodes[std::size_t(id)].purity = pos / n;
        if (depth >= max_depth || pos == 0 || pos == n || idx.size() < std::size_t(2 * min_leaf)) return id;

        double best = gini(pos, n) - 1e-12;
        int best_f = -1;
        double best_s = 0.0;
        std::vector<std::pair<double, int>> col(idx.size());
        for (Index f = 0; f < z.cols(); ++f) {
            for (std::size_t i = 0; i < idx.size(); ++i) col[i] = {z(idx[i], f), y[std::size_t(idx[i])]};
            std::sort(col.begin(), col.end());
            double lp = 0;
            for (std::size_t i = 0; i + 1 < col.size(); ++i) {
                lp += col[i].second;
                const double nl = double(i + 1), nr = n - nl;
                if (col[i].first == col[i + 1].first || nl < min_leaf || nr < min_leaf) continue;
                const double imp = (nl * gini(lp, nl) + nr * gini(pos - lp, nr)) / n;
                if (imp < best) {
                    best = imp;
                    best_f = int(f);
                    best_s = 0.5 * (col[i].first + col[i + 1].first);
                }
            }
        }
        if (best_f < 0) return id;
        std::vector<Index> l, r;
        for (Index i : idx) (z(i, best_f) <= best_s ? l : r).push_back(i);
        const int li = grow(z, y, l, depth + 1, max_depth, min_leaf);
        const int ri = grow(z, y, r, depth + 1, max_depth, min_leaf);
        auto& node = nodes[std::size_t(id)];
        node.feature = best_f;
        node.split = best_s;
        node.left = li;
        node.right = ri;
        return id;
    }

    double score_standardized(const Eigen::RowVectorXd& z) const override {
        int i = 0;
        while (nodes[std::size_t(i)].feature >= 0) {
            const auto& nd = nodes[std::size_t(i)];
            i = z[nd.feature] <= nd.split ? nd.left : nd.right;
        }
        return nodes[std::size_t(i)].purity;
    }
    void save_params(io::BinaryWriter& o) const override {
        o.put<std::uint64_t>(nodes.size());
        for (const auto& nd : nodes) {
            o.put<std::int32_t>(nd.feature);
            o.put<double>(nd.split);
            o.put<std::int32_t>(nd.left);
            o.put<std::int32_t>(nd.right);
            o.put<double>(nd.purity);
        }
    }
    void load_params(io::BinaryReader& r) override {
        const auto n = r.get<std::uint64_t>();
        if (n == 0 || n > (1u << 24)) throw DataError("corrupt tree size");
        nodes.resize(std::size_t(n));
        for (auto& nd : nodes) {
            nd.feature = r.get<std::int32_t>();
            nd.split = r.get<double>();
            nd.left = r.get<std::int32_t>();
            nd.right = r.get<std::int32_t>();
            nd.purity = r.get<double>();
            if (nd.feature >= 0 && (nd.left <= 0 || nd.right <= 0 || std::uint64_t(nd.left) >= n ||
                                    std::uint64_t(nd.right) >= n))
                throw DataError("corrupt tree links");
        }
    }
};

// --- feed-forward network ---------------------------------------------------

class NeuralNet final : public Classifier {
public:
    std::vector<Eigen::MatrixXd> weights;  // layer l maps width_l -> width_{l+1}
    std::vector<Eigen::VectorXd> biases;

    Kind kind() const override { return Kind::ann; }

    std::vector<int> layer_sizes() const {
        std::vector<int> s;
        if (weights.empty()) return s;
        s.push_back(int(weights.front().cols()));
        for (const auto& w : weights) s.push_back(int(w.rows()));
        return s;
    }

    /// Full-batch gradient descent with momentum on the cross-entropy; the
    /// weights with the lowest loss on a 20% validation slice are kept.
    void fit(const Eigen::MatrixXd& z, const std::vector<int>& y, const Options& o) {
        const int d = int(z.cols());
        std::vector<int> sizes = {d, o.ann_hidden[0], o.ann_hidden[1], o.ann_hidden[2], 1};
        std::mt19937_64 rng(o.seed);
        weights.clear();
        biases.clear();
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const double a = 1.0 / std::sqrt(double(sizes[l]));
            std::uniform_real_distribution<double> u(-a, a);
            Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
            for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
            weights.push_back(w);
            biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
        }

        std::vector<Index> order(std::size_t(z.rows()));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t n_val = z.rows() >= 10 ? std::size_t(z.rows()) / 5 : 0;
        const std::vector<Index> val(order.begin(), order.begin() + std::ptrdiff_t(n_val));
        const std::vector<Index> tr(order.begin() + std::ptrdiff_t(n_val), order.end());
        const Eigen::MatrixXd xt = z(tr, Eigen::all).transpose();
        const Eigen::MatrixXd xv = z(val, Eigen::all).transpose();
        Eigen::RowVectorXd yt(Index(tr.size())), yv(Index(val.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) yt[Index(i)] = y[std::size_t(tr[i])];
        for (std::size_t i = 0; i < val.size(); ++i) yv[Index(i)] = y[std::size_t(val[i])];

        auto vw = weights;
        auto vb = biases;
        for (auto& m : vw) m.setZero();
        for (auto& v : vb) v.setZero();
        auto best_w = weights;
        auto best_b = biases;
        double best = std::numeric_limits<double>::infinity();
        int since = 0;
        const std::size_t nl = weights.size();
        for (int epoch = 0; epoch < o.ann_max_epochs; ++epoch) {
            std::vector<Eigen::MatrixXd> act{xt};
            for (std::size_t l = 0; l < nl; ++l) {
                Eigen::MatrixXd pre = (weights[l] * act.back()).colwise() + biases[l];
                act.push_back(l + 1 < nl ? Eigen::MatrixXd(pre.array().tanh())
                                         : Eigen::MatrixXd(pre.unaryExpr([](double t) { return sigmoid(t); })));
            }
            Eigen::MatrixXd delta = (act.back() - yt) / double(tr.size());
            for (std::size_t l = nl; l-- > 0;) {
                const Eigen::MatrixXd gw = delta * act[l].transpose();
                const Eigen::VectorXd gb = delta.rowwise().sum();
                if (l > 0) delta = (weights[l].transpose() * delta).array() * (1.0 - act[l].array().square());
                vw[l] = o.ann_momentum * vw[l] - o.ann_learning_rate * gw;
                vb[l] = o.ann_momentum * vb[l] - o.ann_learning_rate * gb;
                weights[l] += vw[l];
                biases[l] += vb[l];
            }
            const double loss = n_val ? cross_entropy(xv, yv) : cross_entropy(xt, yt);
            if (loss < best - 1e-9) {
                best = loss;
                best_w = weights;
                best_b = biases;
                since = 0;
            } else if (++since > o.ann_patience) {
                break;
            }
        }
        weights = best_w;
        biases = best_b;
    }

    Eigen::RowVectorXd forward(const Eigen::MatrixXd& cols) const {
        Eigen::MatrixXd a = cols;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            Eigen::MatrixXd pre = (weights[l] * a).colwise() + biases[l];
            a = l + 1 < weights.size() ? Eigen::MatrixXd(pre.array().tanh())
                                       : Eigen::MatrixXd(pre.unaryExpr([](double t) { return sigmoid(t); }));
        }
        return a.row(0);
    }

protected:
    double cross_entropy(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& y) const {
        const Eigen::RowVectorXd p = forward(x).array().min(1.0 - 1e-12).max(1e-12);
        return -(y.array() * p.array().log() + (1.0 - y.array()) * (1.0 - p.array()).log()).mean();
    }

    double score_standardized(const Eigen::RowVectorXd& z) const override { return forward(z.transpose())[0]; }
    void save_params(io::BinaryWriter& o) const override {
        o.put<std::uint32_t>(std::uint32_t(weights.size()));
        for (std::size_t l = 0; l < weights.size(); ++l) {
            o.put_matrix(weights[l]);
            o.put_vector(biases[l]);
        }
    }
    void load_params(io::BinaryReader& r) override {
        const auto n = r.get<std::uint32_t>();
        if (n == 0 || n > 16) throw DataError("corrupt network depth");
        weights.resize(n);
        biases.resize(n);
        for (std::uint32_t l = 0; l < n; ++l) {
            weights[l] = r.get_matrix();
            biases[l] = r.get_vector();
            if (biases[l].size() != weights[l].rows() || (l > 0 && weights[l].cols() != weights[l - 1].rows()))
                throw DataError("corrupt network shapes");
        }
    }
};

// --- support vector machine -------------------------------------------------

class SupportVectorMachine final : public Classifier {
public:
    Eigen::MatrixXd sv;     // support vectors (standardized)
    Eigen::VectorXd coef;   // alpha_i * y_i, y in {-1, +1}
    double bias = 0.0;

    Kind kind() const override { return Kind::svm; }
    double cut() const override { return 0.0; }

    static double kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
        const double t = a.dot(b) + 1.0;
        return t * t;
    }

    /// Soft-margin dual by SMO with maximal-violating-pair selection.
    void fit(const Eigen::MatrixXd& z, const std::vector<int>& labels, double c, double tol) {
        const Index n = z.rows();
        Eigen::VectorXd y(n);
        for (Index i = 0; i < n; ++i) y[i] = labels[std::size_t(i)] ? 1.0 : -1.0;
        Eigen::MatrixXd q(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j <= i; ++j) q(i, j) = q(j, i) = y[i] * y[j] * kernel(z.row(i), z.row(j));
        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd grad = -Eigen::VectorXd::Ones(n);  // gradient of 1/2 a'Qa - e'a
        const long max_iter = std::max<long>(100000, 100 * long(n));
        auto in_up = [&](Index t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0); };
        auto in_low = [&](Index t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c); };
        for (long it = 0; it < max_iter; ++it) {
            Index i = -1, j = -1;
            double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
            for (Index t = 0; t < n; ++t) {
                const double v = -y[t] * grad[t];
                if (in_up(t) && v > gmax) {
                    gmax = v;
                    i = t;
                }
                if (in_low(t) && v < gmin) {
                    gmin = v;
                    j = t;
                }
            }
            if (i < 0 || j < 0 || gmax - gmin < tol) break;
            // two-variable subproblem along y_i d_i + y_j d_j = 0
            const double a_ii = q(i, i) + q(j, j) - 2.0 * y[i] * y[j] * q(i, j);
            const double eta = std::max(a_ii, 1e-12);
            double step = (gmax - gmin) / eta;
            // bounds: alpha_i += y_i*step, alpha_j -= y_j*step
            auto room = [&](Index t, double dir) { return dir > 0 ? c - alpha[t] : alpha[t]; };
            step = std::min({step, room(i, y[i]), room(j, -y[j])});
            const double di = y[i] * step, dj = -y[j] * step;
            alpha[i] += di;
            alpha[j] += dj;
            alpha[i] = std::clamp(alpha[i], 0.0, c);
            alpha[j] = std::clamp(alpha[j], 0.0, c);
            grad += q.col(i) * di + q.col(j) * dj;
        }
        // bias from free vectors, else the midpoint of the feasible interval
        double sum = 0.0;
        int free = 0;
        double ub = std::numeric_limits<double>::infinity(), lb = -ub;
        for (Index t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (alpha[t] > 1e-12 && alpha[t] < c - 1e-12) {
                sum += v;
                ++free;
            } else if (in_up(t)) {
                ub = std::min(ub, v);
            } else {
                lb = std::max(lb, v);
            }
        }
        const double b_raw = free ? sum / free : (std::isfinite(ub) && std::isfinite(lb) ? 0.5 * (ub + lb) : 0.0);
        std::vector<Index> keep;
        for (Index t = 0; t < n; ++t)
            if (alpha[t] > 1e-12) keep.push_back(t);
        sv = z(keep, Eigen::all);
        coef.resize(Index(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) coef[Index(k)] = alpha[keep[k]] * y[keep[k]];
        bias = b_raw;
    }

protected:
    double score_standardized(const Eigen::RowVectorXd& z) const override {
        double f = bias;
        for (Index i = 0; i < sv.rows(); ++i) f += coef[i] * kernel(sv.row(i), z);
        return f;
    }
    void save_params(io::BinaryWriter& o) const override {
        o.put_matrix(sv);
        o.put_vector(coef);
        o.put<double>(bias);
    }
    void load_params(io::BinaryReader& r) override {
        sv = r.get_matrix();
        coef = r.get_vector();
        bias = r.get<double>();
        if (coef.size() != sv.rows()) throw DataError("corrupt SVM parameters");
    }
};

// --- training and persistence -----------------------------------------------

template <typename C>
std::unique_ptr<Classifier> make_loaded(io::BinaryReader& r) {
    auto c = std::make_unique<C>();
    c->load(r);
    return c;
}

/// Trains one classifier; predictors are standardized with training statistics.
inline std::unique_ptr<Classifier> train(Kind kind, const Eigen::MatrixXd& x, const std::vector<int>& y,
                                         const Options& o = {}) {
    o.validate();
    if (x.rows() != Index(y.size())) throw DomainError("feature rows and label count differ");
    if (!x.allFinite()) throw DataError("non-finite features");
    int pos = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
        pos += v;
    }
    if (pos == 0 || pos == int(y.size())) throw DataError("training data contains a single class");

    const Standardizer s = Standardizer::fit(x);
    const Eigen::MatrixXd z = s.apply(x);
    std::unique_ptr<Classifier> out;
    switch (kind) {
        case Kind::lr: {
            auto c = std::make_unique<LogisticRegression>();
            c->fit(z, y);
            out = std::move(c);
            break;
        }
        case Kind::knn: {
            auto c = std::make_unique<KNearest>();
            c->fit(z, y, o.knn_k);
            out = std::move(c);
            break;
        }
        case Kind::nb: {
            auto c = std::make_unique<NaiveBayes>();
            c->fit(z, y);
            out = std::move(c);
            break;
        }
        case Kind::dt: {
            auto c = std::make_unique<DecisionTree>();
            c->fit(z, y, o.tree_max_depth, o.tree_min_leaf);
            out = std::move(c);
            break;
        }
        case Kind::ann: {
            auto c = std::make_unique<NeuralNet>();
            c->fit(z, y, o);
            out = std::move(c);
            break;
        }
        case Kind::svm: {
            auto c = std::make_unique<SupportVectorMachine>();
            c->fit(z, y, o.svm_c, o.svm_tol);
            out = std::move(c);
            break;
        }
    }
    out->configure(s, o.threshold);
    return out;
}

/// Trains the given kinds concurrently; models are immutable afterwards.
inline std::vector<std::unique_ptr<Classifier>> train_bank(const std::vector<Kind>& kinds, const Eigen::MatrixXd& x,
                                                           const std::vector<int>& y, const Options& o = {}) {
    std::vector<std::future<std::unique_ptr<Classifier>>> jobs;
    for (Kind k : kinds) jobs.push_back(std::async(std::launch::async, [&, k] { return train(k, x, y, o); }));
    std::vector<std::unique_ptr<Classifier>> out;
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

inline constexpr std::string_view kClassifierMagic = "SCLS";
inline constexpr std::uint32_t kClassifierVersion = 1;

inline void save_classifiers(std::ostream& os, const std::vector<std::unique_ptr<Classifier>>& bank) {
    io::BinaryWriter w(os);
    w.magic(kClassifierMagic);
    w.put<std::uint32_t>(kClassifierVersion);
    w.put<std::uint32_t>(std::uint32_t(bank.size()));
    for (const auto& c : bank) c->save(w);
    w.check();
}

inline std::vector<std::unique_ptr<Classifier>> load_classifiers(std::istream& is) {
    io::BinaryReader r(is);
    r.expect_magic(kClassifierMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kClassifierVersion) throw DataError("unsupported classifier version " + std::to_string(version));
    const auto n = r.get<std::uint32_t>();
    if (n > 64) throw DataError("corrupt classifier count");
    std::vector<std::unique_ptr<Classifier>> out;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto k = r.get<std::uint8_t>();
        switch (Kind(k)) {
            case Kind::lr: out.push_back(make_loaded<LogisticRegression>(r)); break;
            case Kind::knn: out.push_back(make_loaded<KNearest>(r)); break;
            case Kind::nb: out.push_back(make_loaded<NaiveBayes>(r)); break;
            case Kind::dt: out.push_back(make_loaded<DecisionTree>(r)); break;
            case Kind::ann: out.push_back(make_loaded<NeuralNet>(r)); break;
            case Kind::svm: out.push_back(make_loaded<SupportVectorMachine>(r)); break;
            default: throw DataError("unknown classifier kind tag " + std::to_string(k));
        }
    }
    return out;
}

// --- metrics ----------------------------------------------------------------

struct ConfusionMatrix {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

inline ConfusionMatrix confusion(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) throw DomainError("prediction and truth sizes differ");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i]) (predicted[i] ? cm.tp : cm.fn)++;
        else (predicted[i] ? cm.fp : cm.tn)++;
    }
    return cm;
}

/// Undefined ratios (zero denominator) are empty, never 0.
struct Metrics {
    std::optional<double> accuracy, sensitivity, specificity, precision, f1;
};

inline std::optional<double> ratio(double num, double den) {
    if (den == 0.0) return std::nullopt;
    return num / den;
}

inline Metrics metrics(const ConfusionMatrix& cm) {
    if (cm.tp < 0 || cm.fp < 0 || cm.tn < 0 || cm.fn < 0) throw DomainError("negative confusion counts");
    Metrics m;
    m.accuracy = ratio(double(cm.tp + cm.tn), double(cm.total()));
    m.sensitivity = ratio(double(cm.tp), double(cm.tp + cm.fn));
    m.specificity = ratio(double(cm.tn), double(cm.tn + cm.fp));
    m.precision = ratio(double(cm.tp), double(cm.tp + cm.fp));
    if (m.precision && m.sensitivity) m.f1 = ratio(2.0 * *m.precision * *m.sensitivity, *m.precision + *m.sensitivity);
    return m;
}

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (false positive rate, true positive rate)
    double auc = 0.0;
};

/// Sweeps every distinct score as a threshold; tied scores cross together.
inline RocCurve roc_auc(const Eigen::VectorXd& scores, const std::vector<int>& truth) {
    if (scores.size() != Index(truth.size())) throw DomainError("score and truth sizes differ");
    double pos = 0, neg = 0;
    for (int t : truth) (t ? pos : neg) += 1;
    if (pos == 0 || neg == 0) throw DataError("AUC is undefined for single-class truth");
    std::vector<Index> order(truth.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
    RocCurve c;
    c.points.emplace_back(0.0, 0.0);
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (truth[std::size_t(order[j])] ? tp : fp) += 1;
            ++j;
        }
        const auto [x0, y0] = c.points.back();
        const double x1 = fp / neg, y1 = tp / pos;
        c.auc += (x1 - x0) * 0.5 * (y0 + y1);
        c.points.emplace_back(x1, y1);
        i = j;
    }
    return c;
}

inline Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

struct Evaluation {
    Kind kind;
    ConfusionMatrix cm;
    Metrics m;
    std::optional<RocCurve> roc;  // empty when the test truth has one class
};

inline Evaluation evaluate(const Classifier& c, const Eigen::MatrixXd& x, const std::vector<int>& truth) {
    Evaluation e{c.kind(), confusion(c.labels(x), truth), {}, std::nullopt};
    e.m = metrics(e.cm);
    const bool both = std::find(truth.begin(), truth.end(), 0) != truth.end() &&
                      std::find(truth.begin(), truth.end(), 1) != truth.end();
    if (both) e.roc = roc_auc(c.scores(x), truth);
    return e;
}

inline Json to_json(const Evaluation& e) {
    Json roc = nullptr;
    if (e.roc) {
        Json pts = Json::array();
        for (const auto& [f, t] : e.roc->points) pts.push_back({f, t});
        roc = {{"points", pts}, {"auc", e.roc->auc}};
    }
    return {{"kind", to_string(e.kind)},
            {"confusion", {{"tp", e.cm.tp}, {"fp", e.cm.fp}, {"tn", e.cm.tn}, {"fn", e.cm.fn}}},
            {"accuracy", opt_json(e.m.accuracy)},
            {"sensitivity", opt_json(e.m.sensitivity)},
            {"specificity", opt_json(e.m.specificity)},
            {"precision", opt_json(e.m.precision)},
            {"f1", opt_json(e.m.f1)},
            {"roc", roc}};
}

/// Plain-text table: one row per classifier, percentages.
inline std::string table(const std::vector<Evaluation>& rows) {
    auto pct = [](const std::optional<double>& v) {
        char buf[16];
        if (!v) return std::string("   n/a");
        std::snprintf(buf, sizeof buf, "%6.1f", 100.0 * *v);
        return std::string(buf);
    };
    std::string out = "Classifier  Accuracy  Sensitivity  Specificity  Precision      F1     AUC\n";
    for (const auto& e : rows) {
        char line[160];
        char auc[16] = "   n/a";
        if (e.roc) std::snprintf(auc, sizeof auc, "%6.3f", e.roc->auc);
        std::snprintf(line, sizeof line, "%-10s    %s       %s       %s     %s  %s  %s\n", to_string(e.kind),
                      pct(e.m.accuracy).c_str(), pct(e.m.sensitivity).c_str(), pct(e.m.specificity).c_str(),
                      pct(e.m.precision).c_str(), pct(e.m.f1).c_str(), auc);
        out += line;
    }
    return out;
}

}  // namespace stentrom::classify
