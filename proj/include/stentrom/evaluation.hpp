#pragma once

// Nodal and aggregate errors between high-fidelity, projected (reduced-basis)
// and predicted displacement fields.

#include "stentrom/core.hpp"

#include <json.hpp>

#include <cstdio>

namespace stentrom::evaluation {

using Json = nlohmann::json;

struct NodalErrors {
    Eigen::VectorXd e_rb;   // ||u_rb,i - u_h,i||
    Eigen::VectorXd e_p;    // ||u_p,i - u_h,i||
    Eigen::VectorXd e_gpr;  // e_p - e_rb, signed
};

inline NodalErrors nodal_errors(const Eigen::VectorXd& u_h, const Eigen::VectorXd& u_rb, const Eigen::VectorXd& u_p) {
    if (u_h.size() != u_rb.size() || u_h.size() != u_p.size()) throw DomainError("displacement lengths differ");
    if (u_h.size() % 3 != 0) throw DomainError("displacement length is not a multiple of 3");
    const Index n = u_h.size() / 3;
    NodalErrors e;
    e.e_rb.resize(n);
    e.e_p.resize(n);
    for (Index i = 0; i < n; ++i) {
        e.e_rb[i] = (u_rb.segment<3>(3 * i) - u_h.segment<3>(3 * i)).norm();
        e.e_p[i] = (u_p.segment<3>(3 * i) - u_h.segment<3>(3 * i)).norm();
    }
    e.e_gpr = e.e_p - e.e_rb;
    return e;
}

/// AE (mean over nodes) and ME (max over nodes) for one solution.
struct SolutionErrors {
    double ae_rb = 0, me_rb = 0;
    double ae_p = 0, me_p = 0;
    double ae_gpr = 0;      // signed mean
    double ae_gpr_abs = 0;  // mean of |e_gpr|
};

inline SolutionErrors summarize(const NodalErrors& e) {
    if (e.e_p.size() == 0) throw DomainError("no nodes to summarize");
    return {e.e_rb.mean(), e.e_rb.maxCoeff(), e.e_p.mean(), e.e_p.maxCoeff(), e.e_gpr.mean(), e.e_gpr.cwiseAbs().mean()};
}

/// Imaging-modality resolutions [mm].
struct Threshold {
    std::string name;
    double value;
};

inline std::vector<Threshold> default_thresholds() {
    return {{"3DRA", 0.15}, {"DSA", 0.2}, {"CTA-low", 0.4}, {"MRA-low", 0.6}};
}

struct MeanSd {
    double mean = 0, sd = 0;
};

inline MeanSd mean_sd(const std::vector<double>& v) {
    if (v.empty()) throw DomainError("empty sample");
    MeanSd m;
    for (double x : v) m.mean += x;
    m.mean /= double(v.size());
    if (v.size() > 1) {
        for (double x : v) m.sd += (x - m.mean) * (x - m.mean);
        m.sd = std::sqrt(m.sd / double(v.size() - 1));
    }
    return m;
}

struct Exceedance {
    Threshold threshold;
    int ae_p = 0;  // solutions with AE_p above the threshold
    int me_p = 0;  // solutions with ME_p above the threshold
};

struct Summary {
    std::size_t n = 0;
    MeanSd ae_rb, me_rb, ae_p, me_p, ae_gpr, ae_gpr_abs;
    std::vector<Exceedance> exceedance;
};

inline Summary aggregate(const std::vector<SolutionErrors>& s, const std::vector<Threshold>& thresholds = default_thresholds()) {
    if (s.empty()) throw DomainError("aggregate needs at least one solution");
    Summary out;
    out.n = s.size();
    auto col = [&](double SolutionErrors::*f) {
        std::vector<double> v;
        v.reserve(s.size());
        for (const auto& e : s) v.push_back(e.*f);
        return mean_sd(v);
    };
    out.ae_rb = col(&SolutionErrors::ae_rb);
    out.me_rb = col(&SolutionErrors::me_rb);
    out.ae_p = col(&SolutionErrors::ae_p);
    out.me_p = col(&SolutionErrors::me_p);
    out.ae_gpr = col(&SolutionErrors::ae_gpr);
    out.ae_gpr_abs = col(&SolutionErrors::ae_gpr_abs);
    for (const auto& t : thresholds) {
        Exceedance x{t};
        for (const auto& e : s) {
            x.ae_p += e.ae_p > t.value;
            x.me_p += e.me_p > t.value;
        }
        out.exceedance.push_back(x);
    }
    return out;
}

inline Json to_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}}; }

inline Json to_json(const Summary& s) {
    Json ex = Json::array();
    for (const auto& e : s.exceedance)
        ex.push_back({{"name", e.threshold.name}, {"threshold", e.threshold.value}, {"ae_p", e.ae_p}, {"me_p", e.me_p}});
    return {{"n", s.n},
            {"ae_rb", to_json(s.ae_rb)},
            {"me_rb", to_json(s.me_rb)},
            {"ae_p", to_json(s.ae_p)},
            {"me_p", to_json(s.me_p)},
            {"ae_gpr", to_json(s.ae_gpr)},
            {"ae_gpr_abs", to_json(s.ae_gpr_abs)},
            {"exceedance", ex}};
}

inline Json to_json(const SolutionErrors& e) {
    return {{"ae_rb", e.ae_rb}, {"me_rb", e.me_rb}, {"ae_p", e.ae_p},
            {"me_p", e.me_p},   {"ae_gpr", e.ae_gpr}, {"ae_gpr_abs", e.ae_gpr_abs}};
}

/// Text table, one row per labelled configuration.
inline std::string table(const std::vector<std::pair<std::string, Summary>>& rows) {
    std::string out = "Configuration            N     AE_rb [mm]        AE_p [mm]         ME_p [mm]         |E_gpr| [mm]\n";
    char line[256];
    for (const auto& [name, s] : rows) {
        std::snprintf(line, sizeof line, "%-22s %4zu   %.4f±%.4f   %.4f±%.4f   %.4f±%.4f   %.4f±%.4f\n", name.c_str(),
                      s.n, s.ae_rb.mean, s.ae_rb.sd, s.ae_p.mean, s.ae_p.sd, s.me_p.mean, s.me_p.sd,
                      s.ae_gpr_abs.mean, s.ae_gpr_abs.sd);
        out += line;
    }
    return out;
}

}  // namespace stentrom::evaluation
