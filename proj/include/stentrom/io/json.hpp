#pragma once

// JSON mapping of configuration value types. Readers are strict: unknown keys
// and wrong types raise ConfigError.

#include "stentrom/fem/solver.hpp"
#include "stentrom/stent.hpp"

#include <json.hpp>

#include <set>

namespace stentrom::io {

using Json = nlohmann::json;

/// Consumes keys from a JSON object; finish() rejects anything left over.
class StrictObject {
public:
    StrictObject(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    const Json* child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

inline Json to_json(const StentSpec& s) {
    return {{"n_wires", s.n_wires},       {"stent_radius", s.stent_radius}, {"wire_radius", s.wire_radius},
            {"length", s.length},         {"n_cells", s.n_cells},           {"young_gpa", s.young_gpa},
            {"poisson", s.poisson},       {"density", s.density}};
}

inline StentSpec stent_spec_from_json(const Json& j) {
    StentSpec s;
    StrictObject o(j, "stent");
    o.read("n_wires", s.n_wires);
    o.read("stent_radius", s.stent_radius);
    o.read("wire_radius", s.wire_radius);
    o.read("length", s.length);
    o.read("n_cells", s.n_cells);
    o.read("young_gpa", s.young_gpa);
    o.read("poisson", s.poisson);
    o.read("density", s.density);
    o.finish();
    s.validate();
    return s;
}

inline Json to_json(const fem::SolverConfig& c) {
    return {{"k_contact", c.k_contact}, {"k_cross", c.k_cross},
            {"mu_f", c.mu_f},           {"c_damp", c.c_damp},
            {"dt", c.dt},               {"ke_stop", c.ke_stop},
            {"max_steps", c.max_steps}, {"r_crimped", c.r_crimped},
            {"n_position_steps", c.n_position_steps}, {"n_crimp_steps", c.n_crimp_steps},
            {"force_tol", c.force_tol}, {"max_newton", c.max_newton}};
}

inline fem::SolverConfig solver_config_from_json(const Json& j) {
    fem::SolverConfig c;
    StrictObject o(j, "solver");
    o.read("k_contact", c.k_contact);
    o.read("k_cross", c.k_cross);
    o.read("mu_f", c.mu_f);
    o.read("c_damp", c.c_damp);
    o.read("dt", c.dt);
    o.read("ke_stop", c.ke_stop);
    o.read("max_steps", c.max_steps);
    o.read("r_crimped", c.r_crimped);
    o.read("n_position_steps", c.n_position_steps);
    o.read("n_crimp_steps", c.n_crimp_steps);
    o.read("force_tol", c.force_tol);
    o.read("max_newton", c.max_newton);
    o.finish();
    c.validate();
    return c;
}

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec3_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json to_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline Eigen::VectorXd vector_from_json(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), Index(v.size()));
}

/// 64-bit FNV-1a, used for config fingerprints.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* d = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[std::size_t(i)] = d[v & 15];
    return s;
}

}  // namespace stentrom::io
