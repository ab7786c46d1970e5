#pragma once

// JSON-over-HTTP prediction service. Requests are routed through handle(),
// which is independent of the socket layer; listen() binds it with httplib.

#include "stentrom/io/mesh.hpp"
#include "stentrom/pipeline.hpp"

#include <httplib.h>

#include <ostream>

namespace stentrom::server {

namespace fs = std::filesystem;
using io::Json;

/// JSON flavour whose floating-point numbers are single precision.
using JsonF = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t, std::uint64_t, float>;

inline constexpr int kSchemaVersion = 1;
inline constexpr int kMaxPosteriorSamples = 1000;

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

class Service {
public:
    explicit Service(pipeline::Models models)
        : models_(std::move(models)), mesh_(generate_stent(models_.rom.geometry.stent)) {
        if (Index(3 * mesh_.nodes.size()) != models_.rom.basis.V.rows())
            throw DataError("model node count does not match its stent specification");
    }

    const pipeline::Models& models() const { return models_; }

    Response handle(const std::string& method, const std::string& path, const std::string& body,
                    bool f64 = false) const {
        try {
            if (path == "/api/info" && method == "GET") return f64 ? info<Json>() : info<JsonF>();
            if (method != "POST" && (path == "/api/predict" || path == "/api/vessel" || path == "/api/classify"))
                return error(405, "use POST");
            Json req;
            try {
                req = Json::parse(body.empty() ? "{}" : body);
            } catch (const nlohmann::json::parse_error& e) {
                return error(400, std::string("malformed JSON: ") + e.what());
            }
            if (!req.is_object()) return error(400, "request body must be a JSON object");
            if (path == "/api/predict") return f64 ? predict<Json>(req) : predict<JsonF>(req);
            if (path == "/api/classify") return classify_request(req);
            if (path == "/api/vessel") return f64 ? vessel<Json>(req) : vessel<JsonF>(req);
            return error(404, "unknown endpoint " + path);
        } catch (const nlohmann::json::exception& e) {
            return error(400, e.what());
        } catch (const DomainError& e) {
            return error(400, e.what());
        } catch (const ConfigError& e) {
            return error(400, e.what());
        } catch (const GeometryError& e) {
            return error(400, e.what());
        } catch (const std::exception& e) {
            return error(500, e.what());
        }
    }

    /// Blocks serving requests; returns false when the address cannot be bound.
    bool listen(const std::string& host, int port, const fs::path& static_dir, std::ostream& log) const {
        httplib::Server svr;
        auto route = [this](const httplib::Request& req, httplib::Response& res) {
            const bool f64 = req.has_param("precision") && req.get_param_value("precision") == "f64";
            const Response r = handle(req.method, req.path, req.body, f64);
            res.status = r.status;
            res.set_content(r.body, r.content_type);
        };
        svr.Get("/api/.*", route);
        svr.Post("/api/.*", route);
        if (fs::is_directory(static_dir)) {
            svr.set_mount_point("/", static_dir.string());
            log << "serving static files from " << static_dir << "\n";
        } else {
            log << "static directory " << static_dir << " not found; API only\n";
        }
        if (!svr.bind_to_port(host, port)) {
            log << "cannot bind " << host << ":" << port << "\n";
            return false;
        }
        log << "listening on http://" << host << ":" << port << std::endl;
        return svr.listen_after_bind();
    }

private:
    template <typename J>
    static J array_of(const Eigen::VectorXd& v) {
        J a = J::array();
        for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
        return a;
    }

    static Response error(int status, const std::string& msg) {
        return {status, Json{{"schema_version", kSchemaVersion}, {"error", msg}}.dump()};
    }

    static Eigen::VectorXd mu_from(const Json& req, std::size_t min_len = 6) {
        if (!req.contains("mu") || !req["mu"].is_array()) throw DomainError("field 'mu' (number array) is required");
        const auto v = req["mu"].get<std::vector<double>>();
        if (v.size() < min_len || v.size() > 6)
            throw DomainError("'mu' must have " + std::to_string(min_len) + (min_len == 6 ? "" : " to 6") + " entries");
        return Eigen::Map<const Eigen::VectorXd>(v.data(), Index(v.size()));
    }

    void check_range(const Eigen::VectorXd& mu) const {
        if (!models_.rom.geometry.space.contains(mu, 1e-9)) throw DomainError("'mu' lies outside the trained parameter ranges");
    }

    template <typename J>
    Response info() const {
        const auto& g = models_.rom.geometry;
        J ranges = J::object();
        for (std::size_t i = 0; i < dataset::ParamSpace::kNames.size(); ++i)
            ranges[std::string(dataset::ParamSpace::kNames[i])] = {g.space.ranges[i].lo, g.space.ranges[i].hi};
        J nodes = J::array(), beams = J::array();
        for (const auto& p : mesh_.nodes)
            for (int c = 0; c < 3; ++c) nodes.push_back(p[c]);
        for (const auto& b : mesh_.beams) {
            beams.push_back(b[0]);
            beams.push_back(b[1]);
        }
        J j = {{"schema_version", kSchemaVersion},
               {"L", models_.rom.basis.L},
               {"predictor", dataset::to_string(models_.rom.kind)},
               {"n_cl", models_.rom.n_cl},
               {"input_dim", models_.rom.input_dim()},
               {"classifier", classify::to_string(models_.serve)},
               {"ranges", ranges},
               {"y_ca_relative", g.space.y_ca_relative},
               {"stent", J::parse(io::to_json(g.stent).dump())},
               {"nodes", nodes},
               {"beams", beams}};
        return {200, j.dump()};
    }

    template <typename J>
    Response predict(const Json& req) const {
        const Eigen::VectorXd mu = mu_from(req);
        if (req.contains("predictor")) {
            const auto k = dataset::predictor_from_string(req["predictor"].get<std::string>());
            if (k != models_.rom.kind)
                throw DomainError(std::string("loaded model uses predictor ") + dataset::to_string(models_.rom.kind));
        }
        const int n_samples = req.value("samples", 0);
        if (n_samples < 0 || n_samples > kMaxPosteriorSamples)
            throw DomainError("'samples' must lie in [0, " + std::to_string(kMaxPosteriorSamples) + "]");
        const bool force = req.value("force", false);
        check_range(mu);
        const auto r = pipeline::predict(models_, mu, force);
        const auto ct = dataset::target_centerline(fem::CenterlinePath{models_.rom.geometry.c0}, mu,
                                                   models_.rom.geometry.frame);
        J j = {{"schema_version", kSchemaVersion},
               {"label", r.label ? "success" : "failure"},
               {"score", r.score},
               {"classifier", classify::to_string(models_.serve)},
               {"latency_ms", r.latency_ms},
               {"centerline", array_of<J>(flatten(ct.points))},
               {"vessel", {{"endpoint", "/api/vessel"}, {"mu", array_of<J>(mu.head(5))}}}};
        if (r.regression) {
            j["u_p"] = array_of<J>(r.prediction.u_p);
            j["node_std"] = array_of<J>(r.prediction.node_std);
            if (r.forced) j["warning"] = "regression forced on a predicted failure";
            if (n_samples > 0) {
                J s = J::array();
                const auto seed = req.value("seed", std::uint64_t{1});
                for (const auto& u : rom::sample_posterior(models_.rom, r.prediction, n_samples, seed))
                    s.push_back(array_of<J>(u));
                j["samples"] = s;
            }
        }
        return {200, j.dump()};
    }

    Response classify_request(const Json& req) const {
        const Eigen::VectorXd mu = mu_from(req);
        check_range(mu);
        auto r = pipeline::predict(models_, mu, false);
        Json j = {{"schema_version", kSchemaVersion},
                  {"label", r.label ? "success" : "failure"},
                  {"score", r.score},
                  {"classifier", classify::to_string(models_.serve)}};
        return {200, j.dump()};
    }

    template <typename J>
    Response vessel(const Json& req) const {
        Eigen::VectorXd mu(6);
        if (req.contains("mu")) {
            const Eigen::VectorXd m = mu_from(req, 5);
            mu.head(5) = m.head(5);
        } else {
            std::size_t i = 0;
            for (const char* k : {"y_p1", "z_p1", "d_vessel", "d_aneurysm", "y_ca"}) {
                if (!req.contains(k)) throw DomainError(std::string("field '") + k + "' is required");
                mu[Index(i++)] = req[k].get<double>();
            }
        }
        mu[5] = models_.rom.geometry.space.ranges[5].lo;
        const auto v = dataset::make_vessel(mu, models_.rom.geometry.frame);
        const auto mesh = io::triangulate_vessel(v);
        J verts = J::array(), tris = J::array();
        for (const auto& p : mesh.vertices)
            for (int c = 0; c < 3; ++c) verts.push_back(p[c]);
        for (const auto& t : mesh.triangles)
            for (int c = 0; c < 3; ++c) tris.push_back(t[std::size_t(c)]);
        J j = {{"schema_version", kSchemaVersion}, {"vertices", verts}, {"triangles", tris}};
        return {200, j.dump()};
    }

    pipeline::Models models_;
    StentMesh mesh_;
};

}  // namespace stentrom::server
