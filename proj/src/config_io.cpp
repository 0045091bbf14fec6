#include "manydelta/config_io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace manydelta {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(where + ": must be finite");
    return v;
}

std::vector<double> edge_map(const json& j, int n, bool required, const std::string& name) {
    if (!j.is_object()) throw ConfigError(name + ": expected an object keyed by \"j'-j\"");
    std::vector<double> out(edge_count(n), required ? NAN : 0.0);
    for (auto it = j.begin(); it != j.end(); ++it) {
        Edge e;
        try {
            e = parse_edge_key(it.key(), n);
        } catch (const ParamError& err) {
            throw ConfigError(name + ": " + err.what());
        }
        out[edge_index(e)] = number(it.value(), name + "." + it.key());
    }
    if (required)
        for (int k = 0; k < edge_count(n); ++k)
            if (std::isnan(out[k])) throw ConfigError(name + ": missing entry for edge " + edge_key(edge_at(k)));
    return out;
}

}  // namespace

ModelConfig parse_model_config(const json& j) {
    reject_unknown(j, {"n", "beta", "w", "z0"}, "model");
    if (!j.contains("n") || !j["n"].is_number_integer()) throw ConfigError("model.n: integer required");
    int n = j["n"].get<int>();
    if (n < 3 || n > 64) throw ConfigError("model.n: must lie in [3, 64]");
    if (!j.contains("beta")) throw ConfigError("model.beta: required");
    auto beta = edge_map(j["beta"], n, true, "model.beta");
    auto w = j.contains("w") ? edge_map(j["w"], n, false, "model.w") : std::vector<double>(edge_count(n), 0.0);
    ModelConfig m;
    try {
        m.params = ModelParams::create(n, beta, w);
    } catch (const ParamError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    if (!j.contains("z0") || !j["z0"].is_array() || static_cast<int>(j["z0"].size()) != n)
        throw ConfigError("model.z0: array of n [re, im] pairs required");
    for (size_t k = 0; k < j["z0"].size(); ++k) {
        const json& p = j["z0"][k];
        if (!p.is_array() || p.size() != 2) throw ConfigError("model.z0: each entry must be [re, im]");
        m.z0.emplace_back(number(p[0], "model.z0"), number(p[1], "model.z0"));
    }
    if (!classify_state(m.z0, m.params, 0.0).eligible())
        throw ConfigError("model.z0: several positively weighted pairs at contact");
    return m;
}

json model_to_json(const ModelConfig& m) {
    json beta = json::object(), w = json::object(), z = json::array();
    for (int e = 0; e < m.params.edges(); ++e) {
        beta[edge_key(edge_at(e))] = m.params.beta[e];
        if (m.params.weight[e] != 0) w[edge_key(edge_at(e))] = m.params.weight[e];
    }
    for (auto c : m.z0) z.push_back({c.real(), c.imag()});
    return {{"n", m.params.n}, {"beta", beta}, {"w", w}, {"z0", z}};
}

SimConfig parse_sim_config(const json& j, SimConfig s) {
    reject_unknown(j, {"dt_max", "dt_min", "rel_step", "contact_threshold", "radius_floor", "taming_cap",
                       "t_max", "max_contacts", "max_steps"},
                   "sim");
    auto get = [&](const char* k, double& dst) {
        if (j.contains(k)) dst = number(j[k], std::string("sim.") + k);
    };
    get("dt_max", s.dt_max);
    get("dt_min", s.dt_min);
    get("rel_step", s.rel_step);
    get("contact_threshold", s.contact_threshold);
    get("radius_floor", s.radius_floor);
    get("taming_cap", s.taming_cap);
    get("t_max", s.t_max);
    if (j.contains("max_contacts")) {
        if (!j["max_contacts"].is_number_integer()) throw ConfigError("sim.max_contacts: integer required");
        s.max_contacts = j["max_contacts"].get<int>();
    }
    if (j.contains("max_steps")) {
        if (!j["max_steps"].is_number_integer()) throw ConfigError("sim.max_steps: integer required");
        s.max_steps = j["max_steps"].get<long>();
    }
    try {
        s.validate();
    } catch (const ParamError& e) {
        throw ConfigError(e.what());
    }
    return s;
}

json sim_to_json(const SimConfig& s) {
    return {{"dt_max", s.dt_max},
            {"dt_min", s.dt_min},
            {"rel_step", s.rel_step},
            {"contact_threshold", s.contact_threshold},
            {"radius_floor", s.radius_floor},
            {"taming_cap", s.taming_cap},
            {"t_max", s.t_max},
            {"max_contacts", s.max_contacts},
            {"max_steps", s.max_steps}};
}

McConfig parse_mc_config(const json& j, McConfig m) {
    reject_unknown(j, {"paths", "seed", "workers"}, "mc");
    if (j.contains("paths")) {
        if (!j["paths"].is_number_integer() || j["paths"].get<long>() < 2)
            throw ConfigError("mc.paths: integer >= 2 required");
        m.paths = j["paths"].get<long>();
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ConfigError("mc.seed: integer required");
        m.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("workers")) {
        if (!j["workers"].is_number_integer() || j["workers"].get<int>() < 0)
            throw ConfigError("mc.workers: nonnegative integer required");
        m.workers = j["workers"].get<int>();
    }
    return m;
}

json mc_to_json(const McConfig& m) { return {{"paths", m.paths}, {"seed", m.seed}}; }

ExperimentConfig parse_experiment(const json& j) {
    ExperimentConfig e;
    if (j.is_object() && j.contains("n")) {
        e.model = parse_model_config(j);
        return e;
    }
    reject_unknown(j, {"model", "sim", "mc", "task"}, "config");
    if (!j.contains("model")) throw ConfigError("config: 'model' block required");
    e.model = parse_model_config(j["model"]);
    if (j.contains("sim")) e.sim = parse_sim_config(j["sim"]);
    if (j.contains("mc")) e.mc = parse_mc_config(j["mc"]);
    if (j.contains("task")) {
        if (!j["task"].is_object()) throw ConfigError("config.task: expected an object");
        e.task = j["task"];
    }
    return e;
}

json experiment_to_json(const ExperimentConfig& e) {
    return {{"model", model_to_json(e.model)},
            {"sim", sim_to_json(e.sim)},
            {"mc", mc_to_json(e.mc)},
            {"task", e.task}};
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

std::string content_hash(const std::string& content) {
    std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out.push_back(hex[md[k] >> 4]);
        out.push_back(hex[md[k] & 15]);
    }
    return out;
}

}  // namespace manydelta
