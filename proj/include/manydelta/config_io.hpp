#pragma once

#include "manydelta/model.hpp"
#include "manydelta/sde.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace manydelta {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    ModelParams params;
    Configuration z0;
};

struct McConfig {
    long paths = 1000;
    std::uint64_t seed = 1;
    int workers = 0;  // 0: resolve from DCS_WORKERS
};

struct ExperimentConfig {
    ModelConfig model;
    SimConfig sim;
    McConfig mc;
    nlohmann::json task = nlohmann::json::object();
};

// {"n", "beta": {"j'-j": v}, "w": {...}, "z0": [[re, im], ...]}; every beta
// entry is required, missing weights default to 0, unknown keys are rejected.
ModelConfig parse_model_config(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelConfig& m);

SimConfig parse_sim_config(const nlohmann::json& j, SimConfig base = {});
nlohmann::json sim_to_json(const SimConfig& s);

McConfig parse_mc_config(const nlohmann::json& j, McConfig base = {});
nlohmann::json mc_to_json(const McConfig& m);

// Either a full experiment {"model", "sim", "mc", "task"} or a bare model block.
ExperimentConfig parse_experiment(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentConfig& e);

nlohmann::json load_json_file(const std::string& path);

// SHA-1 over "blob <len>\0<content>", as git hashes file contents.
std::string content_hash(const std::string& content);

}  // namespace manydelta
