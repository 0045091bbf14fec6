#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace manydelta::cli {

struct Options {
    std::string config;
    std::string out;
    std::optional<long> paths;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<double> dt;
    std::optional<double> delta_contact;
    std::optional<double> eps;
    std::optional<double> tolerance;
    // specfun-table
    double xmin = 1e-6;
    double xmax = 50.0;
    int points = 200;
};

struct Artifact {
    std::string file;
    std::string content;
};

struct Outcome {
    nlohmann::json report;
    std::vector<Artifact> artifacts;
    // Printed instead of the report when no output directory is given.
    std::optional<std::string> primary;
};

const std::vector<std::string>& command_names();

// Runs one subcommand; throws ConfigError / ParamError on bad input and the
// numerical exception types on failures along paths.
Outcome run(const std::string& command, const Options& opt);

// Exit code contract: 0 all tolerances pass, 1 a tolerance failed,
// 2 invalid configuration, 3 numerical failure.
int dispatch(const std::string& command, const Options& opt, std::ostream& out, std::ostream& err);

}  // namespace manydelta::cli
