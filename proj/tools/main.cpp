#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    namespace cli = manydelta::cli;
    CLI::App app{"Many-delta motion experiments"};
    app.require_subcommand(1);
    cli::Options opt;
    // Shared flags go on every subcommand so they may follow its name.
    for (const auto& name : cli::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config, "experiment JSON");
        sub->add_option("--out", opt.out, "directory for the report and artifacts");
        sub->add_option("--paths", opt.paths, "paths per estimator");
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--workers", opt.workers, "worker threads (default: DCS_WORKERS, then 1)");
        sub->add_option("--dt", opt.dt, "largest time step");
        sub->add_option("--delta-contact", opt.delta_contact, "contact radius");
        sub->add_option("--eps", opt.eps, "kernel width or regularisation");
        sub->add_option("--tolerance", opt.tolerance, "pass tolerance of the check");
        if (name == "specfun-table") {
            sub->add_option("--xmin", opt.xmin)->capture_default_str();
            sub->add_option("--xmax", opt.xmax)->capture_default_str();
            sub->add_option("--points", opt.points)->capture_default_str();
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    return cli::dispatch(app.get_subcommands().front()->get_name(), opt, std::cout, std::cerr);
}
