#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "varbif/cli.hpp"

namespace {

int execute(const std::string& config_path, varbif::cli::AnalysisType expected) {
    using namespace varbif::cli;
    try {
        const RunConfig config = load_config(config_path);
        if (config.analysis.type != expected) {
            std::cerr << "config error: analysis.type is '" << to_string(config.analysis.type)
                      << "' but the subcommand is '" << to_string(expected) << "'\n";
            return 1;
        }
        const RunOutcome outcome = run(config);
        for (const auto& f : outcome.files) std::cout << "wrote " << f.string() << '\n';
        std::cout << outcome.summary << '\n';
        return outcome.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    using varbif::cli::AnalysisType;
    CLI::App app{"Variational bifurcation toolkit", "varbif"};
    app.set_version_flag("--version", varbif::cli::toolkit_version);
    app.require_subcommand(1);

    std::string config_path;
    AnalysisType chosen = AnalysisType::eigen;
    const struct {
        const char* name;
        const char* help;
        AnalysisType type;
    } commands[] = {
        {"eigen", "Spectrum of the linearized pencil at u = 0", AnalysisType::eigen},
        {"scan", "Conjugate points along t -> t Omega and the Smale identity", AnalysisType::scan},
        {"branch", "Trace a nontrivial branch from a pencil eigenvalue", AnalysisType::branch},
        {"check", "Derivative, ellipticity and bifurcation-criteria audits", AnalysisType::check},
    };
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
        sub->callback([&chosen, type = c.type] { chosen = type; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    return execute(config_path, chosen);
}
