// tunecast CLI: reproducible runs of the social music-discovery pipeline.
//
// Exit codes: 0 ok, 2 config error, 3 data error.
// Set TUNECAST_LOG=debug|info|warn|error to control stderr verbosity.
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tunecast/pipeline.hpp"

namespace {

constexpr const char* kCommands[] = {"generate", "ingest", "embed", "features",
                                     "analyze",  "train",  "isolate", "report"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "tunecast: multiplex social-network music-discovery pipeline on "
        "synthetic data with planted ground truth"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;

    for (const char* name : kCommands) {
        CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
        sub->add_option("--config", config_path, "path to the run config (JSON)")
            ->required();
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { seed_override = v; },
            "override the master seed");
        sub->add_option_function<std::string>(
            "--out", [&](const std::string& v) { out_override = v; },
            "override the output directory");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        std::optional<std::filesystem::path> out;
        if (out_override.has_value()) out = *out_override;
        tunecast::pipeline::RunConfig cfg =
            tunecast::pipeline::load_run_config(config_path, seed_override, out);
        const std::string command = app.get_subcommands().front()->get_name();
        return tunecast::pipeline::run_command(command, cfg);
    } catch (const tunecast::ConfigError& e) {
        tunecast::log(tunecast::LogLevel::Error, "config error: %s", e.what());
        return 2;
    } catch (const tunecast::DataError& e) {
        tunecast::log(tunecast::LogLevel::Error, "data error: %s", e.what());
        return 3;
    } catch (const std::exception& e) {
        tunecast::log(tunecast::LogLevel::Error, "error: %s", e.what());
        return 1;
    }
}
