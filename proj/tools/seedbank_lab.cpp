#include "seedbank/commands.hpp"
#include "seedbank/output.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>

int main(int argc, char** argv) {
    CLI::App app{"seedbank-lab: interacting Wright-Fisher diffusions with a seed-bank on finite geographies"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("seedbank-lab ") + seedbank::tool_version());

    struct Args {
        std::string config;
        std::string out = "out";
        std::optional<std::uint64_t> seed;
        std::optional<unsigned> threads;
    };
    std::map<std::string, Args> args;
    const std::map<std::string, std::string> help{
        {"forward", "simulate the forward SDE on one geography"},
        {"dual", "simulate the dual lineage system"},
        {"criteria", "evaluate coexistence/clustering criteria"},
        {"fss", "finite-systems scheme over a ladder of geographies"},
        {"renewal", "renewal intersection exponent experiment"}};
    for (const std::string& name : seedbank::command_names()) {
        Args& a = args[name];
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config,-c", a.config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out,-o", a.out, "output directory")->capture_default_str();
        sub->add_option("--seed", a.seed, "master seed (overrides run.seed)");
        sub->add_option("--threads", a.threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : seedbank::kExitConfig;
    }
    for (const std::string& name : seedbank::command_names()) {
        if (!app.got_subcommand(name)) continue;
        const Args& a = args[name];
        return seedbank::execute(name, a.config, a.out, a.seed, a.threads, std::cout, std::cerr);
    }
    return seedbank::kExitFailure;
}
