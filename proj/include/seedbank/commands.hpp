#pragma once

#include "seedbank/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace seedbank {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1; // I/O and anything unexpected
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBudget = 3;
inline constexpr int kExitNumerical = 4;

const std::vector<std::string>& command_names();

// Command-line values win over the config file.
void apply_overrides(Config& config, std::optional<std::uint64_t> seed, std::optional<unsigned> threads);

// Runs one subcommand and writes its outputs, config.resolved.json and manifest.json
// into `out`. Returns kExitNumerical when run.strict is set and a diagnostic was flagged,
// otherwise kExitOk. Errors are thrown (ConfigError, BudgetRefusal, NumericalFailure, ...).
int run_command(const std::string& name, const Config& config, const std::filesystem::path& out, std::ostream& log);

// Loads the config, applies overrides, runs, and maps exceptions onto exit codes.
int execute(const std::string& name, const std::filesystem::path& config_path, const std::filesystem::path& out,
            std::optional<std::uint64_t> seed, std::optional<unsigned> threads, std::ostream& log, std::ostream& err);

} // namespace seedbank
