#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "cli/config.hpp"

namespace gsfcli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kConstructionError = 3, kSolverError = 4 };

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<long> eps_levels;
  std::optional<long> seed;
};

int cmd_embed(const Config& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_variational(const Config& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_geodesic(const Config& cfg, const std::filesystem::path& out, std::ostream& log);

/// Loads the config, applies overrides, dispatches and maps errors to exit codes.
int run(const std::string& command, const std::string& config_path, const Overrides& ov, std::ostream& log,
        std::ostream& err);

/// Full command line entry point.
int main_entry(int argc, char** argv);

}  // namespace gsfcli
