#pragma once

#include "config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace pdecay::cli {

/// Exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitNonErgodic = 2,
  kExitConstruction = 3,
  kExitUsage = 64,
};

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

int cmd_gap(const RunConfig& c, std::ostream& out);
int cmd_bounds(const RunConfig& c, std::ostream& out);
int cmd_evolve(const RunConfig& c, std::ostream& out);
int cmd_verify(const RunConfig& c, std::ostream& out);
int cmd_sweep(const RunConfig& c, std::ostream& out);

}  // namespace pdecay::cli
