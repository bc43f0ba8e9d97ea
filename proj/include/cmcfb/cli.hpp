#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cmcfb/bubble.hpp"
#include "cmcfb/domain.hpp"

namespace cmc::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kPass = 0, kFail = 1, kInputError = 2 };

struct Options {
  std::optional<std::string> config_path;
  std::string out_dir = ".";
  std::optional<std::pair<int, int>> grid;
  std::optional<std::uint64_t> seed;
  std::string format = "json";
};

/// One named pass/fail criterion of a report.
struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double limit = 0.0;
};

struct OutputFile {
  std::string name;
  std::string contents;
};

struct CommandResult {
  Json config;
  std::vector<Check> checks;
  Json results = Json::object();
  /// Extra artifacts (CSV tables, DMAP files) written next to the report.
  std::vector<OutputFile> files;
  std::string error;

  bool passed() const;
};

/// Commands accept a resolved config (see resolve_config) and never touch
/// the filesystem except for reading input maps.
CommandResult cmd_predict(const Json& config);
CommandResult cmd_extract(const Json& config);
CommandResult cmd_balance(const Json& config);
CommandResult cmd_wente(const Json& config);
CommandResult cmd_verify_bubble(const Json& config);
CommandResult cmd_synth(const Json& config);

const std::vector<std::string>& command_names();

/// Built-in defaults of a command.
Json default_config(const std::string& command);

/// Merges a user config over the defaults and applies the --grid / --seed
/// overrides. Throws InvalidArgument on unknown keys, a missing or wrong
/// "schema" field, or wrong value types.
Json resolve_config(const std::string& command, const Json& user, const Options& opt);

/// {"kind":"ball","radius":R,"center":[x,y,z]}, {"kind":"ellipsoid",
/// "semi_axes":[a,b,c]}, {"kind":"bumpy_ball","radius":R,"amplitude":e} or
/// {"kind":"half_space"}.
ImplicitDomain parse_domain(const Json& j);
SyntheticSequence parse_synth(const Json& j);

/// Report text: JSON (schema, command, resolved config, checks, results) or
/// CSV (config header line, then one row per check).
std::string format_report(const std::string& command, const CommandResult& r, const std::string& format);

/// Writes through a temporary file and rename.
void write_atomic(const std::string& path, const std::string& contents);

/// Loads the config, runs the command, writes the report and artifacts into
/// opt.out_dir and returns the exit code. Input errors are reported on
/// stderr and give kInputError.
int run_command(const std::string& command, const Options& opt);

}  // namespace cmc::cli
