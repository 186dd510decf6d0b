#pragma once

// Run configuration for the dirboot command line: a flat JSON object whose
// keys are checked against a per-command schema, with budget defaults taken
// from the profile and seeds/paths/profile overridable by flags.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dirboot::cli {

/// Bad flags, bad config, bad input files: exit status 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command {
  kSimulateTables,
  kTestMonotone,
  kTestMoments,
  kTestDominance,
  kDiagnoseBootstrap,
  kBlDistance,
};

enum class Profile { kCi, kDesk, kFull };

const char* to_string(Command command);
const char* to_string(Profile profile);
Command parse_command(const std::string& name);
Profile parse_profile(const std::string& name);
const std::vector<std::string>& command_names();

/// Default output directory when neither the config nor --out names one.
inline constexpr const char* kOutputDirEnv = "DIRBOOT_OUT";

/// What the flags said; unset fields fall back to the config file.
struct CommandLine {
  Command command = Command::kSimulateTables;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::filesystem::path> out;
  std::optional<Profile> profile;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> first;
  std::optional<std::filesystem::path> second;
};

struct RunConfig {
  Command command = Command::kSimulateTables;
  Profile profile = Profile::kCi;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::filesystem::path out;
  /// Command parameters with every default filled in.
  nlohmann::json params = nlohmann::json::object();

  /// The complete configuration as JSON; feeding it back reproduces the run.
  nlohmann::json effective() const;
};

/// Reads the config file (a run manifest is accepted too), applies profile
/// defaults and flag overrides, and validates every key.
RunConfig parse_config(const CommandLine& flags);

/// Same, from an already-parsed JSON object (for tests).
RunConfig parse_config(const CommandLine& flags, const nlohmann::json& file);

/// Hex SHA-1 of "blob <size>\0<content>", the hash git gives a file.
std::string git_blob_hash(const std::string& content);

}  // namespace dirboot::cli
