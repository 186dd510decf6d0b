#include "dirboot/cli/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dirboot::cli {

using nlohmann::json;

namespace {

struct CommandName {
  Command command;
  const char* name;
};

constexpr CommandName kCommands[] = {
    {Command::kSimulateTables, "simulate-tables"},
    {Command::kTestMonotone, "test-monotone"},
    {Command::kTestMoments, "test-moments"},
    {Command::kTestDominance, "test-dominance"},
    {Command::kDiagnoseBootstrap, "diagnose-bootstrap"},
    {Command::kBlDistance, "bl-distance"},
};

enum class Kind { kNumber, kInteger, kBool, kString, kNumberList, kIntegerList, kVectorList, kPath };

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::kNumber: return "a number";
    case Kind::kInteger: return "a nonnegative integer";
    case Kind::kBool: return "true or false";
    case Kind::kString: return "a string";
    case Kind::kNumberList: return "a list of numbers";
    case Kind::kIntegerList: return "a list of nonnegative integers";
    case Kind::kVectorList: return "a list of number lists";
    case Kind::kPath: return "a file path";
  }
  return "?";
}

/// A schema entry. `fallback` returns the default (null = optional, no
/// default); `check` returns an error message or "".
struct Field {
  std::string key;
  Kind kind;
  std::function<json(Profile)> fallback;
  std::function<std::string(const json&)> check;
  bool required = false;
};

std::function<json(Profile)> constant(json value) {
  return [value = std::move(value)](Profile) { return value; };
}

std::function<json(Profile)> by_profile(json ci, json desk, json full) {
  return [=](Profile p) {
    switch (p) {
      case Profile::kCi: return ci;
      case Profile::kDesk: return desk;
      case Profile::kFull: return full;
    }
    return ci;
  };
}

std::function<json(Profile)> none() {
  return [](Profile) { return json(); };
}

std::string fmt(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%g", x);
  return b;
}

std::function<std::string(const json&)> any() {
  return [](const json&) { return std::string(); };
}

std::function<std::string(const json&)> open_unit() {
  return [](const json& v) {
    const double x = v.get<double>();
    return x > 0.0 && x < 1.0 ? "" : "must lie in (0,1), got " + fmt(x);
  };
}

std::function<std::string(const json&)> positive() {
  return [](const json& v) {
    const double x = v.get<double>();
    return x > 0.0 ? "" : "must be positive, got " + fmt(x);
  };
}

std::function<std::string(const json&)> nonnegative() {
  return [](const json& v) {
    const double x = v.get<double>();
    return x >= 0.0 ? "" : "must be nonnegative, got " + fmt(x);
  };
}

std::function<std::string(const json&)> at_least(std::uint64_t low) {
  return [low](const json& v) {
    return v.get<std::uint64_t>() >= low ? "" : "must be >= " + std::to_string(low);
  };
}

std::function<std::string(const json&)> each(std::function<std::string(const json&)> inner,
                                              bool nonempty = true) {
  return [inner = std::move(inner), nonempty](const json& list) -> std::string {
    if (nonempty && list.empty()) return "must not be empty";
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string msg = inner(list[i]);
      if (!msg.empty()) return "[" + std::to_string(i) + "] " + msg;
    }
    return "";
  };
}

std::function<std::string(const json&)> one_of(std::vector<std::string> choices) {
  return [choices = std::move(choices)](const json& v) -> std::string {
    const auto s = v.get<std::string>();
    std::string all;
    for (const auto& c : choices) {
      if (c == s) return "";
      all += (all.empty() ? "" : ", ") + c;
    }
    return "must be one of {" + all + "}, got '" + s + "'";
  };
}

std::function<std::string(const json&)> tau_grid_check() {
  return [](const json& list) -> std::string {
    if (list.empty()) return "must not be empty";
    double previous = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const double t = list[i].get<double>();
      if (!(t > 0.0 && t < 1.0)) return "[" + std::to_string(i) + "] must lie in (0,1)";
      if (i > 0 && !(t > previous)) return "must be strictly increasing";
      previous = t;
    }
    return "";
  };
}

json default_tau_grid_json() {
  json grid = json::array();
  for (int k = 0; k < 25; ++k) grid.push_back(0.2 + 0.025 * k);
  return grid;
}

std::vector<Field> schema(Command command) {
  const Field alpha{"alpha", Kind::kNumber, constant(0.05), open_unit()};
  const Field delta_bump{"delta_bump", Kind::kNumber, constant(0.0), nonnegative()};
  const Field scheme{"scheme", Kind::kString, constant("multinomial"),
                     one_of({"multinomial", "exponential", "gaussian"})};
  const Field draws{"B", Kind::kInteger, by_profile(200, 500, 1000), at_least(2)};
  const Field tau_grid{"tau_grid", Kind::kNumberList, constant(default_tau_grid_json()),
                       tau_grid_check()};
  const Field mode{"mode", Kind::kString, constant("threshold"), one_of({"threshold", "sup-search"})};

  switch (command) {
    case Command::kSimulateTables:
      return {
          {"sample_sizes", Kind::kIntegerList,
           by_profile(json{200}, json{200, 500}, json{200, 500}), each(at_least(50))},
          {"deltas", Kind::kNumberList,
           by_profile(json{0, 2, -4, -6, -8}, json{0, 1, 2, -1, -2, -3, -4, -5, -6, -7, -8},
                      json{0, 1, 2, -1, -2, -3, -4, -5, -6, -7, -8}),
           each(any())},
          {"C", Kind::kNumberList, constant(json{1.0, 0.01}), each(positive())},
          {"kappa", Kind::kNumberList, constant(json{0.25, 1.0 / 3.0}), each(positive())},
          {"alphas", Kind::kNumberList, constant(json{0.1, 0.05, 0.01}), each(open_unit())},
          tau_grid,
          {"B", Kind::kInteger, constant(200), at_least(2)},
          {"mc_reps", Kind::kInteger, by_profile(500, 1000, 5000), at_least(1)},
          {"theoretical", Kind::kBool, constant(true), any()},
          {"theoretical_draws", Kind::kInteger, constant(100000), at_least(100)},
      };
    case Command::kTestMonotone:
      return {
          {"data", Kind::kPath, none(), any()},
          {"n", Kind::kInteger, constant(200), at_least(50)},
          {"delta", Kind::kNumber, constant(0.0), any()},
          {"rep", Kind::kInteger, constant(0), any()},
          tau_grid,
          draws,
          {"C", Kind::kNumber, constant(1.0), positive()},
          {"kappa", Kind::kNumber, constant(0.25), positive()},
          alpha,
          mode,
      };
    case Command::kTestMoments:
      return {
          {"data", Kind::kPath, none(), any(), true},
          {"functional", Kind::kString, constant("max"), one_of({"max", "distance"})},
          {"selection_slack", Kind::kNumber, none(), positive()},
          {"set", Kind::kString, constant("orthant"), one_of({"orthant", "box", "halfspaces"})},
          {"lower", Kind::kNumberList, none(), each(any())},
          {"upper", Kind::kNumberList, none(), each(any())},
          {"halfspaces", Kind::kPath, none(), any()},
          {"feasible_point", Kind::kNumberList, none(), each(any())},
          {"C", Kind::kNumber, constant(1.0), positive()},
          {"kappa", Kind::kNumber, constant(1.0 / 3.0), positive()},
          mode,
          alpha,
          delta_bump,
          draws,
          scheme,
      };
    case Command::kTestDominance:
      return {
          {"first", Kind::kPath, none(), any(), true},
          {"second", Kind::kPath, none(), any(), true},
          {"grid_points", Kind::kInteger, constant(50), at_least(2)},
          {"grid_lower", Kind::kNumber, none(), any()},
          {"grid_upper", Kind::kNumber, none(), any()},
          {"contact_tol", Kind::kNumber, none(), positive()},
          alpha,
          delta_bump,
          draws,
          scheme,
      };
    case Command::kDiagnoseBootstrap:
      return {
          {"functional", Kind::kString, constant("abs_mean"), one_of({"abs_mean", "max"})},
          {"data", Kind::kPath, none(), any()},
          {"n", Kind::kInteger, constant(1000), at_least(2)},
          {"mean", Kind::kNumberList, constant(json{0.0}), each(any())},
          {"sigma", Kind::kNumber, constant(1.0), positive()},
          {"selection_slack", Kind::kNumber, none(), positive()},
          {"B", Kind::kInteger, by_profile(1000, 2000, 2000), at_least(2)},
          scheme,
          {"truth_draws", Kind::kInteger, by_profile(2000, 10000, 100000), at_least(100)},
          {"probe_shifts", Kind::kVectorList, none(), each(each(any()))},
          {"probe_draws", Kind::kInteger, by_profile(2000, 10000, 20000), at_least(10)},
      };
    case Command::kBlDistance:
      return {
          {"first", Kind::kPath, none(), any(), true},
          {"second", Kind::kPath, none(), any(), true},
          {"metric", Kind::kString, constant("bl"), one_of({"bl", "ks"})},
      };
  }
  return {};
}

bool is_number(const json& v) { return v.is_number() && std::isfinite(v.get<double>()); }

bool has_kind(const json& v, Kind kind) {
  switch (kind) {
    case Kind::kNumber: return is_number(v);
    case Kind::kInteger: return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    case Kind::kBool: return v.is_boolean();
    case Kind::kString: return v.is_string();
    case Kind::kPath: return v.is_string() && !v.get<std::string>().empty();
    case Kind::kNumberList:
      if (!v.is_array()) return false;
      for (const auto& x : v) {
        if (!is_number(x)) return false;
      }
      return true;
    case Kind::kIntegerList:
      if (!v.is_array()) return false;
      for (const auto& x : v) {
        if (!has_kind(x, Kind::kInteger)) return false;
      }
      return true;
    case Kind::kVectorList:
      if (!v.is_array()) return false;
      for (const auto& x : v) {
        if (!has_kind(x, Kind::kNumberList)) return false;
      }
      return true;
  }
  return false;
}

const char* json_type(const json& v) { return v.type_name(); }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace

const char* to_string(Command command) {
  for (const auto& c : kCommands) {
    if (c.command == command) return c.name;
  }
  return "?";
}

const char* to_string(Profile profile) {
  switch (profile) {
    case Profile::kCi: return "ci";
    case Profile::kDesk: return "desk";
    case Profile::kFull: return "full";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  for (const auto& c : kCommands) {
    if (name == c.name) return c.command;
  }
  throw UsageError("unknown command '" + name + "'");
}

Profile parse_profile(const std::string& name) {
  if (name == "ci") return Profile::kCi;
  if (name == "desk") return Profile::kDesk;
  if (name == "full") return Profile::kFull;
  throw UsageError("profile: must be one of {ci, desk, full}, got '" + name + "'");
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& c : kCommands) v.emplace_back(c.name);
    return v;
  }();
  return names;
}

json RunConfig::effective() const {
  json j = params;
  j["command"] = to_string(command);
  j["profile"] = to_string(profile);
  j["seed"] = seed;
  j["workers"] = workers;
  j["out"] = out.string();
  return j;
}

RunConfig parse_config(const CommandLine& flags) {
  json file = json::object();
  if (flags.config) file = read_json_file(*flags.config);
  return parse_config(flags, file);
}

RunConfig parse_config(const CommandLine& flags, const json& file_in) {
  if (!file_in.is_object()) throw UsageError("config: top level must be a JSON object");
  // A run manifest carries the configuration under "effective_config".
  json file = file_in.contains("effective_config") ? file_in.at("effective_config") : file_in;
  if (!file.is_object()) throw UsageError("config: effective_config must be an object");

  RunConfig config;
  config.command = flags.command;
  if (file.contains("command")) {
    if (!file["command"].is_string()) throw UsageError("command: expected a string");
    if (parse_command(file["command"].get<std::string>()) != flags.command) {
      throw UsageError("command: config is for '" + file["command"].get<std::string>() +
                       "', not '" + to_string(flags.command) + "'");
    }
  }

  if (flags.profile) {
    config.profile = *flags.profile;
  } else if (file.contains("profile")) {
    if (!file["profile"].is_string()) throw UsageError("profile: expected a string");
    config.profile = parse_profile(file["profile"].get<std::string>());
  }

  if (flags.seed) {
    config.seed = *flags.seed;
  } else if (file.contains("seed")) {
    if (!has_kind(file["seed"], Kind::kInteger)) {
      throw UsageError(std::string("seed: expected a nonnegative integer, got ") + json_type(file["seed"]));
    }
    config.seed = file["seed"].get<std::uint64_t>();
  }

  if (flags.workers) {
    config.workers = *flags.workers;
  } else if (file.contains("workers")) {
    if (!has_kind(file["workers"], Kind::kInteger)) {
      throw UsageError("workers: expected a nonnegative integer");
    }
    config.workers = file["workers"].get<std::size_t>();
  }

  if (flags.out) {
    config.out = *flags.out;
  } else if (file.contains("out")) {
    if (!file["out"].is_string()) throw UsageError("out: expected a string");
    config.out = file["out"].get<std::string>();
  } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    config.out = env;
  } else {
    config.out = "dirboot-out";
  }

  const std::vector<Field> fields = schema(config.command);
  std::map<std::string, const Field*> by_key;
  for (const Field& f : fields) by_key[f.key] = &f;
  for (const auto& [key, value] : file.items()) {
    if (key == "command" || key == "profile" || key == "seed" || key == "workers" || key == "out") {
      continue;
    }
    if (!by_key.count(key)) {
      throw UsageError(key + ": unknown key for command " + to_string(config.command));
    }
  }

  std::map<std::string, std::filesystem::path> path_flags;
  if (flags.data) path_flags["data"] = *flags.data;
  if (flags.first) path_flags["first"] = *flags.first;
  if (flags.second) path_flags["second"] = *flags.second;
  for (const auto& [key, path] : path_flags) {
    if (!by_key.count(key)) {
      throw UsageError("--" + key + ": not used by command " + std::string(to_string(config.command)));
    }
  }

  for (const Field& f : fields) {
    json value;
    if (path_flags.count(f.key)) {
      value = path_flags[f.key].string();
    } else if (file.contains(f.key) && !file[f.key].is_null()) {
      value = file[f.key];
    } else {
      value = f.fallback(config.profile);
    }
    if (value.is_null()) {
      if (f.required) throw UsageError(f.key + ": required by command " + to_string(config.command));
      config.params[f.key] = nullptr;
      continue;
    }
    if (!has_kind(value, f.kind)) {
      throw UsageError(f.key + ": expected " + kind_name(f.kind) + ", got " + json_type(value));
    }
    const std::string problem = f.check(value);
    if (!problem.empty()) throw UsageError(f.key + ": " + problem);
    config.params[f.key] = value;
  }
  return config;
}

std::string git_blob_hash(const std::string& content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("git_blob_hash: cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("git_blob_hash: digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", digest[i]);
    hex << b;
  }
  return hex.str();
}

}  // namespace dirboot::cli
