#include "dirboot/cli/dispatch.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

const std::map<std::string, const char*> kSummaries = {
    {"simulate-tables", "Monte Carlo size and power tables for the monotone quantile effect test"},
    {"test-monotone", "test monotonicity of a quantile treatment effect (CSV with Y,D,Z1..Zk)"},
    {"test-moments", "test moment inequalities or set membership of a mean vector"},
    {"test-dominance", "test first-order stochastic dominance between two samples"},
    {"diagnose-bootstrap", "compare standard and modified bootstrap laws and probe linearity"},
    {"bl-distance", "bounded-Lipschitz or Kolmogorov distance between two laws"},
};

}  // namespace

int main(int argc, char** argv) {
  using namespace dirboot::cli;

  CLI::App app{"dirboot: bootstrap inference for directionally differentiable functionals"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out;
  std::string profile;
  std::string data;
  std::string first;
  std::string second;

  for (const std::string& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, kSummaries.at(name));
    sub->add_option("--config", config, "JSON config file (a manifest.json also works)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--workers", workers, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--profile", profile, "budget profile")
        ->check(CLI::IsMember({"ci", "desk", "full"}));
    if (name == "test-monotone" || name == "test-moments" || name == "diagnose-bootstrap") {
      sub->add_option("--data", data, "input CSV")->check(CLI::ExistingFile);
    }
    if (name == "test-dominance" || name == "bl-distance") {
      sub->add_option("--first", first, "first CSV")->check(CLI::ExistingFile);
      sub->add_option("--second", second, "second CSV")->check(CLI::ExistingFile);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  CommandLine flags;
  try {
    flags.command = parse_command(chosen->get_name());
    if (chosen->count("--profile")) flags.profile = parse_profile(profile);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (chosen->count("--config")) flags.config = config;
  if (chosen->count("--seed")) flags.seed = seed;
  if (chosen->count("--workers")) flags.workers = workers;
  if (chosen->count("--out")) flags.out = out;
  if (!data.empty()) flags.data = data;
  if (!first.empty()) flags.first = first;
  if (!second.empty()) flags.second = second;
  return run(flags, std::cout, std::cerr);
}
