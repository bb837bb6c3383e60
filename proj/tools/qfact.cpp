#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "qfact/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"qfact: finite-frequency quantum factuality experiments"};
  app.require_subcommand(1);

  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned workers = 1;

  const std::pair<const char*, const char*> commands[] = {
      {"stability", "block-stability verdict of a factual law"},
      {"tree", "probability tree of a generation over several observables"},
      {"reconstruct", "state reconstruction from laws on linked bases"},
      {"exp", "two-layer trace experiment on the two-wave state"},
      {"borncheck", "guided-momentum statistics against the pair-sum spectrum"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "overrides the scenario seed");
    sub->add_option("--out", out, "output directory (default: the scenario's 'output')");
    sub->add_option("--workers", workers, "worker threads; results do not depend on it")
        ->check(CLI::Range(1u, 1024u));
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    std::optional<std::filesystem::path> dir;
    if (out) dir = *out;
    const auto m = qfact::cli::execute(command, scenario, seed, dir, workers);
    for (const auto& e : m.outputs) std::printf("%s  %s\n", qfact::cli::hex64(e.checksum).c_str(), e.file.c_str());
    if (m.exit_code != 0) std::fprintf(stderr, "qfact %s: %s\n", command.c_str(), m.message.c_str());
    return m.exit_code;
  } catch (const qfact::SchemaError& e) {
    std::fprintf(stderr, "qfact %s: schema error: %s\n", command.c_str(), e.what());
    return qfact::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "qfact %s: error: %s\n", command.c_str(), e.what());
    return 1;
  }
}
