// Command-line front end. Everything of substance happens behind the shared
// library's C interface; this binary only parses arguments, checks that the
// config file matches the chosen subcommand, and relays errors.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atdkit/atdkit.h>

namespace {

void emit_error(atdk_status status, const std::string& message) {
  nlohmann::json err{{"status", atdk_status_name(status)},
                     {"message", message}};
  std::cerr << err.dump() << "\n";
}

// The subcommand is a promise about what the run does; a mismatched config
// kind is a config error, caught before any work starts.
int check_kind(const std::string& config_path, const std::string& expected) {
  std::ifstream in(config_path);
  if (!in.good()) {
    emit_error(ATDK_ERR_IO, "cannot open config file: " + config_path);
    return ATDK_ERR_IO;
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    emit_error(ATDK_ERR_CONFIG, std::string("config: ") + e.what());
    return ATDK_ERR_CONFIG;
  }
  const std::string kind = j.is_object() ? j.value("kind", "") : "";
  if (kind != expected) {
    emit_error(ATDK_ERR_CONFIG, "config kind '" + kind +
                                    "' does not match subcommand '" +
                                    expected + "'");
    return ATDK_ERR_CONFIG;
  }
  return ATDK_OK;
}

struct RunArgs {
  std::string config;
  std::int64_t seed = -1;  // < 0 keeps the config's seed
  std::string out;
};

int do_run(const std::string& kind, const RunArgs& args) {
  if (int rc = check_kind(args.config, kind); rc != ATDK_OK) return rc;
  const atdk_status s = atdk_run(args.config.c_str(), args.seed,
                                 args.out.empty() ? nullptr : args.out.c_str());
  if (s != ATDK_OK) {
    emit_error(s, atdk_last_error());
    return s;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atdkit: adversarially robust out-of-distribution detection"};
  app.set_version_flag("--version", []() { return atdk_version(); });
  app.require_subcommand(1);

  static const char* kKinds[] = {"pretrain", "train-baseline", "train-atd",
                                 "evaluate", "transfer", "cross-attack",
                                 "sweep", "toy"};
  static const char* kHelp[] = {
      "Train a classifier and export its feature extractor",
      "Fit a feature-statistics detector on a trained classifier",
      "Train a discriminator against a generator and attacked data",
      "Run the four-setting detection protocol",
      "Craft single-step attacks on source scores, evaluate on a target",
      "Attack the classifier and the detector, report both sides",
      "Evaluate over a grid of attack step counts",
      "Run a planar study and export its decision map",
  };

  RunArgs args;
  std::string run_kind;
  for (std::size_t i = 0; i < std::size(kKinds); ++i) {
    CLI::App* sub = app.add_subcommand(kKinds[i], kHelp[i]);
    sub->add_option("--config", args.config, "JSON run config")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed,
                    "Override the config's seed (>= 0)");
    sub->add_option("--out", args.out, "Override the output directory");
    sub->callback([&run_kind, kind = std::string(kKinds[i])] {
      run_kind = kind;
    });
  }

  std::string check_config;
  CLI::App* check = app.add_subcommand(
      "check", "Validate a run config without executing it");
  check->add_option("--config", check_config, "JSON run config")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) {
    const atdk_status s = atdk_config_check(check_config.c_str());
    if (s != ATDK_OK) {
      emit_error(s, atdk_last_error());
      return s;
    }
    std::cout << "ok\n";
    return 0;
  }
  return do_run(run_kind, args);
}
