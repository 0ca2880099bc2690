#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jitterlab/config.hpp"
#include "jitterlab/errors.hpp"
#include "jitterlab/experiments.hpp"
#include "jitterlab/io.hpp"

namespace {

using jitterlab::Config;
using jitterlab::ConfigError;

std::string flag_to_key(std::string flag) {
  flag.erase(0, flag.find_first_not_of('-'));
  std::replace(flag.begin(), flag.end(), '-', '_');
  return flag;
}

/// Turns leftover "--key value" and "--key=value" arguments into overrides.
void apply_overrides(Config& config, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0) throw ConfigError(arg, "unexpected argument '" + arg + "'");
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      config.set(flag_to_key(arg.substr(0, eq)), arg.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) throw ConfigError(flag_to_key(arg), "flag '" + arg + "' needs a value");
    config.set(flag_to_key(arg), extras[++i]);
  }
}

std::filesystem::path with_suffix(const std::filesystem::path& out, const std::string& suffix) {
  if (suffix.empty()) return out;
  std::filesystem::path sibling = out.parent_path() / out.stem();
  sibling += suffix;
  sibling += out.has_extension() ? out.extension() : std::filesystem::path(".csv");
  return sibling;
}

std::string quoted(const std::string& text) {
  std::string out = "\"";
  for (const char c : text) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust linear reconstruction experiments"};
  app.require_subcommand(1);

  struct Options {
    std::string config_path;
    std::string out;
    std::string seed;
  };
  std::vector<Options> options(jitterlab::experiment_names().size());
  std::vector<CLI::App*> commands;
  const std::vector<std::string> names = jitterlab::experiment_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    CLI::App* sub = app.add_subcommand(names[i], "Run the " + names[i] + " experiment");
    sub->add_option("--config", options[i].config_path, "key=value config file");
    sub->add_option("--out", options[i].out, "output CSV path (default <experiment>.csv)");
    sub->add_option("--seed", options[i].seed, "master seed (overrides the config key 'seed')");
    sub->allow_extras();
    sub->footer("Any other --<key> <value> overrides the config key of the same name.");
    commands.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!commands[i]->parsed()) continue;
      const Options& opt = options[i];
      Config config = opt.config_path.empty() ? Config{} : Config::load(opt.config_path);
      apply_overrides(config, commands[i]->remaining());
      if (!opt.seed.empty()) config.set("seed", opt.seed);
      const std::filesystem::path out = opt.out.empty() ? names[i] + ".csv" : opt.out;

      const jitterlab::ExperimentOutputs outputs = jitterlab::run_experiment(names[i], config);
      for (const auto& [suffix, table] : outputs) {
        const std::filesystem::path path = with_suffix(out, suffix);
        jitterlab::write_file_atomic(path, table.str());
        std::cout << path.string() << '\n';
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: kind=" << jitterlab::to_string(e.kind()) << " key=" << e.key()
              << " message=" << quoted(e.what()) << '\n';
    return 2;
  } catch (const jitterlab::Error& e) {
    std::cerr << "error: kind=" << jitterlab::to_string(e.kind()) << " message=" << quoted(e.what())
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=" << quoted(e.what()) << '\n';
    return 1;
  }
  return 0;
}
