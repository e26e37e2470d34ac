#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <tddft/checkpoint.hpp>
#include <tddft/config.hpp>
#include <tddft/runner.hpp>

namespace {

enum Exit { ok = 0, config_error = 1, numerical_failure = 2, io_error = 3 };

struct Flags {
  std::string config;
  std::string preset;
  int threads = 1;
  std::string out;
  long step_limit = -1;
  bool quiet = false;
};

tddft::ScenarioConfig load(const Flags& f) {
  std::string text;
  if (!f.config.empty()) text = tddft::checkpoint::read_file(f.config);
  tddft::ScenarioConfig c = tddft::parse_config(text, f.preset);
  if (!f.out.empty()) c.output = f.out;
  return c;
}

void print_ips(const tddft::json& manifest) {
  std::printf("%-16s %12s %12s %12s\n", "molecule", "I_p (eV)", "reference", "E_total (Eh)");
  for (const auto& g : manifest["ground_states"]) {
    const auto ref = tddft::reference_ip(g["molecule"].get<std::string>());
    std::printf("%-16s %12.3f %12s %12.6f\n", g["key"].get<std::string>().c_str(),
                g["ionization_potential_ev"].get<double>(),
                ref ? std::to_string(*ref).substr(0, 5).c_str() : "-", g["total_energy"].get<double>());
  }
}

int finish(const tddft::ScenarioOutcome& outcome) {
  if (outcome.failed_io > 0) {
    std::cerr << "error: " << outcome.first_error << "\n";
    return io_error;
  }
  if (outcome.failed_numerical > 0) {
    std::cerr << "error: " << outcome.first_error << "\n";
    return numerical_failure;
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time TDDFT of diatomic molecules in strong laser fields"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "scenario file");
    sub->add_option("--preset", f.preset, "numerical preset")->check(CLI::IsMember({"desk", "production"}));
    sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", f.out, "output directory (overrides [run] output)");
    sub->add_flag("--quiet", f.quiet, "no progress messages");
  };
  auto* ground = app.add_subcommand("ground", "solve ground states and print ionisation potentials");
  auto* run = app.add_subcommand("run", "run the full scenario");
  auto* resume = app.add_subcommand("resume", "continue an interrupted scenario from its checkpoints");
  auto* report = app.add_subcommand("report", "regenerate yields.csv and summary.txt from a manifest");
  for (auto* sub : {ground, run, resume}) common(sub);
  run->add_option("--max-steps", f.step_limit, "stop each run after this many steps");
  resume->add_option("--max-steps", f.step_limit, "stop each run after this many steps");
  report->add_option("--out", f.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : config_error;
  }

  tddft::RunOptions options;
  options.threads = f.threads;
  options.step_limit = f.step_limit;
  if (!f.quiet) options.log = [](const std::string& s) { std::cerr << s << std::endl; };

  try {
    if (*report) {
      std::cout << tddft::regenerate_reports(f.out);
      return ok;
    }
    tddft::ScenarioConfig config;
    if (*resume && f.config.empty()) {
      if (f.out.empty()) throw tddft::ConfigError(0, "resume needs --out or --config");
      config = tddft::stored_config(f.out);
      if (!f.preset.empty() && f.preset != config.preset)
        throw tddft::ConfigError(0, "stored scenario uses the " + config.preset + " preset");
    } else {
      config = load(f);
    }
    if (*ground) {
      options.ground_only = true;
      const auto outcome = tddft::run_scenario(config, options);
      print_ips(outcome.manifest);
      return finish(outcome);
    }
    const auto outcome = tddft::run_scenario(config, options);
    std::cout << tddft::summary_text(outcome.manifest);
    return finish(outcome);
  } catch (const tddft::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  } catch (const tddft::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io_error;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io_error;
  } catch (const tddft::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return numerical_failure;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return config_error;
  }
}
