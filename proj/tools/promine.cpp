// promine: experiment runner CLI.
//
//   promine run      --config exp.json [--seed N] [--out DIR] [--threads N] [--dry-run]
//   promine synth    [--spec spec.json] [--seed N] [--n N] [--out cohort.csv]
//   promine describe --config exp.json [--out DIR]
//   promine survey   (--input survey.csv | --synthetic N) [--seed N] [--out FILE]
//   promine validate --config exp.json

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "promine/cohort.hpp"
#include "promine/error.hpp"
#include "promine/log.hpp"
#include "promine/runner.hpp"
#include "promine/survey.hpp"

namespace {

using promine::runner::ExperimentConfig;

struct ConfigFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
};

ExperimentConfig resolve_config(const ConfigFlags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig::from_json(nlohmann::json::object())
                                        : promine::runner::load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output = f.out;
  if (f.threads) {
    if (*f.threads < 1) throw promine::ConfigError("--threads must be at least 1");
    c.threads = *f.threads;
  }
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw promine::Error("cannot write '" + path + "'");
  out << text;
}

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool with_run_flags) {
  cmd->add_option("--config", f.config, "Experiment config (JSON, comments allowed)");
  cmd->add_option("--seed", f.seed, "Override the config seed");
  cmd->add_option("--out", f.out, "Override the output directory");
  if (with_run_flags) cmd->add_option("--threads", f.threads, "Worker threads for cross-validation folds");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promine: session-based PRO mining toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  ConfigFlags run_flags;
  bool dry_run = false;
  auto* run = app.add_subcommand("run", "Run an experiment and write the report directory");
  add_config_flags(run, run_flags, true);
  run->add_flag("--dry-run", dry_run, "Validate the config without computing");

  ConfigFlags describe_flags;
  auto* describe = app.add_subcommand("describe", "Cohort descriptives and outcome tables only");
  add_config_flags(describe, describe_flags, false);

  ConfigFlags validate_flags;
  auto* validate = app.add_subcommand("validate", "Check a config and print its normalized form");
  add_config_flags(validate, validate_flags, true);

  std::string spec_path, synth_out = "-";
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_n;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort CSV");
  synth->add_option("--spec", spec_path, "Cohort spec JSON (defaults when omitted)");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--n", synth_n, "Number of clients");
  synth->add_option("--out", synth_out, "Output CSV ('-' = stdout)");

  std::string survey_input, survey_out = "-";
  std::size_t survey_synthetic = 0;
  std::uint64_t survey_seed = 42;
  bool no_reverse = false;
  auto* surv = app.add_subcommand("survey", "Clinician survey correlations and regressions");
  surv->add_option("--input", survey_input, "Survey CSV");
  surv->add_option("--synthetic", survey_synthetic, "Generate N synthetic responses instead");
  surv->add_option("--seed", survey_seed, "Seed for --synthetic");
  surv->add_option("--out", survey_out, "Report file ('-' = stdout)");
  surv->add_flag("--no-reverse-key", no_reverse, "Score negatively worded items as given");

  CLI11_PARSE(app, argc, argv);
  promine::log::set_level(quiet ? promine::log::Level::error
                                : (verbose ? promine::log::Level::info : promine::log::Level::warn));

  try {
    if (*run) {
      const auto c = resolve_config(run_flags);
      if (dry_run) {
        std::cout << "config ok (hash " << c.hash() << ")\n";
        return 0;
      }
      const auto summary = promine::runner::run_experiment(c);
      std::cout << "wrote " << summary.files.size() << " files to " << c.output.string() << " (" << summary.cohort_rows
                << " clients)\n";
    } else if (*describe) {
      const auto c = resolve_config(describe_flags);
      const auto summary = promine::runner::describe(c);
      std::cout << "wrote " << summary.files.size() << " files to " << c.output.string() << "\n";
    } else if (*validate) {
      const auto c = resolve_config(validate_flags);
      std::cout << c.to_json().dump(2) << "\nconfig ok (hash " << c.hash() << ")\n";
    } else if (*synth) {
      auto spec = spec_path.empty() ? promine::cohort::CohortSpec::defaults() : promine::cohort::load_cohort_spec(spec_path);
      if (synth_seed) spec.seed = *synth_seed;
      if (synth_n) spec.n = *synth_n;
      spec.validate();
      const auto rows = promine::cohort::generate_synthetic(spec);
      std::ostringstream os;
      promine::cohort::write_cohort(os, rows);
      write_text(synth_out, os.str());
    } else if (*surv) {
      if (survey_input.empty() == (survey_synthetic == 0))
        throw promine::ConfigError("survey: give exactly one of --input or --synthetic");
      const auto rows = survey_input.empty() ? promine::survey::generate_survey(survey_synthetic, survey_seed)
                                             : promine::survey::read_survey_file(survey_input);
      write_text(survey_out, promine::survey::survey_report(rows, !no_reverse));
    }
  } catch (const promine::ConfigError& e) {
    std::cerr << "promine: config error: " << e.what() << "\n";
    return 2;
  } catch (const promine::NotImplementedError& e) {
    std::cerr << "promine: not implemented: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "promine: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
