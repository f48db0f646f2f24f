#include "bnn/cli.hpp"

#include <iostream>

#include <CLI11.hpp>

#include "bnn/errors.hpp"
#include "bnn/experiment.hpp"
#include "bnn/io.hpp"

namespace bnn::cli {

namespace {

struct CommonFlags {
  std::string spec_path;
  std::string out_dir;
  int jobs = 1;
  double scale = 1.0;
  bool force = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_spec) {
  auto* spec_opt = cmd->add_option("--spec", flags.spec_path, "experiment spec (JSON)");
  if (needs_spec) spec_opt->required();
  cmd->add_option("--out", flags.out_dir, "experiment output directory")->required();
  cmd->add_option("--jobs", flags.jobs, "parallel worker count")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--scale", flags.scale, "iteration/sample count multiplier")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--force", flags.force, "allow writing into an existing directory");
  cmd->add_option("--seed", flags.seed, "override the spec's master seed")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
}

exp::StageOptions stage_options(const CommonFlags& flags) {
  exp::StageOptions opt;
  opt.out_dir = flags.out_dir;
  opt.jobs = flags.jobs;
  opt.scale = flags.scale;
  opt.force = flags.force;
  return opt;
}

exp::ExperimentSpec load_spec(const CommonFlags& flags) {
  exp::ExperimentSpec spec =
      !flags.spec_path.empty()
          ? exp::ExperimentSpec::from_json_file(flags.spec_path)
          : exp::ExperimentSpec::from_json_text(
                io::read_text(std::filesystem::path(flags.out_dir) / "spec.json"));
  if (flags.seed_set) spec.master_seed = flags.seed;
  return spec;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Bayesian neural network regression: inference, assessment, combination"};
  app.require_subcommand(1);

  CommonFlags fit_flags, predict_flags, assess_flags, combine_flags, repro_flags;
  std::string repro_name, lgbb_path;

  auto* fit = app.add_subcommand("fit", "fit every grid cell and write draws");
  add_common(fit, fit_flags, /*needs_spec=*/true);

  auto* predict =
      app.add_subcommand("predict", "predictive quantiles and metrics for fitted runs");
  add_common(predict, predict_flags, /*needs_spec=*/false);

  auto* assess = app.add_subcommand("assess", "PSIS-LOO and WAIC for fitted runs");
  add_common(assess, assess_flags, /*needs_spec=*/false);

  auto* combine =
      app.add_subcommand("combine", "ensemble/pseudo-BMA/stacking weights and metrics");
  add_common(combine, combine_flags, /*needs_spec=*/false);

  auto* repro = app.add_subcommand("reproduce", "run a named end-to-end experiment");
  repro->add_option("name", repro_name, "experiment bundle name")->required();
  add_common(repro, repro_flags, /*needs_spec=*/false);
  repro->add_option("--data", lgbb_path, "real LGBB CSV (default: surrogate)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help() << std::flush;
      return 0;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (fit->parsed()) {
      exp::run_fit(load_spec(fit_flags), stage_options(fit_flags));
    } else if (predict->parsed()) {
      exp::run_predict(load_spec(predict_flags), stage_options(predict_flags));
    } else if (assess->parsed()) {
      exp::run_assess(load_spec(assess_flags), stage_options(assess_flags));
    } else if (combine->parsed()) {
      exp::run_combine(load_spec(combine_flags), stage_options(combine_flags));
    } else if (repro->parsed()) {
      exp::run_reproduce(repro_name, stage_options(repro_flags),
                         repro_flags.seed_set ? repro_flags.seed : 0, lgbb_path);
    }
  } catch (const exp::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {  // ConfigError, DimensionError: bad spec/input
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace bnn::cli
