// Command-line front end: run, grid, demo, validate.
//
// Exit codes: 0 success (a diverged run is still a success), 1 runtime
// failure, 2 usage error or missing input, 3 invalid config.

#include "swats/config.hpp"
#include "swats/demos.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace swats;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvalidConfig = 3;
constexpr const char* kOutDirEnv = "SWATS_OUT_DIR";

struct Options {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string demo;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_dir(const Options& opt) {
  if (!opt.out_dir.empty()) return opt.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "runs";
}

ConfigDocument load(const Options& opt) {
  if (opt.config_path.empty()) throw UsageError("--config is required");
  if (!fs::exists(opt.config_path)) throw UsageError("config file not found: " + opt.config_path);
  nlohmann::json doc = load_config_json(opt.config_path);
  for (const std::string& assignment : opt.overrides) apply_override(doc, assignment);
  if (opt.seed) doc["seed"] = *opt.seed;
  return parse_config(doc);
}

std::string run_stem(const ExperimentConfig& cfg) {
  return "run-" + std::to_string(cfg.seed) + "-" + std::string(optimizer_name(cfg.optimizer));
}

void resolve_output(ExperimentConfig& cfg, const Options& opt) {
  if (!opt.out_dir.empty() || cfg.output_path.empty())
    cfg.output_path = (output_dir(opt) / (run_stem(cfg) + ".csv")).string();
}

std::string optional_real(const std::optional<double>& v) {
  return v ? format_real(*v) : "-";
}

void print_summary(const RunSummary& s, const std::string& csv_path) {
  const auto row = [](const char* key, const std::string& value) {
    std::cout << std::left << std::setw(20) << key << value << '\n';
  };
  row("optimizer", s.optimizer);
  row("steps", std::to_string(s.steps));
  row("steps_per_epoch", std::to_string(s.steps_per_epoch));
  row("final_train_loss", format_real(s.final_train_loss));
  row(s.metric == MetricKind::Accuracy ? "final_test_acc" : "final_test_loss",
      format_real(s.final_test_metric));
  row(s.metric == MetricKind::Accuracy ? "best_test_acc" : "best_test_loss",
      format_real(s.best_test_metric));
  row("switch_epoch",
      optional_real(s.switch_event ? std::optional(s.switch_event->epoch) : std::nullopt));
  row("Lambda", optional_real(s.switch_event ? std::optional(s.switch_event->Lambda) : std::nullopt));
  row("negative_gamma", std::to_string(s.negative_gamma_steps));
  row("diverged", s.diverged ? "yes: " + s.diagnostic : "no");
  row("records", csv_path);
}

int cmd_run(const Options& opt) {
  ConfigDocument doc = load(opt);
  resolve_output(doc.experiment, opt);
  const RunResult result = run_experiment(doc.experiment);
  print_summary(result.summary, doc.experiment.output_path);
  return 0;
}

int cmd_grid(const Options& opt) {
  ConfigDocument doc = load(opt);
  ExperimentConfig& cfg = doc.experiment;
  resolve_output(cfg, opt);
  std::vector<double> grid = doc.lr_grid;
  if (grid.empty()) {
    const bool adaptive = std::holds_alternative<AdamConfig<double>>(cfg.optimizer) ||
                          std::holds_alternative<SwatsConfig<double>>(cfg.optimizer) ||
                          std::holds_alternative<AdamClipConfig<double>>(cfg.optimizer);
    grid = adaptive ? adam_lr_grid() : sgd_log_grid();
  }

  GridResult result;
  try {
    result = grid_tune(cfg, grid, opt.threads);
  } catch (const GridFailure& e) {
    std::cerr << e.what() << '\n';
    for (const std::string& d : e.diagnostics()) std::cerr << "  " << d << '\n';
    return kExitRuntime;
  }

  const fs::path table_path =
      fs::path(cfg.output_path).replace_filename("grid-" + std::to_string(cfg.seed) + "-" +
                                                 std::string(optimizer_name(cfg.optimizer)) + ".csv");
  std::ofstream table(table_path, std::ios::binary);
  table << "lr,seed,final_train_loss,final_test_metric,best_test_metric,diverged,switch_epoch,"
           "Lambda\n";
  std::cout << std::left << std::setw(12) << "lr" << std::setw(26) << "final_metric"
            << std::setw(14) << "switch_epoch" << "status\n";
  for (const GridPoint& p : result.points) {
    const RunSummary& s = p.summary;
    const auto sw = s.switch_event;
    table << format_real(p.lr) << ',' << p.seed << ',' << format_real(s.final_train_loss) << ','
          << format_real(s.final_test_metric) << ',' << format_real(s.best_test_metric) << ','
          << (s.diverged ? 1 : 0) << ',' << (sw ? format_real(sw->epoch) : "") << ','
          << (sw ? format_real(sw->Lambda) : "") << '\n';
    std::cout << std::left << std::setw(12) << format_real(p.lr) << std::setw(26)
              << format_real(s.final_test_metric) << std::setw(14)
              << (sw ? format_real(sw->epoch) : "-") << (s.diverged ? "diverged" : "ok") << '\n';
  }
  std::cout << "best_lr " << format_real(result.best_lr) << '\n'
            << "table " << table_path.string() << '\n';
  return 0;
}

int cmd_demo(const Options& opt) {
  const auto names = demo_names();
  if (std::find(names.begin(), names.end(), opt.demo) == names.end()) {
    std::string list;
    for (auto n : names) list += std::string(list.empty() ? "" : ", ") + std::string(n);
    throw UsageError("unknown demo '" + opt.demo + "'; available: " + list);
  }
  const Table table = run_demo(opt.demo, opt.seed.value_or(0));
  const fs::path dir = output_dir(opt);
  fs::create_directories(dir);
  const fs::path path = dir / ("demo-" + opt.demo + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  table.write_csv(out);
  std::cout << "demo " << opt.demo << ": " << table.rows.size() << " rows -> " << path.string()
            << '\n';
  return 0;
}

int cmd_validate(const Options& opt) {
  const ConfigDocument doc = load(opt);
  // Problem construction catches data-dependent issues such as batch size.
  const auto problem = make_problem(doc.experiment.problem);
  if (problem->num_samples() > 0 && doc.experiment.batch_size > problem->num_samples())
    throw ConfigError("batch_size", "exceeds the " + std::to_string(problem->num_samples()) +
                                        " training samples");
  std::cout << "ok " << opt.config_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adam/SGD switching optimizer experiments"};
  app.require_subcommand(1);
  Options opt;

  auto add_config_flags = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Experiment JSON file")->required();
    sub->add_option("--set", opt.overrides, "Override a config field, e.g. optimizer.alpha=0.01");
  };
  auto add_output_flags = [&opt](CLI::App* sub) {
    sub->add_option("--out", opt.out_dir,
                    std::string("Output directory (default $") + kOutDirEnv + " or ./runs)");
    sub->add_option("--seed", opt.seed, "Run seed (minibatch order)");
  };

  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  add_config_flags(run);
  add_output_flags(run);

  CLI::App* grid = app.add_subcommand("grid", "Tune the learning rate over a grid");
  add_config_flags(grid);
  add_output_flags(grid);
  grid->add_option("--threads", opt.threads, "Parallel runs (default: hardware threads)");

  CLI::App* demo = app.add_subcommand("demo", "Run a built-in demonstration: min-norm, switch, clip");
  demo->add_option("name", opt.demo, "Demo name")->required();
  add_output_flags(demo);

  CLI::App* validate = app.add_subcommand("validate", "Check a config without running it");
  add_config_flags(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(opt);
    if (grid->parsed()) return cmd_grid(opt);
    if (demo->parsed()) return cmd_demo(opt);
    if (validate->parsed()) return cmd_validate(opt);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const InvalidProblem& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
