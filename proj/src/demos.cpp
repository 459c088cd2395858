#include "swats/demos.hpp"

#include <limits>
#include <ostream>
#include <stdexcept>

namespace swats {

namespace fixtures {

ExperimentConfig swats_quadratic() {
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::Quadratic;
  cfg.problem.dim = 10;
  cfg.problem.condition_number = 1e3;
  cfg.problem.init_scale = 0.03;
  cfg.problem.seed = 56;
  cfg.optimizer = SwatsConfig<double>{};
  cfg.epochs = 4000;
  cfg.batch_size = 1;
  cfg.seed = 56;
  return cfg;
}

ExperimentConfig swats_logistic() {
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::LogisticRegression;
  cfg.problem.n_per_class = 100;
  cfg.problem.n_features = 2;
  cfg.problem.separation = 10.0;
  cfg.problem.seed = 4;
  cfg.optimizer = SwatsConfig<double>{};
  cfg.epochs = 20;
  cfg.batch_size = 1;
  cfg.seed = 4;
  return cfg;
}

ExperimentConfig least_squares(OptimizerSpec optimizer) {
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::LeastSquares;
  cfg.problem.rows = 20;
  cfg.problem.cols = 50;
  cfg.problem.seed = 7;
  cfg.optimizer = std::move(optimizer);
  cfg.epochs = 500;
  cfg.batch_size = 5;
  cfg.seed = 7;
  return cfg;
}

ExperimentConfig mlp_blobs(OptimizerSpec optimizer, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::MlpClassifier;
  cfg.problem.n_per_class = 200;
  cfg.problem.n_features = 2;
  cfg.problem.separation = 2.5;
  cfg.problem.hidden = {8};
  cfg.problem.activation = Activation::Tanh;
  cfg.problem.seed = seed;
  cfg.optimizer = std::move(optimizer);
  cfg.schedule = Schedule::standard_step_decay();
  cfg.epochs = 60;
  cfg.batch_size = 16;
  cfg.seed = seed;
  return cfg;
}

}  // namespace fixtures

void Table::write_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_real(row[i]);
    out << '\n';
  }
}

std::vector<std::string_view> demo_names() { return {"min-norm", "switch", "clip"}; }

Table demo_min_norm() {
  const ExperimentConfig sgd_cfg =
      fixtures::least_squares(SgdConfig<double>{fixtures::kLeastSquaresSgdLr, 0.0});
  const ExperimentConfig adam_cfg = fixtures::least_squares(AdamConfig<double>{});
  const LeastSquares problem =
      least_squares_fixture(sgd_cfg.problem.rows, sgd_cfg.problem.cols, sgd_cfg.problem.seed);
  const ParamVector target = problem.min_norm_solution();

  const long steps_per_epoch = (problem.num_samples() + sgd_cfg.batch_size - 1) / sgd_cfg.batch_size;
  auto trace = [&](const ExperimentConfig& cfg) {
    std::vector<std::pair<double, double>> series;
    series.emplace_back(problem.row_space_residual(problem.initial_point()),
                        (problem.initial_point() - target).norm());
    run_experiment(cfg, problem, [&](long step, const ParamVector& w, const StepReport<double>&) {
      if (step % steps_per_epoch == 0)
        series.emplace_back(problem.row_space_residual(w), (w - target).norm());
    });
    return series;
  };
  const auto sgd = trace(sgd_cfg);
  const auto adam = trace(adam_cfg);

  Table table;
  table.header = {"epoch", "sgd_residual", "adam_residual", "sgd_distance", "adam_distance"};
  for (std::size_t e = 0; e < std::min(sgd.size(), adam.size()); ++e)
    table.rows.push_back({static_cast<double>(e), sgd[e].first, adam[e].first, sgd[e].second,
                          adam[e].second});
  return table;
}

Table demo_switch() {
  ExperimentConfig cfg = fixtures::swats_quadratic();
  cfg.log_interval = 1;
  const RunResult run = run_experiment(cfg);
  Table table;
  table.header = {"step", "gamma", "lambda_corrected", "running_mean"};
  for (const GammaPoint& p : gamma_trace(run.records))
    table.rows.push_back({static_cast<double>(p.step), p.gamma, p.lambda_corrected, p.running_mean});
  return table;
}

Table demo_clip(std::uint64_t seed) {
  constexpr double kSgdLr = 0.1;
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<std::pair<std::string, OptimizerSpec>> contenders = {
      {"sgd", SgdConfig<double>{kSgdLr, 0.0}},
      {"adam", AdamConfig<double>{}},
      {"adamclip_1_inf", AdamClipConfig<double>{AdamConfig<double>{}, 1.0, inf, kSgdLr}},
      {"adamclip_0_1", AdamClipConfig<double>{AdamConfig<double>{}, 0.0, 1.0, kSgdLr}},
  };

  Table table;
  table.header = {"epoch"};
  std::vector<RunResult> runs;
  for (const auto& [name, spec] : contenders) {
    table.header.push_back(name + "_train_loss");
    table.header.push_back(name + "_test_accuracy");
    runs.push_back(run_experiment(fixtures::mlp_blobs(spec, seed)));
  }
  std::size_t epochs = runs.front().records.size();
  for (const RunResult& r : runs) epochs = std::min(epochs, r.records.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<double> row{runs.front().records[e].epoch};
    for (const RunResult& r : runs) {
      row.push_back(r.records[e].train_loss);
      row.push_back(r.records[e].test_metric);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table run_demo(std::string_view name, std::uint64_t seed) {
  if (name == "min-norm") return demo_min_norm();
  if (name == "switch") return demo_switch();
  if (name == "clip") return demo_clip(seed);
  throw std::invalid_argument("unknown demo '" + std::string(name) + "'");
}

}  // namespace swats
