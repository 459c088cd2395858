#include "swats/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <ostream>
#include <thread>

namespace swats {

// ---------------------------------------------------------------------------
// Schedules and clipping

void Schedule::validate() const {
  if (!(factor > 0)) throw ConfigError("schedule.factor", "must be positive");
  if (kind == ScheduleKind::Constant) return;
  double previous = 0.0;
  for (double m : milestones) {
    if (!(m > previous && m < 1.0))
      throw ConfigError("schedule.milestones", "must be strictly increasing inside (0, 1)");
    previous = m;
  }
}

double schedule_multiplier(const Schedule& schedule, long epoch, long total_epochs) {
  if (schedule.kind == ScheduleKind::Constant) return 1.0;
  double multiplier = 1.0;
  for (double m : schedule.milestones)
    if (static_cast<double>(epoch) >= m * static_cast<double>(total_epochs))
      multiplier *= schedule.factor;
  return multiplier;
}

ParamVector clip_grad_norm(const ParamVector& g, double max_norm) {
  if (!(max_norm > 0)) throw std::invalid_argument("clip_grad_norm: max_norm must be positive");
  const double norm = g.norm();
  if (norm > max_norm) return g * (max_norm / norm);
  return g;
}

// ---------------------------------------------------------------------------
// Config validation

void ExperimentConfig::validate() const {
  try {
    problem.validate();
  } catch (const InvalidProblem& e) {
    throw ConfigError(e.field(), e.reason());
  }
  try {
    std::visit([](const auto& c) { c.validate(); }, optimizer);
  } catch (const InvalidHyperparameter& e) {
    throw ConfigError("optimizer." + e.field(), e.reason());
  }
  schedule.validate();
  if (epochs < 1) throw ConfigError("epochs", "must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size", "must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0))
    throw ConfigError("grad_clip_norm", "must be positive when set");
  if (log_interval < 0) throw ConfigError("log_interval", "must be nonnegative");
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

bool better(MetricKind kind, double candidate, double incumbent) {
  return kind == MetricKind::Accuracy ? candidate > incumbent : candidate < incumbent;
}

std::filesystem::path events_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".jsonl");
  return p;
}

void persist(const RunResult& result, const std::string& csv_path) {
  std::filesystem::path path(csv_path);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream csv(path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot open " + csv_path + " for writing");
  write_records_csv(result.records, csv);
  std::ofstream events(events_path(csv_path), std::ios::binary);
  if (!events) throw std::runtime_error("cannot open event log next to " + csv_path);
  write_events_jsonl(result, events);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const StepObserver& observer) {
  cfg.validate();
  const auto problem = make_problem(cfg.problem);
  return run_experiment(cfg, *problem, observer);
}

RunResult run_experiment(const ExperimentConfig& cfg, const Problem& problem,
                         const StepObserver& observer) {
  cfg.validate();
  const Index n = problem.num_samples();
  if (n > 0 && cfg.batch_size > n)
    throw ConfigError("batch_size", "exceeds the " + std::to_string(n) + " training samples");

  auto optimizer = make_optimizer(cfg.optimizer);
  ParamVector w = problem.initial_point();

  const long steps_per_epoch =
      n == 0 ? 1 : static_cast<long>((n + cfg.batch_size - 1) / cfg.batch_size);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  RngStream shuffler(cfg.seed, streams::kShuffle);

  RunResult result;
  RunSummary& summary = result.summary;
  summary.optimizer = std::string(optimizer->name());
  summary.metric = problem.metric_kind();
  summary.steps_per_epoch = steps_per_epoch;

  long step = 0;
  StepReport<double> last_report;
  bool switch_pending = false;
  bool have_best = false;

  auto fractional_epoch = [&](long s) {
    return static_cast<double>(s) / static_cast<double>(steps_per_epoch);
  };
  auto abort_run = [&](std::string why, double loss) {
    summary.diverged = true;
    summary.diagnostic = std::move(why);
    TrainRecord rec;
    rec.step = step;
    rec.epoch = fractional_epoch(step);
    rec.phase = optimizer->phase();
    rec.effective_lr = optimizer->effective_lr();
    rec.train_loss = loss;
    rec.test_metric = std::numeric_limits<double>::quiet_NaN();
    result.records.push_back(rec);
  };
  // Returns false when the run has diverged.
  auto record = [&]() {
    const double loss = problem.loss(w);
    if (!std::isfinite(loss) || loss > kDivergenceLoss) {
      abort_run("training loss " + format_real(loss) + " at step " + std::to_string(step), loss);
      return false;
    }
    TrainRecord rec;
    rec.step = step;
    rec.epoch = fractional_epoch(step);
    rec.phase = optimizer->phase();
    rec.effective_lr = optimizer->effective_lr();
    rec.gamma = last_report.gamma;
    rec.lambda_corrected = last_report.lambda_corrected;
    rec.train_loss = loss;
    rec.test_metric = problem.test_metric(w);
    rec.switched = switch_pending;
    switch_pending = false;
    if (!have_best || better(summary.metric, rec.test_metric, summary.best_test_metric)) {
      summary.best_test_metric = rec.test_metric;
      have_best = true;
    }
    result.records.push_back(rec);
    return true;
  };

  bool alive = true;
  for (long epoch = 0; epoch < cfg.epochs && alive; ++epoch) {
    optimizer->set_lr_scale(schedule_multiplier(cfg.schedule, epoch, cfg.epochs));
    if (n > 0) shuffler.shuffle(std::span<Index>(order));

    for (long b = 0; b < steps_per_epoch; ++b) {
      ParamVector g;
      if (n == 0) {
        g = problem.gradient(w);
      } else {
        const auto begin = static_cast<std::size_t>(b * cfg.batch_size);
        const auto end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
        g = problem.batch_gradient(w, std::span<const Index>(order.data() + begin, end - begin));
      }
      if (cfg.grad_clip_norm) g = clip_grad_norm(g, *cfg.grad_clip_norm);
      if (!g.allFinite()) {
        abort_run("non-finite gradient at step " + std::to_string(step + 1),
                  std::numeric_limits<double>::quiet_NaN());
        alive = false;
        break;
      }

      last_report = optimizer->step(w, g);
      ++step;
      if (last_report.gamma && *last_report.gamma < 0) ++summary.negative_gamma_steps;
      if (last_report.switched) {
        summary.switch_event = SwitchEvent{step, fractional_epoch(step), *optimizer->locked_lambda()};
        switch_pending = true;
      }
      if (observer) observer(step, w, last_report);

      if (!w.allFinite()) {
        abort_run("non-finite iterate at step " + std::to_string(step),
                  std::numeric_limits<double>::quiet_NaN());
        alive = false;
        break;
      }
      if (cfg.log_interval > 0 && step % cfg.log_interval == 0 && !record()) {
        alive = false;
        break;
      }
    }
    if (alive && cfg.log_interval == 0 && !record()) alive = false;
  }

  summary.steps = step;
  summary.final_weights = w;
  if (!summary.diverged) {
    summary.final_train_loss = problem.loss(w);
    summary.final_test_metric = problem.test_metric(w);
    if (!have_best || better(summary.metric, summary.final_test_metric, summary.best_test_metric))
      summary.best_test_metric = summary.final_test_metric;
  } else {
    summary.final_train_loss = result.records.back().train_loss;
    summary.final_test_metric = std::numeric_limits<double>::quiet_NaN();
  }

  if (!cfg.output_path.empty()) persist(result, cfg.output_path);
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc{}) throw std::runtime_error("format_real: conversion failed");
  return std::string(buffer, end);
}

void write_records_csv(const std::vector<TrainRecord>& records, std::ostream& out) {
  out << kRecordHeader << '\n';
  for (const TrainRecord& r : records) {
    out << r.step << ',' << format_real(r.epoch) << ',' << to_string(r.phase) << ','
        << format_real(r.effective_lr) << ',' << (r.gamma ? format_real(*r.gamma) : "") << ','
        << (r.lambda_corrected ? format_real(*r.lambda_corrected) : "") << ','
        << format_real(r.train_loss) << ',' << format_real(r.test_metric) << ','
        << (r.switched ? 1 : 0) << '\n';
  }
}

namespace {

nlohmann::json real_or_null(double value) {
  return std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(nullptr);
}

}  // namespace

void write_events_jsonl(const RunResult& result, std::ostream& out) {
  const RunSummary& s = result.summary;
  if (s.switch_event) {
    out << nlohmann::json{{"type", "switch"},
                          {"step", s.switch_event->step},
                          {"epoch", s.switch_event->epoch},
                          {"Lambda", s.switch_event->Lambda}}
               .dump()
        << '\n';
  }
  if (s.diverged) {
    out << nlohmann::json{{"type", "divergence"},
                          {"step", s.steps},
                          {"epoch", static_cast<double>(s.steps) /
                                        static_cast<double>(s.steps_per_epoch)},
                          {"diagnostic", s.diagnostic}}
               .dump()
        << '\n';
  }
  nlohmann::json summary{{"type", "summary"},
                         {"optimizer", s.optimizer},
                         {"metric", s.metric == MetricKind::Accuracy ? "accuracy" : "loss"},
                         {"steps", s.steps},
                         {"steps_per_epoch", s.steps_per_epoch},
                         {"final_train_loss", real_or_null(s.final_train_loss)},
                         {"final_test_metric", real_or_null(s.final_test_metric)},
                         {"best_test_metric", real_or_null(s.best_test_metric)},
                         {"negative_gamma_steps", s.negative_gamma_steps},
                         {"diverged", s.diverged}};
  if (s.switch_event) {
    summary["switch_epoch"] = s.switch_event->epoch;
    summary["Lambda"] = s.switch_event->Lambda;
  } else {
    summary["switch_epoch"] = nullptr;
    summary["Lambda"] = nullptr;
  }
  out << summary.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Grid tuning

std::vector<double> adam_lr_grid() { return {0.0005, 0.0007, 0.001, 0.002, 0.003, 0.004, 0.005}; }

std::vector<double> sgd_log_grid() {
  std::vector<double> grid;
  for (int i = -6; i <= 4; ++i) grid.push_back(std::pow(10.0, i / 2.0));
  return grid;
}

OptimizerSpec with_learning_rate(OptimizerSpec spec, double lr) {
  std::visit(
      [lr](auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, AdamClipConfig<double>> ||
                      std::is_same_v<T, SwatsConfig<double>>)
          c.adam.alpha = lr;
        else
          c.alpha = lr;
      },
      spec);
  return spec;
}

double learning_rate(const OptimizerSpec& spec) {
  return std::visit(
      [](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, AdamClipConfig<double>> ||
                      std::is_same_v<T, SwatsConfig<double>>)
          return c.adam.alpha;
        else
          return c.alpha;
      },
      spec);
}

GridResult grid_tune(const ExperimentConfig& tmpl, std::span<const double> lr_grid,
                     unsigned max_threads) {
  if (lr_grid.empty()) throw std::invalid_argument("grid_tune: empty learning-rate grid");
  tmpl.validate();
  const auto problem = make_problem(tmpl.problem);

  std::vector<ExperimentConfig> configs;
  for (std::size_t i = 0; i < lr_grid.size(); ++i) {
    ExperimentConfig cfg = tmpl;
    cfg.optimizer = with_learning_rate(tmpl.optimizer, lr_grid[i]);
    cfg.seed = mix_seed(tmpl.seed, i);
    if (!tmpl.output_path.empty()) {
      std::filesystem::path p(tmpl.output_path);
      p.replace_filename(p.stem().string() + "-grid" + std::to_string(i) + ".csv");
      cfg.output_path = p.string();
    }
    configs.push_back(std::move(cfg));
  }

  const unsigned threads = std::max(1u, max_threads ? max_threads
                                                    : std::thread::hardware_concurrency());
  std::vector<GridPoint> points(configs.size());
  for (std::size_t start = 0; start < configs.size(); start += threads) {
    std::vector<std::future<RunResult>> jobs;
    const std::size_t stop = std::min(configs.size(), start + threads);
    for (std::size_t i = start; i < stop; ++i)
      jobs.push_back(std::async(std::launch::async, [&, i] {
        return run_experiment(configs[i], *problem);
      }));
    for (std::size_t i = start; i < stop; ++i) {
      RunResult run = jobs[i - start].get();
      points[i] = GridPoint{lr_grid[i], configs[i].seed, std::move(run.summary)};
    }
  }

  std::optional<std::size_t> best;
  std::vector<std::string> diagnostics;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const RunSummary& s = points[i].summary;
    if (s.diverged) {
      diagnostics.push_back("lr " + format_real(points[i].lr) + ": " + s.diagnostic);
      continue;
    }
    if (!best) {
      best = i;
      continue;
    }
    const RunSummary& incumbent = points[*best].summary;
    if (better(s.metric, s.final_test_metric, incumbent.final_test_metric) ||
        (s.final_test_metric == incumbent.final_test_metric && points[i].lr < points[*best].lr))
      best = i;
  }
  if (!best) throw GridFailure("grid_tune: every grid point diverged", std::move(diagnostics));
  return GridResult{points[*best].lr, std::move(points)};
}

// ---------------------------------------------------------------------------
// Diagnostics

std::vector<GammaPoint> gamma_trace(const std::vector<TrainRecord>& records) {
  std::vector<GammaPoint> series;
  double sum = 0;
  for (const TrainRecord& r : records) {
    if (!r.gamma) continue;
    sum += *r.gamma;
    series.push_back(GammaPoint{r.step, *r.gamma, r.lambda_corrected.value_or(0.0),
                                sum / static_cast<double>(series.size() + 1)});
  }
  return series;
}

}  // namespace swats
