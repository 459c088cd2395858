#pragma once

#include "swats/optim.hpp"
#include "swats/problems.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace swats {

// ---------------------------------------------------------------------------
// Learning-rate schedules

enum class ScheduleKind { Constant, StepDecay };

/// Milestones are fractions of the total epoch budget, so a 300-epoch decay
/// at epochs 150/225/262 is written {0.5, 0.75, 0.875}.
struct Schedule {
  ScheduleKind kind = ScheduleKind::Constant;
  std::vector<double> milestones;
  double factor = 0.1;

  static Schedule constant() { return {}; }
  static Schedule step_decay(std::vector<double> milestones, double factor = 0.1) {
    return {ScheduleKind::StepDecay, std::move(milestones), factor};
  }
  /// Divide by 10 at 1/2, 3/4 and 7/8 of training.
  static Schedule standard_step_decay() { return step_decay({0.5, 0.75, 0.875}, 0.1); }

  void validate() const;
};

/// factor^(milestones passed) at `epoch` of `total_epochs`.
double schedule_multiplier(const Schedule& schedule, long epoch, long total_epochs);

inline double apply_schedule(double base_lr, const Schedule& schedule, long epoch,
                             long total_epochs) {
  return base_lr * schedule_multiplier(schedule, epoch, total_epochs);
}

/// Rescales g onto the ball of radius max_norm when it lies outside.
ParamVector clip_grad_norm(const ParamVector& g, double max_norm);

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  ProblemSpec problem{};
  OptimizerSpec optimizer = AdamConfig<double>{};
  Schedule schedule{};
  long epochs = 1;
  Index batch_size = 1;
  std::optional<double> grad_clip_norm;
  std::uint64_t seed = 0;
  /// Steps between records; 0 logs once per epoch.
  long log_interval = 0;
  /// CSV destination; the event log goes next to it with a .jsonl extension.
  /// Empty means nothing is persisted.
  std::string output_path;

  /// Checks everything that does not need the problem instance.
  void validate() const;
};

/// Raised when a config is invalid. `field()` is the dotted config path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct TrainRecord {
  long step = 0;
  double epoch = 0;  // step / steps_per_epoch
  Phase phase = Phase::NotApplicable;
  double effective_lr = 0;
  std::optional<double> gamma;
  std::optional<double> lambda_corrected;
  double train_loss = 0;
  double test_metric = 0;
  bool switched = false;  // a switch happened since the previous record
};

struct SwitchEvent {
  long step = 0;
  double epoch = 0;  // fractional: step / steps_per_epoch
  double Lambda = 0;
};

struct RunSummary {
  std::string optimizer;
  MetricKind metric = MetricKind::Loss;
  long steps = 0;
  long steps_per_epoch = 1;
  double final_train_loss = 0;
  double final_test_metric = 0;
  double best_test_metric = 0;
  std::optional<SwitchEvent> switch_event;
  long negative_gamma_steps = 0;
  bool diverged = false;
  std::string diagnostic;
  ParamVector final_weights;
};

struct RunResult {
  RunSummary summary;
  std::vector<TrainRecord> records;
};

/// Called after every optimizer step with the updated iterate.
using StepObserver =
    std::function<void(long step, const ParamVector& w, const StepReport<double>& report)>;

/// Trains `cfg.optimizer` on `problem` from its initial point. Divergence
/// (non-finite values or a loss above 1e12) ends the run early and is
/// reported in the summary rather than thrown. Persists records and events
/// when `cfg.output_path` is set.
RunResult run_experiment(const ExperimentConfig& cfg, const Problem& problem,
                         const StepObserver& observer = {});
/// Builds the problem from `cfg.problem` first.
RunResult run_experiment(const ExperimentConfig& cfg, const StepObserver& observer = {});

inline constexpr double kDivergenceLoss = 1e12;

inline constexpr const char* kRecordHeader =
    "step,epoch,phase,effective_lr,gamma,lambda_corrected,train_loss,test_metric,switched";

void write_records_csv(const std::vector<TrainRecord>& records, std::ostream& out);
/// One JSON object per line: switch and divergence events, then the summary.
void write_events_jsonl(const RunResult& result, std::ostream& out);

/// Shortest round-trip decimal for a double, used in every persisted file.
std::string format_real(double value);

// ---------------------------------------------------------------------------
// Learning-rate tuning

struct GridPoint {
  double lr = 0;
  std::uint64_t seed = 0;
  RunSummary summary;
};

struct GridResult {
  double best_lr = 0;
  std::vector<GridPoint> points;
};

class GridFailure : public std::runtime_error {
 public:
  GridFailure(const std::string& what, std::vector<std::string> diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// Rate grid used for Adam and SWATS.
std::vector<double> adam_lr_grid();
/// Coarse logarithmic SGD grid, 1e-3 to 1e2 in half decades.
std::vector<double> sgd_log_grid();

OptimizerSpec with_learning_rate(OptimizerSpec spec, double lr);
double learning_rate(const OptimizerSpec& spec);

/// Runs one experiment per rate, in parallel, each with a seed derived from
/// the template seed and the grid index. Picks the best final test metric
/// (lowest loss or highest accuracy), ties going to the smaller rate.
/// Diverged runs never win; if all diverge a GridFailure is thrown.
GridResult grid_tune(const ExperimentConfig& tmpl, std::span<const double> lr_grid,
                     unsigned max_threads = 0);

// ---------------------------------------------------------------------------
// Diagnostics

struct GammaPoint {
  long step = 0;
  double gamma = 0;
  double lambda_corrected = 0;
  double running_mean = 0;  // mean of gamma over the series so far
};

/// The gamma series of a SWATS run logged per step. Empty for runs that
/// never produced an estimate.
std::vector<GammaPoint> gamma_trace(const std::vector<TrainRecord>& records);

}  // namespace swats
