#pragma once

#include "swats/numkit.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace swats {

/// Raised when a hyperparameter is outside its admissible range.
/// `field()` names the offending parameter.
class InvalidHyperparameter : public std::invalid_argument {
 public:
  InvalidHyperparameter(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)), reason_(what) {}
  const std::string& field() const { return field_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string field_;
  std::string reason_;
};

namespace detail {

template <typename Scalar>
void require_positive(const char* field, Scalar value) {
  if (!(value > 0)) throw InvalidHyperparameter(field, "must be positive");
}

template <typename Scalar>
void require_unit_interval(const char* field, Scalar value) {
  if (!(value >= 0 && value < 1)) throw InvalidHyperparameter(field, "must lie in [0, 1)");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configurations

/// Plain SGD when beta == 0, heavy-ball momentum otherwise.
template <typename Scalar = double>
struct SgdConfig {
  Scalar alpha = Scalar(0.1);
  Scalar beta = Scalar(0);

  void validate() const {
    detail::require_positive("alpha", alpha);
    detail::require_unit_interval("beta", beta);
  }
};

template <typename Scalar = double>
struct AdagradConfig {
  Scalar alpha = Scalar(1e-2);
  Scalar epsilon = Scalar(1e-9);

  void validate() const {
    detail::require_positive("alpha", alpha);
    if (!(epsilon >= 0)) throw InvalidHyperparameter("epsilon", "must be nonnegative");
  }
};

template <typename Scalar = double>
struct RmspropConfig {
  Scalar alpha = Scalar(1e-3);
  Scalar beta = Scalar(0.99);
  Scalar epsilon = Scalar(1e-9);

  void validate() const {
    detail::require_positive("alpha", alpha);
    detail::require_unit_interval("beta", beta);
    if (!(epsilon >= 0)) throw InvalidHyperparameter("epsilon", "must be nonnegative");
  }
};

/// Defaults are the usual (1e-3, 0.9, 0.999) with epsilon = 1e-9. For SWATS
/// the same epsilon is also the switch threshold.
template <typename Scalar = double>
struct AdamConfig {
  Scalar alpha = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-9);

  void validate() const {
    detail::require_positive("alpha", alpha);
    detail::require_unit_interval("beta1", beta1);
    detail::require_unit_interval("beta2", beta2);
    detail::require_positive("epsilon", epsilon);
  }
};

/// Adam whose per-coordinate rates are clamped to [p * alpha_sgd, q * alpha_sgd].
/// q may be +infinity.
template <typename Scalar = double>
struct AdamClipConfig {
  AdamConfig<Scalar> adam{};
  Scalar p = Scalar(0);
  Scalar q = std::numeric_limits<Scalar>::infinity();
  Scalar alpha_sgd = Scalar(0.1);

  void validate() const {
    adam.validate();
    if (!(p >= 0)) throw InvalidHyperparameter("p", "must be nonnegative");
    if (!(q > 0)) throw InvalidHyperparameter("q", "must be positive");
    if (!(p < q) && !(p == q && std::isfinite(q)))
      throw InvalidHyperparameter("p", "must be below q");
    detail::require_positive("alpha_sgd", alpha_sgd);
  }
};

template <typename Scalar = double>
struct SwatsConfig {
  AdamConfig<Scalar> adam{};

  void validate() const { adam.validate(); }
};

// ---------------------------------------------------------------------------
// Single-step update rules. Each returns the new iterate and updates the
// optimizer state passed by reference.

/// v' = beta v + g;  w' = w - alpha v'
template <typename Scalar>
Vector<Scalar> sgd_step(const Vector<Scalar>& w, const Vector<Scalar>& g,
                        const SgdConfig<Scalar>& cfg, Vector<Scalar>& velocity) {
  require_same_size("sgd_step", w, g);
  if (velocity.size() == 0) velocity = Vector<Scalar>::Zero(w.size());
  require_same_size("sgd_step", w, velocity);
  velocity = cfg.beta * velocity + g;
  return w - cfg.alpha * velocity;
}

/// v' = v + g^2;  w' = w - alpha g / (sqrt(v') + eps)
template <typename Scalar>
Vector<Scalar> adagrad_step(const Vector<Scalar>& w, const Vector<Scalar>& g,
                            const AdagradConfig<Scalar>& cfg, Vector<Scalar>& accumulator) {
  require_same_size("adagrad_step", w, g);
  if (accumulator.size() == 0) accumulator = Vector<Scalar>::Zero(w.size());
  require_same_size("adagrad_step", w, accumulator);
  accumulator += g.cwiseAbs2();
  return w - cfg.alpha * div_eps(g, accumulator.cwiseSqrt(), cfg.epsilon);
}

/// v' = beta v + (1 - beta) g^2;  w' = w - alpha g / (sqrt(v') + eps)
template <typename Scalar>
Vector<Scalar> rmsprop_step(const Vector<Scalar>& w, const Vector<Scalar>& g,
                            const RmspropConfig<Scalar>& cfg, Vector<Scalar>& accumulator) {
  require_same_size("rmsprop_step", w, g);
  if (accumulator.size() == 0) accumulator = Vector<Scalar>::Zero(w.size());
  require_same_size("rmsprop_step", w, accumulator);
  accumulator = cfg.beta * accumulator + (1 - cfg.beta) * g.cwiseAbs2();
  return w - cfg.alpha * div_eps(g, accumulator.cwiseSqrt(), cfg.epsilon);
}

template <typename Scalar = double>
struct AdamState {
  long k = 0;
  Vector<Scalar> m;  // first moment
  Vector<Scalar> a;  // second moment

  void ensure_size(Index n) {
    if (m.size() == 0) m = Vector<Scalar>::Zero(n);
    if (a.size() == 0) a = Vector<Scalar>::Zero(n);
  }
};

template <typename Scalar = double>
struct AdamStepResult {
  Vector<Scalar> w;
  Vector<Scalar> step;  // w' - w as computed, i.e. the Adam direction p
};

/// Bias-corrected step scale sqrt(1 - beta2^k) / (1 - beta1^k) times alpha.
template <typename Scalar>
Scalar adam_step_scale(const AdamConfig<Scalar>& cfg, long k) {
  const Scalar bias = std::sqrt(1 - std::pow(cfg.beta2, Scalar(k))) /
                      (1 - std::pow(cfg.beta1, Scalar(k)));
  return cfg.alpha * bias;
}

namespace detail {

template <typename Scalar>
void update_moments(const Vector<Scalar>& g, const AdamConfig<Scalar>& cfg,
                    AdamState<Scalar>& state) {
  state.m = cfg.beta1 * state.m + (1 - cfg.beta1) * g;
  state.a = cfg.beta2 * state.a + (1 - cfg.beta2) * g.cwiseAbs2();
}

/// Per-coordinate Adam learning rates for the current (already updated) moments.
template <typename Scalar>
Vector<Scalar> adam_rates(const AdamConfig<Scalar>& cfg, const AdamState<Scalar>& state) {
  const Scalar scale = adam_step_scale(cfg, state.k);
  return (scale / (state.a.array().sqrt() + cfg.epsilon)).matrix();
}

template <typename Scalar>
void check_adam_inputs(const char* where, const Vector<Scalar>& w, const Vector<Scalar>& g,
                       AdamState<Scalar>& state) {
  require_same_size(where, w, g);
  if (state.k < 1) throw std::invalid_argument(std::string(where) + ": step count must be >= 1");
  state.ensure_size(w.size());
  require_same_size(where, w, state.m);
  require_same_size(where, w, state.a);
}

}  // namespace detail

/// One Adam step. The caller increments `state.k` beforehand.
///
///   m' = b1 m + (1 - b1) g
///   a' = b2 a + (1 - b2) g^2
///   p  = -alpha sqrt(1 - b2^k) / (1 - b1^k) * m' / (sqrt(a') + eps)
///
/// p is formed as -(rate .* m') with rate = scale / (sqrt(a') + eps) so that
/// Adam-Clip with an inactive clamp reproduces it bit for bit.
template <typename Scalar>
AdamStepResult<Scalar> adam_step(const Vector<Scalar>& w, const Vector<Scalar>& g,
                                 const AdamConfig<Scalar>& cfg, AdamState<Scalar>& state) {
  detail::check_adam_inputs("adam_step", w, g, state);
  detail::update_moments(g, cfg, state);
  Vector<Scalar> p = -(detail::adam_rates(cfg, state).cwiseProduct(state.m));
  Vector<Scalar> next = w + p;
  return {std::move(next), std::move(p)};
}

/// Adam with each coordinate's rate clamped to [p * alpha_sgd, q * alpha_sgd].
/// Uses the freshly updated first moment.
template <typename Scalar>
AdamStepResult<Scalar> adamclip_step(const Vector<Scalar>& w, const Vector<Scalar>& g,
                                     const AdamClipConfig<Scalar>& cfg,
                                     AdamState<Scalar>& state) {
  if (!(cfg.p < cfg.q) && !(cfg.p == cfg.q && std::isfinite(cfg.q)))
    throw InvalidHyperparameter("p", "must be below q");
  detail::check_adam_inputs("adamclip_step", w, g, state);
  detail::update_moments(g, cfg.adam, state);
  const Vector<Scalar> rates =
      clip(detail::adam_rates(cfg.adam, state), cfg.p * cfg.alpha_sgd, cfg.q * cfg.alpha_sgd);
  Vector<Scalar> p = -(rates.cwiseProduct(state.m));
  Vector<Scalar> next = w + p;
  return {std::move(next), std::move(p)};
}

/// SGD learning rate whose scaled negative gradient projects onto `p` as `p`
/// itself: gamma = p.p / (-p.g). Returns nullopt when p.g is exactly zero.
template <typename Scalar>
std::optional<Scalar> estimate_sgd_lr(const Vector<Scalar>& p, const Vector<Scalar>& g) {
  const Scalar pg = dot(p, g);
  if (pg == Scalar(0)) return std::nullopt;
  return p.squaredNorm() / -pg;
}

// ---------------------------------------------------------------------------
// SWATS

enum class Phase { NotApplicable, Adam, Sgd };

std::string_view to_string(Phase phase);

template <typename Scalar = double>
struct SwatsState {
  long k = 0;
  Vector<Scalar> m;
  Vector<Scalar> a;
  Vector<Scalar> v;  // momentum buffer, live only in the SGD phase
  Scalar lambda = Scalar(0);
  Phase phase = Phase::Adam;
  std::optional<Scalar> Lambda;  // write-once at the switch
  long negative_gamma_count = 0;
};

template <typename Scalar = double>
struct StepReport {
  Vector<Scalar> step_taken;
  std::optional<Scalar> gamma;
  std::optional<Scalar> lambda_corrected;
  bool switched = false;
  Phase phase_after = Phase::NotApplicable;
};

template <typename Scalar = double>
struct SwatsStepResult {
  Vector<Scalar> w;
  StepReport<Scalar> report;
};

/// One iteration of the Adam-to-SGD switching loop.
///
/// In the Adam phase this is exactly `adam_step`, followed by the update of
/// the running average of gamma and the switch test
///   k > 1 and |lambda / (1 - b2^k) - gamma| < eps.
/// After the switch the iterate follows SGD with momentum b1 and learning
/// rate (1 - b1) * Lambda. `lr_scale` multiplies alpha before the switch and
/// the SGD rate after it.
template <typename Scalar>
SwatsStepResult<Scalar> swats_step(const Vector<Scalar>& w, const Vector<Scalar>& g,
                                   const AdamConfig<Scalar>& cfg, SwatsState<Scalar>& state,
                                   Scalar lr_scale = Scalar(1)) {
  require_same_size("swats_step", w, g);
  if (!g.allFinite()) throw NonFiniteValue("swats_step: gradient is not finite");

  ++state.k;
  StepReport<Scalar> report;

  if (state.phase == Phase::Sgd) {
    const SgdConfig<Scalar> sgd{(1 - cfg.beta1) * *state.Lambda * lr_scale, cfg.beta1};
    Vector<Scalar> next = sgd_step(w, g, sgd, state.v);
    report.step_taken = next - w;
    report.phase_after = Phase::Sgd;
    return {std::move(next), std::move(report)};
  }

  AdamConfig<Scalar> scaled = cfg;
  scaled.alpha = cfg.alpha * lr_scale;
  AdamState<Scalar> adam{state.k, std::move(state.m), std::move(state.a)};
  AdamStepResult<Scalar> result = adam_step(w, g, scaled, adam);
  state.m = std::move(adam.m);
  state.a = std::move(adam.a);

  if (const auto gamma = estimate_sgd_lr(result.step, g)) {
    if (*gamma < 0) ++state.negative_gamma_count;
    state.lambda = cfg.beta2 * state.lambda + (1 - cfg.beta2) * *gamma;
    const Scalar corrected = state.lambda / (1 - std::pow(cfg.beta2, Scalar(state.k)));
    report.gamma = gamma;
    report.lambda_corrected = corrected;
    if (state.k > 1 && std::abs(corrected - *gamma) < cfg.epsilon) {
      state.phase = Phase::Sgd;
      state.v = Vector<Scalar>::Zero(w.size());
      state.Lambda = corrected;
      report.switched = true;
    }
  }
  report.step_taken = std::move(result.step);
  report.phase_after = state.phase;
  return {std::move(result.w), std::move(report)};
}

// ---------------------------------------------------------------------------
// Uniform stepping interface

using OptimizerSpec = std::variant<SgdConfig<double>, AdagradConfig<double>,
                                   RmspropConfig<double>, AdamConfig<double>,
                                   AdamClipConfig<double>, SwatsConfig<double>>;

/// Stateful optimizer behind a single `step` entry point. The learning-rate
/// scale is the hook through which a schedule acts on the base rate.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  /// Updates `w` in place and reports diagnostics for the step.
  virtual StepReport<double> step(ParamVector& w, const ParamVector& g) = 0;

  /// Learning rate currently applied, schedule included. For SWATS in the SGD
  /// phase this is (1 - b1) Lambda times the scale.
  virtual double effective_lr() const = 0;
  virtual Phase phase() const { return Phase::NotApplicable; }
  virtual std::optional<double> locked_lambda() const { return std::nullopt; }
  virtual std::string_view name() const = 0;

  void set_lr_scale(double scale) { lr_scale_ = scale; }
  double lr_scale() const { return lr_scale_; }

 protected:
  double lr_scale_ = 1.0;
};

/// Validates `spec` and returns a fresh optimizer with zeroed state.
std::unique_ptr<Optimizer> make_optimizer(const OptimizerSpec& spec);

std::string_view optimizer_name(const OptimizerSpec& spec);

}  // namespace swats
