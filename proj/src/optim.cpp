#include "swats/optim.hpp"

namespace swats {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Adam:
      return "adam";
    case Phase::Sgd:
      return "sgd";
    case Phase::NotApplicable:
      break;
  }
  return "n/a";
}

namespace {

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(SgdConfig<double> cfg) : cfg_(cfg) {}

  StepReport<double> step(ParamVector& w, const ParamVector& g) override {
    SgdConfig<double> scaled = cfg_;
    scaled.alpha = cfg_.alpha * lr_scale_;
    ParamVector next = sgd_step(w, g, scaled, velocity_);
    StepReport<double> report;
    report.step_taken = next - w;
    w = std::move(next);
    return report;
  }

  double effective_lr() const override { return cfg_.alpha * lr_scale_; }
  std::string_view name() const override { return cfg_.beta == 0 ? "sgd" : "sgdm"; }

 private:
  SgdConfig<double> cfg_;
  ParamVector velocity_;
};

class AdagradOptimizer final : public Optimizer {
 public:
  explicit AdagradOptimizer(AdagradConfig<double> cfg) : cfg_(cfg) {}

  StepReport<double> step(ParamVector& w, const ParamVector& g) override {
    AdagradConfig<double> scaled = cfg_;
    scaled.alpha = cfg_.alpha * lr_scale_;
    ParamVector next = adagrad_step(w, g, scaled, accumulator_);
    StepReport<double> report;
    report.step_taken = next - w;
    w = std::move(next);
    return report;
  }

  double effective_lr() const override { return cfg_.alpha * lr_scale_; }
  std::string_view name() const override { return "adagrad"; }

 private:
  AdagradConfig<double> cfg_;
  ParamVector accumulator_;
};

class RmspropOptimizer final : public Optimizer {
 public:
  explicit RmspropOptimizer(RmspropConfig<double> cfg) : cfg_(cfg) {}

  StepReport<double> step(ParamVector& w, const ParamVector& g) override {
    RmspropConfig<double> scaled = cfg_;
    scaled.alpha = cfg_.alpha * lr_scale_;
    ParamVector next = rmsprop_step(w, g, scaled, accumulator_);
    StepReport<double> report;
    report.step_taken = next - w;
    w = std::move(next);
    return report;
  }

  double effective_lr() const override { return cfg_.alpha * lr_scale_; }
  std::string_view name() const override { return "rmsprop"; }

 private:
  RmspropConfig<double> cfg_;
  ParamVector accumulator_;
};

class AdamOptimizer final : public Optimizer {
 public:
  explicit AdamOptimizer(AdamConfig<double> cfg) : cfg_(cfg) {}

  StepReport<double> step(ParamVector& w, const ParamVector& g) override {
    AdamConfig<double> scaled = cfg_;
    scaled.alpha = cfg_.alpha * lr_scale_;
    ++state_.k;
    AdamStepResult<double> result = adam_step(w, g, scaled, state_);
    w = std::move(result.w);
    StepReport<double> report;
    report.step_taken = std::move(result.step);
    return report;
  }

  double effective_lr() const override { return cfg_.alpha * lr_scale_; }
  std::string_view name() const override { return "adam"; }

 private:
  AdamConfig<double> cfg_;
  AdamState<double> state_;
};

class AdamClipOptimizer final : public Optimizer {
 public:
  explicit AdamClipOptimizer(AdamClipConfig<double> cfg) : cfg_(cfg) {}

  StepReport<double> step(ParamVector& w, const ParamVector& g) override {
    AdamClipConfig<double> scaled = cfg_;
    scaled.adam.alpha = cfg_.adam.alpha * lr_scale_;
    scaled.alpha_sgd = cfg_.alpha_sgd * lr_scale_;
    ++state_.k;
    AdamStepResult<double> result = adamclip_step(w, g, scaled, state_);
    w = std::move(result.w);
    StepReport<double> report;
    report.step_taken = std::move(result.step);
    return report;
  }

  double effective_lr() const override { return cfg_.adam.alpha * lr_scale_; }
  std::string_view name() const override { return "adamclip"; }

 private:
  AdamClipConfig<double> cfg_;
  AdamState<double> state_;
};

class SwatsOptimizer final : public Optimizer {
 public:
  explicit SwatsOptimizer(SwatsConfig<double> cfg) : cfg_(cfg) {}

  StepReport<double> step(ParamVector& w, const ParamVector& g) override {
    SwatsStepResult<double> result = swats_step(w, g, cfg_.adam, state_, lr_scale_);
    w = std::move(result.w);
    return std::move(result.report);
  }

  double effective_lr() const override {
    if (state_.phase == Phase::Sgd) return (1 - cfg_.adam.beta1) * *state_.Lambda * lr_scale_;
    return cfg_.adam.alpha * lr_scale_;
  }
  Phase phase() const override { return state_.phase; }
  std::optional<double> locked_lambda() const override { return state_.Lambda; }
  std::string_view name() const override { return "swats"; }

  const SwatsState<double>& state() const { return state_; }

 private:
  SwatsConfig<double> cfg_;
  SwatsState<double> state_;
};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const OptimizerSpec& spec) {
  return std::visit(
      Overloaded{
          [](const SgdConfig<double>& c) -> std::unique_ptr<Optimizer> {
            c.validate();
            return std::make_unique<SgdOptimizer>(c);
          },
          [](const AdagradConfig<double>& c) -> std::unique_ptr<Optimizer> {
            c.validate();
            return std::make_unique<AdagradOptimizer>(c);
          },
          [](const RmspropConfig<double>& c) -> std::unique_ptr<Optimizer> {
            c.validate();
            return std::make_unique<RmspropOptimizer>(c);
          },
          [](const AdamConfig<double>& c) -> std::unique_ptr<Optimizer> {
            c.validate();
            return std::make_unique<AdamOptimizer>(c);
          },
          [](const AdamClipConfig<double>& c) -> std::unique_ptr<Optimizer> {
            c.validate();
            return std::make_unique<AdamClipOptimizer>(c);
          },
          [](const SwatsConfig<double>& c) -> std::unique_ptr<Optimizer> {
            c.validate();
            return std::make_unique<SwatsOptimizer>(c);
          },
      },
      spec);
}

std::string_view optimizer_name(const OptimizerSpec& spec) {
  return std::visit(Overloaded{
                        [](const SgdConfig<double>& c) -> std::string_view {
                          return c.beta == 0 ? "sgd" : "sgdm";
                        },
                        [](const AdagradConfig<double>&) -> std::string_view { return "adagrad"; },
                        [](const RmspropConfig<double>&) -> std::string_view { return "rmsprop"; },
                        [](const AdamConfig<double>&) -> std::string_view { return "adam"; },
                        [](const AdamClipConfig<double>&) -> std::string_view {
                          return "adamclip";
                        },
                        [](const SwatsConfig<double>&) -> std::string_view { return "swats"; },
                    },
                    spec);
}

}  // namespace swats
