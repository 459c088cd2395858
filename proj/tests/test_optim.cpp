#include "swats/optim.hpp"

#include "support.hpp"

#include <cmath>
#include <limits>

using namespace swats;
using swats::testing::bit_equal;
using swats::testing::random_vector;
using swats::testing::vec;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

/// Adam step written out coordinate by coordinate with plain doubles.
struct ScalarAdam {
  double alpha = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-9;
  double m = 0, a = 0;
  long k = 0;
  double step(double g) {
    ++k;
    m = beta1 * m + (1 - beta1) * g;
    a = beta2 * a + (1 - beta2) * g * g;
    const double mhat = m / (1 - std::pow(beta1, k));
    const double ahat = a / (1 - std::pow(beta2, k));
    return -alpha * mhat / (std::sqrt(ahat) + eps / std::sqrt(1 - std::pow(beta2, k)));
  }
};

}  // namespace

TEST_CASE("sgd_step hand values") {
  ParamVector v;
  const ParamVector w1 = sgd_step(vec({1}), vec({2}), SgdConfig<double>{0.1, 0.0}, v);
  CHECK(w1(0) == doctest::Approx(0.8).epsilon(1e-15));

  ParamVector vm;
  const SgdConfig<double> momentum{0.1, 0.9};
  const ParamVector w0 = vec({0.0});
  const ParamVector a = sgd_step(w0, vec({1}), momentum, vm);
  CHECK(vm(0) == 1.0);
  CHECK(a(0) == -0.1);
  const ParamVector b = sgd_step(a, vec({1}), momentum, vm);
  CHECK(vm(0) == 0.9 * 1.0 + 1.0);
  CHECK(b(0) == a(0) - 0.1 * 1.9);
  CHECK(b(0) == doctest::Approx(-0.29).epsilon(1e-15));
}

TEST_CASE("adagrad_step hand values") {
  ParamVector acc;
  const AdagradConfig<double> cfg{1.0, 0.0};
  const ParamVector w1 = adagrad_step(vec({0}), vec({1}), cfg, acc);
  CHECK(w1(0) == -1.0);
  const ParamVector w2 = adagrad_step(w1, vec({1}), cfg, acc);
  CHECK(acc(0) == 2.0);
  CHECK(w2(0) - w1(0) == -1.0 / std::sqrt(2.0));
}

TEST_CASE("rmsprop_step hand values") {
  ParamVector acc;
  const double alpha = 1e-3;
  const ParamVector w1 = rmsprop_step(vec({0}), vec({1}), RmspropConfig<double>{alpha, 0.999, 1e-9}, acc);
  CHECK(acc(0) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(w1(0) / alpha == doctest::Approx(-31.6227766).epsilon(1e-7));

  ParamVector acc0;
  const ParamVector g = vec({-3, 0.5});
  const ParamVector w = rmsprop_step(vec({1, 1}), g, RmspropConfig<double>{0.1, 0.0, 1e-9}, acc0);
  CHECK(acc0 == square(g));
  CHECK(w(0) == 1 - 0.1 * (-3 / (3 + 1e-9)));
  CHECK(w(1) == 1 - 0.1 * (0.5 / (0.5 + 1e-9)));
}

TEST_CASE("adam first step has magnitude alpha") {
  AdamState<double> state;
  state.k = 1;
  const AdamConfig<double> cfg;
  const auto r = adam_step(vec({1}), vec({1}), cfg, state);
  CHECK(state.m(0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(state.a(0) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(std::abs(-r.step(0) - cfg.alpha) / cfg.alpha < 1e-6);
  CHECK(r.w(0) == 1 + r.step(0));
}

TEST_CASE("adam matches a scalar reference over many steps") {
  RngStream rng(11, streams::kTest);
  ScalarAdam ref;
  AdamState<double> state;
  ParamVector w = vec({0.0});
  double w_ref = 0;
  for (int i = 0; i < 500; ++i) {
    const double g = rng.normal();
    ++state.k;
    w = adam_step(w, vec({g}), AdamConfig<double>{}, state).w;
    w_ref += ref.step(g);
    REQUIRE(w(0) == doctest::Approx(w_ref).epsilon(1e-12));
  }
}

TEST_CASE("zero gradient with zero state leaves w unchanged") {
  RngStream rng(12, streams::kTest);
  const ParamVector w = random_vector(rng, 6);
  const ParamVector g = ParamVector::Zero(6);
  ParamVector s1, s2, s3;
  CHECK(sgd_step(w, g, SgdConfig<double>{0.1, 0.9}, s1) == w);
  CHECK(adagrad_step(w, g, AdagradConfig<double>{}, s2) == w);
  CHECK(s2 == ParamVector::Zero(6));
  CHECK(rmsprop_step(w, g, RmspropConfig<double>{}, s3) == w);
  AdamState<double> adam{1, {}, {}};
  const auto r = adam_step(w, g, AdamConfig<double>{}, adam);
  CHECK(r.step == ParamVector::Zero(6));
  CHECK(r.w == w);
  AdamState<double> clip_state{1, {}, {}};
  CHECK(adamclip_step(w, g, AdamClipConfig<double>{}, clip_state).w == w);
  SwatsState<double> sw;
  CHECK(swats_step(w, g, AdamConfig<double>{}, sw).w == w);
}

TEST_CASE("adagrad accumulator is nondecreasing") {
  RngStream rng(13, streams::kTest);
  ParamVector acc, w = random_vector(rng, 5);
  ParamVector prev = ParamVector::Zero(5);
  for (int i = 0; i < 200; ++i) {
    w = adagrad_step(w, random_vector(rng, 5), AdagradConfig<double>{}, acc);
    REQUIRE((acc.array() >= prev.array()).all());
    prev = acc;
  }
}

TEST_CASE("with beta1 = 0 the adam step is a descent direction") {
  RngStream rng(14, streams::kTest);
  AdamConfig<double> cfg;
  cfg.beta1 = 0;
  for (int trial = 0; trial < 200; ++trial) {
    AdamState<double> state;
    ParamVector w = random_vector(rng, 8);
    for (int i = 0; i < 10; ++i) {
      const ParamVector g = random_vector(rng, 8, std::exp(rng.uniform(-5, 5)));
      ++state.k;
      const auto r = adam_step(w, g, cfg, state);
      REQUIRE(r.step.dot(g) < 0);
      w = r.w;
    }
  }
}

TEST_CASE("adamclip(0, inf) is adam bit for bit") {
  RngStream rng(15, streams::kTest);
  const AdamClipConfig<double> clip_cfg{AdamConfig<double>{}, 0.0, kInf, 0.1};
  AdamState<double> s_adam, s_clip;
  ParamVector w_adam = random_vector(rng, 10), w_clip = w_adam;
  for (int i = 0; i < 100; ++i) {
    const ParamVector g = random_vector(rng, 10);
    ++s_adam.k;
    ++s_clip.k;
    w_adam = adam_step(w_adam, g, clip_cfg.adam, s_adam).w;
    w_clip = adamclip_step(w_clip, g, clip_cfg, s_clip).w;
    REQUIRE(bit_equal(w_adam, w_clip));
  }
}

TEST_CASE("adamclip(1, 1) is SGD on the first moment") {
  RngStream rng(16, streams::kTest);
  const AdamClipConfig<double> cfg{AdamConfig<double>{}, 1.0, 1.0, 0.05};
  AdamState<double> state;
  ParamVector w = random_vector(rng, 10);
  for (int i = 0; i < 100; ++i) {
    ++state.k;
    const auto r = adamclip_step(w, random_vector(rng, 10), cfg, state);
    REQUIRE(bit_equal(r.step, -(cfg.alpha_sgd * state.m)));
    w = r.w;
  }
}

TEST_CASE("adamclip lower bound binds when the adaptive rate is tiny") {
  const AdamClipConfig<double> cfg{AdamConfig<double>{}, 1.0, kInf, 0.1};
  AdamState<double> state;
  state.k = 1000;
  state.m = vec({0.5});
  // Chosen so that a' = 1e6 alpha^2 after the update with g = 1.
  const double target = 1e6 * cfg.adam.alpha * cfg.adam.alpha;
  state.a = vec({(target - (1 - cfg.adam.beta2)) / cfg.adam.beta2});
  const auto r = adamclip_step(vec({0}), vec({1}), cfg, state);
  CHECK(state.a(0) == doctest::Approx(target).epsilon(1e-12));
  CHECK(detail::adam_rates(cfg.adam, state)(0) < 0.01 * cfg.p * cfg.alpha_sgd);
  CHECK(r.step(0) == -(cfg.p * cfg.alpha_sgd) * state.m(0));
}

TEST_CASE("adamclip rejects inverted bounds") {
  AdamState<double> state{1, {}, {}};
  const AdamClipConfig<double> bad{AdamConfig<double>{}, 2.0, 1.0, 0.1};
  CHECK_THROWS_AS(adamclip_step(vec({0}), vec({1}), bad, state), InvalidHyperparameter);
  CHECK_THROWS_AS(bad.validate(), InvalidHyperparameter);
  const AdamClipConfig<double> both_inf{AdamConfig<double>{}, kInf, kInf, 0.1};
  CHECK_THROWS_AS(both_inf.validate(), InvalidHyperparameter);
  CHECK_NOTHROW(AdamClipConfig<double>(AdamConfig<double>{}, 1.0, 1.0, 0.1).validate());
}

TEST_CASE("adam input errors") {
  AdamState<double> fresh;
  CHECK_THROWS_AS(adam_step(vec({0}), vec({1}), AdamConfig<double>{}, fresh), std::invalid_argument);
  AdamState<double> state{1, {}, {}};
  CHECK_THROWS_AS(adam_step(vec({0, 0}), vec({1}), AdamConfig<double>{}, state), DimensionMismatch);
  ParamVector v;
  CHECK_THROWS_AS(sgd_step(vec({0, 0}), vec({1}), SgdConfig<double>{}, v), DimensionMismatch);
}

TEST_CASE("hyperparameter validation names the field") {
  auto field_of = [](auto cfg) -> std::string {
    try {
      cfg.validate();
    } catch (const InvalidHyperparameter& e) {
      return e.field();
    }
    return "";
  };
  CHECK(field_of(SgdConfig<double>{0.0, 0.0}) == "alpha");
  CHECK(field_of(SgdConfig<double>{0.1, 1.0}) == "beta");
  CHECK(field_of(AdamConfig<double>{1e-3, 0.9, 1.0, 1e-9}) == "beta2");
  CHECK(field_of(AdamConfig<double>{1e-3, -0.1, 0.999, 1e-9}) == "beta1");
  CHECK(field_of(AdamConfig<double>{1e-3, 0.9, 0.999, 0.0}) == "epsilon");
  CHECK(field_of(RmspropConfig<double>{1e-3, 0.99, -1.0}) == "epsilon");
  CHECK(field_of(AdamClipConfig<double>{AdamConfig<double>{}, 0.0, kInf, 0.0}) == "alpha_sgd");
  CHECK(field_of(AdamConfig<double>{}) == "");
}

TEST_CASE("estimate_sgd_lr") {
  CHECK(*estimate_sgd_lr(vec({-1, 0}), vec({1, 1})) == 1.0);
  CHECK_FALSE(estimate_sgd_lr(vec({1, 0}), vec({0, 1})).has_value());

  RngStream rng(17, streams::kTest);
  for (double alpha : {0.25, 1e-3, 0.7}) {
    const ParamVector g = random_vector(rng, 9);
    CHECK(*estimate_sgd_lr(ParamVector(-alpha * g), g) == doctest::Approx(alpha).epsilon(1e-14));
  }
  const ParamVector g = random_vector(rng, 9);
  CHECK(*estimate_sgd_lr(ParamVector(-0.25 * g), g) == 0.25);
}

TEST_CASE("gamma is the reciprocal Rayleigh quotient of the inverse preconditioner") {
  RngStream rng(18, streams::kTest);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(6));
    ParamVector d(n);
    for (Index i = 0; i < n; ++i) d(i) = std::exp(rng.uniform(-3, 3));
    const ParamVector g = random_vector(rng, n);
    const ParamVector p = -(d.asDiagonal() * g);
    // Direct dense evaluation: p^T p / p^T D^{-1} p.
    Matrix<double> dinv = Matrix<double>::Zero(n, n);
    for (Index i = 0; i < n; ++i) dinv(i, i) = 1.0 / d(i);
    const double quotient = (p.transpose() * dinv * p)(0, 0) / p.squaredNorm();
    const double gamma = *estimate_sgd_lr(p, g);
    CHECK(gamma > 0);
    CHECK(gamma == doctest::Approx(1.0 / quotient).epsilon(1e-12));
  }
}

TEST_CASE("projection identity on random pairs") {
  RngStream rng(19, streams::kTest);
  for (int i = 0; i < 2000; ++i) {
    const Index n = 1 + static_cast<Index>(rng.below(50));
    const ParamVector p = random_vector(rng, n, std::exp(rng.uniform(-8, 8)));
    const ParamVector g = random_vector(rng, n, std::exp(rng.uniform(-8, 8)));
    const auto gamma = estimate_sgd_lr(p, g);
    REQUIRE(gamma.has_value());
    REQUIRE(std::abs(*gamma * g.dot(p) + p.dot(p)) <= 1e-10 * p.dot(p));
  }
}

TEST_CASE("swats does not switch on the first step") {
  SwatsState<double> state;
  const auto r = swats_step(vec({1}), vec({1}), AdamConfig<double>{}, state);
  REQUIRE(r.report.gamma.has_value());
  CHECK(*r.report.lambda_corrected == doctest::Approx(*r.report.gamma).epsilon(1e-15));
  CHECK_FALSE(r.report.switched);
  CHECK(state.phase == Phase::Adam);
  CHECK(state.k == 1);
}

TEST_CASE("swats switches at step 2 when gamma is constant") {
  // A constant scalar gradient gives gamma = alpha sqrt(a) / (sqrt(a) + eps),
  // constant to well below eps.
  const AdamConfig<double> cfg;
  SwatsState<double> state;
  ParamVector w = vec({1});
  auto r1 = swats_step(w, vec({1}), cfg, state);
  auto r2 = swats_step(r1.w, vec({1}), cfg, state);
  CHECK(r2.report.switched);
  CHECK(state.phase == Phase::Sgd);
  REQUIRE(state.Lambda.has_value());
  CHECK(*state.Lambda == *r2.report.lambda_corrected);
  CHECK(std::abs(*state.Lambda - cfg.alpha) / cfg.alpha < 1e-7);
  CHECK(state.v == ParamVector::Zero(1));

  // Post-switch rule: v' = b1 v + g; w' = w - (1 - b1) Lambda v'.
  const double lambda = *state.Lambda;
  auto r3 = swats_step(r2.w, vec({2}), cfg, state);
  CHECK(state.v(0) == 2.0);
  CHECK(r3.w(0) == r2.w(0) - (1 - cfg.beta1) * lambda * 2.0);
  CHECK_FALSE(r3.report.gamma.has_value());
  CHECK(r3.report.phase_after == Phase::Sgd);
  CHECK(state.k == 3);
  auto r4 = swats_step(r3.w, vec({-1}), cfg, state);
  CHECK(state.v(0) == cfg.beta1 * 2.0 - 1.0);
  CHECK(r4.w(0) == r3.w(0) - (1 - cfg.beta1) * lambda * state.v(0));
  CHECK(*state.Lambda == lambda);
}

TEST_CASE("swats keeps lambda when p.g is zero") {
  SwatsState<double> state;
  const auto r = swats_step(vec({0, 0}), vec({0, 0}), AdamConfig<double>{}, state);
  CHECK_FALSE(r.report.gamma.has_value());
  CHECK(state.lambda == 0.0);
  CHECK(state.k == 1);
}

TEST_CASE("swats rejects non-finite gradients") {
  SwatsState<double> state;
  CHECK_THROWS_AS(swats_step(vec({0}), vec({std::nan("")}), AdamConfig<double>{}, state),
                  NonFiniteValue);
  CHECK_THROWS_AS(swats_step(vec({0}), vec({1, 2}), AdamConfig<double>{}, state), DimensionMismatch);
}

TEST_CASE("swats properties on random gradient streams") {
  RngStream rng(20, streams::kTest);
  const AdamConfig<double> cfg;
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(4));
    // A slowly drifting gradient makes switches likely in small dimensions.
    const ParamVector base = random_vector(rng, n);
    const double noise = trial % 2 ? 0.0 : 1e-3;
    SwatsState<double> sw;
    AdamState<double> adam;
    ParamVector w_sw = random_vector(rng, n), w_adam = w_sw;
    std::optional<double> locked;
    double gmin = kInf, gmax = -kInf;
    long switches = 0;
    for (int k = 0; k < 60; ++k) {
      const ParamVector g = base + random_vector(rng, n, noise);
      const Phase before = sw.phase;
      const auto r = swats_step(w_sw, g, cfg, sw);
      REQUIRE(sw.k == k + 1);
      REQUIRE((sw.a.array() >= 0).all());
      if (before == Phase::Sgd) REQUIRE(sw.phase == Phase::Sgd);
      if (locked) REQUIRE(*sw.Lambda == *locked);
      if (r.report.switched) {
        ++switches;
        locked = sw.Lambda;
      }
      REQUIRE(r.report.gamma.has_value() == (before == Phase::Adam && r.report.step_taken.dot(g) != 0));
      if (r.report.gamma) {
        gmin = std::min(gmin, *r.report.gamma);
        gmax = std::max(gmax, *r.report.gamma);
        const double slack = 1e-12 * std::max(std::abs(gmin), std::abs(gmax));
        REQUIRE(*r.report.lambda_corrected >= gmin - slack);
        REQUIRE(*r.report.lambda_corrected <= gmax + slack);
      }
      w_sw = r.w;
      if (before == Phase::Adam) {
        ++adam.k;
        w_adam = adam_step(w_adam, g, cfg, adam).w;
        REQUIRE(bit_equal(w_sw, w_adam));
      }
    }
    REQUIRE(switches <= 1);
  }
}

TEST_CASE("make_optimizer delegates to the step functions") {
  RngStream rng(21, streams::kTest);
  const ParamVector w0 = random_vector(rng, 4);

  auto sgd = make_optimizer(SgdConfig<double>{0.1, 0.0});
  CHECK(sgd->name() == "sgd");
  CHECK(make_optimizer(SgdConfig<double>{0.1, 0.9})->name() == "sgdm");
  auto adam = make_optimizer(AdamConfig<double>{});
  ParamVector w_sgd = w0, w_adam = w0, ref_sgd = w0, ref_adam = w0, v;
  AdamState<double> state;
  for (int i = 0; i < 20; ++i) {
    const ParamVector g = random_vector(rng, 4);
    sgd->step(w_sgd, g);
    adam->step(w_adam, g);
    ref_sgd = sgd_step(ref_sgd, g, SgdConfig<double>{0.1, 0.0}, v);
    ++state.k;
    ref_adam = adam_step(ref_adam, g, AdamConfig<double>{}, state).w;
    REQUIRE(bit_equal(w_sgd, ref_sgd));
    REQUIRE(bit_equal(w_adam, ref_adam));
  }
  CHECK(adam->effective_lr() == 1e-3);
  adam->set_lr_scale(0.1);
  CHECK(adam->effective_lr() == doctest::Approx(1e-4));

  CHECK_THROWS_AS(make_optimizer(AdamConfig<double>{1e-3, 0.9, 1.0, 1e-9}), InvalidHyperparameter);
  CHECK(optimizer_name(SwatsConfig<double>{}) == "swats");
  CHECK(optimizer_name(AdamClipConfig<double>{}) == "adamclip");
  CHECK(to_string(Phase::Sgd) == "sgd");
}

TEST_CASE("swats optimizer reports its phase and locked rate") {
  auto opt = make_optimizer(SwatsConfig<double>{});
  ParamVector w = vec({1});
  CHECK(opt->phase() == Phase::Adam);
  opt->step(w, vec({1}));
  const auto r = opt->step(w, vec({1}));
  CHECK(r.switched);
  CHECK(opt->phase() == Phase::Sgd);
  REQUIRE(opt->locked_lambda().has_value());
  CHECK(opt->effective_lr() == doctest::Approx(0.1 * *opt->locked_lambda()).epsilon(1e-15));
}
