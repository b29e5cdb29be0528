// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "dsr/training.hpp"
#include "test_util.hpp"

using namespace dsr;
using dsr::test::random_tensor;

namespace {

TrainingPair random_pair(Rng& rng, int side, int r) {
  TrainingPair p;
  p.input = random_tensor(rng, side, side, 1, 0.0, 1.0);
  p.label = random_tensor(rng, side * r, side * r, 1, 0.0, 1.0);
  p.R = r;
  return p;
}

// A capture-sim pair from a synthetic scene: learnable structure, unlike noise.
TrainingPair scene_pair(std::uint64_t seed, int input_side) {
  Rng rng(seed);
  const Psf psf = Psf::gaussian(0.6, 0.5, 0.3);
  const int margin = stretch_psf(psf, 8).k_h / 2;
  const Tensor hr = synth_scene(rng, 8 * input_side + 2 * margin, 8 * input_side + 2 * margin);
  return make_pair(hr, psf, 2, 4);
}

TopologySpec linear_spec() {
  TopologySpec s = TopologySpec::desk_default(4);
  for (auto& l : s.stats_layers) l.activation = Activation::identity();
  for (auto& l : s.process_layers) l.activation = Activation::identity();
  s.fcnn_activation = Activation::identity();
  return s;
}

double group_error(const GradCheckReport& r, const std::string& g) {
  for (const auto& e : r.groups)
    if (e.group == g) return e.max_rel_error;
  FAIL("missing group " << g);
  return 1.0;
}

}  // namespace

TEST_CASE("loss: closed forms") {
  Rng rng(1);
  const Tensor label = random_tensor(rng, 4, 5, 1);
  LossResult l = loss(label, label, LossKind::kL2);
  CHECK(l.value == 0.0);
  for (double g : l.grad.data()) CHECK(g == 0.0);

  const double c = 0.125;
  Tensor pred = label;
  for (double& v : pred.data()) v += c;
  l = loss(pred, label, LossKind::kL2);
  CHECK(l.value == doctest::Approx(c * c).epsilon(1e-12));
  for (double g : l.grad.data()) CHECK(g == doctest::Approx(2.0 * c / 20.0).epsilon(1e-12));

  l = loss(pred, label, LossKind::kL1);
  CHECK(l.value == doctest::Approx(c).epsilon(1e-12));
  for (double g : l.grad.data()) CHECK(g == doctest::Approx(1.0 / 20.0).epsilon(1e-12));

  CHECK_THROWS_AS(loss(pred, Tensor(5, 4, 1), LossKind::kL2), ContractViolation);
}

TEST_CASE("loss: analytic gradient matches finite differences") {
  Rng rng(2);
  for (LossKind kind : {LossKind::kL2, LossKind::kL1}) {
    Tensor pred = random_tensor(rng, 6, 6, 1);
    const Tensor label = random_tensor(rng, 6, 6, 1);
    const LossResult l = loss(pred, label, kind);
    const double err = test::fd_max_rel_error(pred.data(), l.grad.data(),
                                              [&] { return loss(pred, label, kind).value; });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("grad_check: default topology on a random 16x16 pair") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  Rng rng(3);
  const ModelParams p = ModelParams::random(spec, rng);
  const TrainingPair pair = random_pair(rng, 16, 4);
  const GradCheckReport r = grad_check(p, spec, pair, PrefVector({rng.uniform()}));
  REQUIRE(r.groups.size() == 4);
  for (const auto& g : r.groups) {
    CAPTURE(g.group);
    CHECK(g.checked > 0);
    CHECK(g.max_rel_error < 1e-4);
  }
  CHECK(r.max_rel_error() < 1e-4);
  CHECK(r.to_json()["groups"].size() == 4);
}

TEST_CASE("grad_check: identity activations are exact to rounding") {
  const TopologySpec spec = linear_spec();
  Rng rng(4);
  const ModelParams p = ModelParams::random(spec, rng);
  const TrainingPair pair = random_pair(rng, 16, 4);
  GradCheckOptions opt;
  opt.samples = 60;
  const GradCheckReport r = grad_check(p, spec, pair, PrefVector({0.4}), opt);
  for (const auto& g : r.groups) {
    CAPTURE(g.group);
    CHECK(g.kink_skipped == 0);
    CHECK(g.max_rel_error < 1e-8);
  }
  CHECK(group_error(r, "logit") < 1e-8);
}

TEST_CASE("grad_check: plain central differences also pass at their own step") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  Rng rng(5);
  const ModelParams p = ModelParams::random(spec, rng);
  GradCheckOptions opt;
  opt.method = GradCheckOptions::Method::kCentral;
  opt.eps = 1e-4;
  opt.samples = 20;
  const GradCheckReport r = grad_check(p, spec, random_pair(rng, 12, 4), PrefVector({0.5}), opt);
  CHECK(r.max_rel_error() < 1e-4);
}

TEST_CASE("zero kernel bank still receives a gradient through the residual loss") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  Rng rng(6);
  ModelParams p = ModelParams::random(spec, rng);
  for (auto& layer : p.bank)
    for (auto& k : layer) {
      std::fill(k.weights.begin(), k.weights.end(), 0.0);
      std::fill(k.bias.begin(), k.bias.end(), 0.0);
    }
  const TrainingPair pair = random_pair(rng, 8, 4);
  ModelParams grads = ModelParams::zeros(spec);
  const double l = loss_and_grad(p, spec, pair, PrefVector({0.5}), LossKind::kL2, &grads);
  CHECK(l > 0.0);
  double bank_norm = 0.0;
  for (const auto& layer : grads.bank)
    for (const auto& k : layer) {
      for (double g : k.weights) bank_norm += g * g;
      for (double g : k.bias) bank_norm += g * g;
    }
  CHECK(bank_norm > 0.0);
}

TEST_CASE("loss_and_grad accumulates into the gradient buffer") {
  const TopologySpec spec = TopologySpec::desk_default(2);
  Rng rng(7);
  const ModelParams p = ModelParams::random(spec, rng);
  const TrainingPair pair = random_pair(rng, 6, 2);
  ModelParams once = ModelParams::zeros(spec), twice = ModelParams::zeros(spec);
  loss_and_grad(p, spec, pair, PrefVector({0.1}), LossKind::kL2, &once);
  loss_and_grad(p, spec, pair, PrefVector({0.1}), LossKind::kL2, &twice);
  loss_and_grad(p, spec, pair, PrefVector({0.1}), LossKind::kL2, &twice);
  CHECK(twice.fcnn[0].bias[0] == doctest::Approx(2.0 * once.fcnn[0].bias[0]));
}

TEST_CASE("train: learning rate 0 leaves params unchanged with a flat trace") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  Rng rng(8);
  const ModelParams p = ModelParams::random(spec, rng);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.steps = 5;
  cfg.batch_size = 2;
  cfg.fixed_prefs = {0.5};
  for (auto opt : {TrainConfig::Optimizer::kAdam, TrainConfig::Optimizer::kSgd}) {
    cfg.optimizer = opt;
    const TrainResult r = train({scene_pair(1, 8)}, p, spec, cfg);
    CHECK(r.params == p);
    REQUIRE(r.loss_trace.size() == 5);
    for (double l : r.loss_trace) CHECK(l == r.loss_trace.front());
  }
}

TEST_CASE("train: single-pair overfit with adam, 500 steps") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  Rng rng(9);
  const ModelParams p = ModelParams::random(spec, rng);
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.steps = 500;
  cfg.batch_size = 1;
  cfg.fixed_prefs = {0.5};
  const TrainResult r = train({scene_pair(2, 8)}, p, spec, cfg);
  MESSAGE("initial " << r.loss_trace.front() << " final " << r.loss_trace.back());
  CHECK(r.loss_trace.back() < 0.2 * r.loss_trace.front());
}

TEST_CASE("train: same seed gives identical traces and params") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  Rng rng(10);
  const ModelParams p = ModelParams::random(spec, rng);
  const std::vector<TrainingPair> pairs{scene_pair(3, 6), scene_pair(4, 6), scene_pair(5, 6)};
  TrainConfig cfg;
  cfg.steps = 15;
  cfg.batch_size = 2;
  cfg.seed = 77;
  const TrainResult a = train(pairs, p, spec, cfg);
  const TrainResult b = train(pairs, p, spec, cfg);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.params == b.params);
  cfg.seed = 78;
  CHECK_FALSE(train(pairs, p, spec, cfg).loss_trace == a.loss_trace);
}

TEST_CASE("train: small steps do not increase the loss over 10 steps") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  Rng rng(11);
  const ModelParams p = ModelParams::random(spec, rng);
  TrainConfig cfg;
  cfg.steps = 11;
  cfg.batch_size = 1;
  cfg.fixed_prefs = {0.5};
  for (auto [opt, lr] : {std::pair{TrainConfig::Optimizer::kSgd, 1e-2},
                         std::pair{TrainConfig::Optimizer::kAdam, 1e-4}}) {
    cfg.optimizer = opt;
    cfg.learning_rate = lr;
    const TrainResult r = train({scene_pair(6, 8)}, p, spec, cfg);
    int increases = 0;
    for (std::size_t i = 1; i < r.loss_trace.size(); ++i)
      if (r.loss_trace[i] > r.loss_trace[i - 1]) ++increases;
    CHECK(increases <= 1);
    CHECK(r.loss_trace.back() < r.loss_trace.front());
  }
}

TEST_CASE("train: divergence aborts with the step index") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  Rng rng(12);
  const ModelParams p = ModelParams::random(spec, rng);
  TrainConfig cfg;
  cfg.optimizer = TrainConfig::Optimizer::kSgd;
  cfg.learning_rate = 1e12;
  cfg.steps = 50;
  cfg.batch_size = 1;
  try {
    train({scene_pair(7, 6)}, p, spec, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() < 50);
  }
}

TEST_CASE("train: config and dataset contracts") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  const ModelParams p = ModelParams::zeros(spec);
  TrainConfig cfg;
  cfg.steps = 0;
  CHECK_THROWS_AS(train({scene_pair(1, 6)}, p, spec, cfg), ContractViolation);
  cfg.steps = 1;
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(train({scene_pair(1, 6)}, p, spec, cfg), ContractViolation);
  cfg.learning_rate = 1e-3;
  CHECK_THROWS_AS(train({}, p, spec, cfg), ContractViolation);
  CHECK_THROWS_AS(train({scene_pair(1, 6)}, p, TopologySpec::desk_default(2), cfg),
                  ContractViolation);
}

TEST_CASE("psnr conventions") {
  const Tensor a(10, 10, 1, 0.5);
  CHECK(psnr(a, a) == 99.0);
  CHECK(psnr(a, Tensor(10, 10, 1, 0.6)) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(std::isfinite(psnr(a, Tensor(10, 10, 1, 0.5 + 1e-6))));
}

TEST_CASE("evaluate: zero params score exactly the bicubic baseline") {
  const TopologySpec spec = TopologySpec::desk_default(4);
  const std::vector<TrainingPair> pairs{scene_pair(20, 8), scene_pair(21, 8)};
  const EvalReport r = evaluate(ModelParams::zeros(spec), spec, pairs, PrefVector({0.5}));
  REQUIRE(r.model_psnr.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(r.model_psnr[i] == r.bicubic_psnr[i]);
  CHECK(r.mean_model == r.mean_bicubic);
  CHECK(r.to_json().contains("mean_model"));
}
