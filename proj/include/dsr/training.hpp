// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dsr/capture_sim.hpp"
#include "dsr/srnet.hpp"
#include "json.hpp"

namespace dsr {

enum class LossKind { kL2, kL1 };

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d(loss)/d(pred)
};

/// l2: mean squared error; l1: mean absolute error (subgradient 0 at ties).
LossResult loss(const Tensor& pred, const Tensor& label, LossKind kind);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  enum class Optimizer { kSgd, kAdam };

  double learning_rate = 1e-3;
  long steps = 1000;
  int batch_size = 4;
  Optimizer optimizer = Optimizer::kAdam;
  AdamConfig adam;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kL2;
  /// Preferences are drawn U[0,1] per sample unless fixed here.
  std::vector<double> fixed_prefs;

  void validate() const;
  nlohmann::json to_json() const;
  /// Reads the optimisation keys; unknown keys are the caller's business.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_trace;  // mean batch loss per step
};

using TrainProgress = std::function<void(long step, double loss)>;

/// Mini-batch gradient descent on luma pairs. Deterministic under cfg.seed.
/// Throws DivergenceError (with the step index) on a non-finite loss.
TrainResult train(const std::vector<TrainingPair>& pairs, ModelParams params,
                  const TopologySpec& spec, const TrainConfig& cfg,
                  const TrainProgress& progress = {});

/// Loss of sr_forward(pair.input) against pair.label and its gradient with
/// respect to every parameter.
double loss_and_grad(const ModelParams& params, const TopologySpec& spec,
                     const TrainingPair& pair, const PrefVector& prefs, LossKind kind,
                     ModelParams* grads);

struct GradCheckGroup {
  std::string group;
  std::size_t checked = 0;
  std::size_t kink_skipped = 0;  // entries whose probes kept straddling a ReLU kink
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  enum class Method {
    kCentral,  // (L(x+eps) - L(x-eps)) / (2 eps)
    kRidders,  // Richardson tableau of central differences, steps eps / 1.4^k
  };
  Method method = Method::kRidders;
  double eps = 1e-2;  // the step, or the initial step for kRidders
  int samples = 50;   // entries per group (all of them when the group is smaller)
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kL2;
};

struct GradCheckReport {
  GradCheckOptions options;
  std::vector<GradCheckGroup> groups;
  double max_rel_error() const;
  nlohmann::json to_json() const;
};

/// Finite differences of the loss against the adjoint on a seeded random
/// subsample of each parameter group. Relative error is
/// |a - n| / max(|a|, |n|, 1e-10). A probe pair whose ReLU sign pattern
/// differs from the unperturbed one does not estimate the derivative: the
/// step shrinks (central: eps/4, three times; Ridders: restart the tableau at
/// the next step) and the entry is skipped and counted if that never clears.
GradCheckReport grad_check(const ModelParams& params, const TopologySpec& spec,
                           const TrainingPair& pair, const PrefVector& prefs,
                           const GradCheckOptions& options = {});

/// 10*log10(1/MSE), values in [0,1]; identical images report 99 dB.
double psnr(const Tensor& a, const Tensor& b);

struct EvalReport {
  std::vector<double> model_psnr;
  std::vector<double> bicubic_psnr;
  double mean_model = 0.0;
  double mean_bicubic = 0.0;
  nlohmann::json to_json() const;
};

EvalReport evaluate(const ModelParams& params, const TopologySpec& spec,
                    const std::vector<TrainingPair>& pairs, const PrefVector& prefs);

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<double>& trace);

}  // namespace dsr
