// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>

#include "dsr/image_io.hpp"

namespace dsr {
namespace {

using nlohmann::json;

std::vector<std::span<double>> spans(ModelParams& p) {
  std::vector<std::span<double>> out;
  p.for_each([&](const std::string&, ParamGroup, std::span<double> s) { out.push_back(s); });
  return out;
}

void zero(ModelParams& p) {
  p.for_each([](const std::string&, ParamGroup, std::span<double> s) {
    std::fill(s.begin(), s.end(), 0.0);
  });
}

const Tensor& luma_of(const Tensor& t, Tensor& scratch) {
  if (t.channels() == 1) return t;
  scratch = to_luma(t);
  return scratch;
}

PrefVector draw_prefs(Rng& rng, const TopologySpec& spec, const std::vector<double>& fixed) {
  if (!fixed.empty()) return PrefVector(fixed);
  std::vector<double> v(spec.pref_dim);
  for (double& x : v) x = rng.uniform();
  return PrefVector(std::move(v));
}

}  // namespace

LossResult loss(const Tensor& pred, const Tensor& label, LossKind kind) {
  DSR_REQUIRE(pred.same_shape(label), "loss: prediction and label shapes differ");
  const auto p = pred.data();
  const auto l = label.data();
  const double n = static_cast<double>(p.size());
  LossResult r{0.0, Tensor(pred.height(), pred.width(), pred.channels())};
  auto g = r.grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - l[i];
    if (kind == LossKind::kL2) {
      r.value += d * d;
      g[i] = 2.0 * d / n;
    } else {
      r.value += std::abs(d);
      g[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
  }
  r.value /= n;
  return r;
}

void TrainConfig::validate() const {
  DSR_REQUIRE(learning_rate >= 0.0 && std::isfinite(learning_rate),
              "train: learning_rate must be finite and >= 0");
  DSR_REQUIRE(steps >= 1, "train: steps must be >= 1");
  DSR_REQUIRE(batch_size >= 1, "train: batch_size must be >= 1");
  DSR_REQUIRE(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
                  adam.epsilon > 0.0,
              "train: invalid adam parameters");
}

json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"steps", steps},
          {"batch_size", batch_size},
          {"optimizer", optimizer == Optimizer::kAdam ? "adam" : "sgd"},
          {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"epsilon", adam.epsilon}}},
          {"seed", seed},
          {"loss", loss == LossKind::kL2 ? "l2" : "l1"}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    const std::string opt = j.value("optimizer", std::string("adam"));
    if (opt == "adam")
      c.optimizer = Optimizer::kAdam;
    else if (opt == "sgd")
      c.optimizer = Optimizer::kSgd;
    else
      throw ConfigError("unknown optimizer '" + opt + "'");
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      for (const auto& [key, _] : a.items())
        if (key != "beta1" && key != "beta2" && key != "epsilon")
          throw ConfigError("unknown key '" + key + "' in adam");
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    }
    c.seed = j.value("seed", c.seed);
    const std::string l = j.value("loss", std::string("l2"));
    if (l == "l2")
      c.loss = LossKind::kL2;
    else if (l == "l1")
      c.loss = LossKind::kL1;
    else
      throw ConfigError("unknown loss '" + l + "'");
    if (j.contains("prefs")) c.fixed_prefs = j["prefs"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  return c;
}

double loss_and_grad(const ModelParams& params, const TopologySpec& spec,
                     const TrainingPair& pair, const PrefVector& prefs, LossKind kind,
                     ModelParams* grads) {
  Tensor s_in, s_lab;
  const Tensor& in = luma_of(pair.input, s_in);
  const Tensor& lab = luma_of(pair.label, s_lab);
  SrGraph graph(spec);
  const Tensor out = graph.forward(in, params, prefs);
  LossResult l = loss(out, lab, kind);
  if (grads) graph.backward(l.grad, *grads);
  return l.value;
}

TrainResult train(const std::vector<TrainingPair>& pairs, ModelParams params,
                  const TopologySpec& spec, const TrainConfig& cfg,
                  const TrainProgress& progress) {
  cfg.validate();
  DSR_REQUIRE(!pairs.empty(), "train: empty dataset");
  for (const auto& p : pairs)
    DSR_REQUIRE(p.R == spec.R && p.label.height() == spec.R * p.input.height() &&
                    p.label.width() == spec.R * p.input.width(),
                "train: dataset pair does not match topology upscale R=" +
                    std::to_string(spec.R));
  params.check_shapes(spec);

  Rng rng(cfg.seed);
  ModelParams grads = ModelParams::zeros(spec);
  ModelParams m1 = ModelParams::zeros(spec);
  ModelParams m2 = ModelParams::zeros(spec);
  auto ps = spans(params);
  auto gs = spans(grads);
  auto s1 = spans(m1);
  auto s2 = spans(m2);

  TrainResult result;
  result.loss_trace.reserve(cfg.steps);
  double b1t = 1.0;
  double b2t = 1.0;
  for (long step = 0; step < cfg.steps; ++step) {
    zero(grads);
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& pair = pairs[rng.below(pairs.size())];
      const PrefVector prefs = draw_prefs(rng, spec, cfg.fixed_prefs);
      batch_loss += loss_and_grad(params, spec, pair, prefs, cfg.loss, &grads);
    }
    batch_loss /= cfg.batch_size;
    if (!std::isfinite(batch_loss))
      throw DivergenceError("training diverged: non-finite loss at step " + std::to_string(step),
                            step);
    result.loss_trace.push_back(batch_loss);
    if (progress) progress(step, batch_loss);

    const double inv_b = 1.0 / cfg.batch_size;
    if (cfg.optimizer == TrainConfig::Optimizer::kSgd) {
      for (std::size_t t = 0; t < ps.size(); ++t)
        for (std::size_t i = 0; i < ps[t].size(); ++i)
          ps[t][i] -= cfg.learning_rate * gs[t][i] * inv_b;
    } else {
      const auto& a = cfg.adam;
      b1t *= a.beta1;
      b2t *= a.beta2;
      for (std::size_t t = 0; t < ps.size(); ++t)
        for (std::size_t i = 0; i < ps[t].size(); ++i) {
          const double g = gs[t][i] * inv_b;
          s1[t][i] = a.beta1 * s1[t][i] + (1.0 - a.beta1) * g;
          s2[t][i] = a.beta2 * s2[t][i] + (1.0 - a.beta2) * g * g;
          const double mhat = s1[t][i] / (1.0 - b1t);
          const double vhat = s2[t][i] / (1.0 - b2t);
          ps[t][i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + a.epsilon);
        }
    }
  }
  result.params = std::move(params);
  return result;
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& g : groups) m = std::max(m, g.max_rel_error);
  return m;
}

json GradCheckReport::to_json() const {
  json gs = json::array();
  for (const auto& g : groups)
    gs.push_back({{"group", g.group},
                  {"checked", g.checked},
                  {"kink_skipped", g.kink_skipped},
                  {"max_rel_error", g.max_rel_error},
                  {"worst", g.worst},
                  {"worst_analytic", g.worst_analytic},
                  {"worst_numeric", g.worst_numeric}});
  return {{"method", options.method == GradCheckOptions::Method::kRidders ? "ridders" : "central"},
          {"eps", options.eps},
          {"samples", options.samples},
          {"seed", options.seed},
          {"max_rel_error", max_rel_error()},
          {"groups", gs}};
}

namespace {

struct Probe {
  Tensor out;
  Tensor trunk;
  std::uint64_t signature = 0;
};

Probe run_probe(const ModelParams& params, const TopologySpec& spec, const Tensor& input,
                const PrefVector& prefs) {
  SrGraph g(spec);
  Probe p;
  p.out = g.forward(input, params, prefs);
  p.trunk = g.trunk_output();
  p.signature = g.kink_signature();
  return p;
}

// loss(plus) - loss(minus). For l2 this is written as
// mean((t+ - t-) * (o+ + o- - 2 label)) with t the trunk output, so the
// parameter-independent bicubic residual cancels exactly instead of in
// floating point.
double loss_delta(const Probe& plus, const Probe& minus, const Tensor& label, LossKind kind) {
  const auto op = plus.out.data();
  const auto om = minus.out.data();
  const auto tp = plus.trunk.data();
  const auto tm = minus.trunk.data();
  const auto l = label.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (kind == LossKind::kL2)
      acc += (tp[i] - tm[i]) * (op[i] + om[i] - 2.0 * l[i]);
    else
      acc += std::abs(op[i] - l[i]) - std::abs(om[i] - l[i]);
  }
  return acc / static_cast<double>(l.size());
}

}  // namespace

GradCheckReport grad_check(const ModelParams& params, const TopologySpec& spec,
                           const TrainingPair& pair, const PrefVector& prefs,
                           const GradCheckOptions& options) {
  DSR_REQUIRE(options.eps > 0.0, "grad_check: eps must be > 0");
  DSR_REQUIRE(options.samples > 0, "grad_check: samples must be > 0");
  const LossKind kind = options.loss;
  ModelParams grads = ModelParams::zeros(spec);
  loss_and_grad(params, spec, pair, prefs, kind, &grads);
  Tensor s_in, s_lab;
  const Tensor& in = luma_of(pair.input, s_in);
  const Tensor& lab = luma_of(pair.label, s_lab);
  const std::uint64_t base_sig = run_probe(params, spec, in, prefs).signature;

  // Flat index of every entry, bucketed by group.
  struct Entry {
    std::string name;
    std::size_t tensor;
    std::size_t index;
  };
  std::map<ParamGroup, std::vector<Entry>> by_group;
  std::size_t tensor = 0;
  params.for_each([&](const std::string& name, ParamGroup g, std::span<const double> s) {
    for (std::size_t i = 0; i < s.size(); ++i) by_group[g].push_back({name, tensor, i});
    ++tensor;
  });

  ModelParams probe = params;
  auto probe_spans = spans(probe);
  auto grad_spans = spans(grads);

  // Central difference at step h, or nullopt when the probes hit a kink.
  auto central = [&](double& x, double h) -> std::optional<double> {
    const double saved = x;
    x = saved + h;
    const Probe plus = run_probe(probe, spec, in, prefs);
    x = saved - h;
    const Probe minus = run_probe(probe, spec, in, prefs);
    x = saved;
    if (plus.signature != base_sig || minus.signature != base_sig) return std::nullopt;
    return loss_delta(plus, minus, lab, kind) / (2.0 * h);
  };

  auto estimate = [&](double& x) -> std::optional<double> {
    if (options.method == GradCheckOptions::Method::kCentral) {
      double h = options.eps;
      for (int attempt = 0; attempt < 4; ++attempt, h *= 0.25)
        if (auto d = central(x, h)) return d;
      return std::nullopt;
    }
    // Ridders: column j of the tableau cancels the h^(2j) error term.
    constexpr int kTab = 10;
    constexpr int kMaxLevels = 20;
    constexpr double kCon = 1.4;
    constexpr double kCon2 = kCon * kCon;
    constexpr double kSafe = 2.0;
    double a[kTab][kTab];
    double err = std::numeric_limits<double>::infinity();
    std::optional<double> best;
    double h = options.eps;
    int row = 0;
    for (int level = 0; level < kMaxLevels && row < kTab; ++level, h /= kCon) {
      const std::optional<double> d = central(x, h);
      if (!d) {
        row = 0;  // this step straddles a kink; start over below it
        err = std::numeric_limits<double>::infinity();
        best.reset();
        continue;
      }
      a[0][row] = *d;
      if (!best) best = *d;
      double fac = kCon2;
      for (int j = 1; j <= row; ++j) {
        a[j][row] = (a[j - 1][row] * fac - a[j - 1][row - 1]) / (fac - 1.0);
        fac *= kCon2;
        const double errt = std::max(std::abs(a[j][row] - a[j - 1][row]),
                                     std::abs(a[j][row] - a[j - 1][row - 1]));
        if (errt <= err) {
          err = errt;
          best = a[j][row];
        }
      }
      if (row > 0 && std::abs(a[row][row] - a[row - 1][row - 1]) >= kSafe * err) break;
      ++row;
    }
    return best;
  };

  Rng rng(options.seed);
  GradCheckReport report;
  report.options = options;
  for (auto& [group, entries] : by_group) {
    GradCheckGroup out;
    out.group = to_string(group);
    // Seeded random order, drawn lazily until enough entries were checked.
    const std::size_t want = std::min(entries.size(), static_cast<std::size_t>(options.samples));
    for (std::size_t k = 0; k < entries.size() && out.checked < want; ++k) {
      std::swap(entries[k], entries[k + rng.below(entries.size() - k)]);
      const Entry& e = entries[k];
      const std::optional<double> numeric = estimate(probe_spans[e.tensor][e.index]);
      if (!numeric) {
        ++out.kink_skipped;
        continue;
      }
      const double analytic = grad_spans[e.tensor][e.index];
      const double denom = std::max({std::abs(analytic), std::abs(*numeric), 1e-10});
      const double rel = std::abs(analytic - *numeric) / denom;
      ++out.checked;
      if (rel >= out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = e.name + "[" + std::to_string(e.index) + "]";
        out.worst_analytic = analytic;
        out.worst_numeric = *numeric;
      }
    }
    report.groups.push_back(std::move(out));
  }
  return report;
}

double psnr(const Tensor& a, const Tensor& b) {
  DSR_REQUIRE(a.same_shape(b), "psnr: shape mismatch");
  double mse = 0.0;
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) mse += (ad[i] - bd[i]) * (ad[i] - bd[i]);
  mse /= static_cast<double>(ad.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

json EvalReport::to_json() const {
  return {{"model_psnr", model_psnr},
          {"bicubic_psnr", bicubic_psnr},
          {"mean_model", mean_model},
          {"mean_bicubic", mean_bicubic},
          {"gain_db", mean_model - mean_bicubic}};
}

EvalReport evaluate(const ModelParams& params, const TopologySpec& spec,
                    const std::vector<TrainingPair>& pairs, const PrefVector& prefs) {
  EvalReport r;
  for (const auto& p : pairs) {
    Tensor s_in, s_lab;
    const Tensor& in = luma_of(p.input, s_in);
    const Tensor& lab = luma_of(p.label, s_lab);
    r.model_psnr.push_back(psnr(sr_forward(in, params, prefs, spec), lab));
    r.bicubic_psnr.push_back(psnr(bicubic_resize(in, Ratio{spec.R, 1}), lab));
  }
  if (!pairs.empty()) {
    for (double v : r.model_psnr) r.mean_model += v;
    for (double v : r.bicubic_psnr) r.mean_bicubic += v;
    r.mean_model /= pairs.size();
    r.mean_bicubic /= pairs.size();
  }
  return r;
}

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<double>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write loss trace '" + path.string() + "'");
  out << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, trace[i]);
    out << buf;
  }
  if (!out) throw IoError("short write of loss trace '" + path.string() + "'");
}

}  // namespace dsr
