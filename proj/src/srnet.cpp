// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/srnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

namespace dsr {
namespace {

void check_frame(const Tensor& frame, int channels, const char* who) {
  DSR_REQUIRE(!frame.empty(), std::string(who) + ": empty frame");
  DSR_REQUIRE(frame.channels() == channels,
              std::string(who) + ": frame has " + std::to_string(frame.channels()) +
                  " channels, expected " + std::to_string(channels));
}

std::vector<double> dense_forward(const DenseLayer& l, std::span<const double> x) {
  std::vector<double> y(l.bias);
  for (int o = 0; o < l.out; ++o) {
    const double* w = l.weights.data() + static_cast<std::size_t>(o) * l.in;
    double s = 0.0;
    for (int i = 0; i < l.in; ++i) s += w[i] * x[i];
    y[o] += s;
  }
  return y;
}

bool is_last(std::size_t i, std::size_t n) { return i + 1 == n; }

std::vector<double> activate_vector(const std::vector<double>& v, Activation a) {
  const int n = static_cast<int>(v.size());
  return activate(Tensor(1, 1, n, v), a).storage();
}

void softmax_inplace(std::span<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : v) x /= total;
}

// Splits the FCNN output into per-layer groups, optionally softmaxed.
MixCoefficients split_coefficients(const std::vector<double>& z, const TopologySpec& spec) {
  MixCoefficients c;
  std::size_t k = 0;
  auto take = [&](std::vector<std::vector<double>>& dst) {
    for (int m : spec.bank_size) {
      std::vector<double> g(z.begin() + static_cast<std::ptrdiff_t>(k),
                            z.begin() + static_cast<std::ptrdiff_t>(k + m));
      if (spec.simplex_mixing) softmax_inplace(g);
      dst.push_back(std::move(g));
      k += m;
    }
  };
  take(c.alpha);
  if (spec.independent_bias_coeffs)
    take(c.beta);
  else
    c.beta = c.alpha;
  return c;
}

std::vector<double> concat_inputs(const StatsVector& stats, const PrefVector& prefs,
                                  const TopologySpec& spec) {
  DSR_REQUIRE(static_cast<int>(stats.values.size()) == spec.stats_dim(),
              "statistics vector length " + std::to_string(stats.values.size()) +
                  " != d_s = " + std::to_string(spec.stats_dim()));
  DSR_REQUIRE(static_cast<int>(prefs.values.size()) == spec.pref_dim,
              "preference vector length " + std::to_string(prefs.values.size()) +
                  " != pref_dim = " + std::to_string(spec.pref_dim));
  std::vector<double> x = stats.values;
  x.insert(x.end(), prefs.values.begin(), prefs.values.end());
  return x;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void init_gaussian(std::span<double> v, Rng& rng, double stddev) {
  for (double& x : v) x = stddev * rng.normal();
}

}  // namespace

PrefVector::PrefVector(std::vector<double> v) : values(std::move(v)) {
  for (double x : values)
    DSR_REQUIRE(x >= 0.0 && x <= 1.0, "preference components must lie in [0,1]");
}

DenseLayer::DenseLayer(int out_width, int in_width)
    : out(out_width), in(in_width),
      weights(static_cast<std::size_t>(out_width) * in_width, 0.0), bias(out_width, 0.0) {
  DSR_REQUIRE(out_width > 0 && in_width > 0, "dense layer widths must be positive");
}

std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kStats: return "stats";
    case ParamGroup::kLogit: return "logit";
    case ParamGroup::kFcnn: return "fcnn";
    case ParamGroup::kBank: return "bank";
  }
  return "?";
}

ModelParams ModelParams::zeros(const TopologySpec& spec) {
  spec.validate();
  DSR_REQUIRE(spec.has_control_flow(), "model parameters need a statistics network");
  ModelParams p;
  int in = spec.input_channels;
  for (const auto& l : spec.stats_layers) {
    p.stats.emplace_back(l.out_channels, in, l.taps, l.taps);
    if (&l == &spec.stats_layers.back())
      p.logit = KernelStack(1, in, l.taps, l.taps);
    in = l.out_channels;
  }
  int width = spec.fcnn_in();
  for (int h : spec.fcnn_hidden) {
    p.fcnn.emplace_back(h, width);
    width = h;
  }
  p.fcnn.emplace_back(spec.fcnn_out(), width);
  for (std::size_t j = 0; j < spec.process_layers.size(); ++j) {
    const auto& l = spec.process_layers[j];
    p.bank.emplace_back(spec.bank_size[j],
                        KernelStack(l.out_channels, spec.process_in_channels(j), l.taps, l.taps));
  }
  return p;
}

ModelParams ModelParams::random(const TopologySpec& spec, Rng& rng, double bank_gain) {
  ModelParams p = zeros(spec);
  for (auto& k : p.stats)
    init_gaussian(k.weights, rng, std::sqrt(2.0 / (k.in_channels * k.k_h * k.k_w)));
  init_gaussian(p.logit.weights, rng,
                std::sqrt(1.0 / (p.logit.in_channels * p.logit.k_h * p.logit.k_w)));
  for (auto& l : p.fcnn) init_gaussian(l.weights, rng, std::sqrt(1.0 / l.in));
  for (auto& layer : p.bank)
    for (auto& k : layer) {
      const double he = std::sqrt(2.0 / (k.in_channels * k.k_h * k.k_w));
      init_gaussian(k.weights, rng, bank_gain * he);
      init_gaussian(k.bias, rng, 0.01 * bank_gain);
    }
  return p;
}

void ModelParams::for_each(const Visitor& v) {
  for (std::size_t l = 0; l < stats.size(); ++l) {
    v("stats." + std::to_string(l) + ".weight", ParamGroup::kStats, stats[l].weights);
    v("stats." + std::to_string(l) + ".bias", ParamGroup::kStats, stats[l].bias);
  }
  v("logit.weight", ParamGroup::kLogit, logit.weights);
  for (std::size_t l = 0; l < fcnn.size(); ++l) {
    v("fcnn." + std::to_string(l) + ".weight", ParamGroup::kFcnn, fcnn[l].weights);
    v("fcnn." + std::to_string(l) + ".bias", ParamGroup::kFcnn, fcnn[l].bias);
  }
  for (std::size_t j = 0; j < bank.size(); ++j)
    for (std::size_t i = 0; i < bank[j].size(); ++i) {
      const std::string base = "bank." + std::to_string(j) + "." + std::to_string(i);
      v(base + ".weight", ParamGroup::kBank, bank[j][i].weights);
      v(base + ".bias", ParamGroup::kBank, bank[j][i].bias);
    }
}

void ModelParams::for_each(const ConstVisitor& v) const {
  const_cast<ModelParams*>(this)->for_each(
      [&](const std::string& n, ParamGroup g, std::span<double> s) {
        v(n, g, std::span<const double>(s.data(), s.size()));
      });
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, ParamGroup, std::span<const double> s) { n += s.size(); });
  return n;
}

void ModelParams::check_shapes(const TopologySpec& spec) const {
  const ModelParams ref = zeros(spec);
  bool ok = ref.stats.size() == stats.size() && ref.fcnn.size() == fcnn.size() &&
            ref.bank.size() == bank.size() && ref.logit.same_shape(logit);
  for (std::size_t l = 0; ok && l < stats.size(); ++l) ok = ref.stats[l].same_shape(stats[l]);
  for (std::size_t l = 0; ok && l < fcnn.size(); ++l)
    ok = ref.fcnn[l].out == fcnn[l].out && ref.fcnn[l].in == fcnn[l].in;
  for (std::size_t j = 0; ok && j < bank.size(); ++j) {
    ok = ref.bank[j].size() == bank[j].size();
    for (std::size_t i = 0; ok && i < bank[j].size(); ++i)
      ok = ref.bank[j][i].same_shape(bank[j][i]);
  }
  DSR_REQUIRE(ok, "model parameters do not match the topology");
}

// --- ProcessWeights ---

ProcessWeights::ProcessWeights(std::vector<KernelStack> layers, std::uint64_t generation)
    : layers_(std::move(layers)),
      stamps_(layers_.size(), generation),
      generation_(generation),
      checksum_(compute_checksum(layers_, generation)) {
  for (const auto& k : layers_) k.validate();
}

std::uint64_t ProcessWeights::compute_checksum(const std::vector<KernelStack>& layers,
                                               std::uint64_t generation) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(&generation, sizeof generation);
  for (const auto& k : layers) {
    mix(k.weights.data(), k.weights.size() * sizeof(double));
    mix(k.bias.data(), k.bias.size() * sizeof(double));
  }
  return h;
}

bool ProcessWeights::verify() const {
  for (auto g : stamps_)
    if (g != generation_) return false;
  return compute_checksum(layers_, generation_) == checksum_;
}

// --- global weighted average ---

StatsVector global_weighted_average(const Tensor& features, const Tensor& weight_logits) {
  DSR_REQUIRE(weight_logits.channels() == 1, "weight logits must be a single channel");
  DSR_REQUIRE(features.height() == weight_logits.height() &&
                  features.width() == weight_logits.width(),
              "global_weighted_average: spatial dims of features and logits differ");
  const auto l = weight_logits.data();
  const double mx = *std::max_element(l.begin(), l.end());
  std::vector<double> w(l.size());
  double total = 0.0;
  for (std::size_t p = 0; p < l.size(); ++p) {
    w[p] = std::exp(l[p] - mx);
    total += w[p];
  }
  const int c = features.channels();
  StatsVector out{std::vector<double>(c, 0.0)};
  const auto f = features.data();
  for (std::size_t p = 0; p < w.size(); ++p) {
    const double wp = w[p] / total;
    for (int ch = 0; ch < c; ++ch) out.values[ch] += wp * f[p * c + ch];
  }
  return out;
}

GwaGrads global_weighted_average_backward(const Tensor& features, const Tensor& weight_logits,
                                          std::span<const double> grad_out) {
  const StatsVector s = global_weighted_average(features, weight_logits);
  const int c = features.channels();
  DSR_REQUIRE(static_cast<int>(grad_out.size()) == c,
              "global_weighted_average_backward: gradient length mismatch");
  const auto l = weight_logits.data();
  const double mx = *std::max_element(l.begin(), l.end());
  std::vector<double> w(l.size());
  double total = 0.0;
  for (std::size_t p = 0; p < l.size(); ++p) {
    w[p] = std::exp(l[p] - mx);
    total += w[p];
  }
  const double gs = dot(grad_out, s.values);
  GwaGrads g{Tensor(features.height(), features.width(), c),
             Tensor(weight_logits.height(), weight_logits.width(), 1)};
  const auto f = features.data();
  auto gf = g.features.data();
  auto gl = g.logits.data();
  for (std::size_t p = 0; p < w.size(); ++p) {
    const double wp = w[p] / total;
    double gdotf = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      gf[p * c + ch] = wp * grad_out[ch];
      gdotf += grad_out[ch] * f[p * c + ch];
    }
    gl[p] = wp * (gdotf - gs);
  }
  return g;
}

// --- forward passes ---

StatsVector stats_forward(const Tensor& frame, const ModelParams& params,
                          const TopologySpec& spec) {
  check_frame(frame, spec.input_channels, "stats_forward");
  params.check_shapes(spec);
  Tensor x = frame;
  for (std::size_t l = 0; l < spec.stats_layers.size(); ++l) {
    if (is_last(l, spec.stats_layers.size())) {
      const Tensor logits = conv2d(x, params.logit, Padding::kReflect);
      const Tensor feats =
          activate(conv2d(x, params.stats[l], Padding::kReflect), spec.stats_layers[l].activation);
      return global_weighted_average(feats, logits);
    }
    x = activate(conv2d(x, params.stats[l], Padding::kReflect), spec.stats_layers[l].activation);
  }
  return {};
}

MixCoefficients mix_coefficients(const StatsVector& stats, const PrefVector& prefs,
                                 const ModelParams& params, const TopologySpec& spec) {
  std::vector<double> x = concat_inputs(stats, prefs, spec);
  for (std::size_t l = 0; l < params.fcnn.size(); ++l) {
    x = dense_forward(params.fcnn[l], x);
    if (!is_last(l, params.fcnn.size())) x = activate_vector(x, spec.fcnn_activation);
  }
  return split_coefficients(x, spec);
}

ProcessWeights mix_kernels(const MixCoefficients& coeffs,
                           const std::vector<std::vector<KernelStack>>& bank,
                           std::uint64_t generation) {
  DSR_REQUIRE(coeffs.alpha.size() == bank.size() && coeffs.beta.size() == bank.size(),
              "mix: coefficient groups do not match bank layers");
  std::vector<KernelStack> layers;
  for (std::size_t j = 0; j < bank.size(); ++j) {
    DSR_REQUIRE(!bank[j].empty(), "mix: bank layer without candidates");
    DSR_REQUIRE(coeffs.alpha[j].size() == bank[j].size() &&
                    coeffs.beta[j].size() == bank[j].size(),
                "mix: coefficient count does not match m_j");
    const KernelStack& first = bank[j][0];
    KernelStack k(first.out_channels, first.in_channels, first.k_h, first.k_w);
    for (std::size_t i = 0; i < bank[j].size(); ++i) {
      const KernelStack& cand = bank[j][i];
      DSR_REQUIRE(cand.same_shape(first), "mix: candidate kernels differ in shape");
      const double a = coeffs.alpha[j][i];
      const double b = coeffs.beta[j][i];
      for (std::size_t t = 0; t < k.weights.size(); ++t) k.weights[t] += a * cand.weights[t];
      for (std::size_t t = 0; t < k.bias.size(); ++t) k.bias[t] += b * cand.bias[t];
    }
    layers.push_back(std::move(k));
  }
  return ProcessWeights(std::move(layers), generation);
}

ProcessWeights mix_weights(const StatsVector& stats, const PrefVector& prefs,
                           const ModelParams& params, const TopologySpec& spec,
                           std::uint64_t generation) {
  params.check_shapes(spec);
  return mix_kernels(mix_coefficients(stats, prefs, params, spec), params.bank, generation);
}

Tensor process_forward(const Tensor& frame, const ProcessWeights& w, const TopologySpec& spec) {
  check_frame(frame, 1, "process_forward");
  DSR_REQUIRE(w.layers().size() == spec.process_layers.size(),
              "process_forward: weight layer count does not match topology");
  Tensor x = frame;
  for (std::size_t j = 0; j < spec.process_layers.size(); ++j) {
    const auto& ls = spec.process_layers[j];
    const auto& k = w.layers()[j];
    DSR_REQUIRE(k.out_channels == ls.out_channels && k.k_h == ls.taps && k.k_w == ls.taps &&
                    k.in_channels == spec.process_in_channels(j),
                "process_forward: weights do not match process layer " + std::to_string(j));
    x = activate(conv2d(x, k, Padding::kReflect), ls.activation);
  }
  return add(pixel_shuffle(x, spec.R), bicubic_resize(frame, Ratio{spec.R, 1}));
}

Tensor sr_forward(const Tensor& frame, const ModelParams& params, const PrefVector& prefs,
                  const TopologySpec& spec) {
  const StatsVector s = stats_forward(frame, params, spec);
  const ProcessWeights w = mix_weights(s, prefs, params, spec, 1);
  return process_forward(frame, w, spec);
}

// --- recorded graph ---

SrGraph::SrGraph(const TopologySpec& spec) : spec_(spec) {
  spec_.validate();
  DSR_REQUIRE(spec_.input_channels == 1, "training graph expects single-channel frames");
}

Tensor SrGraph::forward(const Tensor& frame, const ModelParams& params, const PrefVector& prefs) {
  check_frame(frame, 1, "SrGraph::forward");
  params.check_shapes(spec_);
  params_ = params;
  stats_convs_.assign(spec_.stats_layers.size(), Conv2dOp(Padding::kReflect));
  stats_acts_.clear();
  for (const auto& l : spec_.stats_layers) stats_acts_.emplace_back(l.activation);
  logit_conv_ = Conv2dOp(Padding::kReflect);

  Tensor x = frame;
  for (std::size_t l = 0; l < spec_.stats_layers.size(); ++l) {
    if (is_last(l, spec_.stats_layers.size())) {
      logits_ = logit_conv_.forward(x, params_.logit);
      features_ = stats_acts_[l].forward(stats_convs_[l].forward(x, params_.stats[l]));
    } else {
      x = stats_acts_[l].forward(stats_convs_[l].forward(x, params_.stats[l]));
    }
  }
  const StatsVector s = global_weighted_average(features_, logits_);

  fcnn_inputs_.clear();
  fcnn_pre_.clear();
  std::vector<double> h = concat_inputs(s, prefs, spec_);
  for (std::size_t l = 0; l < params_.fcnn.size(); ++l) {
    fcnn_inputs_.push_back(h);
    std::vector<double> pre = dense_forward(params_.fcnn[l], h);
    fcnn_pre_.push_back(pre);
    if (!is_last(l, params_.fcnn.size())) pre = activate_vector(pre, spec_.fcnn_activation);
    h = std::move(pre);
  }
  fcnn_out_ = h;
  coeffs_ = split_coefficients(h, spec_);
  const ProcessWeights w = mix_kernels(coeffs_, params_.bank, 1);
  mixed_ = w.layers();

  proc_convs_.assign(spec_.process_layers.size(), Conv2dOp(Padding::kReflect));
  proc_acts_.clear();
  for (const auto& l : spec_.process_layers) proc_acts_.emplace_back(l.activation);
  x = frame;
  for (std::size_t j = 0; j < spec_.process_layers.size(); ++j)
    x = proc_acts_[j].forward(proc_convs_[j].forward(x, mixed_[j]));
  evaluated_ = true;
  trunk_ = pixel_shuffle(x, spec_.R);
  return add(trunk_, bicubic_resize(frame, Ratio{spec_.R, 1}));
}

std::uint64_t SrGraph::kink_signature() const {
  DSR_REQUIRE(evaluated_, "SrGraph::kink_signature before forward evaluation");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bit = [&h](bool b) {
    h ^= b ? 1u : 0u;
    h *= 0x100000001b3ULL;
  };
  auto scan = [&](const std::vector<ActivationOp>& ops) {
    for (const auto& op : ops) {
      if (op.activation().kind == Activation::Kind::kIdentity) continue;
      for (double v : op.saved_input()->data()) mix_bit(v > 0.0);
    }
  };
  scan(stats_acts_);
  scan(proc_acts_);
  if (spec_.fcnn_activation.kind != Activation::Kind::kIdentity)
    for (std::size_t l = 0; l + 1 < fcnn_pre_.size(); ++l)
      for (double v : fcnn_pre_[l]) mix_bit(v > 0.0);
  return h;
}

void SrGraph::backward(const Tensor& grad_out, ModelParams& grads) const {
  DSR_REQUIRE(evaluated_, "SrGraph adjoint requested before forward evaluation");
  grads.check_shapes(spec_);

  // Pixel flow. The bicubic residual carries no parameters.
  Tensor g = pixel_shuffle_backward(grad_out, spec_.R);
  std::vector<KernelStack> gmix(spec_.process_layers.size());
  for (std::size_t jj = spec_.process_layers.size(); jj-- > 0;) {
    g = proc_acts_[jj].backward(g);
    Conv2dGrads cg = proc_convs_[jj].backward(g, jj > 0);
    gmix[jj] = std::move(cg.kernel);
    if (jj > 0) g = std::move(cg.input);
  }

  // Weight engine: ker_j = sum_i alpha_ij ker_ij.
  std::vector<std::vector<double>> galpha(spec_.bank_size.size());
  std::vector<std::vector<double>> gbeta(spec_.bank_size.size());
  for (std::size_t j = 0; j < params_.bank.size(); ++j) {
    galpha[j].resize(params_.bank[j].size());
    gbeta[j].resize(params_.bank[j].size());
    for (std::size_t i = 0; i < params_.bank[j].size(); ++i) {
      const KernelStack& cand = params_.bank[j][i];
      KernelStack& gc = grads.bank[j][i];
      const double a = coeffs_.alpha[j][i];
      const double b = coeffs_.beta[j][i];
      for (std::size_t t = 0; t < gc.weights.size(); ++t) gc.weights[t] += a * gmix[j].weights[t];
      for (std::size_t t = 0; t < gc.bias.size(); ++t) gc.bias[t] += b * gmix[j].bias[t];
      galpha[j][i] = dot(gmix[j].weights, cand.weights);
      gbeta[j][i] = dot(gmix[j].bias, cand.bias);
    }
  }

  // Back to the raw FCNN output.
  std::vector<double> gz(fcnn_out_.size(), 0.0);
  auto scatter = [&](const std::vector<std::vector<double>>& gc,
                     const std::vector<std::vector<double>>& c, std::size_t base) {
    std::size_t k = base;
    for (std::size_t j = 0; j < gc.size(); ++j) {
      if (spec_.simplex_mixing) {
        const double s = dot(gc[j], c[j]);
        for (std::size_t i = 0; i < gc[j].size(); ++i) gz[k + i] += c[j][i] * (gc[j][i] - s);
      } else {
        for (std::size_t i = 0; i < gc[j].size(); ++i) gz[k + i] += gc[j][i];
      }
      k += gc[j].size();
    }
  };
  if (spec_.independent_bias_coeffs) {
    scatter(galpha, coeffs_.alpha, 0);
    scatter(gbeta, coeffs_.beta, static_cast<std::size_t>(spec_.coeff_count()));
  } else {
    for (std::size_t j = 0; j < galpha.size(); ++j)
      for (std::size_t i = 0; i < galpha[j].size(); ++i) galpha[j][i] += gbeta[j][i];
    scatter(galpha, coeffs_.alpha, 0);
  }

  std::vector<double> gh = gz;
  for (std::size_t ll = params_.fcnn.size(); ll-- > 0;) {
    const DenseLayer& layer = params_.fcnn[ll];
    DenseLayer& gl = grads.fcnn[ll];
    if (!is_last(ll, params_.fcnn.size())) {
      const double slope = spec_.fcnn_activation.kind == Activation::Kind::kLeakyRelu
                               ? spec_.fcnn_activation.slope
                               : 0.0;
      if (spec_.fcnn_activation.kind != Activation::Kind::kIdentity)
        for (std::size_t o = 0; o < gh.size(); ++o)
          if (!(fcnn_pre_[ll][o] > 0.0)) gh[o] *= slope;
    }
    const auto& in = fcnn_inputs_[ll];
    std::vector<double> gin(layer.in, 0.0);
    for (int o = 0; o < layer.out; ++o) {
      gl.bias[o] += gh[o];
      double* gw = gl.weights.data() + static_cast<std::size_t>(o) * layer.in;
      const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        gw[i] += gh[o] * in[i];
        gin[i] += w[i] * gh[o];
      }
    }
    gh = std::move(gin);
  }

  // Statistics network; preferences are inputs, not parameters.
  const std::span<const double> gstats(gh.data(), static_cast<std::size_t>(spec_.stats_dim()));
  GwaGrads gg = global_weighted_average_backward(features_, logits_, gstats);
  const std::size_t last = spec_.stats_layers.size() - 1;
  Tensor gx;
  {
    const bool need_input = last > 0;
    Conv2dGrads cl = logit_conv_.backward(gg.logits, need_input);
    for (std::size_t t = 0; t < cl.kernel.weights.size(); ++t)
      grads.logit.weights[t] += cl.kernel.weights[t];
    Conv2dGrads cf = stats_convs_[last].backward(stats_acts_[last].backward(gg.features), need_input);
    for (std::size_t t = 0; t < cf.kernel.weights.size(); ++t)
      grads.stats[last].weights[t] += cf.kernel.weights[t];
    for (std::size_t t = 0; t < cf.kernel.bias.size(); ++t)
      grads.stats[last].bias[t] += cf.kernel.bias[t];
    if (need_input) gx = add(cf.input, cl.input);
  }
  for (std::size_t l = last; l-- > 0;) {
    Conv2dGrads c = stats_convs_[l].backward(stats_acts_[l].backward(gx), l > 0);
    for (std::size_t t = 0; t < c.kernel.weights.size(); ++t)
      grads.stats[l].weights[t] += c.kernel.weights[t];
    for (std::size_t t = 0; t < c.kernel.bias.size(); ++t)
      grads.stats[l].bias[t] += c.kernel.bias[t];
    if (l > 0) gx = std::move(c.input);
  }
}

}  // namespace dsr
