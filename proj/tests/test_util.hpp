// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit tests: random fixtures and a central-difference
// checker for scalar functions of a flat parameter vector.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include "dsr/rng.hpp"
#include "dsr/tensor.hpp"

namespace dsr::test {

inline Tensor random_tensor(Rng& rng, int h, int w, int c, double lo = -1.0, double hi = 1.0) {
  Tensor t(h, w, c);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline KernelStack random_kernel(Rng& rng, int out, int in, int kh, int kw) {
  KernelStack k(out, in, kh, kw);
  for (double& v : k.weights) v = rng.uniform(-1.0, 1.0);
  for (double& v : k.bias) v = rng.uniform(-1.0, 1.0);
  return k;
}

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-10});
}

/// Max relative error between `analytic` and central differences of f over
/// every entry of x (restored afterwards).
inline double fd_max_rel_error(std::span<double> x, std::span<const double> analytic,
                               const std::function<double()>& f, double eps = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f();
    x[i] = saved - eps;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

/// sum(a * b) over matching storage.
inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dsr_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace dsr::test
