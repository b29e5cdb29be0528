// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dsr/srnet.hpp"
#include "json.hpp"

namespace dsr {

struct Trigger {
  enum class Kind { kEveryKFrames, kEveryTMillis };
  Kind kind = Kind::kEveryKFrames;
  long k = 10;
  double t_millis = 500.0;
  double fps = 30.0;  // maps the millisecond period onto frames

  static Trigger every_k_frames(long k);
  static Trigger every_t_millis(double t, double fps);
  /// Trigger period in frames (>= 1).
  long period_frames() const;
};

struct SchedulerConfig {
  enum class Mode { kInterleaved, kConcurrent };

  Trigger trigger;
  PrefVector prefs;
  Mode mode = Mode::kInterleaved;
  /// Config computed on frame t becomes usable from frame t + delay. The
  /// first configuration is always ready for frame 0.
  long config_delay_frames = 0;
  /// Concurrent mode only: wait for the scheduled snapshot (deterministic,
  /// identical to interleaved) or never wait and use whatever is published.
  bool lockstep = true;
};

struct Frame {
  long index = 0;
  Tensor image;  // 1 channel (luma) or 3 channels (RGB)
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next frame, or nullopt at end of stream. May throw on source failure.
  virtual std::optional<Frame> next() = 0;
};

class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void consume(long index, const Tensor& image, std::uint64_t generation) = 0;
  virtual void flush() {}
};

class VectorSource : public FrameSource {
 public:
  explicit VectorSource(std::vector<Tensor> frames) : frames_(std::move(frames)) {}
  std::optional<Frame> next() override;

 private:
  std::vector<Tensor> frames_;
  std::size_t pos_ = 0;
};

class VectorSink : public FrameSink {
 public:
  void consume(long index, const Tensor& image, std::uint64_t generation) override;
  std::vector<long> indices;
  std::vector<Tensor> frames;
  std::vector<std::uint64_t> generations;
};

/// frame_%06d.pfm / .png files, ascending by index.
class DirectorySource : public FrameSource {
 public:
  explicit DirectorySource(const std::filesystem::path& dir);
  std::optional<Frame> next() override;
  std::size_t size() const { return files_.size(); }

 private:
  std::vector<std::pair<long, std::filesystem::path>> files_;
  std::size_t pos_ = 0;
};

/// Writes frame_%06d.pfm (and optionally .png previews).
class DirectorySink : public FrameSink {
 public:
  DirectorySink(const std::filesystem::path& dir, bool png_previews);
  void consume(long index, const Tensor& image, std::uint64_t generation) override;

 private:
  std::filesystem::path dir_;
  bool png_;
};

std::string frame_file_name(long index, const std::string& ext);

/// The single piece of state shared by the two flows: an atomically replaced,
/// immutable weight snapshot with strictly increasing generations.
class SnapshotCell {
 public:
  /// Throws ContractViolation when the generation does not increase.
  void publish(std::shared_ptr<const ProcessWeights> w);
  std::shared_ptr<const ProcessWeights> current() const;
  std::uint64_t generation() const;
  /// Blocks until a snapshot with generation >= g is present.
  std::shared_ptr<const ProcessWeights> wait_for(std::uint64_t g) const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::shared_ptr<const ProcessWeights> current_;
};

struct RunReport {
  long frames = 0;
  std::vector<long> indices;
  std::vector<std::uint64_t> generations;  // snapshot used per output frame
  long config_invocations = 0;
  std::vector<long> config_frames;         // frame index each config ran on
  long torn_frames = 0;
  bool source_failed = false;
  long last_index = -1;
  std::string error;
  long period_frames = 1;
  double pixel_ops = 0.0;
  double control_ops = 0.0;

  nlohmann::json to_json() const;
};

/// Pixel flow on every frame, configuration flow on frame 0 and every trigger
/// point. Luma goes through the process CNN, chroma is upscaled bicubically.
RunReport run_pipeline(FrameSource& source, const ModelParams& params, const TopologySpec& spec,
                       const SchedulerConfig& sched, FrameSink& sink);

/// The configuration flow on one frame: stats_forward + mix_weights.
std::shared_ptr<const ProcessWeights> configure(const Tensor& luma, const ModelParams& params,
                                                const TopologySpec& spec, const PrefVector& prefs,
                                                std::uint64_t generation);

/// The pixel flow on one frame (any channel count handled as above).
Tensor process_frame(const Tensor& frame, const ProcessWeights& w, const TopologySpec& spec);

}  // namespace dsr
