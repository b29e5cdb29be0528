// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsr/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <regex>
#include <thread>

#include "dsr/accounting.hpp"
#include "dsr/errors.hpp"
#include "dsr/image_io.hpp"

namespace dsr {

using nlohmann::json;

Trigger Trigger::every_k_frames(long k) {
  DSR_REQUIRE(k >= 1, "trigger: K must be >= 1");
  Trigger t;
  t.kind = Kind::kEveryKFrames;
  t.k = k;
  return t;
}

Trigger Trigger::every_t_millis(double t, double fps) {
  DSR_REQUIRE(t > 0.0 && fps > 0.0, "trigger: period and fps must be positive");
  Trigger tr;
  tr.kind = Kind::kEveryTMillis;
  tr.t_millis = t;
  tr.fps = fps;
  return tr;
}

long Trigger::period_frames() const {
  if (kind == Kind::kEveryKFrames) {
    DSR_REQUIRE(k >= 1, "trigger: K must be >= 1");
    return k;
  }
  DSR_REQUIRE(t_millis > 0.0 && fps > 0.0, "trigger: period and fps must be positive");
  return std::max(1L, std::lround(t_millis * fps / 1000.0));
}

std::optional<Frame> VectorSource::next() {
  if (pos_ >= frames_.size()) return std::nullopt;
  Frame f{static_cast<long>(pos_), frames_[pos_]};
  ++pos_;
  return f;
}

void VectorSink::consume(long index, const Tensor& image, std::uint64_t generation) {
  indices.push_back(index);
  frames.push_back(image);
  generations.push_back(generation);
}

std::string frame_file_name(long index, const std::string& ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "frame_%06ld.%s", index, ext.c_str());
  return buf;
}

DirectorySource::DirectorySource(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("frame directory '" + dir.string() + "' not found");
  static const std::regex kName(R"(frame_(\d+)\.(pfm|png))");
  for (const auto& e : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (!std::regex_match(name, m, kName)) continue;
    const long idx = std::stol(m[1].str());
    // A PFM next to its PNG preview wins.
    auto it = std::find_if(files_.begin(), files_.end(), [&](const auto& p) { return p.first == idx; });
    if (it == files_.end()) {
      files_.emplace_back(idx, e.path());
    } else if (e.path().extension() == ".pfm") {
      it->second = e.path();
    }
  }
  std::sort(files_.begin(), files_.end());
}

std::optional<Frame> DirectorySource::next() {
  if (pos_ >= files_.size()) return std::nullopt;
  const auto& [idx, path] = files_[pos_++];
  return Frame{idx, read_image(path)};
}

DirectorySink::DirectorySink(const std::filesystem::path& dir, bool png_previews)
    : dir_(dir), png_(png_previews) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create '" + dir_.string() + "': " + ec.message());
}

void DirectorySink::consume(long index, const Tensor& image, std::uint64_t) {
  write_pfm(dir_ / frame_file_name(index, "pfm"), image);
  if (png_) write_png(dir_ / frame_file_name(index, "png"), image);
}

void SnapshotCell::publish(std::shared_ptr<const ProcessWeights> w) {
  DSR_REQUIRE(w != nullptr, "snapshot: null weights");
  {
    std::lock_guard<std::mutex> lock(mu_);
    DSR_REQUIRE(!current_ || w->generation() > current_->generation(),
                "snapshot: generation must increase (have " +
                    std::to_string(current_ ? current_->generation() : 0) + ", got " +
                    std::to_string(w->generation()) + ")");
    current_ = std::move(w);
  }
  cv_.notify_all();
}

std::shared_ptr<const ProcessWeights> SnapshotCell::current() const {
  std::lock_guard<std::mutex> lock(mu_);
  return current_;
}

std::uint64_t SnapshotCell::generation() const {
  std::lock_guard<std::mutex> lock(mu_);
  return current_ ? current_->generation() : 0;
}

std::shared_ptr<const ProcessWeights> SnapshotCell::wait_for(std::uint64_t g) const {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [&] { return current_ && current_->generation() >= g; });
  return current_;
}

json RunReport::to_json() const {
  json j = {{"frames", frames},
            {"indices", indices},
            {"generations", generations},
            {"config_invocations", config_invocations},
            {"config_frames", config_frames},
            {"K", period_frames},
            {"torn_frames", torn_frames},
            {"source_failed", source_failed},
            {"last_index", last_index},
            {"ops", {{"pixel_flow", pixel_ops}, {"control_flow", control_ops}}}};
  if (!error.empty()) j["error"] = error;
  return j;
}

std::shared_ptr<const ProcessWeights> configure(const Tensor& luma, const ModelParams& params,
                                                const TopologySpec& spec, const PrefVector& prefs,
                                                std::uint64_t generation) {
  const StatsVector s = stats_forward(luma, params, spec);
  return std::make_shared<const ProcessWeights>(mix_weights(s, prefs, params, spec, generation));
}

Tensor process_frame(const Tensor& frame, const ProcessWeights& w, const TopologySpec& spec) {
  if (frame.channels() == 1) return process_forward(frame, w, spec);
  DSR_REQUIRE(frame.channels() == 3, "process_frame: expected 1 or 3 channels");
  const Tensor ycc = rgb_to_ycbcr(frame);
  const Tensor y = process_forward(ycc.channel_slice(0, 1), w, spec);
  const Tensor chroma = bicubic_resize(ycc.channel_slice(1, 2), {spec.R, 1});
  Tensor out(y.height(), y.width(), 3);
  for (int r = 0; r < out.height(); ++r) {
    for (int q = 0; q < out.width(); ++q) {
      out(r, q, 0) = y(r, q, 0);
      out(r, q, 1) = chroma(r, q, 0);
      out(r, q, 2) = chroma(r, q, 1);
    }
  }
  return ycbcr_to_rgb(out);
}

namespace {

Tensor luma_of(const Tensor& frame) {
  return frame.channels() == 1 ? frame : to_luma(frame);
}

// Configuration flow on its own thread. Jobs carry the frame they were
// triggered on; the result is published once the pixel flow has reached the
// scheduled availability frame, which models the configured latency.
class ConfigWorker {
 public:
  ConfigWorker(const ModelParams& params, const TopologySpec& spec, const PrefVector& prefs,
               SnapshotCell& cell)
      : params_(params), spec_(spec), prefs_(prefs), cell_(cell), thread_([this] { run(); }) {}

  ~ConfigWorker() { stop(); }

  void submit(Tensor luma, std::uint64_t generation, long available_at) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      jobs_.push_back({std::move(luma), generation, available_at});
    }
    cv_.notify_all();
  }

  void advance_clock(long frame) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      clock_ = frame;
    }
    cv_.notify_all();
  }

  // Drains the queue (every submitted job still runs) and joins.
  void stop() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (stopping_) return;
      stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  void rethrow_if_failed() {
    std::lock_guard<std::mutex> lock(mu_);
    if (error_) std::rethrow_exception(error_);
  }

  bool failed() {
    std::lock_guard<std::mutex> lock(mu_);
    return error_ != nullptr;
  }

 private:
  struct Job {
    Tensor luma;
    std::uint64_t generation;
    long available_at;
  };

  void run() {
    for (;;) {
      Job job;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      std::shared_ptr<const ProcessWeights> w;
      try {
        w = configure(job.luma, params_, spec_, prefs_, job.generation);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu_);
        error_ = std::current_exception();
        stopping_ = true;
        jobs_.clear();
        return;
      }
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || clock_ >= job.available_at; });
        if (clock_ < job.available_at) continue;  // stream ended first
      }
      cell_.publish(std::move(w));
    }
  }

  const ModelParams& params_;
  const TopologySpec& spec_;
  const PrefVector& prefs_;
  SnapshotCell& cell_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Job> jobs_;
  long clock_ = -1;
  bool stopping_ = false;
  std::exception_ptr error_;
  std::thread thread_;
};

}  // namespace

RunReport run_pipeline(FrameSource& source, const ModelParams& params, const TopologySpec& spec,
                       const SchedulerConfig& sched, FrameSink& sink) {
  spec.validate();
  params.check_shapes(spec);
  DSR_REQUIRE(sched.config_delay_frames >= 0, "scheduler: config delay must be >= 0");
  DSR_REQUIRE(static_cast<int>(sched.prefs.values.size()) == spec.pref_dim,
              "scheduler: preference vector has " + std::to_string(sched.prefs.values.size()) +
                  " entries, topology expects " + std::to_string(spec.pref_dim));

  RunReport rep;
  rep.period_frames = sched.trigger.period_frames();
  const long k = rep.period_frames;
  const long delay = sched.config_delay_frames;
  const bool concurrent = sched.mode == SchedulerConfig::Mode::kConcurrent;

  SnapshotCell cell;
  std::unique_ptr<ConfigWorker> worker;
  if (concurrent) worker = std::make_unique<ConfigWorker>(params, spec, sched.prefs, cell);

  // Interleaved mode keeps finished configurations here until they are due.
  std::deque<std::pair<long, std::shared_ptr<const ProcessWeights>>> pending;
  // Generation each frame must see under the deterministic schedule.
  std::deque<std::pair<long, std::uint64_t>> due;
  std::uint64_t scheduled = 0;

  long position = 0;  // frames consumed, drives the trigger
  int frame_h = 0;
  int frame_w = 0;
  for (;;) {
    std::optional<Frame> frame;
    try {
      frame = source.next();
    } catch (const std::exception& e) {
      rep.source_failed = true;
      rep.error = e.what();
      break;
    }
    if (!frame) break;
    if (frame->index <= rep.last_index) {
      rep.source_failed = true;
      rep.error = "frame index " + std::to_string(frame->index) + " after " +
                  std::to_string(rep.last_index) + " is not increasing";
      break;
    }
    const Tensor& img = frame->image;
    DSR_REQUIRE(img.channels() == 1 || img.channels() == 3,
                "run_pipeline: frames must have 1 or 3 channels");
    if (rep.frames == 0) {
      frame_h = img.height();
      frame_w = img.width();
    }
    DSR_REQUIRE(img.height() == frame_h && img.width() == frame_w,
                "run_pipeline: frame size changed mid-stream");

    if (position % k == 0) {
      const std::uint64_t g = ++scheduled;
      const long avail = position == 0 ? 0 : position + delay;
      due.emplace_back(avail, g);
      rep.config_frames.push_back(frame->index);
      ++rep.config_invocations;
      if (concurrent) {
        worker->submit(luma_of(img), g, avail);
      } else {
        pending.emplace_back(avail, configure(luma_of(img), params, spec, sched.prefs, g));
      }
    }
    std::uint64_t required = 0;
    while (!due.empty() && due.front().first <= position) {
      required = due.front().second;
      due.pop_front();
    }

    std::shared_ptr<const ProcessWeights> w;
    if (concurrent) {
      worker->advance_clock(position);
      if (position == 0 || sched.lockstep) {
        // Cold start always waits; a failed worker would never publish.
        while (!(w = cell.current()) || (required != 0 && w->generation() < required)) {
          worker->rethrow_if_failed();
          std::this_thread::yield();
        }
      } else {
        w = cell.current();
      }
      worker->rethrow_if_failed();
    } else {
      while (!pending.empty() && pending.front().first <= position) {
        cell.publish(std::move(pending.front().second));
        pending.pop_front();
      }
      w = cell.current();
    }

    if (!w->verify()) ++rep.torn_frames;
    sink.consume(frame->index, process_frame(img, *w, spec), w->generation());
    rep.indices.push_back(frame->index);
    rep.generations.push_back(w->generation());
    rep.last_index = frame->index;
    ++rep.frames;
    ++position;
  }
  if (worker) {
    worker->stop();
    worker->rethrow_if_failed();
  }
  sink.flush();

  if (rep.frames > 0) {
    const OpsBreakdown b = count_ops(spec, frame_h, frame_w);
    rep.pixel_ops = b.pixel_ops_per_frame * static_cast<double>(rep.frames);
    rep.control_ops = b.control_ops_per_trigger * static_cast<double>(rep.config_invocations);
  }
  return rep;
}

}  // namespace dsr
