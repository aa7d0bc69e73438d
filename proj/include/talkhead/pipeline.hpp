#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "talkhead/apc_encoder.hpp"
#include "talkhead/config.hpp"
#include "talkhead/evalkit.hpp"
#include "talkhead/manifold.hpp"
#include "talkhead/mouth_predictor.hpp"
#include "talkhead/pose_generator.hpp"
#include "talkhead/scene.hpp"

namespace talkhead {

// Wall-clock microseconds spent on one video frame, per stage.
struct StageTimings {
    double dsp_us = 0.0;
    double apc_us = 0.0;
    double manifold_us = 0.0;
    double mouth_us = 0.0;
    double pose_us = 0.0;
    double compose_us = 0.0;
    // Thread CPU time of the projection; excludes time the thread was descheduled.
    double manifold_cpu_us = 0.0;

    double total_us() const { return dsp_us + apc_us + manifold_us + mouth_us + pose_us + compose_us; }
};

struct FrameOutput {
    std::int64_t frame_index = 0;
    HeadPose pose;
    MouthDisplacement mouth;
    FeatureMap map;
    StageTimings timings;
};

struct EngineComponents {
    ApcModel apc;
    std::optional<ReprDatabase> db;
    MouthModel mouth;
    PoseGenerator pose;
    FaceRig rig;
    std::optional<PoseTrack> pose_override;
};

// Loads every component named by the config. Missing weights fall back to a
// fixed-seed random initialisation (independent of the sampling seed).
EngineComponents load_components(const PipelineConfig& config);

// Streaming engine. Mel frames run at 120 Hz and every APC step is taken;
// video frame v is driven by the representation at mel index 2v + 1. Frame v
// is released once the representation for v + delay has been consumed and
// the audio covers video time v + delay + 1; after finish() the stream is
// truncated to floor(duration * fps) - delay frames.
class Engine {
public:
    explicit Engine(const PipelineConfig& config);
    Engine(const PipelineConfig& config, EngineComponents components);

    void push_audio(std::span<const float> samples);
    void finish();
    std::optional<FrameOutput> poll_frame();

    // Samples that must be pushed before poll_frame() can return frame `index`.
    std::int64_t samples_needed_for_frame(std::int64_t index) const;
    // Video frames the stream will produce once finished after `n_samples`.
    std::int64_t total_frames_for_samples(std::int64_t n_samples) const;
    double algorithmic_latency_ms() const;

    const PipelineConfig& config() const { return config_; }
    std::int64_t samples_pushed() const { return mel_.samples_pushed(); }
    bool finished() const { return mel_.finished(); }

    // Frames computed but not yet polled plus per-frame bookkeeping.
    std::size_t buffered_frames() const { return poses_.size(); }

private:
    void consume_mel(std::vector<MelFrame> frames, double dsp_us);
    void process_video_frame(std::int64_t v, const VectorXf& repr, StageTimings timings);
    bool releasable(std::int64_t u) const;

    PipelineConfig config_;
    EngineComponents parts_;
    Billboard billboard_;
    MelStream mel_;
    Rng rng_;

    std::int64_t next_emit_ = 0;
    std::map<std::int64_t, HeadPose> poses_;
    std::map<std::int64_t, StageTimings> timings_;
    std::map<std::int64_t, MouthDisplacement> mouths_;
    double pending_apc_us_ = 0.0;
    double pending_dsp_us_ = 0.0;
};

// Writes frame_%06d.pgm and frames.jsonl into a directory.
class FrameWriter {
public:
    FrameWriter(const std::filesystem::path& out_dir, bool write_maps);
    void write(const FrameOutput& frame);
    std::int64_t frames_written() const { return count_; }

private:
    std::filesystem::path dir_;
    bool write_maps_;
    std::ofstream jsonl_;
    std::int64_t count_ = 0;
};

std::string frame_json_line(const FrameOutput& frame);

struct StageSummary {
    double mean_us = 0.0;
    double p50_us = 0.0;
    double p99_us = 0.0;
    double max_us = 0.0;
};

struct RunReport {
    std::int64_t frames = 0;
    double audio_seconds = 0.0;
    double wall_seconds = 0.0;
    double frames_per_second = 0.0;
    double algorithmic_latency_ms = 0.0;
    std::map<std::string, StageSummary> stages;  // includes "stage_sum"

    std::string to_json() const;
};

RunReport summarize(const std::vector<StageTimings>& timings);

// Offline inference over a WAV file; writes frames, frames.jsonl and
// timings.json into out_dir.
RunReport run_offline(const std::filesystem::path& wav, const PipelineConfig& config,
                      const std::filesystem::path& out_dir);
RunReport run_offline(std::span<const float> audio, Engine& engine, const std::filesystem::path& out_dir);

// Live mode over raw s16le mono PCM read from a stream.
RunReport run_stream(std::istream& pcm, const PipelineConfig& config, const std::filesystem::path& out_dir);

}  // namespace talkhead
