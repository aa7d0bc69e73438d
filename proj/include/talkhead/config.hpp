#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "talkhead/dsp_frontend.hpp"
#include "talkhead/geometry.hpp"
#include "talkhead/manifold.hpp"
#include "talkhead/mouth_predictor.hpp"
#include "talkhead/pose_generator.hpp"

namespace talkhead {

struct PipelineConfig {
    AudioConfig audio;
    int k_neighbors = kDefaultNeighbors;
    int delay_frames = kDefaultDelayFrames;
    int fps = 60;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> weights_path;      // apc.*, mouth.*, pose.* tensors
    std::optional<std::filesystem::path> manifold_db_path;  // projection skipped when absent
    std::filesystem::path rig_path;
    std::optional<std::filesystem::path> pose_override_path;
    CameraIntrinsics camera;
    double billboard_alpha = 0.5;
    PoseDims pose;
    bool write_feature_maps = true;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

// Parses and validates a JSON config; relative paths resolve against
// `base_dir`. Every failure is reported as a ConfigError.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

// JSON schema of the config document.
const std::string& config_schema();

}  // namespace talkhead
