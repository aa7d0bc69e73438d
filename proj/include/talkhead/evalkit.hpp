#pragma once

#include <filesystem>
#include <vector>

#include "talkhead/image.hpp"
#include "talkhead/scene.hpp"

namespace talkhead {

using PoseTrack = std::vector<HeadPose>;

struct PoseMetrics {
    double landmark_distance = 0.0;  // D-L, percent of rig scale
    double velocity_distance = 0.0;  // D-V, percent of rig scale
    double rotation_deg = 0.0;       // D-Rot, mean absolute per-axis difference
    double position = 0.0;           // D-Pos, percent of rig scale
};

struct ImageMetrics {
    double l1 = 0.0;
    double mse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

inline constexpr double kPsnrCap = 100.0;
inline constexpr int kSsimWindow = 8;

// Landmarks are the rig's mean points posed by each track. Distances are
// normalised by FaceRig::scale() and reported as percentages.
PoseMetrics pose_metrics(const PoseTrack& predicted, const PoseTrack& truth, const FaceRig& rig);

// L1 and PSNR over all samples; SSIM averaged over every 8 x 8 window
// (stride 1) of every channel with C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2.
ImageMetrics image_metrics(const Image& a, const Image& b);

// One pose per line, either {"r": [...], "t": [...]} or a frames.jsonl
// record carrying those under "pose".
PoseTrack read_pose_track(const std::filesystem::path& path);

}  // namespace talkhead
