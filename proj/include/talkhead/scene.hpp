#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "talkhead/geometry.hpp"
#include "talkhead/image.hpp"
#include "talkhead/mouth_predictor.hpp"

namespace talkhead {

inline constexpr int kFeatureMapSize = 512;

using Polyline = std::vector<int>;

// Upper-body proxy: a flat set of shoulder points at a common depth that
// follows a fraction of the head translation and never rotates.
struct Billboard {
    Points3 points;        // base positions, camera space; z == depth0 for every row
    double depth0 = 0.0;   // average depth of the supplied points
    double alpha = 0.5;

    // Flattens `points` onto their average depth.
    static Billboard from_points(const Points3& points, double alpha = 0.5);
    void validate() const;
};

Points3 billboard_positions(const Billboard& bb, const HeadPose& pose);

struct FaceRig {
    Points3 mean_points;                        // 73 x 3, object space
    std::vector<int> mouth_indices;             // 25 rows of mean_points driven by audio
    std::vector<Polyline> topology;             // drawing order over landmark indices
    std::vector<std::vector<Points3>> static_clips;  // recorded non-mouth motion, 60 fps
    Vec3 rest_translation = Vec3(0.0, 0.0, 60.0);    // camera-space placement of the object origin
    Billboard billboard;

    void validate() const;

    // Bounding-box diagonal of the mean landmarks.
    double scale() const;

    static FaceRig from_json_file(const std::filesystem::path& path);
    static FaceRig from_json_text(const std::string& text);
};

inline constexpr int kStaticSegmentFrames = 240;
inline constexpr int kStaticCrossfadeFrames = 30;

// Non-mouth landmark configuration for a video frame: the rig's static clips
// play in turn for 4 s each (looping inside a clip), with a linear cross-fade
// over the first 0.5 s of every new clip. Without clips the mean points are used.
Points3 static_sample(const FaceRig& rig, std::int64_t frame_index);

struct FeatureMap {
    Image pixels{kFeatureMapSize, kFeatureMapSize, 1};
    Points2 points2d;
};

// Pixel coordinates rounded to the nearest pixel center.
std::vector<std::array<int, 2>> bresenham(int x0, int y0, int x1, int y1);

// White one-pixel polylines on black. Segments are drawn with integer
// Bresenham; pixels outside the image are dropped.
Image rasterize(const Points2& points2d, const std::vector<Polyline>& topology, int width = kFeatureMapSize,
                int height = kFeatureMapSize);

struct CandidateRecord {
    double mouth_area = 0.0;
    double rot_x = 0.0;
    double rot_y = 0.0;
};

// Four reference frames: the 100th smallest mouth area, the 100th largest,
// then the records nearest to two distinct centres of a uniform partition of
// the (rot_x, rot_y) ranges. Ties go to the lower index.
std::array<int, 4> select_candidates(const std::vector<CandidateRecord>& records);

// Mouth points = mean + delta, other landmarks from the static sample; the
// face is posed, placed at the rig's rest translation, projected together
// with the billboard and drawn with the rig topology plus a billboard line.
FeatureMap compose_frame(const FaceRig& rig, const MouthDisplacement& mouth, const Points3& static_sample,
                         const HeadPose& pose, const Billboard& bb, const CameraIntrinsics& cam);

// Rig topology extended with the billboard polyline (indices after the face).
std::vector<Polyline> full_topology(const FaceRig& rig, const Billboard& bb);

}  // namespace talkhead
