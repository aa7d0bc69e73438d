#include "talkhead/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace talkhead {

Billboard Billboard::from_points(const Points3& points, double alpha) {
    Billboard bb;
    bb.points = points;
    bb.alpha = alpha;
    bb.depth0 = points.rows() > 0 ? points.col(2).mean() : 0.0;
    bb.points.col(2).setConstant(bb.depth0);
    bb.validate();
    return bb;
}

void Billboard::validate() const {
    if (points.rows() < 2) throw DataError("billboard needs at least 2 shoulder points");
    if (!(depth0 > 0.0)) throw DataError("billboard depth must be positive");
    if (!points.allFinite() || !std::isfinite(alpha)) throw DataError("billboard values must be finite");
}

Points3 billboard_positions(const Billboard& bb, const HeadPose& pose) {
    Points3 out = bb.points;
    out.rowwise() += (bb.alpha * pose.t).transpose();
    return out;
}

void FaceRig::validate() const {
    if (mean_points.rows() != kFaceLandmarks)
        throw DataError("rig must have " + std::to_string(kFaceLandmarks) + " landmarks, got " +
                        std::to_string(mean_points.rows()));
    if (!mean_points.allFinite()) throw DataError("rig landmarks must be finite");
    if (static_cast<int>(mouth_indices.size()) != kMouthPoints)
        throw DataError("rig must list " + std::to_string(kMouthPoints) + " mouth indices");
    std::set<int> seen;
    for (int i : mouth_indices) {
        if (i < 0 || i >= kFaceLandmarks) throw DataError("rig mouth index " + std::to_string(i) + " out of range");
        if (!seen.insert(i).second) throw DataError("rig mouth index " + std::to_string(i) + " repeated");
    }
    for (const auto& line : topology)
        for (int i : line)
            if (i < 0 || i >= kFaceLandmarks)
                throw DataError("rig topology index " + std::to_string(i) + " out of range");
    for (const auto& clip : static_clips) {
        if (clip.empty()) throw DataError("rig static clip is empty");
        for (const auto& frame : clip)
            if (frame.rows() != kFaceLandmarks || !frame.allFinite())
                throw DataError("rig static clip frames must be finite 73 x 3 landmark sets");
    }
    if (!rest_translation.allFinite()) throw DataError("rig rest_translation must be finite");
    billboard.validate();
}

double FaceRig::scale() const {
    const Vec3 lo = mean_points.colwise().minCoeff().transpose();
    const Vec3 hi = mean_points.colwise().maxCoeff().transpose();
    return (hi - lo).norm();
}

namespace {

Points3 points_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw DataError(std::string(what) + " must be an array of [x, y, z]");
    Points3 p(static_cast<Eigen::Index>(j.size()), 3);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& row = j[i];
        if (!row.is_array() || row.size() != 3) throw DataError(std::string(what) + " rows must be [x, y, z]");
        for (int c = 0; c < 3; ++c) p(static_cast<Eigen::Index>(i), c) = row[c].get<double>();
    }
    return p;
}

}  // namespace

FaceRig FaceRig::from_json_text(const std::string& text) {
    FaceRig rig;
    try {
        const auto j = nlohmann::json::parse(text);
        rig.mean_points = points_from_json(j.at("landmarks"), "landmarks");
        rig.mouth_indices = j.at("mouth_indices").get<std::vector<int>>();
        rig.topology = j.at("topology").get<std::vector<Polyline>>();
        if (j.contains("rest_translation")) {
            const auto t = j.at("rest_translation").get<std::vector<double>>();
            if (t.size() != 3) throw DataError("rest_translation must have 3 components");
            rig.rest_translation = Vec3(t[0], t[1], t[2]);
        }
        if (j.contains("static_clips"))
            for (const auto& clip : j.at("static_clips")) {
                std::vector<Points3> frames;
                for (const auto& frame : clip) frames.push_back(points_from_json(frame, "static clip frame"));
                rig.static_clips.push_back(std::move(frames));
            }
        const auto& bb = j.at("billboard");
        rig.billboard = Billboard::from_points(points_from_json(bb.at("points"), "billboard points"),
                                               bb.value("alpha", 0.5));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("rig: ") + e.what());
    }
    rig.validate();
    return rig;
}

FaceRig FaceRig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open rig file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return from_json_text(ss.str());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

namespace {

Points3 clip_frame(const FaceRig& rig, std::size_t clip, std::int64_t local) {
    const auto& frames = rig.static_clips[clip];
    return frames[static_cast<std::size_t>(local % static_cast<std::int64_t>(frames.size()))];
}

}  // namespace

Points3 static_sample(const FaceRig& rig, std::int64_t frame_index) {
    const auto& clips = rig.static_clips;
    if (clips.empty()) return rig.mean_points;
    const std::int64_t segment = frame_index / kStaticSegmentFrames;
    const std::int64_t local = frame_index % kStaticSegmentFrames;
    const auto n = static_cast<std::int64_t>(clips.size());
    Points3 current = clip_frame(rig, static_cast<std::size_t>(segment % n), local);
    if (segment == 0 || local >= kStaticCrossfadeFrames || n == 1) return current;
    const Points3 previous = clip_frame(rig, static_cast<std::size_t>((segment - 1) % n), kStaticSegmentFrames + local);
    const double w = static_cast<double>(local + 1) / (kStaticCrossfadeFrames + 1);
    return (1.0 - w) * previous + w * current;
}

std::vector<std::array<int, 2>> bresenham(int x0, int y0, int x1, int y1) {
    std::vector<std::array<int, 2>> out;
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    out.reserve(static_cast<std::size_t>(std::max(dx, -dy)) + 1);
    for (;;) {
        out.push_back({x0, y0});
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
    return out;
}

namespace {

constexpr double kClipMargin = 4096.0;

// Liang-Barsky clip of the segment against [lo_x, hi_x] x [lo_y, hi_y].
bool clip_segment(double& x0, double& y0, double& x1, double& y1, double lo_x, double hi_x, double lo_y, double hi_y) {
    double t0 = 0.0, t1 = 1.0;
    const double dx = x1 - x0, dy = y1 - y0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {x0 - lo_x, hi_x - x0, y0 - lo_y, hi_y - y0};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return false;
            continue;
        }
        const double t = q[i] / p[i];
        if (p[i] < 0.0) {
            if (t > t1) return false;
            t0 = std::max(t0, t);
        } else {
            if (t < t0) return false;
            t1 = std::min(t1, t);
        }
    }
    const double nx0 = x0 + t0 * dx, ny0 = y0 + t0 * dy;
    const double nx1 = x0 + t1 * dx, ny1 = y0 + t1 * dy;
    x0 = nx0, y0 = ny0, x1 = nx1, y1 = ny1;
    return true;
}

int to_pixel(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

Image rasterize(const Points2& points2d, const std::vector<Polyline>& topology, int width, int height) {
    Image img(width, height, 1, 0);
    const double lo_x = -kClipMargin, hi_x = width - 1 + kClipMargin;
    const double lo_y = -kClipMargin, hi_y = height - 1 + kClipMargin;
    auto draw = [&](double x0, double y0, double x1, double y1) {
        if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(x1) || !std::isfinite(y1)) return;
        if (!clip_segment(x0, y0, x1, y1, lo_x, hi_x, lo_y, hi_y)) return;
        for (const auto& [x, y] : bresenham(to_pixel(x0), to_pixel(y0), to_pixel(x1), to_pixel(y1)))
            if (x >= 0 && x < width && y >= 0 && y < height) img.at(x, y) = 255;
    };
    for (const auto& line : topology) {
        for (int i : line)
            if (i < 0 || i >= points2d.rows())
                throw DataError("rasterize: topology index " + std::to_string(i) + " out of range");
        if (line.size() == 1) draw(points2d(line[0], 0), points2d(line[0], 1), points2d(line[0], 0), points2d(line[0], 1));
        for (std::size_t k = 1; k < line.size(); ++k)
            draw(points2d(line[k - 1], 0), points2d(line[k - 1], 1), points2d(line[k], 0), points2d(line[k], 1));
    }
    return img;
}

std::array<int, 4> select_candidates(const std::vector<CandidateRecord>& records) {
    constexpr std::size_t kMinRecords = 200;
    constexpr std::size_t kRank = 100;
    if (records.size() < kMinRecords)
        throw SelectionError("select_candidates: need at least " + std::to_string(kMinRecords) + " records, got " +
                             std::to_string(records.size()));
    std::vector<int> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return records[a].mouth_area < records[b].mouth_area; });

    std::array<int, 4> chosen{};
    chosen[0] = order[kRank - 1];
    chosen[1] = order[records.size() - kRank];

    double min_x = records[0].rot_x, max_x = min_x, min_y = records[0].rot_y, max_y = min_y;
    for (const auto& r : records) {
        min_x = std::min(min_x, r.rot_x), max_x = std::max(max_x, r.rot_x);
        min_y = std::min(min_y, r.rot_y), max_y = std::max(max_y, r.rot_y);
    }
    // Two intervals per axis; the low/low and high/high cell centres.
    for (int k = 0; k < 2; ++k) {
        const double cx = min_x + (k + 0.5) * (max_x - min_x) / 2.0;
        const double cy = min_y + (k + 0.5) * (max_y - min_y) / 2.0;
        int best = -1;
        double best_d = 0.0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const int idx = static_cast<int>(i);
            if (std::find(chosen.begin(), chosen.begin() + 2 + k, idx) != chosen.begin() + 2 + k) continue;
            const double d = std::hypot(records[i].rot_x - cx, records[i].rot_y - cy);
            if (best < 0 || d < best_d) best = idx, best_d = d;
        }
        chosen[2 + k] = best;
    }
    return chosen;
}

std::vector<Polyline> full_topology(const FaceRig& rig, const Billboard& bb) {
    std::vector<Polyline> topo = rig.topology;
    Polyline shoulders(static_cast<std::size_t>(bb.points.rows()));
    std::iota(shoulders.begin(), shoulders.end(), kFaceLandmarks);
    topo.push_back(std::move(shoulders));
    return topo;
}

FeatureMap compose_frame(const FaceRig& rig, const MouthDisplacement& mouth, const Points3& static_sample,
                         const HeadPose& pose, const Billboard& bb, const CameraIntrinsics& cam) {
    check_size(static_sample.rows(), kFaceLandmarks, "compose_frame static sample");
    Points3 face = static_sample;
    for (int i = 0; i < kMouthPoints; ++i) {
        const int idx = rig.mouth_indices[static_cast<std::size_t>(i)];
        face.row(idx) = rig.mean_points.row(idx) + mouth.delta.row(i);
    }
    Points3 camera_face = apply_pose(face, pose);
    camera_face.rowwise() += rig.rest_translation.transpose();

    FeatureMap map;
    map.points2d.resize(kFaceLandmarks + bb.points.rows(), 2);
    map.points2d.topRows(kFaceLandmarks) = project(camera_face, cam);
    map.points2d.bottomRows(bb.points.rows()) = project(billboard_positions(bb, pose), cam);
    map.pixels = rasterize(map.points2d, full_topology(rig, bb));
    return map;
}

}  // namespace talkhead
