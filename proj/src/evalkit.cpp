#include "talkhead/evalkit.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

namespace talkhead {

PoseMetrics pose_metrics(const PoseTrack& predicted, const PoseTrack& truth, const FaceRig& rig) {
    if (predicted.size() != truth.size())
        throw DimensionError("pose_metrics: tracks differ in length (" + std::to_string(predicted.size()) + " vs " +
                             std::to_string(truth.size()) + ")");
    if (predicted.size() < 2) throw DomainError("pose_metrics: tracks need at least 2 frames");
    const double scale = rig.scale();
    if (!(scale > 0.0)) throw DataError("pose_metrics: rig has zero extent");

    const auto n = predicted.size();
    const auto landmarks = static_cast<double>(rig.mean_points.rows());
    double dl = 0.0, dv = 0.0, drot = 0.0, dpos = 0.0;
    Points3 prev_p, prev_g;
    for (std::size_t t = 0; t < n; ++t) {
        const Points3 p = apply_pose(rig.mean_points, predicted[t]);
        const Points3 g = apply_pose(rig.mean_points, truth[t]);
        dl += (p - g).rowwise().norm().sum() / landmarks;
        if (t > 0) dv += ((p - prev_p) - (g - prev_g)).rowwise().norm().sum() / landmarks;
        drot += (predicted[t].r - truth[t].r).cwiseAbs().sum() / 3.0;
        dpos += (predicted[t].t - truth[t].t).norm();
        prev_p = p;
        prev_g = g;
    }
    PoseMetrics m;
    m.landmark_distance = 100.0 * dl / static_cast<double>(n) / scale;
    m.velocity_distance = 100.0 * dv / static_cast<double>(n - 1) / scale;
    m.rotation_deg = drot / static_cast<double>(n) * 180.0 / std::numbers::pi;
    m.position = 100.0 * dpos / static_cast<double>(n) / scale;
    return m;
}

namespace {

double window_ssim(const Image& a, const Image& b, int x0, int y0, int w, int h, int c) {
    constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
    const double count = static_cast<double>(w) * h;
    double ma = 0.0, mb = 0.0;
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) {
            ma += a.at(x, y, c);
            mb += b.at(x, y, c);
        }
    ma /= count;
    mb /= count;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) {
            const double da = a.at(x, y, c) - ma;
            const double db = b.at(x, y, c) - mb;
            va += da * da;
            vb += db * db;
            cov += da * db;
        }
    va /= count;
    vb /= count;
    cov /= count;
    return ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
}

}  // namespace

ImageMetrics image_metrics(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw DimensionError("image_metrics: images differ in size (" + std::to_string(a.width) + "x" +
                             std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                             std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                             std::to_string(b.channels) + ")");
    if (a.pixels.empty()) throw DimensionError("image_metrics: empty images");

    ImageMetrics m;
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const auto n = static_cast<double>(a.pixels.size());
    m.l1 = abs_sum / n;
    m.mse = sq_sum / n;
    m.psnr = m.mse == 0.0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / m.mse));

    // Images smaller than the window are scored as a single window.
    const int ww = std::min(kSsimWindow, a.width);
    const int wh = std::min(kSsimWindow, a.height);
    double ssim_sum = 0.0;
    long long windows = 0;
    for (int c = 0; c < a.channels; ++c)
        for (int y = 0; y + wh <= a.height; ++y)
            for (int x = 0; x + ww <= a.width; ++x) {
                ssim_sum += window_ssim(a, b, x, y, ww, wh, c);
                ++windows;
            }
    m.ssim = ssim_sum / static_cast<double>(windows);
    return m;
}

PoseTrack read_pose_track(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open pose track " + path.string());
    PoseTrack track;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            const auto& p = j.contains("pose") ? j.at("pose") : j;
            const auto r = p.at("r").get<std::vector<double>>();
            const auto t = p.at("t").get<std::vector<double>>();
            if (r.size() != 3 || t.size() != 3) throw DataError("r and t must have 3 components");
            HeadPose pose{Vec3(r[0], r[1], r[2]), Vec3(t[0], t[1], t[2])};
            if (!pose.r.allFinite() || !pose.t.allFinite()) throw DataError("non-finite pose");
            track.push_back(pose);
        } catch (const std::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (track.empty()) throw DataError("pose track " + path.string() + " is empty");
    return track;
}

}  // namespace talkhead
