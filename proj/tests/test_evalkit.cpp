#include <cmath>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "talkhead/evalkit.hpp"
#include "talkhead/random.hpp"

using namespace talkhead;

namespace {

FaceRig default_rig() { return FaceRig::from_json_file(std::filesystem::path(TALKHEAD_DATA_DIR) / "default_rig.json"); }

PoseTrack random_track(int n, Rng& rng) {
    PoseTrack t(n);
    for (auto& p : t) {
        fill_uniform(p.r, rng, 0.3);
        fill_uniform(p.t, rng, 2.0);
    }
    return t;
}

Image random_image(int w, int h, int c, Rng& rng) {
    Image img(w, h, c);
    for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.uniform() * 256.0);
    return img;
}

}  // namespace

TEST_CASE("identical tracks score zero") {
    Rng rng(1);
    const PoseTrack t = random_track(5, rng);
    const PoseMetrics m = pose_metrics(t, t, default_rig());
    CHECK(m.landmark_distance == 0.0);
    CHECK(m.velocity_distance == 0.0);
    CHECK(m.rotation_deg == 0.0);
    CHECK(m.position == 0.0);
}

TEST_CASE("a one-degree offset on one axis averages to a third of a degree") {
    PoseTrack gt(4), pred(4);
    for (auto& p : pred) p.r[1] = std::numbers::pi / 180.0;
    const PoseMetrics m = pose_metrics(pred, gt, default_rig());
    CHECK(m.rotation_deg == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(m.position == 0.0);
    CHECK(m.velocity_distance == doctest::Approx(0.0));

    for (auto& p : pred) p.r[1] *= 2.0;
    CHECK(pose_metrics(pred, gt, default_rig()).rotation_deg == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("pose metrics agree with a direct loop") {
    Rng rng(2);
    const FaceRig rig = default_rig();
    const PoseTrack a = random_track(10, rng), b = random_track(10, rng);
    const PoseMetrics m = pose_metrics(a, b, rig);

    Vec3 lo = rig.mean_points.row(0).transpose(), hi = lo;
    for (int i = 0; i < 73; ++i)
        for (int c = 0; c < 3; ++c) lo[c] = std::min(lo[c], rig.mean_points(i, c)), hi[c] = std::max(hi[c], rig.mean_points(i, c));
    const double scale = (hi - lo).norm();

    auto posed = [&](const HeadPose& p, int i) {
        return Vec3(rotation_matrix(p.r) * rig.mean_points.row(i).transpose() + p.t);
    };
    double dl = 0, dv = 0, drot = 0, dpos = 0;
    for (int t = 0; t < 10; ++t) {
        for (int i = 0; i < 73; ++i) {
            dl += (posed(a[t], i) - posed(b[t], i)).norm() / 73.0;
            if (t > 0)
                dv += ((posed(a[t], i) - posed(a[t - 1], i)) - (posed(b[t], i) - posed(b[t - 1], i))).norm() / 73.0;
        }
        for (int c = 0; c < 3; ++c) drot += std::abs(a[t].r[c] - b[t].r[c]) * 180.0 / std::numbers::pi / 3.0;
        dpos += (a[t].t - b[t].t).norm();
    }
    CHECK(m.landmark_distance == doctest::Approx(100.0 * dl / 10.0 / scale).epsilon(1e-12));
    CHECK(m.velocity_distance == doctest::Approx(100.0 * dv / 9.0 / scale).epsilon(1e-12));
    CHECK(m.rotation_deg == doctest::Approx(drot / 10.0).epsilon(1e-12));
    CHECK(m.position == doctest::Approx(100.0 * dpos / 10.0 / scale).epsilon(1e-12));
}

TEST_CASE("pose metric preconditions") {
    Rng rng(3);
    const FaceRig rig = default_rig();
    CHECK_THROWS_AS(pose_metrics(random_track(3, rng), random_track(4, rng), rig), DimensionError);
    CHECK_THROWS_AS(pose_metrics(random_track(1, rng), random_track(1, rng), rig), DomainError);
}

TEST_CASE("identical images") {
    Rng rng(4);
    const Image a = random_image(20, 12, 1, rng);
    const ImageMetrics m = image_metrics(a, a);
    CHECK(m.l1 == 0.0);
    CHECK(m.mse == 0.0);
    CHECK(m.psnr == 100.0);
    CHECK(m.ssim == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unit offset gives 48.13 dB") {
    Rng rng(5);
    Image a = random_image(16, 16, 1, rng);
    for (auto& v : a.pixels) v = std::min<std::uint8_t>(v, 254);
    Image b = a;
    for (auto& v : b.pixels) ++v;
    const ImageMetrics m = image_metrics(a, b);
    CHECK(m.l1 == 1.0);
    CHECK(m.mse == 1.0);
    CHECK(m.psnr == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
    CHECK(m.psnr == doctest::Approx(48.13).epsilon(1e-4));
}

TEST_CASE("random 32x32 pair matches the direct formulas") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Image a = random_image(32, 32, 1, rng), b = random_image(32, 32, 1, rng);
        double l1 = 0, mse = 0;
        for (std::size_t i = 0; i < a.pixels.size(); ++i) {
            const double d = double(a.pixels[i]) - double(b.pixels[i]);
            l1 += std::abs(d) / 1024.0;
            mse += d * d / 1024.0;
        }
        const double ssim = oracle::mean_ssim(a, b);
        const ImageMetrics m = image_metrics(a, b);
        CHECK(std::abs(m.l1 - l1) < 1e-9);
        CHECK(std::abs(m.mse - mse) < 1e-9);
        CHECK(std::abs(m.psnr - 10.0 * std::log10(255.0 * 255.0 / mse)) < 1e-9);
        CHECK(std::abs(m.ssim - ssim) < 1e-6);

        const ImageMetrics r = image_metrics(b, a);
        CHECK(r.l1 == m.l1);
        CHECK(r.psnr == m.psnr);
        CHECK(std::abs(r.ssim - m.ssim) < 1e-15);
    }
}

TEST_CASE("image metric preconditions") {
    Rng rng(7);
    CHECK_THROWS_AS(image_metrics(random_image(8, 8, 1, rng), random_image(8, 9, 1, rng)), DimensionError);
    CHECK_THROWS_AS(image_metrics(random_image(8, 8, 1, rng), random_image(8, 8, 3, rng)), DimensionError);
    const Image rgb = random_image(9, 9, 3, rng);
    CHECK(image_metrics(rgb, rgb).ssim == doctest::Approx(1.0));
}

TEST_CASE("pose tracks from JSONL") {
    const auto path = std::filesystem::temp_directory_path() / "talkhead_test_track.jsonl";
    {
        std::ofstream out(path);
        out << R"({"r": [0.1, 0.2, 0.3], "t": [1, 2, 3]})" << "\n\n";
        out << R"({"frame_index": 1, "pose": {"r": [0, 0, 0], "t": [4, 5, 6]}, "mouth": []})" << "\n";
    }
    const PoseTrack t = read_pose_track(path);
    REQUIRE(t.size() == 2);
    CHECK(t[0].r[2] == 0.3);
    CHECK(t[1].t[0] == 4.0);
    {
        std::ofstream out(path);
        out << R"({"r": [0.1, 0.2], "t": [1, 2, 3]})" << "\n";
    }
    try {
        read_pose_track(path);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":1:") != std::string::npos);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_pose_track(path), DataError);
}
