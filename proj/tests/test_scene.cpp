#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "talkhead/random.hpp"
#include "talkhead/scene.hpp"

using namespace talkhead;

namespace {

const std::filesystem::path kRigPath = std::filesystem::path(TALKHEAD_DATA_DIR) / "default_rig.json";
const std::filesystem::path kGoldenPath = std::filesystem::path(TALKHEAD_TEST_DIR) / "golden" / "zero_pose.pgm";

std::set<std::pair<int, int>> lit(const Image& img) {
    std::set<std::pair<int, int>> out;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.at(x, y) != 0) out.insert({x, y});
    return out;
}

Image draw_segment(double x0, double y0, double x1, double y1, int w = 64, int h = 64) {
    Points2 p(2, 2);
    p << x0, y0, x1, y1;
    return rasterize(p, {{0, 1}}, w, h);
}

FaceRig rig_without_clips() {
    FaceRig rig = FaceRig::from_json_file(kRigPath);
    rig.static_clips.clear();
    return rig;
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("billboard follows half the head translation") {
    Points3 pts(3, 3);
    pts << -10, 12, 62, 0, 13, 64, 10, 12, 66;
    const Billboard bb = Billboard::from_points(pts);
    CHECK(bb.alpha == 0.5);
    CHECK(bb.depth0 == doctest::Approx(64.0));
    CHECK(bb.points.col(2).isConstant(64.0));

    CHECK(billboard_positions(bb, HeadPose{}) == bb.points);
    const Points3 moved = billboard_positions(bb, HeadPose{Vec3(0.3, -0.2, 0.1), Vec3(2, 0, 0)});
    CHECK((moved.col(0) - bb.points.col(0)).isConstant(1.0));
    CHECK(moved.rightCols(2) == bb.points.rightCols(2));
}

TEST_CASE("rasterizer closed forms") {
    CHECK(lit(rasterize(Points2(0, 2), {}, 32, 32)).empty());
    const auto row = lit(draw_segment(10, 20, 20, 20));
    CHECK(row.size() == 11);
    for (int x = 10; x <= 20; ++x) CHECK(row.count({x, 20}) == 1);

    const std::vector<std::array<int, 2>> table = {{0, 0}, {1, 1}, {2, 1}, {3, 2}, {4, 2}, {5, 3}};
    CHECK(bresenham(0, 0, 5, 3) == table);
    std::set<std::pair<int, int>> want;
    for (const auto& [x, y] : table) want.insert({x, y});
    CHECK(lit(draw_segment(0, 0, 5, 3)) == want);
    CHECK(lit(draw_segment(0.4, -0.4, 5.2, 2.6)) == want);
}

TEST_CASE("rasterizer is mirror symmetric") {
    Rng rng(1);
    const int w = 64;
    for (int trial = 0; trial < 200; ++trial) {
        const int x0 = static_cast<int>(rng.uniform() * w), x1 = static_cast<int>(rng.uniform() * w);
        const int y0 = static_cast<int>(rng.uniform() * w), y1 = static_cast<int>(rng.uniform() * w);
        const auto a = lit(draw_segment(x0, y0, x1, y1));
        std::set<std::pair<int, int>> mirrored;
        for (const auto& [x, y] : lit(draw_segment(w - 1 - x0, y0, w - 1 - x1, y1))) mirrored.insert({w - 1 - x, y});
        CHECK(a == mirrored);
    }
}

TEST_CASE("rasterizer clips far and non-finite segments") {
    CHECK(lit(draw_segment(-1e9, 10, 1e9, 10)).size() == 64);
    CHECK(lit(draw_segment(-100, -100, -50, -10)).empty());
    CHECK(lit(draw_segment(std::nan(""), 0, 5, 5)).empty());
    Points2 p(1, 2);
    p << 3, 4;
    CHECK(lit(rasterize(p, {{0}}, 8, 8)) == std::set<std::pair<int, int>>{{3, 4}});
    CHECK_THROWS_AS(rasterize(p, {{0, 1}}, 8, 8), DataError);
}

TEST_CASE("candidate selection") {
    std::vector<CandidateRecord> recs(200);
    for (int i = 0; i < 200; ++i) recs[i] = {static_cast<double>(i), 0.0, 0.0};
    const auto c = select_candidates(recs);
    CHECK(c[0] == 99);
    CHECK(c[1] == 100);
    CHECK(c[2] == 0);
    CHECK(c[3] == 1);
    recs.pop_back();
    CHECK_THROWS_AS(select_candidates(recs), SelectionError);
}

TEST_CASE("candidate selection agrees with an exhaustive scan") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<CandidateRecord> recs(500);
        for (auto& r : recs) r = {rng.uniform(), rng.uniform(-0.3, 0.4), rng.uniform(-0.5, 0.2)};
        const auto got = select_candidates(recs);

        std::vector<std::pair<double, int>> by_area;
        for (int i = 0; i < 500; ++i) by_area.push_back({recs[i].mouth_area, i});
        std::sort(by_area.begin(), by_area.end());
        CHECK(got[0] == by_area[99].second);
        CHECK(got[1] == by_area[400].second);

        double lx = 1e9, hx = -1e9, ly = 1e9, hy = -1e9;
        for (const auto& r : recs) lx = std::min(lx, r.rot_x), hx = std::max(hx, r.rot_x), ly = std::min(ly, r.rot_y), hy = std::max(hy, r.rot_y);
        std::set<int> used = {got[0], got[1]};
        for (int k = 0; k < 2; ++k) {
            const double cx = lx + (0.25 + 0.5 * k) * (hx - lx), cy = ly + (0.25 + 0.5 * k) * (hy - ly);
            int best = -1;
            for (int i = 0; i < 500; ++i) {
                if (used.count(i)) continue;
                if (best < 0 || std::hypot(recs[i].rot_x - cx, recs[i].rot_y - cy) <
                                    std::hypot(recs[best].rot_x - cx, recs[best].rot_y - cy))
                    best = i;
            }
            CHECK(got[2 + k] == best);
            used.insert(best);
        }
    }
}

TEST_CASE("static clips cycle with a cross-fade") {
    FaceRig rig = rig_without_clips();
    CHECK(static_sample(rig, 1234) == rig.mean_points);
    const Points3 a = rig.mean_points, b = rig.mean_points.array() + 1.0;
    rig.static_clips = {{a}, {b}};
    CHECK(static_sample(rig, 0) == a);
    CHECK(static_sample(rig, 239) == a);
    CHECK((static_sample(rig, 240) - (a * 30.0 / 31.0 + b / 31.0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(static_sample(rig, 270) == b);
    CHECK(static_sample(rig, 480 + 30) == a);
}

TEST_CASE("rig file validation") {
    const FaceRig rig = FaceRig::from_json_file(kRigPath);
    CHECK(rig.mean_points.rows() == 73);
    CHECK(rig.mouth_indices.size() == 25);
    CHECK(rig.scale() > 0.0);
    CHECK_THROWS_AS(FaceRig::from_json_text("{}"), DataError);
    CHECK_THROWS_AS(FaceRig::from_json_text("not json"), DataError);
    CHECK_THROWS_AS(FaceRig::from_json_file("/nonexistent/rig.json"), DataError);
}

TEST_CASE("composed frame geometry") {
    const FaceRig rig = rig_without_clips();
    const CameraIntrinsics cam;
    const FeatureMap zero = compose_frame(rig, MouthDisplacement{}, rig.mean_points, HeadPose{}, rig.billboard, cam);
    CHECK(zero.pixels.width == 512);
    CHECK(zero.pixels.height == 512);
    CHECK(zero.pixels.channels == 1);
    CHECK(zero.points2d.rows() == 73 + rig.billboard.points.rows());
    CHECK(!lit(zero.pixels).empty());

    const HeadPose shifted{Vec3::Zero(), Vec3(1.5, -2.0, 0.0)};
    const FeatureMap moved = compose_frame(rig, MouthDisplacement{}, rig.mean_points, shifted, rig.billboard, cam);
    for (int i = 0; i < 73; ++i) {
        const double z = rig.mean_points(i, 2) + rig.rest_translation[2];
        CHECK(moved.points2d(i, 0) - zero.points2d(i, 0) == doctest::Approx(cam.focal_px * 1.5 / z));
        CHECK(moved.points2d(i, 1) - zero.points2d(i, 1) == doctest::Approx(cam.focal_px * -2.0 / z));
    }
    for (int i = 73; i < moved.points2d.rows(); ++i)
        CHECK(moved.points2d(i, 0) - zero.points2d(i, 0) == doctest::Approx(cam.focal_px * 0.75 / rig.billboard.depth0));

    MouthDisplacement open;
    open.delta.col(1).setConstant(0.5);
    const FeatureMap talking = compose_frame(rig, open, rig.mean_points, HeadPose{}, rig.billboard, cam);
    for (int i = 0; i < 73; ++i) {
        const bool mouth = std::find(rig.mouth_indices.begin(), rig.mouth_indices.end(), i) != rig.mouth_indices.end();
        CHECK((talking.points2d(i, 1) != zero.points2d(i, 1)) == mouth);
    }
}

TEST_CASE("zero-pose feature map matches the golden file") {
    const FaceRig rig = rig_without_clips();
    const FeatureMap map = compose_frame(rig, MouthDisplacement{}, rig.mean_points, HeadPose{}, rig.billboard,
                                         CameraIntrinsics{});
    const std::string bytes = encode_pnm(map.pixels);
    if (std::getenv("TALKHEAD_REGENERATE_GOLDEN")) {
        std::ofstream(kGoldenPath, std::ios::binary) << bytes;
        MESSAGE("regenerated " << kGoldenPath.string());
    }
    REQUIRE(std::filesystem::exists(kGoldenPath));
    CHECK(read_bytes(kGoldenPath) == bytes);
}

TEST_CASE("PNM encode and decode") {
    Rng rng(3);
    for (int channels : {1, 3}) {
        Image img(7, 5, channels);
        for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.uniform() * 256);
        const std::string bytes = encode_pnm(img);
        CHECK(bytes.substr(0, 2) == (channels == 1 ? "P5" : "P6"));
        const Image back = decode_pnm(bytes);
        CHECK(back.width == 7);
        CHECK(back.height == 5);
        CHECK(back.channels == channels);
        CHECK(back.pixels == img.pixels);
    }
    CHECK(decode_pnm("P5\n# comment\n2 1\n255\nab").pixels == std::vector<std::uint8_t>{'a', 'b'});
    CHECK_THROWS_AS(decode_pnm("P2\n1 1\n255\n0"), DataError);
    CHECK_THROWS_AS(decode_pnm("P5\n2 2\n255\nabc"), DataError);
    CHECK_THROWS_AS(decode_pnm("P5\n2 2\n65535\nabcdabcd"), DataError);
    CHECK_THROWS_AS(read_pnm("/nonexistent/x.pgm"), DataError);
}
