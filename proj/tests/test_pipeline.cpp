#include <fstream>
#include <sstream>

#include "doctest.h"
#include "talkhead/pipeline.hpp"

using namespace talkhead;
namespace fs = std::filesystem;

namespace {

PipelineConfig base_config() {
    PipelineConfig c;
    c.rig_path = fs::path(TALKHEAD_DATA_DIR) / "default_rig.json";
    c.seed = 5;
    return c;
}

std::vector<float> test_audio(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> s(n);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        phase += 2.0 * 3.14159265358979 * (180.0 + 60.0 * std::sin(i / 4000.0)) / 16000.0;
        s[i] = pcm16_to_float(float_to_pcm16(static_cast<float>(0.3 * std::sin(phase) + 0.05 * rng.uniform(-1, 1))));
    }
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("talkhead_test_" + name);
    fs::remove_all(d);
    return d;
}

std::vector<FrameOutput> drain(Engine& e) {
    std::vector<FrameOutput> out;
    while (auto f = e.poll_frame()) out.push_back(std::move(*f));
    return out;
}

}  // namespace

TEST_CASE("two seconds of silence give 102 frames") {
    Engine e(base_config());
    e.push_audio(std::vector<float>(32000, 0.0f));
    e.finish();
    const auto frames = drain(e);
    REQUIRE(frames.size() == 102);
    for (std::size_t i = 0; i < frames.size(); ++i) CHECK(frames[i].frame_index == static_cast<std::int64_t>(i));
    CHECK(e.total_frames_for_samples(32000) == 120);
    CHECK(e.buffered_frames() == 0);
    CHECK(e.algorithmic_latency_ms() == 300.0);
}

TEST_CASE("frame 0 is released once its lookahead has arrived") {
    Engine e(base_config());
    CHECK_FALSE(e.poll_frame().has_value());
    const std::int64_t need = e.samples_needed_for_frame(0);
    CHECK(need == 5188);
    e.push_audio(std::vector<float>(static_cast<std::size_t>(need - 1), 0.0f));
    CHECK_FALSE(e.poll_frame().has_value());
    e.push_audio(std::vector<float>(1, 0.0f));
    const auto f = e.poll_frame();
    REQUIRE(f.has_value());
    CHECK(f->frame_index == 0);
    CHECK_FALSE(e.poll_frame().has_value());
}

TEST_CASE("release points for later frames") {
    Engine e(base_config());
    const auto audio = test_audio(40000, 1);
    std::size_t pushed = 0;
    for (std::int64_t u = 0; u < 20; ++u) {
        const auto need = static_cast<std::size_t>(e.samples_needed_for_frame(u));
        e.push_audio(std::span<const float>(audio).subspan(pushed, need - 1 - pushed));
        pushed = need - 1;
        CHECK_FALSE(e.poll_frame().has_value());
        e.push_audio(std::span<const float>(audio).subspan(pushed, 1));
        pushed = need;
        const auto f = e.poll_frame();
        REQUIRE(f.has_value());
        CHECK(f->frame_index == u);
    }
}

TEST_CASE("offline inference is deterministic for a seed") {
    const auto audio = test_audio(24000, 2);
    const fs::path wav = fresh_dir("det.wav");
    write_wav(wav, audio, 16000);
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b"), c = fresh_dir("det_c");
    const RunReport ra = run_offline(wav, base_config(), a);
    run_offline(wav, base_config(), b);
    PipelineConfig other = base_config();
    other.seed = 6;
    run_offline(wav, other, c);

    CHECK(ra.frames == 72);
    CHECK(slurp(a / "frames.jsonl") == slurp(b / "frames.jsonl"));
    CHECK(slurp(a / "frames.jsonl") != slurp(c / "frames.jsonl"));
    for (int i : {0, 35, 71}) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06d.pgm", i);
        CHECK(slurp(a / name) == slurp(b / name));
    }
    CHECK(fs::exists(a / "timings.json"));
    CHECK_FALSE(fs::exists(a / "frame_000072.pgm"));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
    fs::remove(wav);
}

TEST_CASE("interleaved live pushes match offline output") {
    const auto audio = test_audio(30000, 3);
    Engine offline(base_config());
    offline.push_audio(audio);
    offline.finish();
    const auto want = drain(offline);

    Rng rng(4);
    Engine live(base_config());
    std::vector<FrameOutput> got;
    for (std::size_t pos = 0; pos < audio.size();) {
        const auto n = std::min<std::size_t>(audio.size() - pos, 1 + static_cast<std::size_t>(rng.uniform() * 900));
        live.push_audio(std::span<const float>(audio).subspan(pos, n));
        pos += n;
        if (rng.uniform() < 0.7) {
            auto more = drain(live);
            got.insert(got.end(), more.begin(), more.end());
        }
    }
    live.finish();
    auto rest = drain(live);
    got.insert(got.end(), rest.begin(), rest.end());

    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(frame_json_line(got[i]) == frame_json_line(want[i]));
        CHECK(got[i].map.pixels.pixels == want[i].map.pixels.pixels);
    }
}

TEST_CASE("raw PCM stream matches the WAV path byte for byte") {
    const auto audio = test_audio(20000, 5);
    const fs::path wav = fresh_dir("live.wav");
    write_wav(wav, audio, 16000);
    std::string pcm;
    for (float s : audio) {
        const auto v = static_cast<std::uint16_t>(float_to_pcm16(s));
        pcm.push_back(static_cast<char>(v & 0xFF));
        pcm.push_back(static_cast<char>(v >> 8));
    }
    const fs::path a = fresh_dir("live_a"), b = fresh_dir("live_b");
    run_offline(wav, base_config(), a);
    std::istringstream in(pcm);
    run_stream(in, base_config(), b);
    CHECK(slurp(a / "frames.jsonl") == slurp(b / "frames.jsonl"));
    CHECK(slurp(a / "frame_000010.pgm") == slurp(b / "frame_000010.pgm"));

    std::istringstream odd(pcm.substr(0, 11));
    CHECK_THROWS_AS(run_stream(odd, base_config(), b), InputError);
    for (const auto& d : {a, b}) fs::remove_all(d);
    fs::remove(wav);
}

TEST_CASE("pose override track replaces sampling") {
    const fs::path track = fresh_dir("track.jsonl");
    {
        std::ofstream out(track);
        out << R"({"r": [0, 0.1, 0], "t": [1, 0, 0]})" << "\n" << R"({"r": [0, 0, 0], "t": [0, 0, 0]})" << "\n";
    }
    PipelineConfig c = base_config();
    c.pose_override_path = track;
    Engine e(c);
    e.push_audio(test_audio(12000, 6));
    e.finish();
    const auto frames = drain(e);
    REQUIRE(frames.size() > 4);
    CHECK(frames[0].pose.t[0] == 1.0);
    CHECK(frames[1].pose.t[0] == 0.0);
    CHECK(frames[2].pose.r[1] == 0.1);
    fs::remove(track);
}

TEST_CASE("feature bank is used when configured") {
    Rng rng(7);
    RowMatrix<float> rows(40, kReprDim);
    fill_uniform(rows, rng, 0.2);
    const fs::path db = fresh_dir("bank.f32");
    ReprDatabase(rows).save_raw(db);

    PipelineConfig c = base_config();
    c.manifold_db_path = db;
    Engine with(c);
    Engine without(base_config());
    const auto audio = test_audio(8000, 8);
    for (Engine* e : {&with, &without}) {
        e->push_audio(audio);
        e->finish();
    }
    const auto a = drain(with), b = drain(without);
    REQUIRE(a.size() == b.size());
    CHECK(a[0].mouth.delta != b[0].mouth.delta);

    c.k_neighbors = 41;
    CHECK_THROWS_AS(Engine{c}, DataError);
    fs::remove(db);
    fs::remove(db.string() + ".json");
}

TEST_CASE("report summary statistics") {
    std::vector<StageTimings> t(100);
    for (int i = 0; i < 100; ++i) t[i].apc_us = i + 1;
    const RunReport r = summarize(t);
    CHECK(r.frames == 100);
    CHECK(r.stages.at("apc").mean_us == doctest::Approx(50.5));
    CHECK(r.stages.at("apc").p50_us == 50.0);
    CHECK(r.stages.at("apc").p99_us == 99.0);
    CHECK(r.stages.at("apc").max_us == 100.0);
    CHECK(r.stages.at("stage_sum").max_us == 100.0);
}

TEST_CASE("input errors") {
    const fs::path wav = fresh_dir("rate.wav");
    write_wav(wav, std::vector<float>(100, 0.0f), 8000);
    CHECK_THROWS_AS(run_offline(wav, base_config(), fresh_dir("rate_out")), DataError);
    fs::remove(wav);
    PipelineConfig c = base_config();
    c.rig_path = "/nonexistent/rig.json";
    CHECK_THROWS_AS(Engine{c}, DataError);
    c = base_config();
    c.delay_frames = -2;
    CHECK_THROWS_AS(Engine{c}, ConfigError);
}
