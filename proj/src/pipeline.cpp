#include "talkhead/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>

#include <nlohmann/json.hpp>

namespace talkhead {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point start) {
    return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

double thread_cpu_micros() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) * 1e6 + static_cast<double>(ts.tv_nsec) * 1e-3;
}

// Seed for the stand-in weights used when no weight file is configured.
constexpr std::uint64_t kInitSeed = 0x5eedba5eULL;

}  // namespace

EngineComponents load_components(const PipelineConfig& config) {
    config.validate();
    std::optional<WeightStore> store;
    if (config.weights_path) store = load_weights(*config.weights_path);

    Rng init(kInitSeed);
    ApcModel apc = store ? ApcModel::from_store(*store) : ApcModel::random(init);
    MouthModel mouth = store ? MouthModel::from_store(*store, config.delay_frames)
                             : MouthModel::random(init, config.delay_frames);
    std::optional<PoseGenerator> pose;
    if (store) pose.emplace(PoseGenerator::from_store(*store, config.pose));
    else pose.emplace(PoseGenerator::random(init, config.pose));

    std::optional<ReprDatabase> db;
    if (config.manifold_db_path) {
        db = ReprDatabase::load(*config.manifold_db_path);
        if (db->dim() != apc.hidden_size())
            throw DataError("manifold database has dimension " + std::to_string(db->dim()) + ", expected " +
                            std::to_string(apc.hidden_size()));
        if (db->rows() < config.k_neighbors)
            throw DataError("manifold database has " + std::to_string(db->rows()) + " rows, fewer than k_neighbors = " +
                            std::to_string(config.k_neighbors));
    }

    FaceRig rig = FaceRig::from_json_file(config.rig_path);
    std::optional<PoseTrack> track;
    if (config.pose_override_path) track = read_pose_track(*config.pose_override_path);

    return EngineComponents{std::move(apc), std::move(db), std::move(mouth), std::move(*pose), std::move(rig),
                            std::move(track)};
}

Engine::Engine(const PipelineConfig& config) : Engine(config, load_components(config)) {}

Engine::Engine(const PipelineConfig& config, EngineComponents components)
    : config_(config), parts_(std::move(components)), mel_(config.audio), rng_(config.seed) {
    config_.validate();
    check_size(parts_.apc.input_size(), config_.audio.n_mels, "APC input width vs n_mels");
    if (parts_.mouth.delay() != config_.delay_frames)
        throw ConfigError("mouth model delay " + std::to_string(parts_.mouth.delay()) + " != delay_frames " +
                          std::to_string(config_.delay_frames));
    if (parts_.db && parts_.db->rows() < config_.k_neighbors)
        throw DataError("manifold database smaller than k_neighbors");
    billboard_ = parts_.rig.billboard;
    billboard_.alpha = config_.billboard_alpha;
}

double Engine::algorithmic_latency_ms() const { return 1000.0 * config_.delay_frames / config_.fps; }

std::int64_t Engine::total_frames_for_samples(std::int64_t n_samples) const {
    return n_samples * config_.fps / config_.audio.sample_rate;
}

std::int64_t Engine::samples_needed_for_frame(std::int64_t index) const {
    const std::int64_t driver = index + config_.delay_frames;
    const std::int64_t mel_need = mel_.samples_needed_for_frame(2 * driver + 1);
    const std::int64_t sr = config_.audio.sample_rate, fps = config_.fps;
    const std::int64_t time_need = ((driver + 1) * sr + fps - 1) / fps;
    return std::max(mel_need, time_need);
}

void Engine::push_audio(std::span<const float> samples) {
    const auto start = Clock::now();
    auto frames = mel_.push_samples(samples);
    consume_mel(std::move(frames), micros_since(start));
}

void Engine::finish() {
    const auto start = Clock::now();
    auto frames = mel_.finish();
    consume_mel(std::move(frames), micros_since(start));
    // Frames past the truncated end are never released.
    const std::int64_t end =
        std::max<std::int64_t>(0, total_frames_for_samples(mel_.samples_pushed()) - config_.delay_frames);
    poses_.erase(poses_.lower_bound(end), poses_.end());
    timings_.erase(timings_.lower_bound(end), timings_.end());
    mouths_.erase(mouths_.lower_bound(end), mouths_.end());
}

void Engine::consume_mel(std::vector<MelFrame> frames, double dsp_us) {
    if (frames.empty()) return;
    const double dsp_share = dsp_us / static_cast<double>(frames.size());
    for (const auto& frame : frames) {
        pending_dsp_us_ += dsp_share;
        const auto start = Clock::now();
        VectorXf repr = parts_.apc.step(frame.values);
        pending_apc_us_ += micros_since(start);
        if (frame.frame_index % 2 == 1) {
            StageTimings t;
            t.dsp_us = pending_dsp_us_;
            t.apc_us = pending_apc_us_;
            pending_dsp_us_ = pending_apc_us_ = 0.0;
            process_video_frame((frame.frame_index - 1) / 2, repr, t);
        }
    }
}

void Engine::process_video_frame(std::int64_t v, const VectorXf& repr, StageTimings timings) {
    auto start = Clock::now();
    const double cpu_start = thread_cpu_micros();
    VectorXf projected = parts_.db ? lle_project(*parts_.db, repr, config_.k_neighbors).reconstructed : repr;
    timings.manifold_cpu_us = thread_cpu_micros() - cpu_start;
    timings.manifold_us = micros_since(start);

    start = Clock::now();
    if (auto mouth = parts_.mouth.step(projected)) mouths_.emplace(mouth->frame_index, *mouth);
    timings.mouth_us = micros_since(start);

    start = Clock::now();
    HeadPose pose;
    if (parts_.pose_override) {
        const auto& track = *parts_.pose_override;
        pose = track[static_cast<std::size_t>(v % static_cast<std::int64_t>(track.size()))];
    } else {
        const PoseDistribution dist = parts_.pose.step(projected);
        pose = parts_.pose.sample_and_feed(dist, rng_);
    }
    timings.pose_us = micros_since(start);

    poses_.emplace(v, pose);
    timings_.emplace(v, timings);
}

bool Engine::releasable(std::int64_t u) const {
    if (!mouths_.count(u)) return false;
    const std::int64_t n = mel_.samples_pushed();
    if (mel_.finished()) return u < total_frames_for_samples(n) - config_.delay_frames;
    return n >= samples_needed_for_frame(u);
}

std::optional<FrameOutput> Engine::poll_frame() {
    const std::int64_t u = next_emit_;
    if (!releasable(u)) return std::nullopt;

    FrameOutput out;
    out.frame_index = u;
    out.pose = poses_.at(u);
    out.mouth = mouths_.at(u);
    out.timings = timings_.at(u);

    const auto start = Clock::now();
    out.map = compose_frame(parts_.rig, out.mouth, static_sample(parts_.rig, u), out.pose, billboard_, config_.camera);
    out.timings.compose_us = micros_since(start);

    poses_.erase(u);
    mouths_.erase(u);
    timings_.erase(u);
    ++next_emit_;
    return out;
}

std::string frame_json_line(const FrameOutput& frame) {
    nlohmann::json j;
    j["frame_index"] = frame.frame_index;
    j["pose"] = {{"r", {frame.pose.r[0], frame.pose.r[1], frame.pose.r[2]}},
                 {"t", {frame.pose.t[0], frame.pose.t[1], frame.pose.t[2]}}};
    auto mouth = nlohmann::json::array();
    for (int i = 0; i < kMouthPoints; ++i)
        mouth.push_back({frame.mouth.delta(i, 0), frame.mouth.delta(i, 1), frame.mouth.delta(i, 2)});
    j["mouth"] = std::move(mouth);
    auto pts = nlohmann::json::array();
    for (Eigen::Index i = 0; i < frame.map.points2d.rows(); ++i)
        pts.push_back({frame.map.points2d(i, 0), frame.map.points2d(i, 1)});
    j["points2d"] = std::move(pts);
    return j.dump();
}

FrameWriter::FrameWriter(const std::filesystem::path& out_dir, bool write_maps) : dir_(out_dir), write_maps_(write_maps) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory " + dir_.string() + ": " + ec.message());
    jsonl_.open(dir_ / "frames.jsonl", std::ios::binary | std::ios::trunc);
    if (!jsonl_) throw DataError("cannot write " + (dir_ / "frames.jsonl").string());
}

void FrameWriter::write(const FrameOutput& frame) {
    if (write_maps_) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%06lld.pgm", static_cast<long long>(frame.frame_index));
        write_pnm(dir_ / name, frame.map.pixels);
    }
    jsonl_ << frame_json_line(frame) << '\n';
    ++count_;
}

RunReport summarize(const std::vector<StageTimings>& timings) {
    RunReport report;
    report.frames = static_cast<std::int64_t>(timings.size());
    auto stats = [&](auto field) {
        StageSummary s;
        if (timings.empty()) return s;
        std::vector<double> v;
        v.reserve(timings.size());
        for (const auto& t : timings) v.push_back(field(t));
        std::sort(v.begin(), v.end());
        double sum = 0.0;
        for (double x : v) sum += x;
        auto pct = [&](double p) {
            const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) - 1;
            return v[std::min(idx, v.size() - 1)];
        };
        s.mean_us = sum / static_cast<double>(v.size());
        s.p50_us = pct(0.50);
        s.p99_us = pct(0.99);
        s.max_us = v.back();
        return s;
    };
    report.stages["dsp"] = stats([](const StageTimings& t) { return t.dsp_us; });
    report.stages["apc"] = stats([](const StageTimings& t) { return t.apc_us; });
    report.stages["manifold"] = stats([](const StageTimings& t) { return t.manifold_us; });
    report.stages["manifold_cpu"] = stats([](const StageTimings& t) { return t.manifold_cpu_us; });
    report.stages["mouth"] = stats([](const StageTimings& t) { return t.mouth_us; });
    report.stages["pose"] = stats([](const StageTimings& t) { return t.pose_us; });
    report.stages["compose"] = stats([](const StageTimings& t) { return t.compose_us; });
    report.stages["stage_sum"] = stats([](const StageTimings& t) { return t.total_us(); });
    return report;
}

std::string RunReport::to_json() const {
    nlohmann::json j;
    j["frames"] = frames;
    j["audio_seconds"] = audio_seconds;
    j["wall_seconds"] = wall_seconds;
    j["frames_per_second"] = frames_per_second;
    j["algorithmic_latency_ms"] = algorithmic_latency_ms;
    for (const auto& [name, s] : stages)
        j["stages_us"][name] = {{"mean", s.mean_us}, {"p50", s.p50_us}, {"p99", s.p99_us}, {"max", s.max_us}};
    return j.dump(2);
}

namespace {

constexpr std::size_t kChunkSamples = 1600;

void drain(Engine& engine, FrameWriter& writer, std::vector<StageTimings>& timings) {
    while (auto frame = engine.poll_frame()) {
        writer.write(*frame);
        timings.push_back(frame->timings);
    }
}

RunReport finalize(const Engine& engine, std::vector<StageTimings>& timings, Clock::time_point start,
                   const std::filesystem::path& out_dir) {
    RunReport report = summarize(timings);
    report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    report.audio_seconds = static_cast<double>(engine.samples_pushed()) / engine.config().audio.sample_rate;
    report.frames_per_second = report.wall_seconds > 0.0 ? static_cast<double>(report.frames) / report.wall_seconds : 0.0;
    report.algorithmic_latency_ms = engine.algorithmic_latency_ms();
    std::ofstream out(out_dir / "timings.json", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (out_dir / "timings.json").string());
    out << report.to_json() << "\n";
    return report;
}

}  // namespace

RunReport run_offline(std::span<const float> audio, Engine& engine, const std::filesystem::path& out_dir) {
    FrameWriter writer(out_dir, engine.config().write_feature_maps);
    std::vector<StageTimings> timings;
    const auto start = Clock::now();
    for (std::size_t pos = 0; pos < audio.size(); pos += kChunkSamples) {
        engine.push_audio(audio.subspan(pos, std::min(kChunkSamples, audio.size() - pos)));
        drain(engine, writer, timings);
    }
    engine.finish();
    drain(engine, writer, timings);
    return finalize(engine, timings, start, out_dir);
}

RunReport run_offline(const std::filesystem::path& wav, const PipelineConfig& config,
                      const std::filesystem::path& out_dir) {
    const WavData data = read_wav(wav);
    if (data.sample_rate != config.audio.sample_rate)
        throw DataError(wav.string() + ": sample rate " + std::to_string(data.sample_rate) + " Hz, expected " +
                        std::to_string(config.audio.sample_rate));
    Engine engine(config);
    return run_offline(data.samples, engine, out_dir);
}

RunReport run_stream(std::istream& pcm, const PipelineConfig& config, const std::filesystem::path& out_dir) {
    Engine engine(config);
    FrameWriter writer(out_dir, config.write_feature_maps);
    std::vector<StageTimings> timings;
    const auto start = Clock::now();

    std::vector<char> buf(2 * kChunkSamples);
    std::vector<float> samples;
    std::string carry;
    while (pcm) {
        pcm.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = static_cast<std::size_t>(pcm.gcount());
        if (got == 0) break;
        std::string bytes = carry + std::string(buf.data(), got);
        const std::size_t whole = bytes.size() / 2 * 2;
        carry = bytes.substr(whole);
        samples.resize(whole / 2);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto lo = static_cast<unsigned char>(bytes[2 * i]);
            const auto hi = static_cast<unsigned char>(bytes[2 * i + 1]);
            samples[i] = pcm16_to_float(static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8))));
        }
        engine.push_audio(samples);
        drain(engine, writer, timings);
    }
    if (!carry.empty()) throw InputError("raw PCM stream ended with half a sample");
    engine.finish();
    drain(engine, writer, timings);
    return finalize(engine, timings, start, out_dir);
}

}  // namespace talkhead
