#include "talkhead/dsp_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "talkhead/errors.hpp"

namespace talkhead {

void AudioConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("audio config: " + msg); };
    if (sample_rate != 16000) fail("sample_rate_hz must be 16000");
    if (fft_size < 2) fail("fft_size must be >= 2");
    if (frame_len < 1 || frame_len > fft_size) fail("frame_len_samples must be in [1, fft_size]");
    if (hop_len < 1 || hop_len > frame_len) fail("hop_len_samples must be in [1, frame_len_samples]");
    if (n_mels < 1 || n_mels >= n_bins()) fail("n_mels must be in [1, fft_size/2 + 1)");
    if (!(mel_fmin >= 0.0)) fail("mel_fmin_hz must be >= 0");
    if (!(mel_fmax > mel_fmin)) fail("mel_fmax_hz must exceed mel_fmin_hz");
    if (mel_fmax > sample_rate / 2.0) fail("mel_fmax_hz exceeds the Nyquist frequency");
    if (!(log_floor > 0.0)) fail("log_floor must be > 0");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(const AudioConfig& config) {
    const double lo = hz_to_mel(config.mel_fmin);
    const double hi = hz_to_mel(config.mel_fmax);
    std::vector<double> edges(config.n_mels + 2);
    for (int i = 0; i < config.n_mels + 2; ++i)
        edges[i] = mel_to_hz(lo + (hi - lo) * i / (config.n_mels + 1));
    return edges;
}

}  // namespace

Matrix<double> mel_filterbank(const AudioConfig& config) {
    config.validate();
    const auto edges = mel_edges(config);
    const int bins = config.n_bins();
    Matrix<double> fb = Matrix<double>::Zero(config.n_mels, bins);
    for (int m = 0; m < config.n_mels; ++m) {
        const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * config.sample_rate / config.fft_size;
            const double rising = (f - lo) / (center - lo);
            const double falling = (hi - f) / (hi - center);
            fb(m, k) = std::max(0.0, std::min(rising, falling));
        }
    }
    return fb;
}

std::vector<double> mel_center_frequencies(const AudioConfig& config) {
    config.validate();
    const auto edges = mel_edges(config);
    return {edges.begin() + 1, edges.end() - 1};
}

std::vector<double> hann_window(int length) {
    // Symmetric Hann over the frame.
    std::vector<double> w(length);
    if (length == 1) {
        w[0] = 1.0;
        return w;
    }
    for (int n = 0; n < length; ++n)
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / (length - 1));
    return w;
}

std::int64_t frame_count(std::int64_t n_samples, const AudioConfig& config) {
    if (n_samples < config.frame_len) return 0;
    return (n_samples - config.frame_len) / config.hop_len + 1;
}

MelStream::MelStream(AudioConfig config)
    : config_(config),
      filterbank_(mel_filterbank(config_)),
      window_(hann_window(config_.frame_len)),
      fft_in_(config_.fft_size, 0.0),
      fft_out_(config_.fft_size) {}

std::int64_t MelStream::samples_needed_for_frame(std::int64_t index) const {
    return index * config_.hop_len + config_.frame_len;
}

VectorXf MelStream::log_mel(std::span<const float> window) {
    if (static_cast<int>(window.size()) != config_.frame_len)
        throw DimensionError("log_mel: window length " + std::to_string(window.size()) +
                             " != frame_len " + std::to_string(config_.frame_len));
    std::fill(fft_in_.begin(), fft_in_.end(), 0.0);
    for (int n = 0; n < config_.frame_len; ++n) fft_in_[n] = window_[n] * window[n];
    fft_.fwd(fft_out_, fft_in_);

    const int bins = config_.n_bins();
    Vector<double> power(bins);
    for (int k = 0; k < bins; ++k) power[k] = std::norm(fft_out_[k]);
    const Vector<double> mel = filterbank_ * power;

    VectorXf out(config_.n_mels);
    for (int m = 0; m < config_.n_mels; ++m)
        out[m] = static_cast<float>(std::log(std::max(mel[m], config_.log_floor)));
    return out;
}

std::vector<MelFrame> MelStream::push_samples(std::span<const float> samples) {
    if (finished_) throw InputError("push_samples: stream already finished");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i]))
            throw InputError("push_samples: non-finite sample at offset " +
                             std::to_string(total_samples_ + static_cast<std::int64_t>(i)));
    }
    pending_.insert(pending_.end(), samples.begin(), samples.end());
    total_samples_ += static_cast<std::int64_t>(samples.size());
    return drain();
}

std::vector<MelFrame> MelStream::finish() {
    if (finished_) return {};
    finished_ = true;
    if (total_samples_ == 0) return {};
    const std::int64_t hop = config_.hop_len;
    const std::int64_t last = (total_samples_ + hop - 1) / hop - 1;
    const std::int64_t pad = samples_needed_for_frame(last) - total_samples_;
    if (pad > 0) {
        pending_.insert(pending_.end(), static_cast<std::size_t>(pad), 0.0f);
        total_samples_ += pad;
    }
    auto frames = drain();
    total_samples_ -= std::max<std::int64_t>(pad, 0);
    return frames;
}

std::vector<MelFrame> MelStream::drain() {
    std::vector<MelFrame> out;
    while (samples_needed_for_frame(next_frame_) <= total_samples_) {
        const std::int64_t start = next_frame_ * config_.hop_len;
        const auto offset = static_cast<std::size_t>(start - buffer_start_);
        MelFrame frame;
        frame.values = log_mel(std::span<const float>(pending_).subspan(offset, config_.frame_len));
        frame.frame_index = next_frame_;
        frame.start_sample = start;
        out.push_back(std::move(frame));
        ++next_frame_;
    }
    const std::int64_t keep_from = next_frame_ * config_.hop_len;
    if (keep_from > buffer_start_) {
        const auto drop = static_cast<std::size_t>(
            std::min<std::int64_t>(keep_from - buffer_start_, static_cast<std::int64_t>(pending_.size())));
        pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(drop));
        buffer_start_ += static_cast<std::int64_t>(drop);
    }
    return out;
}

float pcm16_to_float(std::int16_t v) { return static_cast<float>(v) / 32768.0f; }

std::int16_t float_to_pcm16(float v) {
    const float scaled = std::round(std::clamp(v, -1.0f, 1.0f) * 32767.0f);
    return static_cast<std::int16_t>(scaled);
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xFF));
    s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open WAV file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string name = path.string();
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError(name + ": not a RIFF/WAVE file");

    WavData wav;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        const std::uint32_t size = read_u32(hdr + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw FormatError(name + ": truncated chunk");
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (size < 16) throw FormatError(name + ": short fmt chunk");
            const unsigned char* f = bytes.data() + body;
            const std::uint16_t format = read_u16(f);
            const std::uint16_t channels = read_u16(f + 2);
            const std::uint16_t bits = read_u16(f + 14);
            if (format != 1 && format != 0xFFFE) throw FormatError(name + ": only PCM WAV is supported");
            if (channels != 1) throw FormatError(name + ": expected mono audio");
            if (bits != 16) throw FormatError(name + ": expected 16-bit samples");
            wav.sample_rate = static_cast<int>(read_u32(f + 4));
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            if (!have_fmt) throw FormatError(name + ": data chunk before fmt chunk");
            const std::size_t n = size / 2;
            wav.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                wav.samples[i] = pcm16_to_float(static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i)));
            return wav;
        }
        pos = body + size + (size & 1u);
    }
    throw FormatError(name + ": missing data chunk");
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate) {
    std::string out;
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(sample_rate));
    put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    for (float s : samples) put_u16(out, static_cast<std::uint16_t>(float_to_pcm16(s)));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write WAV file " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace talkhead
