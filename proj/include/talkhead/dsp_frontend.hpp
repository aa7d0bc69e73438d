#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "talkhead/types.hpp"

namespace talkhead {

// Framing and mel parameters. The sample counts are the integer roundings of
// a 1/60 s window and 1/120 s shift at 16 kHz (266.67 -> 267, 133.33 -> 133);
// the resulting 0.25 % rate drift is accepted.
struct AudioConfig {
    int sample_rate = 16000;
    int frame_len = 267;
    int hop_len = 133;
    int fft_size = 512;
    int n_mels = 80;
    double mel_fmin = 0.0;
    double mel_fmax = 8000.0;
    double log_floor = 1e-10;

    int n_bins() const { return fft_size / 2 + 1; }

    // Throws ConfigError naming the violated constraint.
    void validate() const;
};

struct MelFrame {
    VectorXf values;
    std::int64_t frame_index = 0;
    std::int64_t start_sample = 0;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-scale mel filterbank, n_mels x (fft_size/2 + 1).
Matrix<double> mel_filterbank(const AudioConfig& config);

// Center frequency (Hz) of every mel filter, ascending.
std::vector<double> mel_center_frequencies(const AudioConfig& config);

std::vector<double> hann_window(int length);

// Streaming log-mel extractor. Frames are emitted as soon as the last sample
// of their window arrives, so the output does not depend on how the input is
// chunked.
class MelStream {
public:
    explicit MelStream(AudioConfig config = {});

    std::vector<MelFrame> push_samples(std::span<const float> samples);

    // Zero-pads the tail so that every frame whose start lies inside the
    // pushed signal is emitted. The stream accepts no samples afterwards.
    std::vector<MelFrame> finish();

    const AudioConfig& config() const { return config_; }
    std::int64_t samples_pushed() const { return total_samples_; }
    std::int64_t frames_emitted() const { return next_frame_; }
    bool finished() const { return finished_; }

    // Number of samples that must have been pushed before frame `index`
    // is emitted.
    std::int64_t samples_needed_for_frame(std::int64_t index) const;

    // Log-mel of one window of frame_len samples (the shared kernel of the
    // streaming path).
    VectorXf log_mel(std::span<const float> window);

private:
    std::vector<MelFrame> drain();

    AudioConfig config_;
    Matrix<double> filterbank_;
    std::vector<double> window_;
    Eigen::FFT<double> fft_;
    std::vector<double> fft_in_;
    std::vector<std::complex<double>> fft_out_;

    // pending_[0] is the sample at absolute offset buffer_start_.
    std::vector<float> pending_;
    std::int64_t buffer_start_ = 0;
    std::int64_t total_samples_ = 0;
    std::int64_t next_frame_ = 0;
    bool finished_ = false;
};

// Number of full frames a single-shot framer produces over n samples.
std::int64_t frame_count(std::int64_t n_samples, const AudioConfig& config);

struct WavData {
    int sample_rate = 0;
    std::vector<float> samples;  // mono, scaled to [-1, 1)
};

// 16-bit little-endian PCM, mono. Throws FormatError otherwise.
WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate);

float pcm16_to_float(std::int16_t v);
std::int16_t float_to_pcm16(float v);

}  // namespace talkhead
