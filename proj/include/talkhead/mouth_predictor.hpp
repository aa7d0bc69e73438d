#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "talkhead/layers.hpp"

namespace talkhead {

using MouthOffsets = Eigen::Matrix<double, kMouthPoints, 3, Eigen::RowMajor>;

struct MouthDisplacement {
    MouthOffsets delta = MouthOffsets::Zero();  // object-space offsets from the mean mouth points
    std::int64_t frame_index = 0;
};

inline constexpr int kDefaultDelayFrames = 18;

struct MouthDims {
    int input = kReprDim;
    int lstm_hidden = 256;
    std::array<int, 3> mlp = {256, 512, kMouthPoints * 3};
};

// Three-layer LSTM followed by an MLP (relu hidden layers, linear output).
// Lookahead is realised by delaying emission: the output computed after
// consuming representation k is the displacement for frame k - delay.
class MouthModel {
public:
    static constexpr int kLstmLayers = 3;

    MouthModel(std::array<LstmWeights<float>, kLstmLayers> lstm, std::array<LinearLayer<float>, 3> mlp,
               int delay_frames = kDefaultDelayFrames);

    static MouthModel zeros(int delay_frames = kDefaultDelayFrames, MouthDims dims = {});
    static MouthModel random(Rng& rng, int delay_frames = kDefaultDelayFrames, MouthDims dims = {});
    // Reads "mouth.lstm{1,2,3}.*" and "mouth.mlp{1,2,3}.*".
    static MouthModel from_store(const WeightStore& store, int delay_frames = kDefaultDelayFrames, MouthDims dims = {});
    void to_store(WeightStore& store) const;

    std::optional<MouthDisplacement> step(const Eigen::Ref<const VectorXf>& repr);
    void reset();

    int delay() const { return delay_; }
    std::int64_t consumed() const { return consumed_; }
    std::size_t parameter_count() const;

private:
    std::array<LstmWeights<float>, kLstmLayers> lstm_;
    std::array<LinearLayer<float>, 3> mlp_;
    std::array<LstmState<float>, kLstmLayers> state_;
    int delay_;
    std::int64_t consumed_ = 0;
};

// Sum over frames and points of the squared Euclidean error.
double mouth_l2_loss(std::span<const MouthOffsets> predicted, std::span<const MouthOffsets> truth);

}  // namespace talkhead
