#pragma once

#include <deque>
#include <vector>

#include "talkhead/geometry.hpp"
#include "talkhead/layers.hpp"

namespace talkhead {

using PoseVector = Eigen::Matrix<double, kPoseFeatureDim, 1>;

// x_t = [p_t; dp_t]: six pose dims (rotation, translation) and their linear
// velocity dp_t = p_t - p_{t-1}.
struct PoseFeature {
    PoseVector x = PoseVector::Zero();

    auto pose() const { return x.head<kPoseDim>(); }
    auto velocity() const { return x.tail<kPoseDim>(); }
};

// Diagonal Gaussian parameterised by its mean and s = -ln(sigma).
struct PoseDistribution {
    PoseVector mu = PoseVector::Zero();
    PoseVector neg_log_sigma = PoseVector::Zero();

    PoseVector sigma() const { return (-neg_log_sigma.array()).exp().matrix(); }
};

struct PoseDims {
    int condition = kReprDim;     // width of the speech representation
    int cond_channels = 64;       // shared projection of the representation
    int residual_channels = 64;
    int skip_channels = 128;
    int blocks = 2;
    int layers_per_block = 7;     // dilations 1, 2, 4, ... within each block
};

std::vector<int> pose_dilations(const PoseDims& dims);

// 1 + sum of dilations: how many past stack inputs reach the current output.
int receptive_field(const PoseDims& dims);

// Autoregressive pose model: a stack of width-2 gated dilated causal
// convolutions over past pose features, conditioned on the current speech
// representation, followed by a two-layer relu post-net that emits the
// Gaussian parameters.
//
// The stack input at step t is the pose feature fed after step t - 1, so the
// output at t depends on the last receptive_field() fed features.
class PoseGenerator {
public:
    PoseGenerator(PoseDims dims, LinearLayer<float> cond, LinearLayer<float> input,
                  std::vector<GatedConvLayer<float>> layers, LinearLayer<float> post1, LinearLayer<float> post2);

    static PoseGenerator zeros(PoseDims dims = {});
    static PoseGenerator random(Rng& rng, PoseDims dims = {});
    // Reads "pose.cond.*", "pose.input.*", "pose.block{b}.layer{l}.*" and "pose.post.conv{1,2}.*".
    static PoseGenerator from_store(const WeightStore& store, PoseDims dims = {});
    void to_store(WeightStore& store) const;

    // Distribution for the current frame. Must alternate with feed().
    PoseDistribution step(const Eigen::Ref<const VectorXf>& repr);

    // Appends the pose chosen for the current frame to the history; the
    // velocity half of the feature is recomputed from the previous pose.
    void feed(const HeadPose& pose);

    // Appends a complete feature as given (teacher forcing); the next feed()
    // takes its velocity relative to this feature's pose half.
    void feed_feature(const PoseFeature& feature);

    // Draws a sample from `dist`, feeds its pose half back and returns it.
    HeadPose sample_and_feed(const PoseDistribution& dist, Rng& rng);

    void reset();

    const PoseDims& dims() const { return dims_; }
    int receptive_field() const { return talkhead::receptive_field(dims_); }
    // Last min(t, receptive_field()) fed features, oldest first.
    const std::deque<PoseFeature>& history() const { return history_; }
    std::size_t parameter_count() const;

    const LinearLayer<float>& cond_projection() const { return cond_; }
    const LinearLayer<float>& input_projection() const { return input_; }
    const std::vector<GatedConvLayer<float>>& layers() const { return layers_; }
    const LinearLayer<float>& post1() const { return post1_; }
    const LinearLayer<float>& post2() const { return post2_; }

private:
    PoseDims dims_;
    LinearLayer<float> cond_;
    LinearLayer<float> input_;
    std::vector<GatedConvLayer<float>> layers_;
    LinearLayer<float> post1_;
    LinearLayer<float> post2_;

    std::vector<RingHistory<float>> layer_inputs_;
    std::deque<PoseFeature> history_;
    PoseVector pending_ = PoseVector::Zero();
    Eigen::Matrix<double, kPoseDim, 1> last_pose_ = Eigen::Matrix<double, kPoseDim, 1>::Zero();
    bool awaiting_feed_ = false;
};

// x ~ N(mu, diag(exp(-s))^2), all twelve dims.
PoseVector sample_pose(const PoseDistribution& dist, Rng& rng);

// Sum over dims of 0.5 ln(2 pi) + ln(sigma_d) + (x_d - mu_d)^2 / (2 sigma_d^2).
double pose_nll_loss(const PoseDistribution& dist, const PoseVector& x);

}  // namespace talkhead
