#include "talkhead/pose_generator.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace talkhead {

std::vector<int> pose_dilations(const PoseDims& dims) {
    std::vector<int> d;
    for (int b = 0; b < dims.blocks; ++b)
        for (int l = 0; l < dims.layers_per_block; ++l) d.push_back(1 << l);
    return d;
}

int receptive_field(const PoseDims& dims) {
    int rf = 1;
    for (int d : pose_dilations(dims)) rf += d;
    return rf;
}

namespace {

std::string layer_prefix(const PoseDims& dims, std::size_t index) {
    const auto per = static_cast<std::size_t>(dims.layers_per_block);
    return "pose.block" + std::to_string(index / per + 1) + ".layer" + std::to_string(index % per + 1);
}

}  // namespace

PoseGenerator::PoseGenerator(PoseDims dims, LinearLayer<float> cond, LinearLayer<float> input,
                             std::vector<GatedConvLayer<float>> layers, LinearLayer<float> post1,
                             LinearLayer<float> post2)
    : dims_(dims),
      cond_(std::move(cond)),
      input_(std::move(input)),
      layers_(std::move(layers)),
      post1_(std::move(post1)),
      post2_(std::move(post2)) {
    if (dims_.blocks < 1 || dims_.layers_per_block < 1 || dims_.layers_per_block > 16)
        throw DomainError("pose model: blocks >= 1 and layers_per_block in [1, 16] required");
    const auto dilations = pose_dilations(dims_);
    check_size(static_cast<Eigen::Index>(layers_.size()), static_cast<Eigen::Index>(dilations.size()),
               "pose model layer count");
    check_size(cond_.in_features(), dims_.condition, "pose cond projection input");
    check_size(cond_.out_features(), dims_.cond_channels, "pose cond projection output");
    check_size(input_.in_features(), kPoseFeatureDim, "pose input projection input");
    check_size(input_.out_features(), dims_.residual_channels, "pose input projection output");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].check();
        if (layers_[i].dilation != dilations[i])
            throw DomainError("pose model: layer " + std::to_string(i) + " has dilation " +
                              std::to_string(layers_[i].dilation) + ", expected " + std::to_string(dilations[i]));
        check_size(layers_[i].channels(), dims_.residual_channels, "pose layer channels");
        check_size(layers_[i].cond_channels(), dims_.cond_channels, "pose layer condition channels");
        check_size(layers_[i].skip_channels(), dims_.skip_channels, "pose layer skip channels");
    }
    check_size(post1_.in_features(), dims_.skip_channels, "pose post-net input");
    check_size(post2_.in_features(), post1_.out_features(), "pose post-net second layer input");
    check_size(post2_.out_features(), 2 * kPoseFeatureDim, "pose post-net output");
    reset();
}

PoseGenerator PoseGenerator::zeros(PoseDims dims) {
    std::vector<GatedConvLayer<float>> layers;
    for (int d : pose_dilations(dims))
        layers.push_back(GatedConvLayer<float>::zeros(dims.residual_channels, dims.cond_channels, dims.skip_channels, d));
    return PoseGenerator(dims, LinearLayer<float>::zeros(dims.condition, dims.cond_channels),
                         LinearLayer<float>::zeros(kPoseFeatureDim, dims.residual_channels), std::move(layers),
                         LinearLayer<float>::zeros(dims.skip_channels, dims.skip_channels),
                         LinearLayer<float>::zeros(dims.skip_channels, 2 * kPoseFeatureDim));
}

PoseGenerator PoseGenerator::random(Rng& rng, PoseDims dims) {
    auto cond = random_linear(dims.condition, dims.cond_channels, rng);
    auto input = random_linear(kPoseFeatureDim, dims.residual_channels, rng);
    std::vector<GatedConvLayer<float>> layers;
    for (int d : pose_dilations(dims))
        layers.push_back(random_gated_conv(dims.residual_channels, dims.cond_channels, dims.skip_channels, d, rng));
    auto post1 = random_linear(dims.skip_channels, dims.skip_channels, rng);
    auto post2 = random_linear(dims.skip_channels, 2 * kPoseFeatureDim, rng);
    return PoseGenerator(dims, std::move(cond), std::move(input), std::move(layers), std::move(post1),
                         std::move(post2));
}

PoseGenerator PoseGenerator::from_store(const WeightStore& store, PoseDims dims) {
    auto cond = load_linear(store, "pose.cond", dims.condition, dims.cond_channels);
    auto input = load_linear(store, "pose.input", kPoseFeatureDim, dims.residual_channels);
    std::vector<GatedConvLayer<float>> layers;
    const auto dilations = pose_dilations(dims);
    for (std::size_t i = 0; i < dilations.size(); ++i)
        layers.push_back(load_gated_conv(store, layer_prefix(dims, i), dims.residual_channels, dims.cond_channels,
                                         dims.skip_channels, dilations[i]));
    auto post1 = load_linear(store, "pose.post.conv1", dims.skip_channels, dims.skip_channels);
    auto post2 = load_linear(store, "pose.post.conv2", dims.skip_channels, 2 * kPoseFeatureDim);
    return PoseGenerator(dims, std::move(cond), std::move(input), std::move(layers), std::move(post1),
                         std::move(post2));
}

void PoseGenerator::to_store(WeightStore& store) const {
    store_linear(store, "pose.cond", cond_);
    store_linear(store, "pose.input", input_);
    for (std::size_t i = 0; i < layers_.size(); ++i) store_gated_conv(store, layer_prefix(dims_, i), layers_[i]);
    store_linear(store, "pose.post.conv1", post1_);
    store_linear(store, "pose.post.conv2", post2_);
}

void PoseGenerator::reset() {
    layer_inputs_.clear();
    for (const auto& layer : layers_) layer_inputs_.emplace_back(layer.dilation + 1, dims_.residual_channels);
    history_.clear();
    pending_.setZero();
    last_pose_.setZero();
    awaiting_feed_ = false;
}

std::size_t PoseGenerator::parameter_count() const {
    std::size_t n = cond_.parameter_count() + input_.parameter_count() + post1_.parameter_count() +
                    post2_.parameter_count();
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

PoseDistribution PoseGenerator::step(const Eigen::Ref<const VectorXf>& repr) {
    if (awaiting_feed_) throw DomainError("pose model: step() called twice without feed()");
    check_size(repr.size(), dims_.condition, "pose model condition");

    const VectorXf condition = linear_forward(cond_, repr);
    VectorXf x = linear_forward(input_, pending_.cast<float>());
    VectorXf skip_sum = VectorXf::Zero(dims_.skip_channels);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layer_inputs_[i].push(x);
        auto out = gated_dilated_conv_step(layers_[i], layer_inputs_[i], condition);
        skip_sum += out.skip;
        x = std::move(out.residual);
    }
    VectorXf y = linear_forward(post1_, relu(skip_sum));
    y = linear_forward(post2_, relu(y));

    awaiting_feed_ = true;
    PoseDistribution dist;
    dist.mu = y.head(kPoseFeatureDim).cast<double>();
    dist.neg_log_sigma = y.tail(kPoseFeatureDim).cast<double>();
    return dist;
}

void PoseGenerator::feed(const HeadPose& pose) {
    const auto p = pose.as_vector();
    PoseFeature f;
    f.x << p, p - last_pose_;
    feed_feature(f);
}

void PoseGenerator::feed_feature(const PoseFeature& f) {
    if (!awaiting_feed_) throw DomainError("pose model: feed() called without a preceding step()");
    if (!f.x.allFinite()) throw DomainError("pose model: fed feature is not finite");
    last_pose_ = f.pose();
    pending_ = f.x;
    history_.push_back(f);
    while (static_cast<int>(history_.size()) > receptive_field()) history_.pop_front();
    awaiting_feed_ = false;
}

HeadPose PoseGenerator::sample_and_feed(const PoseDistribution& dist, Rng& rng) {
    const PoseVector x = sample_pose(dist, rng);
    const HeadPose pose = HeadPose::from_vector(x.head<kPoseDim>());
    feed(pose);
    return pose;
}

PoseVector sample_pose(const PoseDistribution& dist, Rng& rng) {
    const PoseVector sigma = dist.sigma();
    PoseVector x;
    for (int d = 0; d < kPoseFeatureDim; ++d) x[d] = dist.mu[d] + sigma[d] * rng.normal();
    return x;
}

double pose_nll_loss(const PoseDistribution& dist, const PoseVector& x) {
    const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double nll = 0.0;
    for (int d = 0; d < kPoseFeatureDim; ++d) {
        const double s = dist.neg_log_sigma[d];
        const double diff = x[d] - dist.mu[d];
        nll += half_log_two_pi - s + 0.5 * diff * diff * std::exp(2.0 * s);
    }
    return nll;
}

}  // namespace talkhead
