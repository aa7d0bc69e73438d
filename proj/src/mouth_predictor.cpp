#include "talkhead/mouth_predictor.hpp"

#include <string>

namespace talkhead {

MouthModel::MouthModel(std::array<LstmWeights<float>, kLstmLayers> lstm, std::array<LinearLayer<float>, 3> mlp,
                       int delay_frames)
    : lstm_(std::move(lstm)), mlp_(std::move(mlp)), delay_(delay_frames) {
    if (delay_ < 0) throw DomainError("mouth model: delay must be >= 0, got " + std::to_string(delay_));
    for (int l = 0; l < kLstmLayers; ++l) {
        lstm_[l].check();
        if (l > 0) check_size(lstm_[l].input_size(), lstm_[l - 1].hidden_size(), "mouth LSTM layer input");
    }
    check_size(mlp_[0].in_features(), lstm_.back().hidden_size(), "mouth MLP input");
    for (int l = 1; l < 3; ++l) check_size(mlp_[l].in_features(), mlp_[l - 1].out_features(), "mouth MLP layer input");
    check_size(mlp_[2].out_features(), kMouthPoints * 3, "mouth MLP output");
    reset();
}

MouthModel MouthModel::zeros(int delay_frames, MouthDims dims) {
    const int h = dims.lstm_hidden;
    return MouthModel({LstmWeights<float>::zeros(dims.input, h), LstmWeights<float>::zeros(h, h),
                       LstmWeights<float>::zeros(h, h)},
                      {LinearLayer<float>::zeros(h, dims.mlp[0]), LinearLayer<float>::zeros(dims.mlp[0], dims.mlp[1]),
                       LinearLayer<float>::zeros(dims.mlp[1], dims.mlp[2])},
                      delay_frames);
}

MouthModel MouthModel::random(Rng& rng, int delay_frames, MouthDims dims) {
    const int h = dims.lstm_hidden;
    auto l1 = random_lstm(dims.input, h, rng);
    auto l2 = random_lstm(h, h, rng);
    auto l3 = random_lstm(h, h, rng);
    auto m1 = random_linear(h, dims.mlp[0], rng);
    auto m2 = random_linear(dims.mlp[0], dims.mlp[1], rng);
    auto m3 = random_linear(dims.mlp[1], dims.mlp[2], rng);
    return MouthModel({std::move(l1), std::move(l2), std::move(l3)}, {std::move(m1), std::move(m2), std::move(m3)},
                      delay_frames);
}

MouthModel MouthModel::from_store(const WeightStore& store, int delay_frames, MouthDims dims) {
    const int h = dims.lstm_hidden;
    std::array<LstmWeights<float>, kLstmLayers> lstm;
    for (int l = 0; l < kLstmLayers; ++l)
        lstm[l] = load_lstm(store, "mouth.lstm" + std::to_string(l + 1), l == 0 ? dims.input : h, h);
    std::array<LinearLayer<float>, 3> mlp;
    int in = h;
    for (int l = 0; l < 3; ++l) {
        mlp[l] = load_linear(store, "mouth.mlp" + std::to_string(l + 1), in, dims.mlp[l]);
        in = dims.mlp[l];
    }
    return MouthModel(std::move(lstm), std::move(mlp), delay_frames);
}

void MouthModel::to_store(WeightStore& store) const {
    for (int l = 0; l < kLstmLayers; ++l) store_lstm(store, "mouth.lstm" + std::to_string(l + 1), lstm_[l]);
    for (int l = 0; l < 3; ++l) store_linear(store, "mouth.mlp" + std::to_string(l + 1), mlp_[l]);
}

void MouthModel::reset() {
    for (int l = 0; l < kLstmLayers; ++l) state_[l] = LstmState<float>::zeros(lstm_[l].hidden_size());
    consumed_ = 0;
}

std::size_t MouthModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : lstm_) n += l.parameter_count();
    for (const auto& l : mlp_) n += l.parameter_count();
    return n;
}

std::optional<MouthDisplacement> MouthModel::step(const Eigen::Ref<const VectorXf>& repr) {
    check_size(repr.size(), lstm_[0].input_size(), "mouth model input");
    state_[0] = lstm_cell_step(lstm_[0], repr, state_[0]);
    for (int l = 1; l < kLstmLayers; ++l) state_[l] = lstm_cell_step(lstm_[l], state_[l - 1].hidden, state_[l]);
    const std::int64_t k = consumed_++;
    if (k < delay_) return std::nullopt;

    VectorXf x = relu(linear_forward(mlp_[0], state_.back().hidden));
    x = relu(linear_forward(mlp_[1], x));
    x = linear_forward(mlp_[2], x);

    MouthDisplacement out;
    out.delta = Eigen::Map<const Eigen::Matrix<float, kMouthPoints, 3, Eigen::RowMajor>>(x.data()).cast<double>();
    out.frame_index = k - delay_;
    return out;
}

double mouth_l2_loss(std::span<const MouthOffsets> predicted, std::span<const MouthOffsets> truth) {
    if (predicted.size() != truth.size())
        throw DimensionError("mouth_l2_loss: sequences differ in length (" + std::to_string(predicted.size()) +
                             " vs " + std::to_string(truth.size()) + ")");
    double loss = 0.0;
    for (std::size_t t = 0; t < predicted.size(); ++t) loss += (predicted[t] - truth[t]).squaredNorm();
    return loss;
}

}  // namespace talkhead
