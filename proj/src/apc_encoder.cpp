#include "talkhead/apc_encoder.hpp"

#include <string>

namespace talkhead {

ApcModel::ApcModel(std::array<GruWeights<float>, kLayers> layers, std::optional<LinearLayer<float>> head)
    : layers_(std::move(layers)), head_(std::move(head)) {
    for (int l = 0; l < kLayers; ++l) {
        layers_[l].check();
        if (l > 0) check_size(layers_[l].input_size(), layers_[l - 1].hidden_size(), "APC layer input");
    }
    if (head_) {
        check_size(head_->in_features(), hidden_size(), "APC head input");
        check_size(head_->out_features(), input_size(), "APC head output");
    }
    reset();
}

ApcModel ApcModel::zeros(ApcDims dims) {
    return ApcModel({GruWeights<float>::zeros(dims.input, dims.hidden), GruWeights<float>::zeros(dims.hidden, dims.hidden),
                     GruWeights<float>::zeros(dims.hidden, dims.hidden)});
}

ApcModel ApcModel::random(Rng& rng, ApcDims dims) {
    auto l1 = random_gru(dims.input, dims.hidden, rng);
    auto l2 = random_gru(dims.hidden, dims.hidden, rng);
    auto l3 = random_gru(dims.hidden, dims.hidden, rng);
    return ApcModel({std::move(l1), std::move(l2), std::move(l3)}, random_linear(dims.hidden, dims.input, rng));
}

ApcModel ApcModel::from_store(const WeightStore& store, ApcDims dims) {
    std::array<GruWeights<float>, kLayers> layers;
    for (int l = 0; l < kLayers; ++l)
        layers[l] = load_gru(store, "apc.gru" + std::to_string(l + 1), l == 0 ? dims.input : dims.hidden, dims.hidden);
    std::optional<LinearLayer<float>> head;
    if (store.contains("apc.head.weight")) head = load_linear(store, "apc.head", dims.hidden, dims.input);
    return ApcModel(std::move(layers), std::move(head));
}

void ApcModel::to_store(WeightStore& store) const {
    for (int l = 0; l < kLayers; ++l) store_gru(store, "apc.gru" + std::to_string(l + 1), layers_[l]);
    if (head_) store_linear(store, "apc.head", *head_);
}

void ApcModel::reset() {
    for (int l = 0; l < kLayers; ++l) hidden_[l] = VectorXf::Zero(layers_[l].hidden_size());
}

VectorXf ApcModel::step(const Eigen::Ref<const VectorXf>& mel) {
    check_size(mel.size(), input_size(), "APC input frame");
    hidden_[0] = gru_cell_step(layers_[0], mel, hidden_[0]);
    for (int l = 1; l < kLayers; ++l) hidden_[l] = gru_cell_step(layers_[l], hidden_[l - 1], hidden_[l]);
    return hidden_[kLayers - 1];
}

std::vector<VectorXf> ApcModel::forward(std::span<const MelFrame> frames) {
    std::vector<VectorXf> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(step(f.values));
    return out;
}

std::size_t ApcModel::gru_parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

double apc_loss(std::span<const VectorXf> inputs, std::span<const VectorXf> predictions, int n) {
    if (inputs.size() != predictions.size())
        throw DimensionError("apc_loss: input and prediction sequences differ in length");
    if (n < 1) throw DomainError("apc_loss: n must be >= 1");
    const auto T = static_cast<long long>(inputs.size());
    if (T <= n) throw DomainError("apc_loss: sequence length " + std::to_string(T) + " must exceed n = " + std::to_string(n));
    double loss = 0.0;
    for (long long i = 0; i + n < T; ++i) {
        check_size(predictions[i].size(), inputs[i + n].size(), "apc_loss frame");
        loss += (inputs[i + n].cast<double>() - predictions[i].cast<double>()).cwiseAbs().sum();
    }
    return loss;
}

}  // namespace talkhead
