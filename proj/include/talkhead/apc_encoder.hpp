#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "talkhead/dsp_frontend.hpp"
#include "talkhead/layers.hpp"

namespace talkhead {

struct ApcDims {
    int input = 80;
    int hidden = 512;
};

// Three stacked unidirectional GRU layers over log-mel frames. The hidden
// state of the last layer is the speech representation; the linear head
// (hidden -> mel) only exists for the self-supervised training objective and
// is never applied at inference.
class ApcModel {
public:
    static constexpr int kLayers = 3;

    ApcModel(std::array<GruWeights<float>, kLayers> layers, std::optional<LinearLayer<float>> head = std::nullopt);

    static ApcModel zeros(ApcDims dims = {});
    static ApcModel random(Rng& rng, ApcDims dims = {});
    // Reads "apc.gru{1,2,3}.*" and, when present, "apc.head.*".
    static ApcModel from_store(const WeightStore& store, ApcDims dims = {});
    void to_store(WeightStore& store) const;

    VectorXf step(const Eigen::Ref<const VectorXf>& mel);
    std::vector<VectorXf> forward(std::span<const MelFrame> frames);

    void reset();

    int input_size() const { return layers_[0].input_size(); }
    int hidden_size() const { return layers_[0].hidden_size(); }
    std::size_t gru_parameter_count() const;

    const std::array<GruWeights<float>, kLayers>& layers() const { return layers_; }
    const std::optional<LinearLayer<float>>& head() const { return head_; }
    const std::array<VectorXf, kLayers>& hidden_states() const { return hidden_; }

private:
    std::array<GruWeights<float>, kLayers> layers_;
    std::optional<LinearLayer<float>> head_;
    std::array<VectorXf, kLayers> hidden_;
};

// Sum over i of |x_{i+n} - y_i| (L1 over every mel dimension), i.e. the
// prediction at step i is scored against the input n frames later.
double apc_loss(std::span<const VectorXf> inputs, std::span<const VectorXf> predictions, int n = 3);

}  // namespace talkhead
