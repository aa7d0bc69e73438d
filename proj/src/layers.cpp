#include "talkhead/layers.hpp"

#include <cmath>

namespace talkhead {

LinearLayer<float> load_linear(const WeightStore& store, const std::string& prefix, int in, int out) {
    return {store.matrix(prefix + ".weight", out, in), store.vector(prefix + ".bias", out)};
}

GruWeights<float> load_gru(const WeightStore& store, const std::string& prefix, int in, int hidden) {
    return {store.matrix(prefix + ".weight_ih", 3 * hidden, in), store.matrix(prefix + ".weight_hh", 3 * hidden, hidden),
            store.vector(prefix + ".bias_ih", 3 * hidden), store.vector(prefix + ".bias_hh", 3 * hidden)};
}

LstmWeights<float> load_lstm(const WeightStore& store, const std::string& prefix, int in, int hidden) {
    return {store.matrix(prefix + ".weight_ih", 4 * hidden, in), store.matrix(prefix + ".weight_hh", 4 * hidden, hidden),
            store.vector(prefix + ".bias_ih", 4 * hidden), store.vector(prefix + ".bias_hh", 4 * hidden)};
}

GatedConvLayer<float> load_gated_conv(const WeightStore& store, const std::string& prefix, int channels, int cond,
                                      int skip, int dilation) {
    GatedConvLayer<float> layer;
    layer.dilation = dilation;
    layer.tap_current = store.matrix(prefix + ".tap_current", 2 * channels, channels);
    layer.tap_dilated = store.matrix(prefix + ".tap_dilated", 2 * channels, channels);
    layer.conv_bias = store.vector(prefix + ".conv_bias", 2 * channels);
    layer.cond_weight = store.matrix(prefix + ".cond_weight", 2 * channels, cond);
    layer.residual = load_linear(store, prefix + ".residual", channels, channels);
    layer.skip = load_linear(store, prefix + ".skip", channels, skip);
    layer.check();
    return layer;
}

void store_linear(WeightStore& store, const std::string& prefix, const LinearLayer<float>& layer) {
    store.set(prefix + ".weight", Tensor::from_matrix(layer.weight));
    store.set(prefix + ".bias", Tensor::from_vector(layer.bias));
}

void store_gru(WeightStore& store, const std::string& prefix, const GruWeights<float>& w) {
    store.set(prefix + ".weight_ih", Tensor::from_matrix(w.weight_ih));
    store.set(prefix + ".weight_hh", Tensor::from_matrix(w.weight_hh));
    store.set(prefix + ".bias_ih", Tensor::from_vector(w.bias_ih));
    store.set(prefix + ".bias_hh", Tensor::from_vector(w.bias_hh));
}

void store_lstm(WeightStore& store, const std::string& prefix, const LstmWeights<float>& w) {
    store.set(prefix + ".weight_ih", Tensor::from_matrix(w.weight_ih));
    store.set(prefix + ".weight_hh", Tensor::from_matrix(w.weight_hh));
    store.set(prefix + ".bias_ih", Tensor::from_vector(w.bias_ih));
    store.set(prefix + ".bias_hh", Tensor::from_vector(w.bias_hh));
}

void store_gated_conv(WeightStore& store, const std::string& prefix, const GatedConvLayer<float>& layer) {
    store.set(prefix + ".tap_current", Tensor::from_matrix(layer.tap_current));
    store.set(prefix + ".tap_dilated", Tensor::from_matrix(layer.tap_dilated));
    store.set(prefix + ".conv_bias", Tensor::from_vector(layer.conv_bias));
    store.set(prefix + ".cond_weight", Tensor::from_matrix(layer.cond_weight));
    store_linear(store, prefix + ".residual", layer.residual);
    store_linear(store, prefix + ".skip", layer.skip);
}

LinearLayer<float> random_linear(int in, int out, Rng& rng) {
    auto layer = LinearLayer<float>::zeros(in, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    fill_uniform(layer.weight, rng, bound);
    fill_uniform(layer.bias, rng, bound);
    return layer;
}

GruWeights<float> random_gru(int in, int hidden, Rng& rng) {
    auto w = GruWeights<float>::zeros(in, hidden);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    fill_uniform(w.weight_ih, rng, bound);
    fill_uniform(w.weight_hh, rng, bound);
    fill_uniform(w.bias_ih, rng, bound);
    fill_uniform(w.bias_hh, rng, bound);
    return w;
}

LstmWeights<float> random_lstm(int in, int hidden, Rng& rng) {
    auto w = LstmWeights<float>::zeros(in, hidden);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    fill_uniform(w.weight_ih, rng, bound);
    fill_uniform(w.weight_hh, rng, bound);
    fill_uniform(w.bias_ih, rng, bound);
    fill_uniform(w.bias_hh, rng, bound);
    return w;
}

GatedConvLayer<float> random_gated_conv(int channels, int cond, int skip, int dilation, Rng& rng) {
    auto layer = GatedConvLayer<float>::zeros(channels, cond, skip, dilation);
    const double conv_bound = 1.0 / std::sqrt(2.0 * channels);
    fill_uniform(layer.tap_current, rng, conv_bound);
    fill_uniform(layer.tap_dilated, rng, conv_bound);
    fill_uniform(layer.conv_bias, rng, conv_bound);
    fill_uniform(layer.cond_weight, rng, 1.0 / std::sqrt(static_cast<double>(cond)));
    layer.residual = random_linear(channels, channels, rng);
    layer.skip = random_linear(channels, skip, rng);
    return layer;
}

}  // namespace talkhead
