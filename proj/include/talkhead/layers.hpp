#pragma once

#include <cmath>
#include <concepts>
#include <string>
#include <vector>

#include "talkhead/errors.hpp"
#include "talkhead/random.hpp"
#include "talkhead/tensor.hpp"
#include "talkhead/types.hpp"

namespace talkhead {

// Layer kernels for streaming inference. Everything is templated on the
// scalar type: the engine runs in float, the test oracles in double.
//
// Weight layout conventions (shared with the weight file):
//   linear:   weight [out, in], bias [out]
//   GRU:      weight_ih [3h, in], weight_hh [3h, h], bias_ih [3h], bias_hh [3h]; gate rows r, z, n
//   LSTM:     weight_ih [4h, in], weight_hh [4h, h], bias_ih [4h], bias_hh [4h]; gate rows i, f, g, o
//   gated conv (C channels, width-2 kernel): rows [0, C) filter, [C, 2C) gate

template <std::floating_point Scalar>
Scalar sigmoid(Scalar x) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
    using S = typename Derived::Scalar;
    return x.unaryExpr([](S v) { return sigmoid(v); });
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
    return x.cwiseMax(typename Derived::Scalar(0));
}

// ---------------------------------------------------------------- linear

template <typename Scalar>
struct LinearLayer {
    Matrix<Scalar> weight;
    Vector<Scalar> bias;

    int in_features() const { return static_cast<int>(weight.cols()); }
    int out_features() const { return static_cast<int>(weight.rows()); }

    static LinearLayer zeros(int in, int out) {
        return {Matrix<Scalar>::Zero(out, in), Vector<Scalar>::Zero(out)};
    }

    template <typename Other>
    LinearLayer<Other> cast() const {
        return {weight.template cast<Other>(), bias.template cast<Other>()};
    }

    std::size_t parameter_count() const { return static_cast<std::size_t>(weight.size() + bias.size()); }
};

template <typename Scalar, typename Derived>
Vector<Scalar> linear_forward(const LinearLayer<Scalar>& layer, const Eigen::MatrixBase<Derived>& input) {
    check_size(layer.bias.size(), layer.weight.rows(), "linear bias");
    check_size(input.size(), layer.weight.cols(), "linear input");
    Vector<Scalar> out = layer.bias;
    out.noalias() += layer.weight * input;
    return out;
}

// ---------------------------------------------------------------- GRU

template <typename Scalar>
struct GruWeights {
    Matrix<Scalar> weight_ih;
    Matrix<Scalar> weight_hh;
    Vector<Scalar> bias_ih;
    Vector<Scalar> bias_hh;

    int input_size() const { return static_cast<int>(weight_ih.cols()); }
    int hidden_size() const { return static_cast<int>(weight_hh.cols()); }

    static GruWeights zeros(int in, int hidden) {
        return {Matrix<Scalar>::Zero(3 * hidden, in), Matrix<Scalar>::Zero(3 * hidden, hidden),
                Vector<Scalar>::Zero(3 * hidden), Vector<Scalar>::Zero(3 * hidden)};
    }

    template <typename Other>
    GruWeights<Other> cast() const {
        return {weight_ih.template cast<Other>(), weight_hh.template cast<Other>(), bias_ih.template cast<Other>(),
                bias_hh.template cast<Other>()};
    }

    std::size_t parameter_count() const {
        return static_cast<std::size_t>(weight_ih.size() + weight_hh.size() + bias_ih.size() + bias_hh.size());
    }

    void check() const {
        const Eigen::Index h = weight_hh.cols();
        check_size(weight_ih.rows(), 3 * h, "GRU weight_ih rows");
        check_size(weight_hh.rows(), 3 * h, "GRU weight_hh rows");
        check_size(bias_ih.size(), 3 * h, "GRU bias_ih");
        check_size(bias_hh.size(), 3 * h, "GRU bias_hh");
    }
};

// r = sigma(W_ir x + b_ir + W_hr h + b_hr)
// z = sigma(W_iz x + b_iz + W_hz h + b_hz)
// n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
// h' = (1 - z) * n + z * h
template <typename Scalar, typename DerivedX, typename DerivedH>
Vector<Scalar> gru_cell_step(const GruWeights<Scalar>& w, const Eigen::MatrixBase<DerivedX>& input,
                             const Eigen::MatrixBase<DerivedH>& hidden) {
    w.check();
    const Eigen::Index h = w.hidden_size();
    check_size(input.size(), w.input_size(), "GRU input");
    check_size(hidden.size(), h, "GRU hidden");

    Vector<Scalar> gi = w.bias_ih;
    gi.noalias() += w.weight_ih * input;
    Vector<Scalar> gh = w.bias_hh;
    gh.noalias() += w.weight_hh * hidden;

    const Vector<Scalar> r = sigmoid(gi.head(h) + gh.head(h));
    const Vector<Scalar> z = sigmoid(gi.segment(h, h) + gh.segment(h, h));
    const Vector<Scalar> n = (gi.tail(h) + r.cwiseProduct(gh.tail(h))).array().tanh().matrix();
    return ((Scalar(1) - z.array()) * n.array() + z.array() * hidden.array()).matrix();
}

// ---------------------------------------------------------------- LSTM

template <typename Scalar>
struct LstmWeights {
    Matrix<Scalar> weight_ih;
    Matrix<Scalar> weight_hh;
    Vector<Scalar> bias_ih;
    Vector<Scalar> bias_hh;

    int input_size() const { return static_cast<int>(weight_ih.cols()); }
    int hidden_size() const { return static_cast<int>(weight_hh.cols()); }

    static LstmWeights zeros(int in, int hidden) {
        return {Matrix<Scalar>::Zero(4 * hidden, in), Matrix<Scalar>::Zero(4 * hidden, hidden),
                Vector<Scalar>::Zero(4 * hidden), Vector<Scalar>::Zero(4 * hidden)};
    }

    template <typename Other>
    LstmWeights<Other> cast() const {
        return {weight_ih.template cast<Other>(), weight_hh.template cast<Other>(), bias_ih.template cast<Other>(),
                bias_hh.template cast<Other>()};
    }

    std::size_t parameter_count() const {
        return static_cast<std::size_t>(weight_ih.size() + weight_hh.size() + bias_ih.size() + bias_hh.size());
    }

    void check() const {
        const Eigen::Index h = weight_hh.cols();
        check_size(weight_ih.rows(), 4 * h, "LSTM weight_ih rows");
        check_size(weight_hh.rows(), 4 * h, "LSTM weight_hh rows");
        check_size(bias_ih.size(), 4 * h, "LSTM bias_ih");
        check_size(bias_hh.size(), 4 * h, "LSTM bias_hh");
    }
};

template <typename Scalar>
struct LstmState {
    Vector<Scalar> hidden;
    Vector<Scalar> cell;

    static LstmState zeros(int size) { return {Vector<Scalar>::Zero(size), Vector<Scalar>::Zero(size)}; }
};

// c' = f * c + i * g,  h' = o * tanh(c')
template <typename Scalar, typename DerivedX>
LstmState<Scalar> lstm_cell_step(const LstmWeights<Scalar>& w, const Eigen::MatrixBase<DerivedX>& input,
                                 const LstmState<Scalar>& state) {
    w.check();
    const Eigen::Index h = w.hidden_size();
    check_size(input.size(), w.input_size(), "LSTM input");
    check_size(state.hidden.size(), h, "LSTM hidden");
    check_size(state.cell.size(), h, "LSTM cell");

    Vector<Scalar> gates = w.bias_ih + w.bias_hh;
    gates.noalias() += w.weight_ih * input;
    gates.noalias() += w.weight_hh * state.hidden;

    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    const Array i = sigmoid(gates.head(h)).array();
    const Array f = sigmoid(gates.segment(h, h)).array();
    const Array g = gates.segment(2 * h, h).array().tanh();
    const Array o = sigmoid(gates.tail(h)).array();

    LstmState<Scalar> next;
    next.cell = (f * state.cell.array() + i * g).matrix();
    next.hidden = (o * next.cell.array().tanh()).matrix();
    return next;
}

// ---------------------------------------------------------------- gated dilated conv

// Fixed-capacity history of vectors; lag(0) is the most recent push. Lags
// that reach before the first push read as zero vectors.
template <typename Scalar>
class RingHistory {
public:
    RingHistory() = default;
    RingHistory(int capacity, int dim)
        : slots_(static_cast<std::size_t>(capacity), Vector<Scalar>::Zero(dim)), zero_(Vector<Scalar>::Zero(dim)) {}

    template <typename Derived>
    void push(const Eigen::MatrixBase<Derived>& v) {
        head_ = (head_ + 1) % slots_.size();
        slots_[head_] = v;
        ++pushed_;
    }

    const Vector<Scalar>& lag(int k) const {
        if (k < 0 || static_cast<std::size_t>(k) >= slots_.size())
            throw DomainError("RingHistory: lag " + std::to_string(k) + " outside capacity " +
                              std::to_string(slots_.size()));
        if (static_cast<long long>(k) >= pushed_) return zero_;
        return slots_[(head_ + slots_.size() - static_cast<std::size_t>(k)) % slots_.size()];
    }

    int capacity() const { return static_cast<int>(slots_.size()); }
    int dim() const { return static_cast<int>(zero_.size()); }
    long long pushed() const { return pushed_; }

    void reset() {
        for (auto& s : slots_) s.setZero();
        head_ = 0;
        pushed_ = 0;
    }

private:
    std::vector<Vector<Scalar>> slots_;
    Vector<Scalar> zero_;
    std::size_t head_ = 0;
    long long pushed_ = 0;
};

template <typename Scalar>
struct GatedConvLayer {
    int dilation = 1;
    Matrix<Scalar> tap_current;    // [2C, C], applied to x_t
    Matrix<Scalar> tap_dilated;    // [2C, C], applied to x_{t - dilation}
    Vector<Scalar> conv_bias;      // [2C]
    Matrix<Scalar> cond_weight;    // [2C, cond]
    LinearLayer<Scalar> residual;  // C -> C
    LinearLayer<Scalar> skip;      // C -> skip channels

    int channels() const { return static_cast<int>(tap_current.cols()); }
    int cond_channels() const { return static_cast<int>(cond_weight.cols()); }
    int skip_channels() const { return skip.out_features(); }

    static GatedConvLayer zeros(int channels, int cond, int skip_channels, int dilation) {
        return {dilation,
                Matrix<Scalar>::Zero(2 * channels, channels),
                Matrix<Scalar>::Zero(2 * channels, channels),
                Vector<Scalar>::Zero(2 * channels),
                Matrix<Scalar>::Zero(2 * channels, cond),
                LinearLayer<Scalar>::zeros(channels, channels),
                LinearLayer<Scalar>::zeros(channels, skip_channels)};
    }

    template <typename Other>
    GatedConvLayer<Other> cast() const {
        return {dilation,
                tap_current.template cast<Other>(),
                tap_dilated.template cast<Other>(),
                conv_bias.template cast<Other>(),
                cond_weight.template cast<Other>(),
                residual.template cast<Other>(),
                skip.template cast<Other>()};
    }

    std::size_t parameter_count() const {
        return static_cast<std::size_t>(tap_current.size() + tap_dilated.size() + conv_bias.size() +
                                        cond_weight.size()) +
               residual.parameter_count() + skip.parameter_count();
    }

    void check() const {
        if (dilation < 1) throw DomainError("gated conv: dilation must be >= 1, got " + std::to_string(dilation));
        const Eigen::Index c = tap_current.cols();
        check_size(tap_current.rows(), 2 * c, "gated conv tap_current rows");
        check_size(tap_dilated.rows(), 2 * c, "gated conv tap_dilated rows");
        check_size(tap_dilated.cols(), c, "gated conv tap_dilated cols");
        check_size(conv_bias.size(), 2 * c, "gated conv bias");
        check_size(cond_weight.rows(), 2 * c, "gated conv cond_weight rows");
        check_size(residual.weight.rows(), c, "gated conv residual rows");
        check_size(residual.weight.cols(), c, "gated conv residual cols");
        check_size(skip.weight.cols(), c, "gated conv skip cols");
    }
};

template <typename Scalar>
struct GatedConvOutput {
    Vector<Scalar> residual;
    Vector<Scalar> skip;
};

// z = tanh(Wf * [x_t, x_{t-d}] + Vf c) . sigma(Wg * [x_t, x_{t-d}] + Vg c)
// residual = x_t + R z,  skip = S z
template <typename Scalar, typename DerivedA, typename DerivedB, typename DerivedC>
GatedConvOutput<Scalar> gated_dilated_conv_step(const GatedConvLayer<Scalar>& layer,
                                                const Eigen::MatrixBase<DerivedA>& current,
                                                const Eigen::MatrixBase<DerivedB>& dilated,
                                                const Eigen::MatrixBase<DerivedC>& condition) {
    layer.check();
    const Eigen::Index c = layer.channels();
    check_size(current.size(), c, "gated conv input x_t");
    check_size(dilated.size(), c, "gated conv input x_{t-d}");
    check_size(condition.size(), layer.cond_channels(), "gated conv condition");

    Vector<Scalar> pre = layer.conv_bias;
    pre.noalias() += layer.tap_current * current;
    pre.noalias() += layer.tap_dilated * dilated;
    pre.noalias() += layer.cond_weight * condition;
    const Vector<Scalar> z = (pre.head(c).array().tanh() * sigmoid(pre.tail(c)).array()).matrix();

    GatedConvOutput<Scalar> out;
    out.residual = current + linear_forward(layer.residual, z);
    out.skip = linear_forward(layer.skip, z);
    return out;
}

// History form: reads x_t at lag 0 and x_{t - dilation} at lag `dilation`.
template <typename Scalar, typename DerivedC>
GatedConvOutput<Scalar> gated_dilated_conv_step(const GatedConvLayer<Scalar>& layer,
                                                const RingHistory<Scalar>& history,
                                                const Eigen::MatrixBase<DerivedC>& condition) {
    layer.check();
    return gated_dilated_conv_step(layer, history.lag(0), history.lag(layer.dilation), condition);
}

// ---------------------------------------------------------------- weight store I/O (float)

LinearLayer<float> load_linear(const WeightStore& store, const std::string& prefix, int in, int out);
GruWeights<float> load_gru(const WeightStore& store, const std::string& prefix, int in, int hidden);
LstmWeights<float> load_lstm(const WeightStore& store, const std::string& prefix, int in, int hidden);
GatedConvLayer<float> load_gated_conv(const WeightStore& store, const std::string& prefix, int channels,
                                      int cond, int skip, int dilation);

void store_linear(WeightStore& store, const std::string& prefix, const LinearLayer<float>& layer);
void store_gru(WeightStore& store, const std::string& prefix, const GruWeights<float>& w);
void store_lstm(WeightStore& store, const std::string& prefix, const LstmWeights<float>& w);
void store_gated_conv(WeightStore& store, const std::string& prefix, const GatedConvLayer<float>& layer);

// Uniform(-1/sqrt(fan), 1/sqrt(fan)) initialisation for exercising the
// pipeline without trained weights.
LinearLayer<float> random_linear(int in, int out, Rng& rng);
GruWeights<float> random_gru(int in, int hidden, Rng& rng);
LstmWeights<float> random_lstm(int in, int hidden, Rng& rng);
GatedConvLayer<float> random_gated_conv(int channels, int cond, int skip, int dilation, Rng& rng);

}  // namespace talkhead
