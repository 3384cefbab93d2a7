#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "sagin/error.hpp"
#include "sagin/random.hpp"

namespace sagin::rl {

/// Small fully connected network in 64-bit floats: tanh hidden layers, linear output.
///
/// Parameters live in one flat vector, layer by layer: weights (out x in,
/// row-major) followed by biases. Gradients use the same layout.
class TinyNet {
public:
    struct Tape {
        std::vector<std::vector<double>> activations; // [0] = input, back() = output
    };

    TinyNet() = default;

    /// Zero-initialized network. `sizes` = {inputs, hidden..., outputs}.
    explicit TinyNet(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
        if (sizes_.size() < 2) throw InvalidArgument("TinyNet needs at least input and output sizes");
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw InvalidArgument("TinyNet layer sizes must be > 0");
            offsets_.push_back(n);
            n += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
        }
        params_.assign(n, 0.0);
    }

    /// Uniform Glorot initialization, zero biases.
    static TinyNet glorot(std::vector<std::size_t> sizes, Rng& rng, double gain = 1.0) {
        TinyNet net(std::move(sizes));
        for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
            const double fan_in = static_cast<double>(net.sizes_[l]);
            const double fan_out = static_cast<double>(net.sizes_[l + 1]);
            const double limit = gain * std::sqrt(6.0 / (fan_in + fan_out));
            double* w = net.params_.data() + net.offsets_[l];
            for (std::size_t i = 0; i < net.sizes_[l] * net.sizes_[l + 1]; ++i) w[i] = rng.uniform(-limit, limit);
        }
        return net;
    }

    const std::vector<std::size_t>& sizes() const { return sizes_; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    std::size_t layer_count() const { return sizes_.size() - 1; }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    std::vector<double> forward(std::span<const double> x) const {
        Tape tape;
        return forward(x, tape);
    }

    std::vector<double> forward(std::span<const double> x, Tape& tape) const {
        if (x.size() != input_size()) throw DimensionMismatch("TinyNet input size mismatch");
        tape.activations.assign(1, std::vector<double>(x.begin(), x.end()));
        for (std::size_t l = 0; l < layer_count(); ++l) {
            const auto& in = tape.activations.back();
            const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
            const double* w = params_.data() + offsets_[l];
            const double* b = w + n_in * n_out;
            std::vector<double> out(n_out);
            const bool hidden = l + 1 < layer_count();
            for (std::size_t o = 0; o < n_out; ++o) {
                double z = b[o];
                for (std::size_t i = 0; i < n_in; ++i) z += w[o * n_in + i] * in[i];
                out[o] = hidden ? std::tanh(z) : z;
            }
            tape.activations.push_back(std::move(out));
        }
        return tape.activations.back();
    }

    /// Accumulates dLoss/dParams into `grad` given dLoss/dOutput for a taped forward pass.
    void backward(const Tape& tape, std::span<const double> d_out, std::span<double> grad) const {
        if (grad.size() != params_.size()) throw DimensionMismatch("TinyNet gradient size mismatch");
        if (d_out.size() != output_size()) throw DimensionMismatch("TinyNet output gradient size mismatch");
        std::vector<double> delta(d_out.begin(), d_out.end()); // dLoss/dz of current layer
        for (std::size_t l = layer_count(); l-- > 0;) {
            const std::size_t n_in = sizes_[l], n_out = sizes_[l + 1];
            const auto& in = tape.activations[l];
            const double* w = params_.data() + offsets_[l];
            double* gw = grad.data() + offsets_[l];
            double* gb = gw + n_in * n_out;
            for (std::size_t o = 0; o < n_out; ++o) {
                gb[o] += delta[o];
                for (std::size_t i = 0; i < n_in; ++i) gw[o * n_in + i] += delta[o] * in[i];
            }
            if (l == 0) break;
            std::vector<double> prev(n_in, 0.0);
            for (std::size_t i = 0; i < n_in; ++i) {
                double s = 0.0;
                for (std::size_t o = 0; o < n_out; ++o) s += w[o * n_in + i] * delta[o];
                const double a = in[i]; // tanh output
                prev[i] = s * (1.0 - a * a);
            }
            delta = std::move(prev);
        }
    }

    void sgd_step(std::span<const double> grad, double lr) {
        for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= lr * grad[i];
    }

    friend bool operator==(const TinyNet&, const TinyNet&) = default;

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

/// Loss of one network output; writes dLoss/dOutput when `d_out` is non-null.
using LossFn = std::function<double(std::span<const double> out, std::vector<double>* d_out)>;

/// 0.5 * ||out - target||^2
inline LossFn squared_loss(std::vector<double> target) {
    return [target = std::move(target)](std::span<const double> out, std::vector<double>* d_out) {
        if (out.size() != target.size()) throw DimensionMismatch("squared_loss target size mismatch");
        double loss = 0.0;
        if (d_out) d_out->assign(out.size(), 0.0);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double e = out[i] - target[i];
            loss += 0.5 * e * e;
            if (d_out) (*d_out)[i] = e;
        }
        return loss;
    };
}

inline std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
    for (auto& v : p) v /= z;
    return p;
}

/// -log softmax(out)[label]
inline LossFn cross_entropy_loss(std::size_t label) {
    return [label](std::span<const double> out, std::vector<double>* d_out) {
        auto p = softmax(out);
        if (d_out) {
            *d_out = p;
            (*d_out)[label] -= 1.0;
        }
        return -std::log(p[label]);
    };
}

/// One (input, loss) pair of a gradient check.
struct GradCheckSample {
    std::vector<double> input;
    LossFn loss;
};

/// Largest relative error between backprop and central differences over all parameters.
///
/// Relative error is |a - n| / max(|a|, |n|, floor); the floor keeps
/// parameters with vanishing gradient from dividing roundoff by ~0.
inline double grad_check(const TinyNet& net, std::span<const GradCheckSample> samples, double h = 1e-5,
                         double floor = 1e-6) {
    auto total_loss = [&](const TinyNet& n) {
        double s = 0.0;
        for (const auto& smp : samples) s += smp.loss(n.forward(smp.input), nullptr);
        return s;
    };
    std::vector<double> analytic(net.parameter_count(), 0.0);
    double loss = 0.0;
    for (const auto& smp : samples) {
        TinyNet::Tape tape;
        auto out = net.forward(smp.input, tape);
        std::vector<double> d_out;
        loss += smp.loss(out, &d_out);
        net.backward(tape, d_out, analytic);
    }
    if (!std::isfinite(loss)) throw NonFinite("grad_check: loss is not finite");
    TinyNet probe = net;
    double worst = 0.0;
    for (std::size_t i = 0; i < net.parameter_count(); ++i) {
        if (!std::isfinite(analytic[i])) throw NonFinite("grad_check: analytic gradient is not finite");
        const double orig = probe.parameters()[i];
        probe.parameters()[i] = orig + h;
        const double up = total_loss(probe);
        probe.parameters()[i] = orig - h;
        const double down = total_loss(probe);
        probe.parameters()[i] = orig;
        const double numeric = (up - down) / (2.0 * h);
        if (!std::isfinite(numeric)) throw NonFinite("grad_check: finite difference is not finite");
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

inline double grad_check(const TinyNet& net, const GradCheckSample& sample, double h = 1e-5,
                         double floor = 1e-6) {
    return grad_check(net, std::span<const GradCheckSample>(&sample, 1), h, floor);
}

} // namespace sagin::rl
