#include "banditscreen/nn.hpp"

#include <cmath>
#include <string>

#include "banditscreen/errors.hpp"

namespace banditscreen {

namespace {

void apply_activation(Matrix& m, Activation act) {
    double* d = m.data();
    const std::size_t n = m.size();
    if (act == Activation::kRelu) {
        for (std::size_t i = 0; i < n; ++i) d[i] = d[i] > 0.0 ? d[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < n; ++i) d[i] = std::tanh(d[i]);
    }
}

// Derivative expressed through the post-activation value.
inline double activation_grad(double post, Activation act) {
    return act == Activation::kRelu ? (post > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

Matrix affine(const Matrix& x, const DenseNet::Layer& layer) {
    Matrix out = Matrix::matmul(x, layer.weights);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        double* row = out.row(r);
        for (std::size_t c = 0; c < out.cols(); ++c) row[c] += layer.bias[c];
    }
    return out;
}

}  // namespace

DenseNet::DenseNet(std::vector<std::size_t> sizes, Activation activation)
    : sizes_(std::move(sizes)), activation_(activation) {
    if (sizes_.size() < 2) throw ContractError("DenseNet needs at least input and output sizes");
    for (std::size_t s : sizes_)
        if (s == 0) throw ContractError("DenseNet layer sizes must be positive");
    layers_.reserve(sizes_.size() - 1);
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
        layers_.push_back({Matrix(sizes_[i], sizes_[i + 1]), Vector(sizes_[i + 1], 0.0)});
        parameter_count_ += sizes_[i] * sizes_[i + 1] + sizes_[i + 1];
    }
}

DenseNet DenseNet::glorot(std::vector<std::size_t> sizes, Rng& rng, Activation activation) {
    DenseNet net(std::move(sizes), activation);
    for (auto& layer : net.layers_) {
        const double fan_in = static_cast<double>(layer.weights.rows());
        const double fan_out = static_cast<double>(layer.weights.cols());
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        double* w = layer.weights.data();
        for (std::size_t i = 0; i < layer.weights.size(); ++i) w[i] = rng.uniform(-bound, bound);
    }
    return net;
}

Vector DenseNet::flatten() const {
    Vector out;
    out.reserve(parameter_count_);
    for (const auto& layer : layers_) {
        out.insert(out.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
        out.insert(out.end(), layer.bias.begin(), layer.bias.end());
    }
    return out;
}

void DenseNet::unflatten(std::span<const double> params) {
    if (params.size() != parameter_count_) throw ShapeError("unflatten length does not match parameter count");
    std::size_t off = 0;
    for (auto& layer : layers_) {
        std::copy(params.begin() + off, params.begin() + off + layer.weights.size(), layer.weights.data());
        off += layer.weights.size();
        std::copy(params.begin() + off, params.begin() + off + layer.bias.size(), layer.bias.begin());
        off += layer.bias.size();
    }
}

Matrix DenseNet::forward(const Matrix& input) const {
    if (input.cols() != input_dim()) {
        throw ShapeError("forward input width " + std::to_string(input.cols()) + " != net input dim " +
                         std::to_string(input_dim()));
    }
    Matrix x = affine(input, layers_[0]);
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        apply_activation(x, activation_);
        x = affine(x, layers_[l]);
    }
    x.ensure_finite("forward pass");
    return x;
}

void GradientTape::accumulate(const GradientTape& other, double s) {
    if (grad.empty()) grad.assign(other.grad.size(), 0.0);
    if (grad.size() != other.grad.size()) throw ShapeError("gradient tape length mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += s * other.grad[i];
}

void GradientTape::scale(double s) {
    for (double& g : grad) g *= s;
}

ForwardCache forward_cached(const DenseNet& net, const Matrix& input) {
    if (input.cols() != net.input_dim()) throw ShapeError("forward input width != net input dim");
    ForwardCache cache;
    cache.activations.reserve(net.num_layers() + 1);
    cache.activations.push_back(input);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        Matrix x = affine(cache.activations.back(), net.layer(l));
        if (l + 1 < net.num_layers()) apply_activation(x, net.activation());
        cache.activations.push_back(std::move(x));
    }
    cache.activations.back().ensure_finite("forward pass");
    return cache;
}

namespace {

GradientTape backprop(const DenseNet& net, const ForwardCache& cache, const DropoutMask* mask,
                      const Matrix& loss_grad) {
    const Matrix& out = cache.output();
    if (loss_grad.rows() != out.rows() || loss_grad.cols() != out.cols())
        throw ShapeError("loss gradient shape does not match forward output");

    GradientTape tape;
    tape.grad.assign(net.parameter_count(), 0.0);

    // Flat offsets of each layer's weight block.
    std::vector<std::size_t> offsets(net.num_layers());
    std::size_t off = 0;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        offsets[l] = off;
        off += net.layer(l).weights.size() + net.layer(l).bias.size();
    }

    Matrix delta = loss_grad;  // d loss / d pre-activation of current layer
    for (std::size_t l = net.num_layers(); l-- > 0;) {
        const Matrix& a_in = cache.activations[l];
        const DenseNet::Layer& layer = net.layer(l);
        double* wgrad = tape.grad.data() + offsets[l];
        double* bgrad = wgrad + layer.weights.size();
        const std::size_t in_dim = layer.weights.rows();
        const std::size_t out_dim = layer.weights.cols();

        // dW = a_in^T * delta, db = column sums of delta.
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            const double* arow = a_in.row(r);
            const double* drow = delta.row(r);
            for (std::size_t i = 0; i < in_dim; ++i) {
                const double av = arow[i];
                if (av == 0.0) continue;
                double* wrow = wgrad + i * out_dim;
                for (std::size_t j = 0; j < out_dim; ++j) wrow[j] += av * drow[j];
            }
            for (std::size_t j = 0; j < out_dim; ++j) bgrad[j] += drow[j];
        }

        if (l == 0) break;
        // delta_prev = (delta * W^T) .* act'(a_in) [.* mask]
        Matrix prev = Matrix::matmul_transposed(delta, layer.weights);
        const Vector* scale = mask ? &mask->layer_scale[l - 1] : nullptr;
        for (std::size_t r = 0; r < prev.rows(); ++r) {
            double* prow = prev.row(r);
            const double* arow = a_in.row(r);
            for (std::size_t c = 0; c < prev.cols(); ++c) {
                double g = activation_grad(arow[c], net.activation());
                if (scale) {
                    // a_in already includes the mask scale; gradient w.r.t. the
                    // raw activation needs the same keep/scale factor.
                    const double s = (*scale)[c];
                    if (net.activation() == Activation::kRelu) {
                        g = (s != 0.0 && arow[c] > 0.0) ? s : 0.0;
                    } else {
                        const double raw = s != 0.0 ? arow[c] / s : 0.0;
                        g = s != 0.0 ? s * (1.0 - raw * raw) : 0.0;
                    }
                }
                prow[c] *= g;
            }
        }
        delta = std::move(prev);
    }

    for (double g : tape.grad) {
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in backward pass");
    }
    return tape;
}

}  // namespace

GradientTape backward_from_cache(const DenseNet& net, const ForwardCache& cache, const Matrix& loss_grad) {
    return backprop(net, cache, nullptr, loss_grad);
}

GradientTape backward(const DenseNet& net, const Matrix& input, const Matrix& loss_grad) {
    ForwardCache cache = forward_cached(net, input);
    return backprop(net, cache, nullptr, loss_grad);
}

DropoutMask draw_dropout_mask(const DenseNet& net, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ContractError("dropout probability must be in [0, 1)");
    DropoutMask mask;
    const double keep_scale = 1.0 / (1.0 - p);
    mask.layer_scale.reserve(net.num_layers() - 1);
    for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
        Vector scale(net.layer(l).weights.cols());
        for (double& s : scale) s = rng.uniform() < p ? 0.0 : keep_scale;
        mask.layer_scale.push_back(std::move(scale));
    }
    return mask;
}

ForwardCache forward_dropout_cached(const DenseNet& net, const Matrix& input, const DropoutMask& mask) {
    if (input.cols() != net.input_dim()) throw ShapeError("forward input width != net input dim");
    if (mask.layer_scale.size() + 1 != net.num_layers()) throw ShapeError("dropout mask layer count mismatch");
    ForwardCache cache;
    cache.activations.reserve(net.num_layers() + 1);
    cache.activations.push_back(input);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        Matrix x = affine(cache.activations.back(), net.layer(l));
        if (l + 1 < net.num_layers()) {
            apply_activation(x, net.activation());
            const Vector& scale = mask.layer_scale[l];
            for (std::size_t r = 0; r < x.rows(); ++r) {
                double* row = x.row(r);
                for (std::size_t c = 0; c < x.cols(); ++c) row[c] *= scale[c];
            }
        }
        cache.activations.push_back(std::move(x));
    }
    cache.activations.back().ensure_finite("dropout forward pass");
    return cache;
}

GradientTape backward_dropout_from_cache(const DenseNet& net, const ForwardCache& cache, const DropoutMask& mask,
                                         const Matrix& loss_grad) {
    return backprop(net, cache, &mask, loss_grad);
}

}  // namespace banditscreen
