#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "banditscreen/matrix.hpp"
#include "banditscreen/rng.hpp"

namespace banditscreen {

enum class Activation { kRelu, kTanh };

// Fully connected feed-forward network. Weights are stored per layer as
// [in x out] matrices so a batch forward is a chain of row-major matmuls.
// Parameters are enumerable as one flat vector (layer by layer, weights
// then bias); flatten/unflatten round-trips exactly.
class DenseNet {
  public:
    struct Layer {
        Matrix weights;  // [in x out]
        Vector bias;     // [out]
    };

    // sizes = {input, hidden..., output}; weights start at zero.
    DenseNet(std::vector<std::size_t> sizes, Activation activation = Activation::kRelu);

    // Glorot-style uniform init in +-sqrt(6 / (fan_in + fan_out)).
    static DenseNet glorot(std::vector<std::size_t> sizes, Rng& rng, Activation activation = Activation::kRelu);

    std::size_t input_dim() const { return sizes_.front(); }
    std::size_t output_dim() const { return sizes_.back(); }
    std::size_t num_layers() const { return layers_.size(); }
    const std::vector<std::size_t>& sizes() const { return sizes_; }
    Activation activation() const { return activation_; }

    Layer& layer(std::size_t i) { return layers_[i]; }
    const Layer& layer(std::size_t i) const { return layers_[i]; }

    std::size_t parameter_count() const { return parameter_count_; }
    Vector flatten() const;
    void unflatten(std::span<const double> params);

    // input [batch x input_dim] -> [batch x output_dim]; rows independent.
    Matrix forward(const Matrix& input) const;

  private:
    std::vector<std::size_t> sizes_;
    std::vector<Layer> layers_;
    Activation activation_;
    std::size_t parameter_count_ = 0;
};

// Gradient of a scalar loss with respect to every parameter, flat and
// aligned with DenseNet::flatten order.
struct GradientTape {
    Vector grad;

    void accumulate(const GradientTape& other, double scale = 1.0);
    void scale(double s);
};

// Activations retained by a forward pass for reuse in backprop.
struct ForwardCache {
    std::vector<Matrix> activations;  // activations[0] = input, back() = output
    const Matrix& output() const { return activations.back(); }
};

ForwardCache forward_cached(const DenseNet& net, const Matrix& input);

// d loss / d parameters given d loss / d output. Does not mutate the net.
GradientTape backward(const DenseNet& net, const Matrix& input, const Matrix& loss_grad);
GradientTape backward_from_cache(const DenseNet& net, const ForwardCache& cache, const Matrix& loss_grad);

// One keep/drop mask per hidden layer; kept units carry the 1/(1-p)
// inverted-dropout scale so expectations match the clean net.
struct DropoutMask {
    std::vector<Vector> layer_scale;  // entries are 0 or 1/(1-p)
};

DropoutMask draw_dropout_mask(const DenseNet& net, double p, Rng& rng);
ForwardCache forward_dropout_cached(const DenseNet& net, const Matrix& input, const DropoutMask& mask);
GradientTape backward_dropout_from_cache(const DenseNet& net, const ForwardCache& cache, const DropoutMask& mask,
                                         const Matrix& loss_grad);

}  // namespace banditscreen
