#pragma once

#include <cstddef>
#include <span>

#include "banditscreen/nn.hpp"

namespace banditscreen {

enum class OptKind { kSgd, kRmsProp, kAdam };

// First-order optimizer over a flat parameter vector. State (moments) is
// lazily sized on the first step and advances deterministically.
class Optimizer {
  public:
    static Optimizer sgd(double learning_rate);
    static Optimizer rmsprop(double learning_rate, double decay = 0.9, double epsilon = 1e-8);
    static Optimizer adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

    OptKind kind() const { return kind_; }
    double learning_rate() const { return learning_rate_; }

    // Descends params along grad. Throws NumericError on non-finite gradients.
    void step(std::span<double> params, std::span<const double> grad);
    void step(DenseNet& net, const GradientTape& tape);

    void reset();

  private:
    Optimizer(OptKind kind, double lr, double a, double b, double eps);

    OptKind kind_;
    double learning_rate_;
    double decay_or_beta1_;
    double beta2_;
    double epsilon_;
    std::size_t step_count_ = 0;
    Vector m_;
    Vector v_;
};

}  // namespace banditscreen
