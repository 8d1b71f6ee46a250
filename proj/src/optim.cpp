#include "banditscreen/optim.hpp"

#include <cmath>

#include "banditscreen/errors.hpp"

namespace banditscreen {

Optimizer::Optimizer(OptKind kind, double lr, double a, double b, double eps)
    : kind_(kind), learning_rate_(lr), decay_or_beta1_(a), beta2_(b), epsilon_(eps) {
    if (lr <= 0.0) throw ContractError("learning rate must be positive");
}

Optimizer Optimizer::sgd(double lr) { return Optimizer(OptKind::kSgd, lr, 0.0, 0.0, 0.0); }

Optimizer Optimizer::rmsprop(double lr, double decay, double eps) {
    return Optimizer(OptKind::kRmsProp, lr, decay, 0.0, eps);
}

Optimizer Optimizer::adam(double lr, double beta1, double beta2, double eps) {
    return Optimizer(OptKind::kAdam, lr, beta1, beta2, eps);
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != grad.size()) throw ShapeError("gradient length does not match parameter count");
    for (double g : grad)
        if (!std::isfinite(g)) throw NumericError("non-finite gradient entry in optimizer step");

    const std::size_t n = params.size();
    switch (kind_) {
        case OptKind::kSgd:
            for (std::size_t i = 0; i < n; ++i) params[i] -= learning_rate_ * grad[i];
            break;
        case OptKind::kRmsProp: {
            if (v_.size() != n) v_.assign(n, 0.0);
            const double d = decay_or_beta1_;
            for (std::size_t i = 0; i < n; ++i) {
                v_[i] = d * v_[i] + (1.0 - d) * grad[i] * grad[i];
                params[i] -= learning_rate_ * grad[i] / (std::sqrt(v_[i]) + epsilon_);
            }
            break;
        }
        case OptKind::kAdam: {
            if (m_.size() != n) {
                m_.assign(n, 0.0);
                v_.assign(n, 0.0);
            }
            ++step_count_;
            const double b1 = decay_or_beta1_, b2 = beta2_;
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
            for (std::size_t i = 0; i < n; ++i) {
                m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
                v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
                const double mhat = m_[i] / c1;
                const double vhat = v_[i] / c2;
                params[i] -= learning_rate_ * mhat / (std::sqrt(vhat) + epsilon_);
            }
            break;
        }
    }
}

void Optimizer::step(DenseNet& net, const GradientTape& tape) {
    if (tape.grad.size() != net.parameter_count()) throw ShapeError("tape length does not match parameter count");
    Vector params = net.flatten();
    step(params, tape.grad);
    net.unflatten(params);
}

void Optimizer::reset() {
    step_count_ = 0;
    m_.clear();
    v_.clear();
}

}  // namespace banditscreen
