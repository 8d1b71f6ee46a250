#include "banditscreen/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "banditscreen/errors.hpp"

namespace banditscreen {

namespace {

constexpr double kObsVariance = 0.01;
constexpr double kLogTwoPi = 1.8378770664093453;

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double gaussian_log_density(double w, double mean, double sigma) {
    const double z = (w - mean) / sigma;
    return -std::log(sigma) - 0.5 * z * z - 0.5 * kLogTwoPi;
}

int greedy_under(const DenseNet& net, const Vector& x_g, const ActionSet& actions) {
    return argmax_scores(net.forward(concat_inputs(x_g, actions)));
}

Matrix batch_inputs(const HistoryBuffer& history, std::span<const std::size_t> pool,
                    std::size_t batch, Rng& rng, Vector& targets_out,
                    std::vector<std::size_t>* picked_out = nullptr) {
    const HistoryRow& first = history[pool[0]];
    const std::size_t dim = first.context.size() + first.action_features.size();
    Matrix input(batch, dim);
    targets_out.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t idx = pool[rng.uniform_index(pool.size())];
        if (picked_out) picked_out->push_back(idx);
        const HistoryRow& row = history[idx];
        double* dst = input.row(b);
        std::copy(row.context.begin(), row.context.end(), dst);
        std::copy(row.action_features.begin(), row.action_features.end(),
                  dst + row.context.size());
        targets_out[b] = row.reward;
    }
    return input;
}

Matrix mse_loss_grad(const Matrix& pred, const Vector& targets) {
    Matrix grad(pred.rows(), 1);
    const double scale = 2.0 / static_cast<double>(pred.rows());
    for (std::size_t b = 0; b < pred.rows(); ++b) grad(b, 0) = scale * (pred(b, 0) - targets[b]);
    return grad;
}

}  // namespace

Matrix concat_inputs(const Vector& x_g, const ActionSet& actions) {
    Matrix input(actions.size(), x_g.size() + actions.dim());
    for (std::size_t a = 0; a < actions.size(); ++a) {
        double* dst = input.row(a);
        std::copy(x_g.begin(), x_g.end(), dst);
        const double* feat = actions.features.row(a);
        std::copy(feat, feat + actions.dim(), dst + x_g.size());
    }
    return input;
}

int argmax_scores(const Matrix& scores) {
    if (scores.rows() == 0 || scores.cols() != 1)
        throw ShapeError("score matrix must be a non-empty column");
    int best = 0;
    for (std::size_t a = 1; a < scores.rows(); ++a)
        if (scores(a, 0) > scores(best, 0)) best = static_cast<int>(a);
    return best;
}

int uniform_choose(const ActionSet& actions, Rng& rng) {
    if (actions.size() == 0) throw ContractError("uniform_choose over an empty action set");
    return static_cast<int>(rng.uniform_index(actions.size()));
}

int neural_greedy_choose(const DenseNet& net, const Vector& x_g, const ActionSet& actions,
                         double epsilon, Rng& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) throw ContractError("epsilon must lie in [0, 1]");
    if (epsilon > 0.0 && rng.uniform() < epsilon) return uniform_choose(actions, rng);
    return greedy_under(net, x_g, actions);
}

int dropout_choose(const DenseNet& net, const Vector& x_g, const ActionSet& actions, double p,
                   Rng& rng) {
    const DropoutMask mask = draw_dropout_mask(net, p, rng);
    const ForwardCache cache = forward_dropout_cached(net, concat_inputs(x_g, actions), mask);
    return argmax_scores(cache.activations.back());
}

int bootstrapped_choose(const std::vector<DenseNet>& nets, const Vector& x_g,
                        const ActionSet& actions, Rng& rng) {
    if (nets.empty()) throw ContractError("bootstrapped_choose needs at least one net");
    return greedy_under(nets[rng.uniform_index(nets.size())], x_g, actions);
}

int parameter_noise_choose(const DenseNet& net, double sigma, const Vector& x_g,
                           const ActionSet& actions, Rng& rng) {
    if (sigma < 0.0) throw ContractError("noise scale must be nonnegative");
    DenseNet perturbed = net;
    Vector params = perturbed.flatten();
    for (double& w : params) w += sigma * rng.normal();
    perturbed.unflatten(params);
    return greedy_under(perturbed, x_g, actions);
}

double adapt_noise(double sigma, double distance, double threshold) {
    if (sigma <= 0.0) throw ContractError("noise scale must be positive to adapt");
    return distance < threshold ? sigma * 1.01 : sigma / 1.01;
}

void train_regression(DenseNet& net, const HistoryBuffer& history,
                      std::span<const std::size_t> rows, Optimizer& opt, Rng& rng, int steps,
                      std::size_t batch, double dropout_p) {
    if (rows.empty()) throw ContractError("train_regression over an empty row pool");
    if (batch == 0) throw ContractError("train_regression needs a positive batch size");
    Vector targets;
    for (int step = 0; step < steps; ++step) {
        const Matrix input = batch_inputs(history, rows, batch, rng, targets);
        GradientTape tape;
        if (dropout_p > 0.0) {
            const DropoutMask mask = draw_dropout_mask(net, dropout_p, rng);
            const ForwardCache cache = forward_dropout_cached(net, input, mask);
            tape = backward_dropout_from_cache(net, cache, mask,
                                               mse_loss_grad(cache.activations.back(), targets));
        } else {
            const ForwardCache cache = forward_cached(net, input);
            tape = backward_from_cache(net, cache, mse_loss_grad(cache.activations.back(), targets));
        }
        opt.step(net, tape);
    }
}

std::vector<std::size_t> bootstrap_resample(std::size_t n, Rng& rng) {
    if (n == 0) throw ContractError("bootstrap resample of an empty set");
    std::vector<std::size_t> indices(n);
    for (std::size_t& idx : indices) idx = rng.uniform_index(n);
    return indices;
}

void bootstrapped_update(std::vector<DenseNet>& nets, std::vector<Optimizer>& opts,
                         const HistoryBuffer& history, Rng& rng, int steps, std::size_t batch) {
    if (nets.size() != opts.size()) throw ContractError("one optimizer per bootstrapped net required");
    if (history.empty()) throw ContractError("bootstrapped_update on an empty history");
    for (std::size_t i = 0; i < nets.size(); ++i) {
        const std::vector<std::size_t> resample = bootstrap_resample(history.size(), rng);
        train_regression(nets[i], history, resample, opts[i], rng, steps, batch);
    }
}

// ---------------------------------------------------------------------------
// Bayes by backprop
// ---------------------------------------------------------------------------

double BbbPrior::log_density(double w) const {
    if (pi >= 1.0) return gaussian_log_density(w, mean, sigma1);
    if (pi <= 0.0) return gaussian_log_density(w, mean, sigma2);
    const double l1 = std::log(pi) + gaussian_log_density(w, mean, sigma1);
    const double l2 = std::log(1.0 - pi) + gaussian_log_density(w, mean, sigma2);
    const double hi = std::max(l1, l2);
    return hi + std::log(std::exp(l1 - hi) + std::exp(l2 - hi));
}

double BbbPrior::score(double w) const {
    const double s1 = -(w - mean) / (sigma1 * sigma1);
    if (pi >= 1.0) return s1;
    const double s2 = -(w - mean) / (sigma2 * sigma2);
    if (pi <= 0.0) return s2;
    const double l1 = std::log(pi) + gaussian_log_density(w, mean, sigma1);
    const double l2 = std::log(1.0 - pi) + gaussian_log_density(w, mean, sigma2);
    const double hi = std::max(l1, l2);
    const double w1 = std::exp(l1 - hi);
    const double w2 = std::exp(l2 - hi);
    return (w1 * s1 + w2 * s2) / (w1 + w2);
}

BbbNet::BbbNet(std::vector<std::size_t> sizes, Activation activation, BbbPrior prior, Rng& rng,
               double init_rho)
    : template_(DenseNet::glorot(std::move(sizes), rng, activation)),
      mu_(template_.flatten()),
      rho_(mu_.size(), init_rho),
      prior_(prior) {
    if (prior_.sigma1 <= 0.0 || prior_.sigma2 <= 0.0)
        throw ContractError("prior stds must be positive");
    if (prior_.pi < 0.0 || prior_.pi > 1.0) throw ContractError("prior mixing weight must lie in [0, 1]");
}

double BbbNet::sigma(std::size_t i) const { return softplus(rho_[i]); }

DenseNet BbbNet::sample(Rng& rng, Vector* eps_out) const {
    Vector w(mu_.size());
    if (eps_out) eps_out->resize(mu_.size());
    for (std::size_t i = 0; i < mu_.size(); ++i) {
        const double eps = rng.normal();
        if (eps_out) (*eps_out)[i] = eps;
        w[i] = mu_[i] + softplus(rho_[i]) * eps;
    }
    DenseNet net = template_;
    net.unflatten(w);
    return net;
}

DenseNet BbbNet::mean_net() const {
    DenseNet net = template_;
    net.unflatten(mu_);
    return net;
}

double bbb_kl_sample(const BbbNet& net, Rng& rng) {
    double kl = 0.0;
    for (std::size_t i = 0; i < net.num_params(); ++i) {
        const double eps = rng.normal();
        const double s = net.sigma(i);
        const double w = net.mu()[i] + s * eps;
        kl += -std::log(s) - 0.5 * eps * eps - 0.5 * kLogTwoPi - net.prior().log_density(w);
    }
    return kl;
}

void bbb_update(BbbNet& net, const HistoryBuffer& history, Optimizer& opt, Rng& rng, int steps,
                std::size_t batch, double kl_weight) {
    if (history.empty()) throw ContractError("bbb_update on an empty history");
    std::vector<std::size_t> pool(history.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

    const std::size_t n = net.num_params();
    if (kl_weight < 0.0) kl_weight = 1.0 / static_cast<double>(history.size());
    Vector eps, targets, params(2 * n), grad(2 * n);
    DenseNet sampled = net.mean_net();
    Vector w(n);

    for (int step = 0; step < steps; ++step) {
        eps.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            eps[i] = rng.normal();
            w[i] = net.mu()[i] + net.sigma(i) * eps[i];
        }
        sampled.unflatten(w);

        const Matrix input = batch_inputs(history, pool, batch, rng, targets);
        const ForwardCache cache = forward_cached(sampled, input);
        const Matrix& pred = cache.activations.back();

        // Gaussian NLL, mean over the batch: d/dpred = (pred - y) / (B * var).
        Matrix loss_grad(pred.rows(), 1);
        const double scale = 1.0 / (static_cast<double>(pred.rows()) * kObsVariance);
        for (std::size_t b = 0; b < pred.rows(); ++b)
            loss_grad(b, 0) = scale * (pred(b, 0) - targets[b]);
        const GradientTape tape = backward_from_cache(sampled, cache, loss_grad);

        // Reparameterized gradients. The mu-gradient of log q vanishes at the
        // sample; the rho-gradient of log q is -sigmoid(rho)/sigma.
        for (std::size_t i = 0; i < n; ++i) {
            const double s = net.sigma(i);
            const double sp = sigmoid(net.rho()[i]);
            const double prior_score = net.prior().score(w[i]);
            grad[i] = tape.grad[i] - kl_weight * prior_score;
            grad[n + i] = sp * (tape.grad[i] * eps[i] -
                                kl_weight * (1.0 / s + prior_score * eps[i]));
            params[i] = net.mu()[i];
            params[n + i] = net.rho()[i];
        }
        opt.step(params, grad);
        for (std::size_t i = 0; i < n; ++i) {
            net.mu()[i] = params[i];
            net.rho()[i] = params[n + i];
        }
    }
}

// ---------------------------------------------------------------------------
// Agents
// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> net_sizes(const ActionSet& actions, std::size_t context_dim) {
    std::vector<std::size_t> sizes;
    sizes.push_back(context_dim + actions.dim());
    sizes.insert(sizes.end(), kDefaultHidden.begin(), kDefaultHidden.end());
    sizes.push_back(1);
    return sizes;
}

std::vector<std::size_t> full_pool(const HistoryBuffer& history) {
    std::vector<std::size_t> pool(history.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    return pool;
}

}  // namespace

int UniformAgent::choose(const Vector& context, Rng& rng) {
    (void)context;
    return uniform_choose(*actions_, rng);
}

NeuralGreedyAgent::NeuralGreedyAgent(const ActionSet& actions, std::size_t context_dim,
                                     double epsilon, double lr, Rng& init_rng)
    : actions_(&actions),
      net_(DenseNet::glorot(net_sizes(actions, context_dim), init_rng)),
      epsilon_(epsilon),
      opt_(Optimizer::adam(lr)) {
    if (epsilon < 0.0 || epsilon > 1.0) throw ContractError("epsilon must lie in [0, 1]");
}

int NeuralGreedyAgent::choose(const Vector& context, Rng& rng) {
    return neural_greedy_choose(net_, context, *actions_, epsilon_, rng);
}

void NeuralGreedyAgent::update(const HistoryBuffer& history, Rng& rng) {
    train_regression(net_, history, full_pool(history), opt_, rng, kDefaultTrainSteps,
                     kDefaultBatch);
}

DropoutAgent::DropoutAgent(const ActionSet& actions, std::size_t context_dim, double p, double lr,
                           Rng& init_rng)
    : actions_(&actions),
      net_(DenseNet::glorot(net_sizes(actions, context_dim), init_rng)),
      p_(p),
      opt_(Optimizer::adam(lr)) {
    if (p < 0.0 || p >= 1.0) throw ContractError("dropout probability must lie in [0, 1)");
}

int DropoutAgent::choose(const Vector& context, Rng& rng) {
    return dropout_choose(net_, context, *actions_, p_, rng);
}

void DropoutAgent::update(const HistoryBuffer& history, Rng& rng) {
    train_regression(net_, history, full_pool(history), opt_, rng, kDefaultTrainSteps,
                     kDefaultBatch, p_);
}

BootstrappedAgent::BootstrappedAgent(const ActionSet& actions, std::size_t context_dim,
                                     std::size_t num_nets, double lr, Rng& init_rng)
    : actions_(&actions) {
    if (num_nets == 0) throw ContractError("bootstrapped ensemble needs at least one net");
    nets_.reserve(num_nets);
    opts_.reserve(num_nets);
    for (std::size_t i = 0; i < num_nets; ++i) {
        nets_.push_back(DenseNet::glorot(net_sizes(actions, context_dim), init_rng));
        opts_.push_back(Optimizer::adam(lr));
    }
}

int BootstrappedAgent::choose(const Vector& context, Rng& rng) {
    return bootstrapped_choose(nets_, context, *actions_, rng);
}

void BootstrappedAgent::update(const HistoryBuffer& history, Rng& rng) {
    bootstrapped_update(nets_, opts_, history, rng, kDefaultTrainSteps, kDefaultBatch);
}

ParameterNoiseAgent::ParameterNoiseAgent(const ActionSet& actions, std::size_t context_dim,
                                         double sigma, double lr, Rng& init_rng)
    : actions_(&actions),
      net_(DenseNet::glorot(net_sizes(actions, context_dim), init_rng)),
      sigma_(sigma),
      opt_(Optimizer::adam(lr)) {
    if (sigma <= 0.0) throw ContractError("noise scale must be positive");
}

int ParameterNoiseAgent::choose(const Vector& context, Rng& rng) {
    return parameter_noise_choose(net_, sigma_, context, *actions_, rng);
}

void ParameterNoiseAgent::update(const HistoryBuffer& history, Rng& rng) {
    train_regression(net_, history, full_pool(history), opt_, rng, kDefaultTrainSteps,
                     kDefaultBatch);
    // Disagreement rate between perturbed and unperturbed greedy actions over
    // the most recent batch of contexts drives the adaptation.
    const std::size_t window = std::min(kDefaultBatch, history.size());
    std::size_t disagreements = 0;
    for (std::size_t i = history.size() - window; i < history.size(); ++i) {
        const Vector& ctx = history[i].context;
        const int base = greedy_under(net_, ctx, *actions_);
        const int noisy = parameter_noise_choose(net_, sigma_, ctx, *actions_, rng);
        if (base != noisy) ++disagreements;
    }
    const double distance = static_cast<double>(disagreements) / static_cast<double>(window);
    sigma_ = adapt_noise(sigma_, distance, 0.1);
}

BbbAgent::BbbAgent(const ActionSet& actions, std::size_t context_dim, BbbPrior prior, double lr,
                   Rng& init_rng)
    : actions_(&actions),
      net_(net_sizes(actions, context_dim), Activation::kRelu, prior, init_rng),
      opt_(Optimizer::adam(lr)) {}

int BbbAgent::choose(const Vector& context, Rng& rng) {
    return greedy_under(net_.sample(rng), context, *actions_);
}

void BbbAgent::update(const HistoryBuffer& history, Rng& rng) {
    bbb_update(net_, history, opt_, rng, kDefaultTrainSteps, kDefaultBatch);
}

}  // namespace banditscreen
