#include "banditscreen/fbnn.hpp"

#include <algorithm>
#include <cmath>

#include "banditscreen/baselines.hpp"
#include "banditscreen/errors.hpp"
#include "banditscreen/ssge.hpp"

namespace banditscreen {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

std::size_t history_half(std::size_t n) { return (n + 1) / 2; }

std::vector<std::size_t> stochastic_sizes(std::size_t input_dim,
                                          const std::vector<std::size_t>& hidden,
                                          std::size_t output_dim, std::size_t noise_dim) {
    if (noise_dim < 1) throw ContractError("noise dimension must be at least 1");
    std::vector<std::size_t> sizes;
    sizes.push_back(input_dim + noise_dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(output_dim);
    return sizes;
}

std::vector<std::size_t> sample_batch(const HistoryBuffer& history, std::size_t batch, Rng& rng) {
    std::vector<std::size_t> rows(batch);
    for (std::size_t& idx : rows) idx = rng.uniform_index(history.size());
    return rows;
}

}  // namespace

MeasurementStrategy parse_strategy(const std::string& name) {
    if (name == "history-action-perturb") return MeasurementStrategy::kHistoryActionPerturb;
    if (name == "genomics-only") return MeasurementStrategy::kGenomicsOnly;
    if (name == "action-only") return MeasurementStrategy::kActionOnly;
    if (name == "gaussian-random") return MeasurementStrategy::kGaussianRandom;
    throw ParseError("unknown measurement strategy '" + name + "'");
}

std::string strategy_name(MeasurementStrategy strategy) {
    switch (strategy) {
        case MeasurementStrategy::kHistoryActionPerturb: return "history-action-perturb";
        case MeasurementStrategy::kGenomicsOnly: return "genomics-only";
        case MeasurementStrategy::kActionOnly: return "action-only";
        case MeasurementStrategy::kGaussianRandom: return "gaussian-random";
    }
    throw ContractError("unhandled measurement strategy");
}

void FbnnConfig::validate() const {
    if (kl_weight < 0.0) throw ContractError("kl weight must be nonnegative");
    if (measurement_size < 2) throw ContractError("measurement size must be at least 2");
    if (posterior_samples < 1 || prior_ensemble < 1)
        throw ContractError("sample counts must be at least 1");
    if (genomics_noise <= 0.0) throw ContractError("genomics noise must be positive");
    if (noise_dim < 1) throw ContractError("noise dimension must be at least 1");
    if (noise_scale <= 0.0) throw ContractError("noise scale must be positive");
    if (hidden.empty()) throw ContractError("at least one hidden layer required");
    for (std::size_t h : hidden)
        if (h == 0) throw ContractError("hidden widths must be positive");
    if (obs_variance <= 0.0) throw ContractError("observation variance must be positive");
    if (steps < 1) throw ContractError("gradient steps must be at least 1");
    if (batch < 1) throw ContractError("batch size must be at least 1");
    if (lr <= 0.0) throw ContractError("learning rate must be positive");
}

StochasticNet::StochasticNet(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                             std::size_t output_dim, std::size_t noise_dim, double noise_scale,
                             Rng& rng)
    : net_(DenseNet::glorot(stochastic_sizes(input_dim, hidden, output_dim, noise_dim), rng)),
      input_dim_(input_dim),
      output_dim_(output_dim),
      noise_dim_(noise_dim),
      noise_scale_(noise_scale) {
    if (noise_scale_ <= 0.0) throw ContractError("noise scale must be positive");
}

Vector StochasticNet::draw_noise(Rng& rng) const {
    Vector xi(noise_dim_);
    for (double& v : xi) v = noise_scale_ * rng.normal();
    return xi;
}

Matrix StochasticNet::augment(const Matrix& points, const Vector& xi) const {
    if (points.cols() != input_dim_)
        throw ShapeError("measurement points do not match the net input dimension");
    if (xi.size() != noise_dim_) throw ShapeError("noise draw has the wrong dimension");
    Matrix out(points.rows(), input_dim_ + noise_dim_);
    for (std::size_t r = 0; r < points.rows(); ++r) {
        double* dst = out.row(r);
        const double* src = points.row(r);
        std::copy(src, src + input_dim_, dst);
        std::copy(xi.begin(), xi.end(), dst + input_dim_);
    }
    return out;
}

Matrix StochasticNet::forward(const Matrix& points, const Vector& xi) const {
    return net_.forward(augment(points, xi));
}

FunctionSample sample_function(const StochasticNet& net, const MeasurementSet& points, Rng& rng) {
    if (net.output_dim() != 1) throw ShapeError("sample_function expects a scalar-output net");
    FunctionSample sample;
    sample.xi = net.draw_noise(rng);
    const Matrix out = net.forward(points.points, sample.xi);
    sample.values.resize(out.rows());
    for (std::size_t r = 0; r < out.rows(); ++r) sample.values[r] = out(r, 0);
    return sample;
}

MeasurementSet sample_measurement_set(const HistoryBuffer& history, const ActionSet& actions,
                                      const FbnnConfig& cfg, Rng& rng) {
    if (history.empty()) throw ContractError("measurement sets need a non-empty history");
    const std::size_t n = cfg.measurement_size;
    if (n < 2) throw ContractError("measurement size must be at least 2");
    const std::size_t d1 = history[0].context.size();
    const std::size_t d2 = history[0].action_features.size();
    if (d2 != actions.dim()) throw ShapeError("history drug features do not match the action set");

    MeasurementSet set;
    set.points = Matrix(n, d1 + d2);
    set.perturbed.assign(n, false);

    const auto put_history = [&](std::size_t row, std::size_t idx) {
        const HistoryRow& src = history[idx];
        double* dst = set.points.row(row);
        std::copy(src.context.begin(), src.context.end(), dst);
        std::copy(src.action_features.begin(), src.action_features.end(), dst + d1);
    };
    const auto substitute_action = [&](std::size_t row) {
        const std::size_t a = rng.uniform_index(actions.size());
        const double* feat = actions.features.row(a);
        std::copy(feat, feat + d2, set.points.row(row) + d1);
        set.perturbed[row] = true;
    };

    if (cfg.strategy == MeasurementStrategy::kGaussianRandom) {
        for (std::size_t r = 0; r < n; ++r) {
            double* dst = set.points.row(r);
            for (std::size_t c = 0; c < d1; ++c) dst[c] = rng.normal();
            const std::size_t a = rng.uniform_index(actions.size());
            const double* feat = actions.features.row(a);
            std::copy(feat, feat + d2, dst + d1);
            set.perturbed[r] = true;
        }
        return set;
    }

    const std::size_t h = history_half(n);
    for (std::size_t r = 0; r < h; ++r) put_history(r, rng.uniform_index(history.size()));
    for (std::size_t r = h; r < n; ++r) {
        put_history(r, rng.uniform_index(history.size()));
        switch (cfg.strategy) {
            case MeasurementStrategy::kHistoryActionPerturb:
                // The perturbed half draws from history union perturbed
                // history; the first row is forced perturbed so every set of
                // n >= 2 contains one.
                if (r == h || rng.bernoulli(0.5)) substitute_action(r);
                break;
            case MeasurementStrategy::kGenomicsOnly: {
                double* dst = set.points.row(r);
                for (std::size_t c = 0; c < d1; ++c) dst[c] += cfg.genomics_noise * rng.normal();
                set.perturbed[r] = true;
                break;
            }
            case MeasurementStrategy::kActionOnly:
                substitute_action(r);
                break;
            case MeasurementStrategy::kGaussianRandom:
                throw ContractError("unreachable strategy branch");
        }
    }
    return set;
}

int select_action(const StochasticNet& net, const Vector& x_g, const ActionSet& actions, Rng& rng) {
    if (actions.size() == 0) throw ContractError("select_action over an empty action set");
    const Vector xi = net.draw_noise(rng);
    if (net.output_dim() == 1) {
        return argmax_scores(net.forward(concat_inputs(x_g, actions), xi));
    }
    // Per-action-head variant: one genomics-only row, one output per action.
    if (net.output_dim() != actions.size())
        throw ShapeError("per-action-head net does not match the action set size");
    Matrix point(1, x_g.size());
    point.set_row(0, x_g);
    const Matrix scores = net.forward(point, xi);
    int best = 0;
    for (std::size_t a = 1; a < scores.cols(); ++a)
        if (scores(0, a) > scores(0, best)) best = static_cast<int>(a);
    return best;
}

Vector predict_samples(const StochasticNet& net, const Vector& input, std::size_t samples,
                       Rng& rng) {
    if (net.output_dim() != 1) throw ShapeError("predict_samples expects a scalar-output net");
    if (input.size() != net.input_dim()) throw ShapeError("input does not match the net dimension");
    Matrix stacked(samples, net.input_dim() + net.noise_dim());
    for (std::size_t s = 0; s < samples; ++s) {
        double* dst = stacked.row(s);
        std::copy(input.begin(), input.end(), dst);
        const Vector xi = net.draw_noise(rng);
        std::copy(xi.begin(), xi.end(), dst + input.size());
    }
    const Matrix out = net.net().forward(stacked);
    Vector values(samples);
    for (std::size_t s = 0; s < samples; ++s) values[s] = out(s, 0);
    return values;
}

namespace {

// Reconstruction gradient entries: d/df of the mean Gaussian NLL over S
// samples and B batch rows. Returns the NLL value for the finiteness check.
double fill_nll_grad(Matrix& loss_grad, const Matrix& pred, std::size_t first_row,
                     std::size_t samples, const std::vector<std::size_t>& batch_rows,
                     const HistoryBuffer& history, double obs_variance, std::size_t heads) {
    const std::size_t batch = batch_rows.size();
    const double denom = static_cast<double>(samples * batch);
    const double scale = 1.0 / (denom * obs_variance);
    double nll = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t row = first_row + s * batch + b;
            const HistoryRow& src = history[batch_rows[b]];
            const std::size_t col = heads > 1 ? static_cast<std::size_t>(src.action) : 0;
            const double diff = pred(row, col) - src.reward;
            loss_grad(row, col) = scale * diff;
            nll += (diff * diff / (2.0 * obs_variance) + 0.5 * std::log(obs_variance) +
                    0.5 * kLogTwoPi) /
                   denom;
        }
    }
    return nll;
}

// KL gradient entries on the measurement rows: weight/S * (g_q - g_p) with
// both scores evaluated at the S posterior samples in function-value space.
void fill_kl_grad(Matrix& loss_grad, const Matrix& posterior_values, const Matrix& prior_values,
                  double weight, std::size_t value_dim, std::size_t heads) {
    const SsgeModel q_model = SsgeModel::fit_auto(posterior_values);
    const SsgeModel p_model = SsgeModel::fit_auto(prior_values);
    const Matrix gq = q_model.score(posterior_values);
    const Matrix gp = p_model.score(posterior_values);
    const std::size_t samples = posterior_values.rows();
    const double scale = weight / static_cast<double>(samples);
    const std::size_t points = value_dim / heads;
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t v = 0; v < value_dim; ++v) {
            const std::size_t row = s * points + v / heads;
            loss_grad(row, v % heads) += scale * (gq(s, v) - gp(s, v));
        }
    }
}

void update_concat(StochasticNet& net, const HistoryBuffer& history, const ActionSet& actions,
                   const FbnnConfig& cfg, Optimizer& opt, Rng& rng) {
    const std::size_t d = net.input_dim();
    const std::size_t k = net.noise_dim();
    const std::size_t S = cfg.posterior_samples;
    const std::size_t n = cfg.measurement_size;
    const std::size_t B = cfg.batch;
    const bool with_kl = cfg.kl_weight > 0.0;
    // The KL term belongs to the whole-history objective; each batch carries
    // its B/|D| share, so the data term outweighs it as history accumulates.
    const double kl_share =
        cfg.kl_weight * std::min(1.0, static_cast<double>(B) / static_cast<double>(history.size()));

    std::vector<StochasticNet> prior_nets;
    if (with_kl) {
        prior_nets.reserve(cfg.prior_ensemble);
        for (std::size_t p = 0; p < cfg.prior_ensemble; ++p)
            prior_nets.emplace_back(d, cfg.hidden, std::size_t{1}, k, cfg.noise_scale, rng);
    }

    const std::size_t measure_rows = with_kl ? S * n : 0;
    Matrix stacked(measure_rows + S * B, d + k);
    Matrix posterior_values(with_kl ? S : 0, with_kl ? n : 0);
    Matrix prior_values(with_kl ? cfg.prior_ensemble : 0, with_kl ? n : 0);

    for (int step = 0; step < cfg.steps; ++step) {
        MeasurementSet set;
        if (with_kl) set = sample_measurement_set(history, actions, cfg, rng);
        const std::vector<std::size_t> batch_rows = sample_batch(history, B, rng);

        for (std::size_t s = 0; s < S; ++s) {
            const Vector xi = net.draw_noise(rng);
            if (with_kl) {
                for (std::size_t i = 0; i < n; ++i) {
                    double* dst = stacked.row(s * n + i);
                    const double* src = set.points.row(i);
                    std::copy(src, src + d, dst);
                    std::copy(xi.begin(), xi.end(), dst + d);
                }
            }
            for (std::size_t b = 0; b < B; ++b) {
                double* dst = stacked.row(measure_rows + s * B + b);
                const HistoryRow& src = history[batch_rows[b]];
                std::copy(src.context.begin(), src.context.end(), dst);
                std::copy(src.action_features.begin(), src.action_features.end(),
                          dst + src.context.size());
                std::copy(xi.begin(), xi.end(), dst + d);
            }
        }

        const ForwardCache cache = forward_cached(net.net(), stacked);
        const Matrix& pred = cache.activations.back();
        Matrix loss_grad(pred.rows(), 1);

        if (with_kl) {
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t i = 0; i < n; ++i) posterior_values(s, i) = pred(s * n + i, 0);
            for (std::size_t p = 0; p < prior_nets.size(); ++p) {
                const Matrix out = prior_nets[p].forward(set.points, prior_nets[p].draw_noise(rng));
                for (std::size_t i = 0; i < n; ++i) prior_values(p, i) = out(i, 0);
            }
            fill_kl_grad(loss_grad, posterior_values, prior_values, kl_share, n, 1);
        }

        const double nll = fill_nll_grad(loss_grad, pred, measure_rows, S, batch_rows, history,
                                         cfg.obs_variance, 1);
        if (!std::isfinite(nll)) throw NumericError("non-finite reconstruction loss");

        opt.step(net.net(), backward_from_cache(net.net(), cache, loss_grad));
    }
}

void update_heads(StochasticNet& net, const HistoryBuffer& history, const FbnnConfig& cfg,
                  Optimizer& opt, Rng& rng) {
    const std::size_t d1 = net.input_dim();
    const std::size_t k = net.noise_dim();
    const std::size_t K = net.output_dim();
    const std::size_t S = cfg.posterior_samples;
    const std::size_t n = cfg.measurement_size;
    const std::size_t B = cfg.batch;
    const bool with_kl = cfg.kl_weight > 0.0;
    // Same B/|D| share of the KL term as the concatenated layout.
    const double kl_share =
        cfg.kl_weight * std::min(1.0, static_cast<double>(B) / static_cast<double>(history.size()));

    std::vector<StochasticNet> prior_nets;
    if (with_kl) {
        prior_nets.reserve(cfg.prior_ensemble);
        for (std::size_t p = 0; p < cfg.prior_ensemble; ++p)
            prior_nets.emplace_back(d1, cfg.hidden, K, k, cfg.noise_scale, rng);
    }

    const std::size_t measure_rows = with_kl ? S * n : 0;
    Matrix stacked(measure_rows + S * B, d1 + k);
    Matrix points(n, d1);
    Matrix posterior_values(with_kl ? S : 0, with_kl ? n * K : 0);
    Matrix prior_values(with_kl ? cfg.prior_ensemble : 0, with_kl ? n * K : 0);

    for (int step = 0; step < cfg.steps; ++step) {
        if (with_kl) {
            // Genomics-only measurement rows: half untouched history contexts,
            // half with additive noise; drug perturbation has no analogue here.
            const std::size_t h = history_half(n);
            for (std::size_t r = 0; r < n; ++r) {
                const HistoryRow& src = history[rng.uniform_index(history.size())];
                double* dst = points.row(r);
                std::copy(src.context.begin(), src.context.end(), dst);
                if (r >= h)
                    for (std::size_t c = 0; c < d1; ++c) dst[c] += cfg.genomics_noise * rng.normal();
            }
        }
        const std::vector<std::size_t> batch_rows = sample_batch(history, B, rng);

        for (std::size_t s = 0; s < S; ++s) {
            const Vector xi = net.draw_noise(rng);
            if (with_kl) {
                for (std::size_t i = 0; i < n; ++i) {
                    double* dst = stacked.row(s * n + i);
                    const double* src = points.row(i);
                    std::copy(src, src + d1, dst);
                    std::copy(xi.begin(), xi.end(), dst + d1);
                }
            }
            for (std::size_t b = 0; b < B; ++b) {
                double* dst = stacked.row(measure_rows + s * B + b);
                const HistoryRow& src = history[batch_rows[b]];
                std::copy(src.context.begin(), src.context.end(), dst);
                std::copy(xi.begin(), xi.end(), dst + d1);
            }
        }

        const ForwardCache cache = forward_cached(net.net(), stacked);
        const Matrix& pred = cache.activations.back();
        Matrix loss_grad(pred.rows(), K);

        if (with_kl) {
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t a = 0; a < K; ++a)
                        posterior_values(s, i * K + a) = pred(s * n + i, a);
            for (std::size_t p = 0; p < prior_nets.size(); ++p) {
                const Matrix out = prior_nets[p].forward(points, prior_nets[p].draw_noise(rng));
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t a = 0; a < K; ++a) prior_values(p, i * K + a) = out(i, a);
            }
            fill_kl_grad(loss_grad, posterior_values, prior_values, kl_share, n * K, K);
        }

        const double nll = fill_nll_grad(loss_grad, pred, measure_rows, S, batch_rows, history,
                                         cfg.obs_variance, K);
        if (!std::isfinite(nll)) throw NumericError("non-finite reconstruction loss");

        opt.step(net.net(), backward_from_cache(net.net(), cache, loss_grad));
    }
}

}  // namespace

void functional_update(StochasticNet& net, const HistoryBuffer& history, const ActionSet& actions,
                       const FbnnConfig& cfg, Optimizer& opt, Rng& rng) {
    if (history.empty()) throw ContractError("functional update on an empty history");
    if (cfg.kl_weight > 0.0 && (cfg.posterior_samples < 2 || cfg.prior_ensemble < 2))
        throw ContractError("score estimation needs at least two posterior and prior samples");
    if (net.output_dim() == 1)
        update_concat(net, history, actions, cfg, opt, rng);
    else
        update_heads(net, history, cfg, opt, rng);
}

FbnnAgent::FbnnAgent(const ActionSet& actions, std::size_t context_dim, FbnnConfig cfg,
                     Rng& init_rng)
    : actions_(&actions),
      cfg_(std::move(cfg)),
      net_(cfg_.drug_context ? context_dim + actions.dim() : context_dim, cfg_.hidden,
           cfg_.drug_context ? std::size_t{1} : actions.size(), cfg_.noise_dim, cfg_.noise_scale,
           init_rng),
      opt_(Optimizer::adam(cfg_.lr)) {
    cfg_.validate();
}

int FbnnAgent::choose(const Vector& context, Rng& rng) {
    return select_action(net_, context, *actions_, rng);
}

void FbnnAgent::update(const HistoryBuffer& history, Rng& rng) {
    functional_update(net_, history, *actions_, cfg_, opt_, rng);
}

}  // namespace banditscreen
