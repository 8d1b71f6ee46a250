#include "banditscreen/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "banditscreen/errors.hpp"
#include "banditscreen/nn.hpp"

namespace banditscreen {

namespace {

constexpr double kRewardTol = 1e-9;

std::uint64_t checksum_doubles(std::uint64_t h, const Vector& values) {
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

int argmax_lowest_tie(const Vector& values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = static_cast<int>(i);
    return best;
}

}  // namespace

void ActionSet::validate() const {
    if (size() == 0) throw ContractError("action set must contain at least one action");
    if (!ids.empty() && ids.size() != size()) throw ContractError("action id count does not match feature rows");
    for (std::size_t i = 0; i < size(); ++i) {
        for (std::size_t j = i + 1; j < size(); ++j) {
            bool same = true;
            for (std::size_t c = 0; c < dim() && same; ++c) same = features(i, c) == features(j, c);
            if (same) throw ContractError("action feature rows must be distinct");
        }
    }
}

void HistoryBuffer::append(HistoryRow row) {
    if (row.reward < -kRewardTol || row.reward > 1.0 + kRewardTol)
        throw ContractError("history reward outside [0, 1]");
    if (!rows_.empty() && row.round <= rows_.back().round)
        throw ContractError("history rounds must be strictly increasing");
    rows_.push_back(std::move(row));
}

Environment::Environment(ActionSet actions, std::size_t context_dim)
    : actions_(std::move(actions)), context_dim_(context_dim) {
    actions_.validate();
    context_.resize(context_dim_);
    hidden_.resize(actions_.size());
}

const Vector& Environment::advance(Rng& env_rng) {
    fill_round(env_rng);
    for (double r : hidden_) {
        if (r < -kRewardTol || r > 1.0 + kRewardTol)
            throw NumericError("environment produced hidden reward outside [0, 1]");
    }
    return context_;
}

double Environment::hidden_reward(int action) const {
    if (action < 0 || static_cast<std::size_t>(action) >= hidden_.size())
        throw ContractError("reward query for invalid action index");
    return hidden_[action];
}

int Environment::oracle_action() const { return argmax_lowest_tie(hidden_); }

double Environment::oracle_reward() const { return hidden_[oracle_action()]; }

TrialResult run_trial(Environment& env, Agent& agent, int rounds, std::uint64_t env_seed,
                      std::uint64_t agent_seed, int update_every) {
    if (rounds < 1) throw ContractError("run_trial needs at least one round");
    Rng env_rng(env_seed);
    Rng agent_rng(agent_seed);

    TrialResult result;
    result.trace.instantaneous.reserve(rounds);
    result.trace.cumulative.reserve(rounds);
    result.trace.chosen.reserve(rounds);
    result.trace.oracle.reserve(rounds);
    std::uint64_t checksum = 0xcbf29ce484222325ULL;

    double cumulative = 0.0;
    for (int t = 1; t <= rounds; ++t) {
        const Vector& context = env.advance(env_rng);
        checksum = checksum_doubles(checksum, context);
        checksum = checksum_doubles(checksum, env.hidden_rewards());

        const int action = agent.choose(context, agent_rng);
        if (action < 0 || static_cast<std::size_t>(action) >= env.num_actions())
            throw ContractError("agent chose invalid action index " + std::to_string(action));

        const double reward = env.hidden_reward(action);
        const int best = env.oracle_action();
        const double instant = env.hidden_reward(best) - reward;
        cumulative += instant;

        result.trace.instantaneous.push_back(instant);
        result.trace.cumulative.push_back(cumulative);
        result.trace.chosen.push_back(action);
        result.trace.oracle.push_back(best);

        Vector action_features = env.actions().feature_row(action);
        agent.observe(context, action, action_features, reward);
        result.history.append({context, action, std::move(action_features), reward, t});

        if (update_every > 0 && t % update_every == 0) agent.update(result.history, agent_rng);
    }
    result.trace.stream_checksum = checksum;
    return result;
}

double oracle_value(Environment& env, int rounds, std::uint64_t env_seed) {
    if (rounds < 1) throw ContractError("oracle_value needs at least one round");
    Rng env_rng(env_seed);
    double total = 0.0;
    for (int t = 0; t < rounds; ++t) {
        env.advance(env_rng);
        total += env.oracle_reward();
    }
    return total;
}

// ---------------------------------------------------------------------------
// Synthetic environments
// ---------------------------------------------------------------------------

namespace {

ActionSet random_fingerprints(std::size_t num_actions, std::size_t d2, Rng& rng) {
    constexpr double kBitDensity = 0.25;
    ActionSet actions;
    actions.features = Matrix(num_actions, d2);
    actions.ids.reserve(num_actions);
    for (std::size_t a = 0; a < num_actions; ++a) actions.ids.push_back("drug" + std::to_string(a));
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (std::size_t a = 0; a < num_actions; ++a)
            for (std::size_t c = 0; c < d2; ++c) actions.features(a, c) = rng.bernoulli(kBitDensity) ? 1.0 : 0.0;
        bool distinct = true;
        for (std::size_t i = 0; i < num_actions && distinct; ++i)
            for (std::size_t j = i + 1; j < num_actions && distinct; ++j) {
                bool same = true;
                for (std::size_t c = 0; c < d2 && same; ++c)
                    same = actions.features(i, c) == actions.features(j, c);
                distinct = !same;
            }
        if (distinct) return actions;
    }
    throw NumericError("failed to draw distinct random fingerprints");
}

// Per-dimension affine map fitted on a calibration pool of N(0, I) draws,
// so emitted contexts live in [0, 1].
struct ContextScaler {
    Vector lo;
    Vector inv_range;

    static ContextScaler calibrate(std::size_t d1, Rng& rng, std::size_t pool = 1000) {
        ContextScaler s;
        s.lo.assign(d1, 0.0);
        Vector hi(d1, 0.0);
        for (std::size_t i = 0; i < pool; ++i) {
            for (std::size_t c = 0; c < d1; ++c) {
                const double z = rng.normal();
                if (i == 0 || z < s.lo[c]) s.lo[c] = z;
                if (i == 0 || z > hi[c]) hi[c] = z;
            }
        }
        s.inv_range.resize(d1);
        for (std::size_t c = 0; c < d1; ++c) {
            const double range = hi[c] - s.lo[c];
            s.inv_range[c] = range > 0.0 ? 1.0 / range : 1.0;
        }
        return s;
    }

    void draw(Vector& out, Rng& rng) const {
        for (std::size_t c = 0; c < out.size(); ++c) {
            const double z = (rng.normal() - lo[c]) * inv_range[c];
            out[c] = std::clamp(z, 0.0, 1.0);
        }
    }
};

class SyntheticLinearEnv : public Environment {
  public:
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<SyntheticLinearEnv>(*this);
    }

    SyntheticLinearEnv(std::size_t d1, std::size_t d2, std::size_t num_actions, std::uint64_t seed)
        : Environment(
              [&] {
                  Rng rng(mix_seed(seed, fnv1a("actions")));
                  return random_fingerprints(num_actions, d2, rng);
              }(),
              d1) {
        Rng rng(mix_seed(seed, fnv1a("structure")));
        weights_.resize(d1 + d2);
        for (double& w : weights_) w = rng.normal();
        scaler_ = ContextScaler::calibrate(d1, rng);
    }

    double reward_for(const Vector& context, std::size_t a) const {
        double z = 0.0;
        for (std::size_t c = 0; c < context.size(); ++c) z += weights_[c] * context[c];
        for (std::size_t c = 0; c < actions_.dim(); ++c) z += weights_[context.size() + c] * actions_.features(a, c);
        return std::clamp(1.0 / (1.0 + std::exp(-z)), 0.0, 1.0);
    }

  protected:
    void fill_round(Rng& env_rng) override {
        scaler_.draw(context_, env_rng);
        for (std::size_t a = 0; a < actions_.size(); ++a) hidden_[a] = reward_for(context_, a);
    }

  private:
    Vector weights_;
    ContextScaler scaler_;
};

class SyntheticNonlinearEnv : public Environment {
  public:
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<SyntheticNonlinearEnv>(*this);
    }

    static constexpr std::size_t kWidth = 32;
    static constexpr std::size_t kCalibrationDraws = 10000;

    SyntheticNonlinearEnv(std::size_t d1, ActionSet actions, std::uint64_t seed)
        : Environment(std::move(actions), d1),
          net_({d1 + actions_.dim(), kWidth, kWidth, 1}, Activation::kTanh) {
        Rng rng(mix_seed(seed, fnv1a("structure")));
        net_ = DenseNet::glorot({d1 + actions_.dim(), kWidth, kWidth, 1}, rng, Activation::kTanh);
        scaler_ = ContextScaler::calibrate(d1, rng);

        // Calibrate the reward range over random context/action pairs so
        // emitted rewards cover [0, 1].
        Vector ctx(d1);
        double lo = 0.0, hi = 0.0;
        Matrix input(actions_.size(), d1 + actions_.dim());
        for (std::size_t i = 0; i < kCalibrationDraws; ++i) {
            scaler_.draw(ctx, rng);
            fill_inputs(input, ctx);
            Matrix out = net_.forward(input);
            for (std::size_t a = 0; a < actions_.size(); ++a) {
                const double v = out(a, 0);
                if ((i == 0 && a == 0) || v < lo) lo = v;
                if ((i == 0 && a == 0) || v > hi) hi = v;
            }
        }
        reward_lo_ = lo;
        reward_inv_range_ = hi > lo ? 1.0 / (hi - lo) : 1.0;
        input_ = Matrix(actions_.size(), d1 + actions_.dim());
    }

  protected:
    void fill_round(Rng& env_rng) override {
        scaler_.draw(context_, env_rng);
        fill_inputs(input_, context_);
        Matrix out = net_.forward(input_);
        for (std::size_t a = 0; a < actions_.size(); ++a)
            hidden_[a] = std::clamp((out(a, 0) - reward_lo_) * reward_inv_range_, 0.0, 1.0);
    }

  private:
    void fill_inputs(Matrix& input, const Vector& ctx) const {
        for (std::size_t a = 0; a < actions_.size(); ++a) {
            double* row = input.row(a);
            std::copy(ctx.begin(), ctx.end(), row);
            const double* feat = actions_.features.row(a);
            std::copy(feat, feat + actions_.dim(), row + ctx.size());
        }
    }

    DenseNet net_;
    ContextScaler scaler_;
    double reward_lo_ = 0.0;
    double reward_inv_range_ = 1.0;
    Matrix input_;
};

class TabularReplayEnv : public Environment {
  public:
    std::unique_ptr<Environment> clone() const override {
        return std::make_unique<TabularReplayEnv>(*this);
    }

    TabularReplayEnv(Matrix contexts, Matrix rewards, ActionSet actions)
        : Environment(std::move(actions), contexts.cols()),
          contexts_(std::move(contexts)),
          rewards_(std::move(rewards)) {
        if (contexts_.rows() != rewards_.rows())
            throw ContractError("context and reward tables must have the same number of rows");
        if (contexts_.rows() == 0) throw ContractError("replay table must be non-empty");
        if (rewards_.cols() != actions_.size())
            throw ContractError("reward table column count must match the action set");
        for (std::size_t i = 0; i < rewards_.rows(); ++i)
            for (std::size_t j = 0; j < rewards_.cols(); ++j) {
                const double r = rewards_(i, j);
                if (!std::isfinite(r)) throw ContractError("replay reward table contains missing values");
                if (r < -kRewardTol || r > 1.0 + kRewardTol)
                    throw ContractError("replay reward table has entries outside [0, 1]");
            }
    }

  protected:
    void fill_round(Rng& env_rng) override {
        const std::size_t row = env_rng.uniform_index(contexts_.rows());
        const double* ctx = contexts_.row(row);
        std::copy(ctx, ctx + contexts_.cols(), context_.begin());
        const double* rew = rewards_.row(row);
        std::copy(rew, rew + rewards_.cols(), hidden_.begin());
    }

  private:
    Matrix contexts_;
    Matrix rewards_;
};

}  // namespace

std::unique_ptr<Environment> make_synthetic_linear(std::size_t d1, std::size_t d2, std::size_t num_actions,
                                                   std::uint64_t structure_seed) {
    return std::make_unique<SyntheticLinearEnv>(d1, d2, num_actions, structure_seed);
}

std::unique_ptr<Environment> make_synthetic_nonlinear(std::size_t d1, std::size_t d2, std::size_t num_actions,
                                                      std::uint64_t structure_seed) {
    Rng rng(mix_seed(structure_seed, fnv1a("actions")));
    return std::make_unique<SyntheticNonlinearEnv>(d1, random_fingerprints(num_actions, d2, rng),
                                                   structure_seed);
}

std::unique_ptr<Environment> make_synthetic_nonlinear(std::size_t d1, ActionSet actions,
                                                      std::uint64_t structure_seed) {
    return std::make_unique<SyntheticNonlinearEnv>(d1, std::move(actions), structure_seed);
}

std::unique_ptr<Environment> make_tabular_replay(Matrix contexts, Matrix rewards, ActionSet actions) {
    return std::make_unique<TabularReplayEnv>(std::move(contexts), std::move(rewards), std::move(actions));
}

}  // namespace banditscreen
