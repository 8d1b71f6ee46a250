#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "banditscreen/matrix.hpp"
#include "banditscreen/rng.hpp"

namespace banditscreen {

// The discrete action set: one feature row per drug (fingerprint bits as
// 0/1 reals), plus ids for reporting.
struct ActionSet {
    Matrix features;  // [K x d2]
    std::vector<std::string> ids;

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }
    Vector feature_row(std::size_t a) const { return features.row_vector(a); }

    void validate() const;  // K >= 1, ids match, rows distinct
};

struct HistoryRow {
    Vector context;     // x_g
    int action;
    Vector action_features;  // x_d as played
    double reward;      // in [0, 1]
    int round;          // 1-based
};

// Agent-visible log of (context, action, observed reward) triples.
// Append-only, strictly increasing rounds.
class HistoryBuffer {
  public:
    void append(HistoryRow row);
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const HistoryRow& operator[](std::size_t i) const { return rows_[i]; }
    const std::vector<HistoryRow>& rows() const { return rows_; }

  private:
    std::vector<HistoryRow> rows_;
};

// Per-round and cumulative regret bookkeeping for one trial.
struct RegretTrace {
    std::vector<double> instantaneous;
    std::vector<double> cumulative;
    std::vector<int> chosen;
    std::vector<int> oracle;
    std::uint64_t stream_checksum = 0;  // over (context, hidden reward) pairs

    std::size_t size() const { return instantaneous.size(); }
    double final_cumulative() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

// Policy interface: observe context -> choose action -> receive only the
// chosen action's reward -> periodic update from history.
class Agent {
  public:
    virtual ~Agent() = default;
    virtual int choose(const Vector& context, Rng& rng) = 0;
    virtual void observe(const Vector& context, int action, const Vector& action_features, double reward) {
        (void)context;
        (void)action;
        (void)action_features;
        (void)reward;
    }
    virtual void update(const HistoryBuffer& history, Rng& rng) {
        (void)history;
        (void)rng;
    }
};

// Supplies per-round context and a hidden full reward vector in [0,1]^K.
// Agents never touch this class; the trial loop reveals only the chosen
// action's reward.
class Environment {
  public:
    virtual ~Environment() = default;

    // Fresh instance sharing this environment's reward structure; used to
    // hand each trial its own mutable copy.
    virtual std::unique_ptr<Environment> clone() const = 0;

    const ActionSet& actions() const { return actions_; }
    std::size_t num_actions() const { return actions_.size(); }
    std::size_t context_dim() const { return context_dim_; }

    // Advance to the next round; returns the agent-visible context.
    const Vector& advance(Rng& env_rng);

    // Harness-side accessors for the current round.
    double hidden_reward(int action) const;
    int oracle_action() const;  // per-round argmax, ties -> lowest index
    double oracle_reward() const;
    const Vector& hidden_rewards() const { return hidden_; }

  protected:
    Environment(ActionSet actions, std::size_t context_dim);
    virtual void fill_round(Rng& env_rng) = 0;  // populate context_ and hidden_

    ActionSet actions_;
    std::size_t context_dim_;
    Vector context_;
    Vector hidden_;
};

struct TrialResult {
    RegretTrace trace;
    HistoryBuffer history;
};

// Runs T rounds of the bandit protocol. Regret accrues against the hidden
// per-round argmax; the agent updates every `update_every` rounds.
// Deterministic given (environment structure, env_seed, agent_seed).
TrialResult run_trial(Environment& env, Agent& agent, int rounds, std::uint64_t env_seed,
                      std::uint64_t agent_seed, int update_every = 30);

// Total reward of the per-round argmax policy over the seed's round stream.
double oracle_value(Environment& env, int rounds, std::uint64_t env_seed);

// Desk-scale synthetic environments. The reward structure is fixed by
// `structure_seed`; the per-round stream comes from the rng passed to
// advance, so trials with different stream seeds share one problem.
std::unique_ptr<Environment> make_synthetic_linear(std::size_t d1, std::size_t d2, std::size_t num_actions,
                                                   std::uint64_t structure_seed);
std::unique_ptr<Environment> make_synthetic_nonlinear(std::size_t d1, std::size_t d2, std::size_t num_actions,
                                                      std::uint64_t structure_seed);
std::unique_ptr<Environment> make_synthetic_nonlinear(std::size_t d1, ActionSet actions,
                                                      std::uint64_t structure_seed);

// Replays a fully observed [N x K] reward table; each round draws a row
// uniformly with replacement. Rejects tables with missing values or
// rewards outside [0, 1].
std::unique_ptr<Environment> make_tabular_replay(Matrix contexts, Matrix rewards, ActionSet actions);

// Reference policy that plays the per-round argmax of the hidden reward
// vector. Bypasses information hiding; benchmark anchor only.
class OracleAgent : public Agent {
  public:
    explicit OracleAgent(const Environment& env) : env_(&env) {}
    int choose(const Vector& context, Rng& rng) override {
        (void)context;
        (void)rng;
        return env_->oracle_action();
    }

  private:
    const Environment* env_;
};

}  // namespace banditscreen
