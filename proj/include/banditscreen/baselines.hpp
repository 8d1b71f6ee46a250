#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "banditscreen/bandit.hpp"
#include "banditscreen/nn.hpp"
#include "banditscreen/optim.hpp"

namespace banditscreen {

// Builds the [K x (d1+d2)] matrix of concatenated context-action inputs
// scored by every greedy-family policy.
Matrix concat_inputs(const Vector& x_g, const ActionSet& actions);

// Argmax over a [K x 1] score column; ties resolve to the lowest index.
int argmax_scores(const Matrix& scores);

int uniform_choose(const ActionSet& actions, Rng& rng);

// With probability epsilon a uniform action, otherwise greedy under `net`.
int neural_greedy_choose(const DenseNet& net, const Vector& x_g, const ActionSet& actions,
                         double epsilon, Rng& rng);

// One dropout mask drawn per call and shared across all action evaluations,
// so the call is a single Thompson draw over thinned networks.
int dropout_choose(const DenseNet& net, const Vector& x_g, const ActionSet& actions, double p,
                   Rng& rng);

// Picks one of the ensemble nets uniformly and acts greedily under it.
int bootstrapped_choose(const std::vector<DenseNet>& nets, const Vector& x_g,
                        const ActionSet& actions, Rng& rng);

// Greedy under theta + sigma * N(0, I); the stored net is never mutated.
int parameter_noise_choose(const DenseNet& net, double sigma, const Vector& x_g,
                           const ActionSet& actions, Rng& rng);

// Multiplicative noise adaptation: grow by 1% when the perturbed policy
// agrees too often (distance below threshold), shrink by 1% otherwise.
double adapt_noise(double sigma, double distance, double threshold);

// Squared-error regression on history rows drawn from `rows` (with
// replacement, `batch` per step). `dropout_p` > 0 trains through a fresh
// mask each step.
void train_regression(DenseNet& net, const HistoryBuffer& history,
                      std::span<const std::size_t> rows, Optimizer& opt, Rng& rng, int steps,
                      std::size_t batch, double dropout_p = 0.0);

// Indices of a with-replacement resample of n rows from n rows.
std::vector<std::size_t> bootstrap_resample(std::size_t n, Rng& rng);

// Each net trains on its own with-replacement resample of the full history
// (resample size = history size). `opts` holds one optimizer per net.
void bootstrapped_update(std::vector<DenseNet>& nets, std::vector<Optimizer>& opts,
                         const HistoryBuffer& history, Rng& rng, int steps, std::size_t batch);

// ---------------------------------------------------------------------------
// Bayes by backprop
// ---------------------------------------------------------------------------

// Scale-mixture-of-Gaussians weight prior. pi = 1 degenerates to a single
// Gaussian N(mean, sigma1^2).
struct BbbPrior {
    double pi = 0.5;
    double sigma1 = 1.0;
    double sigma2 = 2.4787521766663585e-3;  // exp(-6)
    double mean = 0.0;

    double log_density(double w) const;
    double score(double w) const;  // d/dw log p(w)
};

// Variational Gaussian over every weight and bias of a DenseNet: mean mu and
// softplus-parameterized std per parameter, flat layout aligned with
// DenseNet::flatten.
class BbbNet {
  public:
    BbbNet(std::vector<std::size_t> sizes, Activation activation, BbbPrior prior, Rng& rng,
           double init_rho = -3.0);

    std::size_t num_params() const { return mu_.size(); }
    const BbbPrior& prior() const { return prior_; }
    Vector& mu() { return mu_; }
    const Vector& mu() const { return mu_; }
    Vector& rho() { return rho_; }
    const Vector& rho() const { return rho_; }
    double sigma(std::size_t i) const;  // softplus(rho_[i]), always > 0

    // Reparameterized weight draw w = mu + sigma * eps. When `eps_out` is
    // non-null the standard normal draw is stored there.
    DenseNet sample(Rng& rng, Vector* eps_out = nullptr) const;
    DenseNet mean_net() const;

  private:
    DenseNet template_;
    Vector mu_;
    Vector rho_;
    BbbPrior prior_;
};

// Single-draw Monte Carlo estimate of KL[q(w) || prior] = log q(w) - log p(w)
// summed over parameters at one reparameterized sample.
double bbb_kl_sample(const BbbNet& net, Rng& rng);

// One reparameterized weight draw per gradient step; loss = Gaussian NLL on a
// sampled batch + kl_weight * MC KL estimate. A negative kl_weight selects
// the default 1 / history size.
void bbb_update(BbbNet& net, const HistoryBuffer& history, Optimizer& opt, Rng& rng, int steps,
                std::size_t batch, double kl_weight = -1.0);

// ---------------------------------------------------------------------------
// Agents
// ---------------------------------------------------------------------------

inline constexpr int kDefaultTrainSteps = 100;
inline constexpr std::size_t kDefaultBatch = 32;
inline const std::vector<std::size_t> kDefaultHidden = {64, 64};

class UniformAgent : public Agent {
  public:
    explicit UniformAgent(const ActionSet& actions) : actions_(&actions) {}
    int choose(const Vector& context, Rng& rng) override;

  private:
    const ActionSet* actions_;
};

class NeuralGreedyAgent : public Agent {
  public:
    NeuralGreedyAgent(const ActionSet& actions, std::size_t context_dim, double epsilon, double lr,
                      Rng& init_rng);
    int choose(const Vector& context, Rng& rng) override;
    void update(const HistoryBuffer& history, Rng& rng) override;
    const DenseNet& net() const { return net_; }

  private:
    const ActionSet* actions_;
    DenseNet net_;
    double epsilon_;
    Optimizer opt_;
};

class DropoutAgent : public Agent {
  public:
    DropoutAgent(const ActionSet& actions, std::size_t context_dim, double p, double lr,
                 Rng& init_rng);
    int choose(const Vector& context, Rng& rng) override;
    void update(const HistoryBuffer& history, Rng& rng) override;

  private:
    const ActionSet* actions_;
    DenseNet net_;
    double p_;
    Optimizer opt_;
};

class BootstrappedAgent : public Agent {
  public:
    BootstrappedAgent(const ActionSet& actions, std::size_t context_dim, std::size_t num_nets,
                      double lr, Rng& init_rng);
    int choose(const Vector& context, Rng& rng) override;
    void update(const HistoryBuffer& history, Rng& rng) override;

  private:
    const ActionSet* actions_;
    std::vector<DenseNet> nets_;
    std::vector<Optimizer> opts_;
};

class ParameterNoiseAgent : public Agent {
  public:
    ParameterNoiseAgent(const ActionSet& actions, std::size_t context_dim, double sigma, double lr,
                        Rng& init_rng);
    int choose(const Vector& context, Rng& rng) override;
    void update(const HistoryBuffer& history, Rng& rng) override;
    double sigma() const { return sigma_; }

  private:
    const ActionSet* actions_;
    DenseNet net_;
    double sigma_;
    Optimizer opt_;
};

class BbbAgent : public Agent {
  public:
    BbbAgent(const ActionSet& actions, std::size_t context_dim, BbbPrior prior, double lr,
             Rng& init_rng);
    int choose(const Vector& context, Rng& rng) override;
    void update(const HistoryBuffer& history, Rng& rng) override;
    const BbbNet& net() const { return net_; }

  private:
    const ActionSet* actions_;
    BbbNet net_;
    Optimizer opt_;
};

}  // namespace banditscreen
