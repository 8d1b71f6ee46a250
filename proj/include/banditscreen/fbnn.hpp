#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "banditscreen/bandit.hpp"
#include "banditscreen/nn.hpp"
#include "banditscreen/optim.hpp"

namespace banditscreen {

// How the perturbed half of a measurement set is produced.
enum class MeasurementStrategy {
    kHistoryActionPerturb,  // history rows with x_d substituted by a coin flip
    kGenomicsOnly,          // history rows with N(0, sigma_g^2) noise on x_g
    kActionOnly,            // history rows with x_d always substituted
    kGaussianRandom,        // every row fully random, no history rows at all
};

MeasurementStrategy parse_strategy(const std::string& name);
std::string strategy_name(MeasurementStrategy strategy);

struct FbnnConfig {
    double kl_weight = 0.1;               // lambda
    std::size_t measurement_size = 64;    // n, rows per measurement set
    MeasurementStrategy strategy = MeasurementStrategy::kHistoryActionPerturb;
    std::size_t posterior_samples = 20;   // S
    std::size_t prior_ensemble = 20;      // P
    double genomics_noise = 1.0;          // sigma_g
    std::size_t noise_dim = 16;           // k
    double noise_scale = 1.0;
    std::vector<std::size_t> hidden = {64, 64};
    double obs_variance = 0.01;
    int steps = 100;
    std::size_t batch = 32;
    double lr = 1e-3;
    bool drug_context = true;  // false: per-action output heads, genomics-only inputs

    void validate() const;  // throws ContractError
};

// A network over deterministic inputs plus a k-dimensional noise input, so
// one noise draw xi selects one function from the induced distribution.
class StochasticNet {
  public:
    StochasticNet(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                  std::size_t output_dim, std::size_t noise_dim, double noise_scale, Rng& rng);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return output_dim_; }
    std::size_t noise_dim() const { return noise_dim_; }
    double noise_scale() const { return noise_scale_; }
    DenseNet& net() { return net_; }
    const DenseNet& net() const { return net_; }

    Vector draw_noise(Rng& rng) const;  // xi ~ N(0, noise_scale^2 I_k)

    // Appends the same xi to every row; the result is one coherent function
    // evaluated at all points.
    Matrix augment(const Matrix& points, const Vector& xi) const;
    Matrix forward(const Matrix& points, const Vector& xi) const;

  private:
    DenseNet net_;
    std::size_t input_dim_;
    std::size_t output_dim_;
    std::size_t noise_dim_;
    double noise_scale_;
};

// Finite set of input points carrying the functional KL term, with per-row
// provenance: false = untouched history row, true = perturbed or random.
struct MeasurementSet {
    Matrix points;
    std::vector<bool> perturbed;

    std::size_t size() const { return points.rows(); }
};

struct FunctionSample {
    Vector values;
    Vector xi;
};

// One coherent function draw evaluated on the measurement set.
FunctionSample sample_function(const StochasticNet& net, const MeasurementSet& points, Rng& rng);

// Half untouched history rows (rounded up), half strategy-perturbed rows;
// gaussian-random instead fills every row with random features.
MeasurementSet sample_measurement_set(const HistoryBuffer& history, const ActionSet& actions,
                                      const FbnnConfig& cfg, Rng& rng);

// Algorithm: per gradient step, sample a measurement set, draw S posterior
// function samples, assemble the reconstruction gradient on a history batch
// and the score-difference KL gradient on the measurement set, then step on
// their weighted sum. The prior is an ensemble of `prior_ensemble` freshly
// initialized nets drawn once per call.
void functional_update(StochasticNet& net, const HistoryBuffer& history, const ActionSet& actions,
                       const FbnnConfig& cfg, Optimizer& opt, Rng& rng);

// Thompson step: ONE noise draw shared across all action evaluations; ties
// resolve to the lowest index.
int select_action(const StochasticNet& net, const Vector& x_g, const ActionSet& actions, Rng& rng);

// S independent function draws at a single input point (scalar-output nets).
Vector predict_samples(const StochasticNet& net, const Vector& input, std::size_t samples,
                       Rng& rng);

class FbnnAgent : public Agent {
  public:
    FbnnAgent(const ActionSet& actions, std::size_t context_dim, FbnnConfig cfg, Rng& init_rng);
    int choose(const Vector& context, Rng& rng) override;
    void update(const HistoryBuffer& history, Rng& rng) override;
    const StochasticNet& net() const { return net_; }
    StochasticNet& net() { return net_; }
    const FbnnConfig& config() const { return cfg_; }

  private:
    const ActionSet* actions_;
    FbnnConfig cfg_;
    StochasticNet net_;
    Optimizer opt_;
};

}  // namespace banditscreen
