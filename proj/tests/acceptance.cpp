// Acceptance checks for the suite. Each criterion prints one [PASS]/[FAIL]
// line with a measured detail; the exit code is nonzero when any selected
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "banditscreen/bandit.hpp"
#include "banditscreen/baselines.hpp"
#include "banditscreen/data.hpp"
#include "banditscreen/experiment.hpp"
#include "banditscreen/fbnn.hpp"
#include "banditscreen/nn.hpp"
#include "banditscreen/rng.hpp"
#include "banditscreen/ssge.hpp"

using namespace banditscreen;

namespace {

std::string fmt(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.4g", value);
    return buffer;
}

// Criterion 1: backprop against central finite differences on 100 random
// tanh nets with up to three hidden layers of width at most 32. The loss is
// a random linear functional of the output so its output gradient is exact.
bool check_gradients(std::string& detail) {
    Rng rng(101);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<std::size_t> sizes;
        sizes.push_back(rng.uniform_index(6) + 2);
        const std::size_t hidden_layers = rng.uniform_index(3) + 1;
        for (std::size_t l = 0; l < hidden_layers; ++l) sizes.push_back(rng.uniform_index(31) + 2);
        sizes.push_back(rng.uniform_index(3) + 1);
        const DenseNet net = DenseNet::glorot(sizes, rng, Activation::kTanh);

        const std::size_t batch = rng.uniform_index(4) + 1;
        Matrix input(batch, sizes.front());
        for (std::size_t i = 0; i < input.rows(); ++i)
            for (std::size_t j = 0; j < input.cols(); ++j) input(i, j) = rng.normal();
        Matrix weights(batch, sizes.back());
        for (std::size_t i = 0; i < weights.rows(); ++i)
            for (std::size_t j = 0; j < weights.cols(); ++j) weights(i, j) = rng.normal();

        const auto loss_at = [&](const DenseNet& candidate) {
            const Matrix out = candidate.forward(input);
            double total = 0.0;
            for (std::size_t i = 0; i < out.rows(); ++i)
                for (std::size_t j = 0; j < out.cols(); ++j) total += weights(i, j) * out(i, j);
            return total;
        };

        const GradientTape tape = backward(net, input, weights);
        Vector params = net.flatten();
        DenseNet probe = net;
        const double h = 1e-5;
        double max_diff = 0.0;
        double max_ref = 0.0;
        for (std::size_t p = 0; p < params.size(); ++p) {
            const double saved = params[p];
            params[p] = saved + h;
            probe.unflatten(params);
            const double plus = loss_at(probe);
            params[p] = saved - h;
            probe.unflatten(params);
            const double minus = loss_at(probe);
            params[p] = saved;
            const double fd = (plus - minus) / (2.0 * h);
            max_diff = std::max(max_diff, std::fabs(tape.grad[p] - fd));
            max_ref = std::max(max_ref, std::fabs(fd));
        }
        probe.unflatten(params);
        worst = std::max(worst, max_diff / std::max(1.0, max_ref));
    }
    detail = "max relative gradient error " + fmt(worst);
    return worst < 1e-4;
}

// Criterion 2: score estimation on a standard normal, whose true score is
// -x. 500 samples per fit, queries drawn inside the +-2 sigma box, RMSE
// averaged over 10 seeds for each dimension in {1, 2, 4}.
bool check_ssge(std::string& detail) {
    double worst = 0.0;
    std::string parts;
    for (const std::size_t d : {std::size_t{1}, std::size_t{2}, std::size_t{4}}) {
        double total = 0.0;
        for (int seed = 0; seed < 10; ++seed) {
            Rng rng(mix_seed(500 + seed, d));
            Matrix samples(500, d);
            for (std::size_t i = 0; i < samples.rows(); ++i)
                for (std::size_t j = 0; j < d; ++j) samples(i, j) = rng.normal();
            const SsgeModel model = SsgeModel::fit_auto(samples);

            Matrix queries(100, d);
            for (std::size_t i = 0; i < queries.rows(); ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    double v;
                    do {
                        v = rng.normal();
                    } while (std::fabs(v) > 2.0);
                    queries(i, j) = v;
                }
            const Matrix score = model.score(queries);
            double se = 0.0;
            for (std::size_t i = 0; i < queries.rows(); ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = score(i, j) + queries(i, j);
                    se += diff * diff;
                }
            total += std::sqrt(se / static_cast<double>(queries.rows() * d));
        }
        const double mean_rmse = total / 10.0;
        worst = std::max(worst, mean_rmse);
        parts += (parts.empty() ? "d=" : ", d=") + std::to_string(d) + ": " + fmt(mean_rmse);
    }
    detail = "mean score RMSE " + parts;
    return worst < 0.3;
}

// Criterion 3: the oracle policy accrues exactly zero regret, and uniform
// play on a constant reward table lands within four standard deviations of
// the analytic expectation over 5000 rounds.
bool check_regret(std::string& detail) {
    auto env = make_synthetic_nonlinear(6, 4, 5, 3);
    OracleAgent oracle(*env);
    const TrialResult ref = run_trial(*env, oracle, 2000, 5, 6, 30);
    const bool oracle_zero = ref.trace.final_cumulative() == 0.0;

    Matrix contexts(1, 2);
    contexts(0, 0) = 0.3;
    contexts(0, 1) = 0.7;
    Matrix rewards(1, 4);
    rewards(0, 0) = 0.0;
    rewards(0, 1) = 0.25;
    rewards(0, 2) = 0.5;
    rewards(0, 3) = 1.0;
    ActionSet actions;
    actions.features = Matrix(4, 4);
    for (std::size_t a = 0; a < 4; ++a) {
        actions.features(a, a) = 1.0;
        actions.ids.push_back("d" + std::to_string(a));
    }
    auto table = make_tabular_replay(contexts, rewards, actions);
    UniformAgent uniform(table->actions());
    const TrialResult run = run_trial(*table, uniform, 5000, 11, 12, 30);

    // Gaps are {1, 0.75, 0.5, 0} with equal probability.
    const double mean_gap = (1.0 + 0.75 + 0.5 + 0.0) / 4.0;
    const double second_moment = (1.0 + 0.5625 + 0.25 + 0.0) / 4.0;
    const double expected = 5000.0 * mean_gap;
    const double sigma = std::sqrt(5000.0 * (second_moment - mean_gap * mean_gap));
    const double gap_sigmas = std::fabs(run.trace.final_cumulative() - expected) / sigma;

    detail = "oracle regret " + fmt(ref.trace.final_cumulative()) + ", uniform offset " +
             fmt(gap_sigmas) + " sigma";
    return oracle_zero && gap_sigmas <= 4.0;
}

struct TrialSpec {
    const Environment& prototype;
    std::uint64_t base_seed;
    int rounds;
};

double agent_final(const TrialSpec& spec, const std::string& name, int trial, Agent& agent) {
    auto env = spec.prototype.clone();
    const TrialResult result =
        run_trial(*env, agent, spec.rounds, env_stream_seed(spec.base_seed, trial),
                  agent_play_seed(spec.base_seed, name, trial), 30);
    return result.trace.final_cumulative();
}

// Criterion 4: mean final regret over 20 trials on the 20-gene, 16-bit,
// 10-drug nonlinear screen orders functional posterior < neural greedy <
// uniform, with the functional agent at least 40% below uniform.
bool check_ordering(std::string& detail) {
    const auto proto = make_synthetic_nonlinear(20, 16, 10, 7);
    const TrialSpec spec{*proto, 2024, 2000};
    double fp_sum = 0.0;
    double ng_sum = 0.0;
    double uni_sum = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        {
            Rng init(agent_init_seed(spec.base_seed, "functional", trial));
            FbnnAgent agent(proto->actions(), proto->context_dim(), FbnnConfig{}, init);
            fp_sum += agent_final(spec, "functional", trial, agent);
        }
        {
            Rng init(agent_init_seed(spec.base_seed, "greedy", trial));
            NeuralGreedyAgent agent(proto->actions(), proto->context_dim(), 0.05, 1e-3, init);
            ng_sum += agent_final(spec, "greedy", trial, agent);
        }
        {
            UniformAgent agent(proto->actions());
            uni_sum += agent_final(spec, "uniform", trial, agent);
        }
        std::fprintf(stderr, "criterion 4: trial %d/20 done\n", trial + 1);
    }
    const double fp = fp_sum / 20.0;
    const double ng = ng_sum / 20.0;
    const double uni = uni_sum / 20.0;
    detail = "mean final regret functional=" + fmt(fp) + ", greedy=" + fmt(ng) +
             ", uniform=" + fmt(uni);
    return fp < ng && ng < uni && fp <= 0.6 * uni;
}

FbnnConfig light_config() {
    FbnnConfig cfg;
    cfg.measurement_size = 32;
    cfg.posterior_samples = 10;
    cfg.prior_ensemble = 10;
    return cfg;
}

// Criterion 5: on the same screen, the history-action-perturb measurement
// strategy beats each substitute strategy in at least 14 of 20 seeded
// trials (final regret, identical seeds per trial).
bool check_ablation(std::string& detail) {
    const auto proto = make_synthetic_nonlinear(20, 16, 10, 7);
    const TrialSpec spec{*proto, 4099, 500};
    const MeasurementStrategy strategies[] = {
        MeasurementStrategy::kHistoryActionPerturb,
        MeasurementStrategy::kGenomicsOnly,
        MeasurementStrategy::kActionOnly,
        MeasurementStrategy::kGaussianRandom,
    };
    double finals[4][20];
    for (int trial = 0; trial < 20; ++trial) {
        for (int s = 0; s < 4; ++s) {
            FbnnConfig cfg = light_config();
            cfg.strategy = strategies[s];
            Rng init(agent_init_seed(spec.base_seed, "ablation", trial));
            FbnnAgent agent(proto->actions(), proto->context_dim(), cfg, init);
            finals[s][trial] = agent_final(spec, "ablation", trial, agent);
        }
        std::fprintf(stderr, "criterion 5: trial %d/20 done\n", trial + 1);
    }
    int wins[3] = {0, 0, 0};
    for (int s = 1; s < 4; ++s)
        for (int trial = 0; trial < 20; ++trial)
            if (finals[0][trial] <= finals[s][trial]) ++wins[s - 1];
    detail = "wins vs genomics-only " + std::to_string(wins[0]) + "/20, action-only " +
             std::to_string(wins[1]) + "/20, gaussian-random " + std::to_string(wins[2]) + "/20";
    return wins[0] >= 14 && wins[1] >= 14 && wins[2] >= 14;
}

// Criterion 6: when two fingerprints are near-duplicates, conditioning on
// drug features beats independent per-drug heads (strictly lower mean final
// regret over 20 trials).
bool check_drug_context(std::string& detail) {
    ActionSet actions;
    actions.features = Matrix{{1, 0, 0, 1, 0, 0},
                              {0, 1, 0, 0, 1, 0},
                              {1, 1, 0, 0, 0, 1},
                              {1, 1, 0, 0, 1, 1},
                              {0, 0, 1, 1, 0, 1},
                              {0, 0, 1, 0, 1, 1}};
    for (int a = 0; a < 6; ++a) actions.ids.push_back("d" + std::to_string(a));
    const auto proto = make_synthetic_nonlinear(8, actions, 13);
    const TrialSpec spec{*proto, 6151, 500};

    double with_sum = 0.0;
    double without_sum = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        {
            FbnnConfig cfg = light_config();
            Rng init(agent_init_seed(spec.base_seed, "context", trial));
            FbnnAgent agent(proto->actions(), proto->context_dim(), cfg, init);
            with_sum += agent_final(spec, "context", trial, agent);
        }
        {
            FbnnConfig cfg = light_config();
            cfg.drug_context = false;
            Rng init(agent_init_seed(spec.base_seed, "context", trial));
            FbnnAgent agent(proto->actions(), proto->context_dim(), cfg, init);
            without_sum += agent_final(spec, "context", trial, agent);
        }
        std::fprintf(stderr, "criterion 6: trial %d/20 done\n", trial + 1);
    }
    const double with_mean = with_sum / 20.0;
    const double without_mean = without_sum / 20.0;
    detail = "mean final regret with drug context " + fmt(with_mean) + ", per-drug heads " +
             fmt(without_mean);
    return with_mean < without_mean;
}

// Criterion 7: rerunning an experiment with the same config produces byte
// identical trace and summary files.
bool check_determinism(std::string& detail) {
    const auto root = std::filesystem::temp_directory_path() / "banditscreen-acceptance";
    std::filesystem::remove_all(root);

    ExperimentConfig cfg;
    cfg.environment.kind = "synthetic-nonlinear";
    cfg.environment.d1 = 6;
    cfg.environment.d2 = 4;
    cfg.environment.num_actions = 4;
    cfg.environment.structure_seed = 17;
    cfg.rounds = 60;
    cfg.trials = 2;
    cfg.base_seed = 29;
    cfg.agents.push_back(AgentGrid{"uni", "uniform", {}});
    cfg.agents.push_back(AgentGrid{"greedy", "neural-greedy", {}});
    cfg.agents.push_back(AgentGrid{
        "fp", "functional",
        {{"n", {"16"}}, {"samples", {"4"}}, {"prior_ensemble", {"4"}}}});

    cfg.out_dir = root / "a";
    run_experiment(cfg, 1, false);
    cfg.out_dir = root / "b";
    run_experiment(cfg, 1, false);

    const auto slurp = [](const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
    };
    std::map<std::string, std::string> first;
    for (const auto& entry : std::filesystem::directory_iterator(root / "a"))
        first[entry.path().filename().string()] = slurp(entry.path());
    std::size_t matched = 0;
    bool identical = true;
    for (const auto& entry : std::filesystem::directory_iterator(root / "b")) {
        const auto it = first.find(entry.path().filename().string());
        if (it == first.end() || it->second != slurp(entry.path())) {
            identical = false;
            break;
        }
        ++matched;
    }
    identical = identical && matched == first.size() && !first.empty();
    detail = std::to_string(matched) + " files byte-identical across reruns";
    return identical;
}

// Criterion 8: an 8-cell, 5-drug toy screen with a known missing pattern
// filters and scales to a hand-enumerated result, and full-rank PCA
// reconstructs the filtered expression to 1e-8.
bool check_data_pipeline(std::string& detail) {
    RawScreen raw;
    for (int c = 0; c < 8; ++c) raw.cell_ids.push_back("c" + std::to_string(c));
    for (int g = 0; g < 4; ++g) raw.gene_ids.push_back("g" + std::to_string(g));
    for (int k = 0; k < 5; ++k) raw.drug_ids.push_back("d" + std::to_string(k));
    raw.expression = Matrix{{0.125, 0.5, 0.25, 0.875},
                            {0.25, 0.125, 0.75, 0.375},
                            {0.375, 0.75, 0.125, 0.625},
                            {0.5, 0.25, 0.875, 0.125},
                            {0.625, 0.875, 0.375, 0.75},
                            {0.75, 0.375, 0.5, 0.25},
                            {0.875, 0.625, 0.625, 0.5},
                            {0.0625, 0.9375, 0.0625, 0.9375}};
    raw.fingerprints = Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1}};

    // Cell c7 misses 4 of 5 drugs and is dropped at the 70% threshold; d4
    // then misses c3 among the seven kept cells and is dropped too.
    const double kept[7][4] = {{0.0, 1.0, 0.5, 0.25},  {0.25, 0.0, 1.0, 0.5},
                               {0.5, 0.25, 0.0, 1.0},  {0.75, 0.5, 0.25, 0.0},
                               {1.0, 0.75, 0.125, 0.75}, {0.125, 0.875, 0.75, 0.875},
                               {0.875, 0.125, 0.875, 0.125}};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    raw.response = Matrix(8, 5);
    for (int c = 0; c < 7; ++c) {
        for (int k = 0; k < 4; ++k) raw.response(c, k) = kept[c][k];
        raw.response(c, 4) = c == 3 ? nan : 0.125 * c;
    }
    for (int k = 0; k < 4; ++k) raw.response(7, k) = nan;
    raw.response(7, 4) = 0.625;

    const PreparedScreen prepared = prepare(raw, 4);
    bool exact = prepared.cells_dropped == 1 && prepared.drugs_dropped == 1 &&
                 prepared.cell_ids.size() == 7 && prepared.actions.ids.size() == 4 &&
                 prepared.pca_components == 4;
    for (int c = 0; c < 7 && exact; ++c) {
        exact = prepared.cell_ids[c] == raw.cell_ids[c];
        // Every kept column spans [0, 1], so scaling leaves it untouched.
        for (int k = 0; k < 4 && exact; ++k) exact = prepared.responses(c, k) == kept[c][k];
    }
    for (int k = 0; k < 4 && exact; ++k) {
        exact = prepared.actions.ids[k] == raw.drug_ids[k];
        for (int b = 0; b < 3 && exact; ++b)
            exact = prepared.actions.features(k, b) == raw.fingerprints(k, b);
    }
    for (std::size_t i = 0; i < prepared.contexts.rows() && exact; ++i)
        for (std::size_t j = 0; j < prepared.contexts.cols(); ++j)
            exact = exact && prepared.contexts(i, j) >= 0.0 && prepared.contexts(i, j) <= 1.0;

    Matrix filtered(7, 4);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 4; ++j) filtered(i, j) = raw.expression(i, j);
    const PcaResult pca = pca_project(filtered, 4);
    double recon_error = 0.0;
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double value = pca.column_means[j];
            for (std::size_t k = 0; k < 4; ++k) value += pca.scores(i, k) * pca.components(j, k);
            recon_error = std::max(recon_error, std::fabs(value - filtered(i, j)));
        }

    detail = std::string(exact ? "filtered screen matches enumeration" : "enumeration mismatch");
    detail += ", PCA reconstruction error " + fmt(recon_error);
    return exact && recon_error < 1e-8;
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* label;
        bool (*check)(std::string&);
    };
    const Criterion criteria[] = {
        {1, "backward gradients match finite differences", check_gradients},
        {2, "score estimator recovers the Gaussian score", check_ssge},
        {3, "regret bookkeeping matches analytic baselines", check_regret},
        {4, "exploration ordering on the synthetic screen", check_ordering},
        {5, "measurement strategy beats its ablations", check_ablation},
        {6, "drug context beats per-drug heads", check_drug_context},
        {7, "experiment reruns are byte-identical", check_determinism},
        {8, "data pipeline matches hand enumeration", check_data_pipeline},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    bool all_pass = true;
    for (const Criterion& criterion : criteria) {
        if (!selected.empty() && selected.count(criterion.id) == 0) continue;
        const auto start = std::chrono::steady_clock::now();
        std::string describe;
        bool ok = false;
        try {
            ok = criterion.check(describe);
        } catch (const std::exception& e) {
            describe = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL", criterion.id,
                    criterion.label, describe.c_str(), secs);
        std::fflush(stdout);
        all_pass = all_pass && ok;
    }
    return all_pass ? 0 : 1;
}
