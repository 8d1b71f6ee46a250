#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "banditscreen/bandit.hpp"

namespace banditscreen {

struct EnvironmentSpec {
    std::string kind = "synthetic-nonlinear";  // synthetic-linear | synthetic-nonlinear | tabular
    std::size_t d1 = 20;
    std::size_t d2 = 16;
    std::size_t num_actions = 10;
    std::uint64_t structure_seed = 1;
    std::filesystem::path data_dir;  // tabular only: a prepared-screen directory
};

// One [agent <name>] config section; every value is a list so any key can
// carry a sweep grid (single values are one-element lists).
struct AgentGrid {
    std::string name;
    std::string kind;
    std::vector<std::pair<std::string, std::vector<std::string>>> params;  // declared order
};

struct ExperimentConfig {
    EnvironmentSpec environment;
    std::vector<AgentGrid> agents;
    int rounds = 2000;
    int trials = 20;
    int update_every = 30;
    std::uint64_t base_seed = 0;
    std::filesystem::path out_dir = "results";

    void validate() const;  // throws ContractError
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

// Seed derivation. The environment stream depends only on (base, trial) so
// every agent faces the identical round sequence at a given trial index.
std::uint64_t env_stream_seed(std::uint64_t base, int trial);
std::uint64_t agent_play_seed(std::uint64_t base, const std::string& agent, int trial);
std::uint64_t agent_init_seed(std::uint64_t base, const std::string& agent, int trial);

std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec);

// Agent factory over scalar parameters; `env` supplies action set and
// context dimension (and the oracle hook for kind=oracle).
std::unique_ptr<Agent> make_agent(const std::string& kind,
                                  const std::map<std::string, std::string>& params,
                                  const Environment& env, Rng& init_rng);

// One evaluated hyperparameter point of one agent.
struct PointResult {
    std::vector<std::pair<std::string, std::string>> params;  // declared order
    std::vector<RegretTrace> traces;                          // per trial
    double mean_final = 0.0;
    double sem = 0.0;
};

struct AgentOutcome {
    std::string name;
    std::string kind;
    std::string error;  // non-empty: the agent's run failed and was skipped
    PointResult best;
    std::vector<PointResult> points;  // sweeps keep every point, traces in best only
};

struct ExperimentOutcome {
    std::vector<AgentOutcome> agents;
};

// Runs trials for every agent at its configured scalar parameters, writes
// trace_<agent>_<trial>.csv and summary.csv into cfg.out_dir. Existing files
// with differing content abort unless `force`.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, int jobs = 0, bool force = false);

// Runs every grid point, selects per agent by lowest mean final regret
// (ties: first declared), writes sweep_<agent>.csv per agent plus the best
// point's traces and summary.csv.
ExperimentOutcome grid_sweep(const ExperimentConfig& cfg, int jobs = 0, bool force = false);

// Aggregates trace files in `dir` into report.csv: per agent and round, the
// mean cumulative regret and its standard error across trials.
void write_report(const std::filesystem::path& dir, bool force = false);

}  // namespace banditscreen
