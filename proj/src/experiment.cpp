#include "banditscreen/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "banditscreen/baselines.hpp"
#include "banditscreen/csv.hpp"
#include "banditscreen/data.hpp"
#include "banditscreen/errors.hpp"
#include "banditscreen/fbnn.hpp"

namespace banditscreen {

namespace {

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& value, const std::string& where) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = value.find(',', start);
        const std::string item =
            trim(comma == std::string::npos ? value.substr(start) : value.substr(start, comma - start));
        if (item.empty()) throw ParseError(where + ": empty list element");
        items.push_back(item);
        if (comma == std::string::npos) return items;
        start = comma + 1;
    }
}

bool valid_name(const std::string& name) {
    if (name.empty()) return false;
    for (char c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
    return true;
}

const std::set<std::string>& known_keys(const std::string& kind) {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"uniform", {}},
        {"oracle", {}},
        {"neural-greedy", {"epsilon", "lr"}},
        {"dropout", {"p", "lr"}},
        {"bootstrapped", {"nets", "lr"}},
        {"parameter-noise", {"sigma", "lr"}},
        {"bbb", {"prior_noise", "prior_mean", "lr"}},
        {"functional",
         {"lambda", "n", "strategy", "samples", "prior_ensemble", "sigma_g", "noise_dim",
          "noise_scale", "lr", "drug_context"}},
    };
    const auto it = keys.find(kind);
    if (it == keys.end()) throw ParseError("unknown agent kind '" + kind + "'");
    return it->second;
}

std::uint64_t parse_u64(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ParseError(where + ": malformed integer '" + text + "'");
    }
}

int parse_int(const std::string& text, const std::string& where) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ParseError(where + ": malformed integer '" + text + "'");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    if (rounds < 1) throw ContractError("rounds must be at least 1");
    if (trials < 1) throw ContractError("trials must be at least 1");
    if (update_every < 1) throw ContractError("update cadence must be at least 1");
    if (agents.empty()) throw ContractError("at least one agent section required");
    std::set<std::string> seen;
    for (const AgentGrid& agent : agents) {
        if (!valid_name(agent.name))
            throw ContractError("agent name '" + agent.name +
                                "' must use letters, digits, '-' or '_'");
        if (!seen.insert(agent.name).second)
            throw ContractError("duplicate agent name '" + agent.name + "'");
        const std::set<std::string>& keys = known_keys(agent.kind);
        for (const auto& [key, values] : agent.params) {
            if (!keys.count(key))
                throw ContractError("agent '" + agent.name + "': unknown key '" + key +
                                    "' for kind '" + agent.kind + "'");
            if (values.empty())
                throw ContractError("agent '" + agent.name + "': empty grid for '" + key + "'");
        }
    }
    if (environment.kind == "tabular") {
        if (environment.data_dir.empty())
            throw ContractError("tabular environment needs a data directory");
    } else if (environment.kind == "synthetic-linear" ||
               environment.kind == "synthetic-nonlinear") {
        if (environment.d1 < 1 || environment.d2 < 1 || environment.num_actions < 1)
            throw ContractError("synthetic environment dimensions must be positive");
    } else {
        throw ContractError("unknown environment kind '" + environment.kind + "'");
    }
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name) {
    ExperimentConfig cfg;
    enum class Section { kNone, kExperiment, kEnvironment, kAgent };
    Section section = Section::kNone;
    AgentGrid* agent = nullptr;
    bool saw_environment = false;

    std::istringstream in(text);
    std::string raw_line;
    std::size_t line_number = 0;
    while (std::getline(in, raw_line)) {
        ++line_number;
        const std::string where = source_name + ":" + std::to_string(line_number);
        std::string line = raw_line;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(where + ": unterminated section header");
            const std::string header = trim(line.substr(1, line.size() - 2));
            if (header == "experiment") {
                section = Section::kExperiment;
            } else if (header == "environment") {
                section = Section::kEnvironment;
                saw_environment = true;
            } else if (header.rfind("agent ", 0) == 0) {
                const std::string name = trim(header.substr(6));
                if (!valid_name(name))
                    throw ParseError(where + ": agent name '" + name +
                                     "' must use letters, digits, '-' or '_'");
                cfg.agents.push_back(AgentGrid{name, "", {}});
                agent = &cfg.agents.back();
                section = Section::kAgent;
            } else {
                throw ParseError(where + ": unknown section '" + header + "'");
            }
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError(where + ": expected 'key = value'");

        switch (section) {
            case Section::kNone:
                throw ParseError(where + ": key outside any section");
            case Section::kExperiment:
                if (key == "rounds")
                    cfg.rounds = parse_int(value, where);
                else if (key == "trials")
                    cfg.trials = parse_int(value, where);
                else if (key == "seed")
                    cfg.base_seed = parse_u64(value, where);
                else if (key == "update_every")
                    cfg.update_every = parse_int(value, where);
                else if (key == "out")
                    cfg.out_dir = value;
                else
                    throw ParseError(where + ": unknown experiment key '" + key + "'");
                break;
            case Section::kEnvironment:
                if (key == "kind")
                    cfg.environment.kind = value;
                else if (key == "d1")
                    cfg.environment.d1 = parse_u64(value, where);
                else if (key == "d2")
                    cfg.environment.d2 = parse_u64(value, where);
                else if (key == "actions")
                    cfg.environment.num_actions = parse_u64(value, where);
                else if (key == "structure_seed")
                    cfg.environment.structure_seed = parse_u64(value, where);
                else if (key == "data")
                    cfg.environment.data_dir = value;
                else
                    throw ParseError(where + ": unknown environment key '" + key + "'");
                break;
            case Section::kAgent:
                if (key == "kind") {
                    if (!agent->kind.empty()) throw ParseError(where + ": duplicate kind");
                    agent->kind = value;
                } else {
                    for (const auto& [existing, unused] : agent->params)
                        if (existing == key) throw ParseError(where + ": duplicate key '" + key + "'");
                    agent->params.emplace_back(key, split_list(value, where));
                }
                break;
        }
    }
    if (!saw_environment) throw ParseError(source_name + ": missing [environment] section");
    for (const AgentGrid& a : cfg.agents)
        if (a.kind.empty())
            throw ParseError(source_name + ": agent '" + a.name + "' has no kind");
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path.string());
}

// ---------------------------------------------------------------------------
// Seeds, environments, agents
// ---------------------------------------------------------------------------

std::uint64_t env_stream_seed(std::uint64_t base, int trial) {
    return mix_seed(mix_seed(base, fnv1a("env-stream")), static_cast<std::uint64_t>(trial));
}

std::uint64_t agent_play_seed(std::uint64_t base, const std::string& agent, int trial) {
    return mix_seed(mix_seed(mix_seed(base, fnv1a("agent-play")), fnv1a(agent)),
                    static_cast<std::uint64_t>(trial));
}

std::uint64_t agent_init_seed(std::uint64_t base, const std::string& agent, int trial) {
    return mix_seed(mix_seed(mix_seed(base, fnv1a("agent-init")), fnv1a(agent)),
                    static_cast<std::uint64_t>(trial));
}

std::unique_ptr<Environment> make_environment(const EnvironmentSpec& spec) {
    if (spec.kind == "synthetic-linear")
        return make_synthetic_linear(spec.d1, spec.d2, spec.num_actions, spec.structure_seed);
    if (spec.kind == "synthetic-nonlinear")
        return make_synthetic_nonlinear(spec.d1, spec.d2, spec.num_actions, spec.structure_seed);
    if (spec.kind == "tabular") {
        const PreparedScreen screen = load_prepared(spec.data_dir);
        return make_tabular_replay(screen.contexts, screen.responses, screen.actions);
    }
    throw ContractError("unknown environment kind '" + spec.kind + "'");
}

namespace {

class ParamReader {
  public:
    ParamReader(const std::map<std::string, std::string>& params, const std::string& kind)
        : params_(params), kind_(kind) {}

    ~ParamReader() = default;

    double get_double(const std::string& key, double fallback) {
        const std::string* raw = fetch(key);
        return raw ? parse_double(*raw, context(key)) : fallback;
    }

    std::size_t get_count(const std::string& key, std::size_t fallback) {
        const std::string* raw = fetch(key);
        return raw ? parse_u64(*raw, context(key)) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) {
        const std::string* raw = fetch(key);
        if (!raw) return fallback;
        if (*raw == "true" || *raw == "1") return true;
        if (*raw == "false" || *raw == "0") return false;
        throw ParseError(context(key) + ": expected a boolean, got '" + *raw + "'");
    }

    std::string get_string(const std::string& key, std::string fallback) {
        const std::string* raw = fetch(key);
        return raw ? *raw : fallback;
    }

    void finish() const {
        for (const auto& [key, unused] : params_)
            if (!consumed_.count(key))
                throw ContractError("agent kind '" + kind_ + "': unknown parameter '" + key + "'");
    }

  private:
    const std::string* fetch(const std::string& key) {
        consumed_.insert(key);
        const auto it = params_.find(key);
        return it == params_.end() ? nullptr : &it->second;
    }
    std::string context(const std::string& key) const { return kind_ + " parameter '" + key + "'"; }

    const std::map<std::string, std::string>& params_;
    std::string kind_;
    std::set<std::string> consumed_;
};

}  // namespace

std::unique_ptr<Agent> make_agent(const std::string& kind,
                                  const std::map<std::string, std::string>& params,
                                  const Environment& env, Rng& init_rng) {
    ParamReader reader(params, kind);
    std::unique_ptr<Agent> agent;
    if (kind == "uniform") {
        agent = std::make_unique<UniformAgent>(env.actions());
    } else if (kind == "oracle") {
        agent = std::make_unique<OracleAgent>(env);
    } else if (kind == "neural-greedy") {
        agent = std::make_unique<NeuralGreedyAgent>(env.actions(), env.context_dim(),
                                                    reader.get_double("epsilon", 0.05),
                                                    reader.get_double("lr", 1e-3), init_rng);
    } else if (kind == "dropout") {
        agent = std::make_unique<DropoutAgent>(env.actions(), env.context_dim(),
                                               reader.get_double("p", 0.2),
                                               reader.get_double("lr", 1e-3), init_rng);
    } else if (kind == "bootstrapped") {
        agent = std::make_unique<BootstrappedAgent>(env.actions(), env.context_dim(),
                                                    reader.get_count("nets", 5),
                                                    reader.get_double("lr", 1e-3), init_rng);
    } else if (kind == "parameter-noise") {
        agent = std::make_unique<ParameterNoiseAgent>(env.actions(), env.context_dim(),
                                                      reader.get_double("sigma", 0.01),
                                                      reader.get_double("lr", 1e-3), init_rng);
    } else if (kind == "bbb") {
        BbbPrior prior;
        prior.sigma1 = reader.get_double("prior_noise", 1.0);
        prior.mean = reader.get_double("prior_mean", 0.0);
        agent = std::make_unique<BbbAgent>(env.actions(), env.context_dim(), prior,
                                           reader.get_double("lr", 1e-3), init_rng);
    } else if (kind == "functional") {
        FbnnConfig cfg;
        cfg.kl_weight = reader.get_double("lambda", cfg.kl_weight);
        cfg.measurement_size = reader.get_count("n", cfg.measurement_size);
        cfg.strategy = parse_strategy(
            reader.get_string("strategy", strategy_name(cfg.strategy)));
        cfg.posterior_samples = reader.get_count("samples", cfg.posterior_samples);
        cfg.prior_ensemble = reader.get_count("prior_ensemble", cfg.prior_ensemble);
        cfg.genomics_noise = reader.get_double("sigma_g", cfg.genomics_noise);
        cfg.noise_dim = reader.get_count("noise_dim", cfg.noise_dim);
        cfg.noise_scale = reader.get_double("noise_scale", cfg.noise_scale);
        cfg.lr = reader.get_double("lr", cfg.lr);
        cfg.drug_context = reader.get_bool("drug_context", cfg.drug_context);
        agent = std::make_unique<FbnnAgent>(env.actions(), env.context_dim(), std::move(cfg),
                                            init_rng);
    } else {
        throw ContractError("unknown agent kind '" + kind + "'");
    }
    reader.finish();
    return agent;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace {

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs)
                                   : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        threads.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    for (std::thread& t : threads) t.join();
}

std::vector<std::vector<std::pair<std::string, std::string>>> expand_grid(
    const AgentGrid& agent, bool with_default_grids) {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes = agent.params;
    if (with_default_grids) {
        static const std::vector<std::string> kLrGrid = {"1e-1", "1e-2", "1e-3", "1e-4", "1e-5"};
        static const std::map<std::string,
                              std::vector<std::pair<std::string, std::vector<std::string>>>>
            kDefaults = {
                {"uniform", {}},
                {"oracle", {}},
                {"neural-greedy",
                 {{"epsilon", {"0.05", "0.1", "0.2", "0.3", "0.4", "0.5", "0.6"}}, {"lr", kLrGrid}}},
                {"dropout", {{"p", {"0.2", "0.4", "0.6", "0.8"}}, {"lr", kLrGrid}}},
                {"bootstrapped", {{"nets", {"2", "3", "5", "10"}}, {"lr", kLrGrid}}},
                {"parameter-noise", {{"sigma", kLrGrid}, {"lr", kLrGrid}}},
                {"bbb",
                 {{"prior_noise", {"1", "1e-1", "1e-2"}},
                  {"prior_mean", {"1", "1e-1", "1e-2"}},
                  {"lr", kLrGrid}}},
                {"functional", {{"lr", kLrGrid}}},
            };
        for (const auto& [key, values] : kDefaults.at(agent.kind)) {
            const bool declared = std::any_of(axes.begin(), axes.end(),
                                              [&](const auto& axis) { return axis.first == key; });
            if (!declared) axes.emplace_back(key, values);
        }
    }

    std::vector<std::vector<std::pair<std::string, std::string>>> points;
    std::vector<std::size_t> index(axes.size(), 0);
    while (true) {
        std::vector<std::pair<std::string, std::string>> point;
        point.reserve(axes.size());
        for (std::size_t a = 0; a < axes.size(); ++a)
            point.emplace_back(axes[a].first, axes[a].second[index[a]]);
        points.push_back(std::move(point));
        std::size_t a = axes.size();
        while (a > 0) {
            --a;
            if (++index[a] < axes[a].second.size()) break;
            index[a] = 0;
            if (a == 0) return points;
        }
        if (axes.empty()) return points;
    }
}

std::string format_params(const std::vector<std::pair<std::string, std::string>>& params) {
    if (params.empty()) return "-";
    std::string out;
    for (const auto& [key, value] : params) {
        if (!out.empty()) out += ';';
        out += key + "=" + value;
    }
    return out;
}

void point_stats(PointResult& point) {
    // Stats run on the values as written to the trace files, so summary.csv
    // is exactly reproducible from them.
    std::vector<double> finals;
    finals.reserve(point.traces.size());
    for (const RegretTrace& trace : point.traces)
        finals.push_back(parse_double(format_double(trace.final_cumulative()), "summary"));
    double sum = 0.0;
    for (double v : finals) sum += v;
    const double n = static_cast<double>(finals.size());
    point.mean_final = sum / n;
    if (finals.size() < 2) {
        point.sem = 0.0;
        return;
    }
    double ss = 0.0;
    for (double v : finals) {
        const double d = v - point.mean_final;
        ss += d * d;
    }
    point.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

void write_checked(const std::filesystem::path& path, const std::string& content, bool force) {
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream existing;
        existing << in.rdbuf();
        if (existing.str() == content) return;
        if (!force)
            throw IoError("refusing to overwrite " + path.string() +
                          " with differing content (use --force)");
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

std::string render_trace(const RegretTrace& trace) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(trace.size());
    for (std::size_t t = 0; t < trace.size(); ++t)
        rows.push_back({std::to_string(t + 1), format_double(trace.instantaneous[t]),
                        format_double(trace.cumulative[t]), std::to_string(trace.chosen[t]),
                        std::to_string(trace.oracle[t])});
    return render_csv(
        {"round", "instantaneous_regret", "cumulative_regret", "action", "oracle_action"}, rows);
}

void write_agent_outputs(const ExperimentConfig& cfg, const std::vector<AgentOutcome>& agents,
                         bool force) {
    for (const AgentOutcome& agent : agents) {
        if (!agent.error.empty()) continue;
        for (std::size_t t = 0; t < agent.best.traces.size(); ++t)
            write_checked(cfg.out_dir / ("trace_" + agent.name + "_" + std::to_string(t + 1) +
                                         ".csv"),
                          render_trace(agent.best.traces[t]), force);
    }
    std::vector<std::vector<std::string>> rows;
    for (const AgentOutcome& agent : agents) {
        if (!agent.error.empty()) continue;
        rows.push_back({agent.name, format_double(agent.best.mean_final),
                        format_double(agent.best.sem), std::to_string(agent.best.traces.size()),
                        format_params(agent.best.params)});
    }
    write_checked(cfg.out_dir / "summary.csv",
                  render_csv({"agent", "mean_final_cumulative_regret", "sem", "trials",
                              "best_hyperparameters"},
                             rows),
                  force);
}

struct TrialTask {
    AgentOutcome* agent;
    PointResult* point;
    int trial;
};

ExperimentOutcome run_points(const ExperimentConfig& cfg, int jobs, bool force,
                             bool with_default_grids) {
    cfg.validate();
    const std::unique_ptr<Environment> prototype = make_environment(cfg.environment);

    ExperimentOutcome outcome;
    outcome.agents.reserve(cfg.agents.size());
    for (const AgentGrid& grid : cfg.agents) {
        AgentOutcome agent;
        agent.name = grid.name;
        agent.kind = grid.kind;
        for (auto& point_params : expand_grid(grid, with_default_grids)) {
            PointResult point;
            point.params = std::move(point_params);
            point.traces.resize(cfg.trials);
            agent.points.push_back(std::move(point));
        }
        if (!with_default_grids && agent.points.size() > 1)
            throw ContractError("agent '" + grid.name +
                                "' declares a grid; use sweep for grids");
        outcome.agents.push_back(std::move(agent));
    }

    std::vector<TrialTask> tasks;
    for (AgentOutcome& agent : outcome.agents)
        for (PointResult& point : agent.points)
            for (int t = 0; t < cfg.trials; ++t) tasks.push_back({&agent, &point, t});

    std::mutex error_mutex;
    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
        const TrialTask& task = tasks[i];
        try {
            const std::unique_ptr<Environment> env = prototype->clone();
            std::map<std::string, std::string> params(task.point->params.begin(),
                                                      task.point->params.end());
            Rng init_rng(agent_init_seed(cfg.base_seed, task.agent->name, task.trial));
            const std::unique_ptr<Agent> agent =
                make_agent(task.agent->kind, params, *env, init_rng);
            TrialResult result = run_trial(
                *env, *agent, cfg.rounds, env_stream_seed(cfg.base_seed, task.trial),
                agent_play_seed(cfg.base_seed, task.agent->name, task.trial), cfg.update_every);
            task.point->traces[task.trial] = std::move(result.trace);
        } catch (const std::exception& e) {
            const std::lock_guard<std::mutex> lock(error_mutex);
            if (task.agent->error.empty()) task.agent->error = e.what();
        }
    });

    for (AgentOutcome& agent : outcome.agents) {
        if (!agent.error.empty()) {
            std::cerr << "agent '" << agent.name << "' failed: " << agent.error << "\n";
            continue;
        }
        for (PointResult& point : agent.points) point_stats(point);
        std::size_t best = 0;
        for (std::size_t p = 1; p < agent.points.size(); ++p)
            if (agent.points[p].mean_final < agent.points[best].mean_final) best = p;
        agent.best = agent.points[best];
        if (with_default_grids)
            for (PointResult& point : agent.points) point.traces.clear();
    }

    if (with_default_grids) {
        for (const AgentOutcome& agent : outcome.agents) {
            if (!agent.error.empty() || agent.points.empty()) continue;
            std::vector<std::vector<std::string>> rows;
            for (const PointResult& point : agent.points)
                rows.push_back({format_params(point.params), format_double(point.mean_final),
                                format_double(point.sem), std::to_string(cfg.trials)});
            write_checked(cfg.out_dir / ("sweep_" + agent.name + ".csv"),
                          render_csv({"hyperparameters", "mean_final_cumulative_regret", "sem",
                                      "trials"},
                                     rows),
                          force);
        }
    }
    write_agent_outputs(cfg, outcome.agents, force);
    return outcome;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, int jobs, bool force) {
    return run_points(cfg, jobs, force, false);
}

ExperimentOutcome grid_sweep(const ExperimentConfig& cfg, int jobs, bool force) {
    return run_points(cfg, jobs, force, true);
}

void write_report(const std::filesystem::path& dir, bool force) {
    using TrialFile = std::pair<std::uint64_t, std::filesystem::path>;
    std::map<std::string, std::vector<TrialFile>> by_agent;
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("trace_", 0) != 0 || name.size() < 11 ||
            name.substr(name.size() - 4) != ".csv")
            continue;
        const std::string stem = name.substr(6, name.size() - 10);
        const std::size_t underscore = stem.rfind('_');
        if (underscore == std::string::npos) continue;
        const std::uint64_t trial =
            parse_u64(stem.substr(underscore + 1), entry.path().string());
        by_agent[stem.substr(0, underscore)].emplace_back(trial, entry.path());
    }
    if (by_agent.empty()) throw ContractError("no trace files under " + dir.string());

    std::vector<std::vector<std::string>> rows;
    for (auto& [agent, files] : by_agent) {
        std::sort(files.begin(), files.end());
        std::vector<std::vector<double>> cumulative;  // [trial][round]
        for (const auto& [trial, path] : files) {
            const CsvTable table = read_csv(path);
            if (table.header.size() < 3 || table.header[2] != "cumulative_regret")
                throw ParseError(path.string() + ": not a trace file");
            std::vector<double> column;
            column.reserve(table.rows.size());
            for (std::size_t r = 0; r < table.rows.size(); ++r)
                column.push_back(parse_double(table.rows[r][2],
                                              path.string() + ":" +
                                                  std::to_string(table.line_numbers[r])));
            if (!cumulative.empty() && column.size() != cumulative.front().size())
                throw ContractError("trace files for agent '" + agent +
                                    "' have differing round counts");
            cumulative.push_back(std::move(column));
        }
        const std::size_t rounds = cumulative.front().size();
        const double n = static_cast<double>(cumulative.size());
        for (std::size_t t = 0; t < rounds; ++t) {
            double mean = 0.0;
            for (const auto& column : cumulative) mean += column[t];
            mean /= n;
            double sem = 0.0;
            if (cumulative.size() > 1) {
                double ss = 0.0;
                for (const auto& column : cumulative) {
                    const double d = column[t] - mean;
                    ss += d * d;
                }
                sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
            }
            rows.push_back({agent, std::to_string(t + 1), format_double(mean),
                            format_double(sem)});
        }
    }
    write_checked(dir / "report.csv",
                  render_csv({"agent", "round", "mean_cumulative_regret", "sem"}, rows), force);
}

}  // namespace banditscreen
