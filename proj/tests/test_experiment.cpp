#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "banditscreen/csv.hpp"
#include "banditscreen/data.hpp"
#include "banditscreen/errors.hpp"
#include "banditscreen/experiment.hpp"

using namespace banditscreen;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "banditscreen-exp-tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Message of the ParseError thrown for `text`, or "" when none is thrown.
std::string parse_failure(const std::string& text) {
    try {
        parse_config_text(text, "cfg");
        return "";
    } catch (const ParseError& e) {
        return e.what();
    }
}

ExperimentConfig tiny_config(const std::filesystem::path& out) {
    ExperimentConfig cfg;
    cfg.environment.kind = "synthetic-linear";
    cfg.environment.d1 = 3;
    cfg.environment.d2 = 3;
    cfg.environment.num_actions = 3;
    cfg.environment.structure_seed = 5;
    cfg.rounds = 40;
    cfg.trials = 2;
    cfg.update_every = 30;
    cfg.base_seed = 12;
    cfg.out_dir = out;
    return cfg;
}

double final_cumulative_from_file(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    REQUIRE(table.header[2] == std::string("cumulative_regret"));
    REQUIRE_FALSE(table.rows.empty());
    return parse_double(table.rows.back()[2], path.string());
}

}  // namespace

TEST_CASE("config files parse sections, grids and comments") {
    const std::string text =
        "# demo experiment\n"
        "[experiment]\n"
        "rounds = 120\n"
        "trials = 3\n"
        "seed = 42\n"
        "update_every = 15\n"
        "out = results/demo\n"
        "\n"
        "[environment]\n"
        "kind = synthetic-nonlinear   # nonlinear rewards\n"
        "d1 = 6\n"
        "d2 = 4\n"
        "actions = 5\n"
        "structure_seed = 9\n"
        "\n"
        "[agent uni]\n"
        "kind = uniform\n"
        "\n"
        "[agent greedy]\n"
        "kind = neural-greedy\n"
        "epsilon = 0.1\n"
        "lr = 1e-3, 1e-2\n";
    const ExperimentConfig cfg = parse_config_text(text, "cfg");
    CHECK(cfg.rounds == 120);
    CHECK(cfg.trials == 3);
    CHECK(cfg.base_seed == 42);
    CHECK(cfg.update_every == 15);
    CHECK(cfg.out_dir == std::filesystem::path("results/demo"));
    CHECK(cfg.environment.kind == "synthetic-nonlinear");
    CHECK(cfg.environment.d1 == 6);
    CHECK(cfg.environment.d2 == 4);
    CHECK(cfg.environment.num_actions == 5);
    CHECK(cfg.environment.structure_seed == 9);
    REQUIRE(cfg.agents.size() == 2);
    CHECK(cfg.agents[0].name == "uni");
    CHECK(cfg.agents[0].kind == "uniform");
    CHECK(cfg.agents[0].params.empty());
    CHECK(cfg.agents[1].name == "greedy");
    REQUIRE(cfg.agents[1].params.size() == 2);
    CHECK(cfg.agents[1].params[0].first == "epsilon");
    CHECK(cfg.agents[1].params[0].second == std::vector<std::string>{"0.1"});
    CHECK(cfg.agents[1].params[1].second == std::vector<std::string>{"1e-3", "1e-2"});
}

TEST_CASE("config errors carry the source line") {
    const std::string env = "[environment]\nkind = synthetic-linear\n";

    CHECK(parse_failure("rounds = 5\n" + env).find("cfg:1: key outside any section") !=
          std::string::npos);
    CHECK(parse_failure("[experiment]\nrounds 5\n" + env).find("cfg:2: expected 'key = value'") !=
          std::string::npos);
    CHECK(parse_failure("[mystery]\n" + env).find("cfg:1: unknown section 'mystery'") !=
          std::string::npos);
    CHECK(parse_failure("[experiment\n" + env).find("cfg:1: unterminated section header") !=
          std::string::npos);
    CHECK(parse_failure("[experiment]\nsteps = 5\n" + env)
              .find("cfg:2: unknown experiment key 'steps'") != std::string::npos);
    CHECK(parse_failure(env + "drugs = 3\n").find("cfg:3: unknown environment key 'drugs'") !=
          std::string::npos);
    CHECK(parse_failure("[experiment]\nrounds = ten\n" + env)
              .find("cfg:2: malformed integer 'ten'") != std::string::npos);
    CHECK(parse_failure("[agent bad name]\n" + env).find("cfg:1: agent name 'bad name'") !=
          std::string::npos);
    CHECK(parse_failure(env + "[agent a]\nkind = uniform\nkind = oracle\n")
              .find("cfg:5: duplicate kind") != std::string::npos);
    CHECK(parse_failure(env + "[agent a]\nkind = neural-greedy\nlr = 0.1\nlr = 0.2\n")
              .find("cfg:6: duplicate key 'lr'") != std::string::npos);
    CHECK(parse_failure(env + "[agent a]\nkind = neural-greedy\nlr = 0.1,,0.2\n")
              .find("cfg:5: empty list element") != std::string::npos);
    CHECK(parse_failure("[agent a]\nkind = uniform\n").find("missing [environment] section") !=
          std::string::npos);
    CHECK(parse_failure(env + "[agent a]\n").find("agent 'a' has no kind") != std::string::npos);
    CHECK(parse_failure(env + "[agent a]\nkind = sarsa\n").find("unknown agent kind 'sarsa'") !=
          std::string::npos);
}

TEST_CASE("config validation rejects structural mistakes") {
    const std::string env = "[environment]\nkind = synthetic-linear\n";
    const std::string agent = "[agent a]\nkind = uniform\n";

    CHECK_THROWS_AS(parse_config_text(env, "cfg"), ContractError);  // no agents
    CHECK_THROWS_AS(parse_config_text("[experiment]\nrounds = 0\n" + env + agent, "cfg"),
                    ContractError);
    CHECK_THROWS_AS(parse_config_text("[experiment]\ntrials = 0\n" + env + agent, "cfg"),
                    ContractError);
    CHECK_THROWS_AS(
        parse_config_text(env + agent + "[agent a]\nkind = oracle\n", "cfg"),
        ContractError);  // duplicate name
    CHECK_THROWS_AS(parse_config_text(env + "[agent a]\nkind = uniform\nepsilon = 0.1\n", "cfg"),
                    ContractError);  // key not valid for the kind
    CHECK_THROWS_AS(parse_config_text("[environment]\nkind = tabular\n" + agent, "cfg"),
                    ContractError);  // tabular without data
    CHECK_THROWS_AS(parse_config_text("[environment]\nkind = martian\n" + agent, "cfg"),
                    ContractError);
    CHECK_THROWS_AS(parse_config_text("[environment]\nkind = synthetic-linear\nd1 = 0\n" + agent,
                                      "cfg"),
                    ContractError);
}

TEST_CASE("seed derivation separates streams, agents and trials") {
    const std::uint64_t base = 99;
    // The environment stream ignores the agent entirely.
    CHECK(env_stream_seed(base, 3) == env_stream_seed(base, 3));
    CHECK(env_stream_seed(base, 3) != env_stream_seed(base, 4));
    CHECK(env_stream_seed(base, 0) != env_stream_seed(base + 1, 0));

    CHECK(agent_play_seed(base, "a", 3) != agent_play_seed(base, "b", 3));
    CHECK(agent_play_seed(base, "a", 3) != agent_play_seed(base, "a", 4));
    CHECK(agent_play_seed(base, "a", 3) != agent_init_seed(base, "a", 3));
    CHECK(agent_init_seed(base, "a", 3) == agent_init_seed(base, "a", 3));
    CHECK(env_stream_seed(base, 3) != agent_play_seed(base, "a", 3));
}

TEST_CASE("environment and agent factories check their inputs") {
    EnvironmentSpec spec;
    spec.kind = "synthetic-linear";
    spec.d1 = 3;
    spec.d2 = 3;
    spec.num_actions = 4;
    const auto env = make_environment(spec);
    CHECK(env->num_actions() == 4);
    CHECK(env->context_dim() == 3);

    EnvironmentSpec bad = spec;
    bad.kind = "martian";
    CHECK_THROWS_AS(make_environment(bad), ContractError);

    Rng init(1);
    for (const char* kind : {"uniform", "oracle", "neural-greedy", "dropout", "bootstrapped",
                             "parameter-noise", "bbb", "functional"})
        CHECK(make_agent(kind, {}, *env, init) != nullptr);

    CHECK_THROWS_AS(make_agent("sarsa", {}, *env, init), ContractError);
    CHECK_THROWS_AS(make_agent("uniform", {{"epsilon", "0.1"}}, *env, init), ContractError);
    CHECK_THROWS_AS(make_agent("neural-greedy", {{"epsilon", "fast"}}, *env, init), ParseError);
    CHECK_THROWS_AS(make_agent("functional", {{"drug_context", "maybe"}}, *env, init), ParseError);
}

TEST_CASE("experiments emit consistent traces and summaries") {
    const auto out = fresh_dir("run-basic");
    ExperimentConfig cfg = tiny_config(out);
    cfg.agents.push_back(AgentGrid{"orc", "oracle", {}});
    cfg.agents.push_back(AgentGrid{"uni", "uniform", {}});

    const ExperimentOutcome outcome = run_experiment(cfg, 1, false);
    REQUIRE(outcome.agents.size() == 2);

    SUBCASE("the oracle collects zero regret") {
        CHECK(outcome.agents[0].error.empty());
        CHECK(outcome.agents[0].best.mean_final == 0.0);
        CHECK(outcome.agents[0].best.sem == 0.0);
    }

    SUBCASE("every agent faces the identical environment stream") {
        for (int t = 0; t < 2; ++t) {
            const auto& oracle_trace = outcome.agents[0].best.traces[t];
            const auto& uniform_trace = outcome.agents[1].best.traces[t];
            CHECK(oracle_trace.stream_checksum == uniform_trace.stream_checksum);
        }
        CHECK(outcome.agents[0].best.traces[0].stream_checksum !=
              outcome.agents[0].best.traces[1].stream_checksum);
    }

    SUBCASE("summary rows reproduce exactly from the trace files") {
        const CsvTable summary = read_csv(out / "summary.csv");
        REQUIRE(summary.rows.size() == 2);
        for (const auto& row : summary.rows) {
            const double mean_a = final_cumulative_from_file(out / ("trace_" + row[0] + "_1.csv"));
            const double mean_b = final_cumulative_from_file(out / ("trace_" + row[0] + "_2.csv"));
            CHECK(format_double((mean_a + mean_b) / 2.0) == row[1]);
            CHECK(row[3] == "2");
            CHECK(row[4] == "-");
        }
    }

    SUBCASE("reruns are byte-identical and never clobber silently") {
        const std::string summary_before = read_file(out / "summary.csv");
        const std::string trace_before = read_file(out / "trace_uni_1.csv");
        run_experiment(cfg, 1, false);
        CHECK(read_file(out / "summary.csv") == summary_before);
        CHECK(read_file(out / "trace_uni_1.csv") == trace_before);

        ExperimentConfig moved = cfg;
        moved.base_seed = 13;
        CHECK_THROWS_AS(run_experiment(moved, 1, false), IoError);
        CHECK(read_file(out / "summary.csv") == summary_before);

        run_experiment(moved, 1, true);
        CHECK(read_file(out / "summary.csv") != summary_before);
    }
}

TEST_CASE("a failing agent aborts alone") {
    const auto out = fresh_dir("run-partial");
    ExperimentConfig cfg = tiny_config(out);
    cfg.agents.push_back(AgentGrid{"uni", "uniform", {}});
    cfg.agents.push_back(AgentGrid{"broken", "bbb", {{"prior_noise", {"-1"}}}});

    const ExperimentOutcome outcome = run_experiment(cfg, 1, false);
    CHECK(outcome.agents[0].error.empty());
    CHECK_FALSE(outcome.agents[1].error.empty());

    const CsvTable summary = read_csv(out / "summary.csv");
    REQUIRE(summary.rows.size() == 1);
    CHECK(summary.rows[0][0] == "uni");
    CHECK_FALSE(std::filesystem::exists(out / "trace_broken_1.csv"));
}

TEST_CASE("plain runs refuse declared grids") {
    ExperimentConfig cfg = tiny_config(fresh_dir("run-grid"));
    cfg.agents.push_back(AgentGrid{"greedy", "neural-greedy", {{"lr", {"1e-3", "1e-2"}}}});
    CHECK_THROWS_AS(run_experiment(cfg, 1, false), ContractError);
}

TEST_CASE("sweeps walk declared grids in order and break ties first") {
    const auto out = fresh_dir("sweep-tie");
    ExperimentConfig cfg = tiny_config(out);
    cfg.rounds = 35;
    // At epsilon 1 the policy never consults the net, so the lr axis cannot
    // move the regret and the tie must resolve to the first declared value.
    cfg.agents.push_back(AgentGrid{
        "greedy", "neural-greedy", {{"epsilon", {"1.0"}}, {"lr", {"1e-9", "1e-8"}}}});

    const ExperimentOutcome outcome = grid_sweep(cfg, 1, false);
    REQUIRE(outcome.agents.size() == 1);
    const AgentOutcome& agent = outcome.agents[0];
    CHECK(agent.error.empty());
    REQUIRE(agent.points.size() == 2);
    CHECK(agent.points[0].mean_final == agent.points[1].mean_final);
    REQUIRE(agent.best.params.size() == 2);
    CHECK(agent.best.params[0] == std::pair<std::string, std::string>{"epsilon", "1.0"});
    CHECK(agent.best.params[1] == std::pair<std::string, std::string>{"lr", "1e-9"});

    const CsvTable sweep = read_csv(out / "sweep_greedy.csv");
    REQUIRE(sweep.rows.size() == 2);
    CHECK(sweep.rows[0][0] == "epsilon=1.0;lr=1e-9");
    CHECK(sweep.rows[1][0] == "epsilon=1.0;lr=1e-8");
    CHECK(sweep.rows[0][1] == sweep.rows[1][1]);

    const CsvTable summary = read_csv(out / "summary.csv");
    REQUIRE(summary.rows.size() == 1);
    CHECK(summary.rows[0][4] == "epsilon=1.0;lr=1e-9");
    CHECK(std::filesystem::exists(out / "trace_greedy_1.csv"));
    CHECK(std::filesystem::exists(out / "trace_greedy_2.csv"));
}

TEST_CASE("sweeps fill undeclared axes from the default grids") {
    const auto out = fresh_dir("sweep-default");
    ExperimentConfig cfg = tiny_config(out);
    // Short of the first update cadence the learning rate is inert, so all
    // five default points collapse onto one trace and the first wins.
    cfg.rounds = 10;
    cfg.trials = 1;
    cfg.agents.push_back(AgentGrid{"fp", "functional", {{"n", {"8"}}, {"samples", {"4"}}}});

    const ExperimentOutcome outcome = grid_sweep(cfg, 1, false);
    const AgentOutcome& agent = outcome.agents[0];
    CHECK(agent.error.empty());
    REQUIRE(agent.points.size() == 5);
    for (const PointResult& point : agent.points) {
        REQUIRE(point.params.size() == 3);
        CHECK(point.params[0].first == "n");
        CHECK(point.params[1].first == "samples");
        CHECK(point.params[2].first == "lr");
    }
    CHECK(agent.points[0].params[2].second == "1e-1");
    CHECK(agent.points[4].params[2].second == "1e-5");
    CHECK(agent.best.params[2].second == "1e-1");

    const CsvTable sweep = read_csv(out / "sweep_fp.csv");
    CHECK(sweep.rows.size() == 5);
}

TEST_CASE("reports aggregate traces per agent and round") {
    SUBCASE("hand-written traces produce the known mean and sem") {
        const auto dir = fresh_dir("report-toy");
        const std::string header = "round,instantaneous_regret,cumulative_regret,action,oracle_action\n";
        write_file(dir / "trace_fp_best_1.csv", header + "1,1,1,0,0\n2,1,2,0,0\n");
        write_file(dir / "trace_fp_best_2.csv", header + "1,3,3,0,0\n2,1,4,0,0\n");
        write_file(dir / "trace_fp_best_3.csv", header + "1,5,5,0,0\n2,1,6,0,0\n");
        write_file(dir / "notes.txt", "not a trace\n");

        write_report(dir, false);
        const CsvTable report = read_csv(dir / "report.csv");
        REQUIRE(report.rows.size() == 2);
        CHECK(report.rows[0][0] == "fp_best");
        CHECK(report.rows[0][1] == "1");
        CHECK(report.rows[0][2] == "3");
        // Sample std of {1,3,5} over sqrt(3): 2/sqrt(3).
        CHECK(parse_double(report.rows[0][3], "sem") == doctest::Approx(1.1547005384).epsilon(1e-9));
        CHECK(report.rows[1][1] == "2");
        CHECK(report.rows[1][2] == "4");

        // A second pass reproduces the same bytes without complaint.
        const std::string first = read_file(dir / "report.csv");
        write_report(dir, false);
        CHECK(read_file(dir / "report.csv") == first);
    }

    SUBCASE("trial numbers sort numerically, not lexically") {
        const auto dir = fresh_dir("report-order");
        const std::string header = "round,instantaneous_regret,cumulative_regret,action,oracle_action\n";
        for (int t = 1; t <= 12; ++t)
            write_file(dir / ("trace_a_" + std::to_string(t) + ".csv"),
                       header + "1,1," + std::to_string(t) + ",0,0\n");
        write_report(dir, false);
        const CsvTable report = read_csv(dir / "report.csv");
        REQUIRE(report.rows.size() == 1);
        // Mean of 1..12.
        CHECK(report.rows[0][2] == "6.5");
    }

    SUBCASE("defective inputs are rejected") {
        CHECK_THROWS_AS(write_report(fresh_dir("report-empty"), false), ContractError);

        const auto ragged = fresh_dir("report-ragged");
        const std::string header = "round,instantaneous_regret,cumulative_regret,action,oracle_action\n";
        write_file(ragged / "trace_a_1.csv", header + "1,1,1,0,0\n2,1,2,0,0\n");
        write_file(ragged / "trace_a_2.csv", header + "1,1,1,0,0\n");
        CHECK_THROWS_AS(write_report(ragged, false), ContractError);

        const auto badname = fresh_dir("report-badname");
        write_file(badname / "trace_a_one.csv", header + "1,1,1,0,0\n");
        CHECK_THROWS_AS(write_report(badname, false), ParseError);

        const auto notdir = fresh_dir("report-notdir");
        CHECK_THROWS_AS(write_report(notdir / "missing", false), IoError);
    }

    SUBCASE("reports refuse to mask changed traces") {
        const auto dir = fresh_dir("report-force");
        const std::string header = "round,instantaneous_regret,cumulative_regret,action,oracle_action\n";
        write_file(dir / "trace_a_1.csv", header + "1,1,1,0,0\n");
        write_report(dir, false);
        write_file(dir / "trace_a_1.csv", header + "1,2,2,0,0\n");
        CHECK_THROWS_AS(write_report(dir, false), IoError);
        write_report(dir, true);
        const CsvTable report = read_csv(dir / "report.csv");
        CHECK(report.rows[0][2] == "2");
    }
}

TEST_CASE("tabular experiments replay prepared screens end to end") {
    const auto data_dir = fresh_dir("tabular-data");
    const auto out = fresh_dir("tabular-out");
    save_prepared(prepare(synthesize_screen(20, 8, 4, 6, 0.0, 331), 3), data_dir);

    ExperimentConfig cfg;
    cfg.environment.kind = "tabular";
    cfg.environment.data_dir = data_dir;
    cfg.rounds = 30;
    cfg.trials = 2;
    cfg.base_seed = 7;
    cfg.out_dir = out;
    cfg.agents.push_back(AgentGrid{"orc", "oracle", {}});
    cfg.agents.push_back(AgentGrid{"uni", "uniform", {}});

    const ExperimentOutcome outcome = run_experiment(cfg, 1, false);
    CHECK(outcome.agents[0].best.mean_final == 0.0);
    CHECK(outcome.agents[1].best.mean_final > 0.0);
    CHECK(std::filesystem::exists(out / "summary.csv"));
}
