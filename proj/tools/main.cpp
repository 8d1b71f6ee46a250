#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "banditscreen/csv.hpp"
#include "banditscreen/data.hpp"
#include "banditscreen/experiment.hpp"

namespace {

constexpr const char* kConfigDialect = R"(Config file dialect ('#' starts a comment):

  [experiment]
  rounds = 2000        # rounds per trial
  trials = 20          # trials per agent (and per grid point)
  seed = 0             # base seed; all trial seeds derive from it
  update_every = 30    # agent update cadence in rounds
  out = results        # output directory

  [environment]
  kind = synthetic-nonlinear   # synthetic-linear | synthetic-nonlinear | tabular
  d1 = 20              # context dimension (synthetic kinds)
  d2 = 16              # fingerprint dimension (synthetic kinds)
  actions = 10         # number of drugs (synthetic kinds)
  structure_seed = 1   # fixes reward structure and fingerprints (synthetic kinds)
  data = prepared/     # prepared-screen directory (tabular kind)

  [agent <name>]       # one section per agent; <name> labels the output files
  kind = functional    # uniform | oracle | neural-greedy | dropout | bootstrapped
                       #   | parameter-noise | bbb | functional
  lr = 1e-3            # comma lists (lr = 1e-2,1e-3) declare sweep grids

Agent keys by kind:
  neural-greedy    epsilon, lr
  dropout          p, lr
  bootstrapped     nets, lr
  parameter-noise  sigma, lr
  bbb              prior_noise, prior_mean, lr
  functional       lambda, n, strategy, samples, prior_ensemble, sigma_g,
                   noise_dim, noise_scale, lr, drug_context

`sweep` fills standard grids for keys left unset; `run` needs single values.)";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contextual-bandit benchmarks for anticancer drug screening"};
    app.require_subcommand(1);
    app.footer(kConfigDialect);

    std::string config_path;
    std::string dir;
    std::string out;
    std::uint64_t seed = 0;
    int trials = 0;
    int rounds = 0;
    int jobs = 0;
    bool force = false;

    const auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "Experiment config file")->required();
        sub->add_option("--seed", seed, "Override the base seed");
        sub->add_option("--trials", trials, "Override the trial count");
        sub->add_option("--rounds", rounds, "Override rounds per trial");
        sub->add_option("--out", out, "Override the output directory");
        sub->add_option("--jobs", jobs, "Worker threads (default: all cores)");
        sub->add_flag("--force", force, "Overwrite output files that differ");
        sub->footer(kConfigDialect);
    };

    CLI::App* run = app.add_subcommand("run", "Run every agent at fixed hyperparameters");
    add_overrides(run);
    CLI::App* sweep = app.add_subcommand("sweep", "Grid-search hyperparameters per agent");
    add_overrides(sweep);

    CLI::App* report = app.add_subcommand("report", "Aggregate trace files into report.csv");
    report->add_option("dir", dir, "Directory holding trace_<agent>_<trial>.csv files")
        ->required();
    report->add_flag("--force", force, "Overwrite a differing report.csv");

    std::size_t components = 20;
    bool negate = false;
    CLI::App* prepare = app.add_subcommand("prepare", "Build a prepared screen from raw CSVs");
    prepare
        ->add_option("dir", dir,
                     "Directory with expression.csv, response.csv, fingerprints.csv")
        ->required();
    prepare->add_option("--out", out, "Output directory (default: <dir>/prepared)");
    prepare->add_option("--components", components, "PCA components to keep");
    prepare->add_flag("--negate", negate,
                      "Treat lower raw response as better (negate before scaling)");

    std::size_t synth_cells = 200;
    std::size_t synth_genes = 100;
    std::size_t synth_drugs = 10;
    std::size_t synth_bits = 16;
    double synth_missing = 0.1;
    std::uint64_t synth_seed = 0;
    CLI::App* synth = app.add_subcommand("synth", "Write a synthetic raw screen for demos");
    synth->add_option("dir", dir, "Output directory")->required();
    synth->add_option("--cells", synth_cells, "Cell lines");
    synth->add_option("--genes", synth_genes, "Genes per expression profile");
    synth->add_option("--drugs", synth_drugs, "Drugs");
    synth->add_option("--bits", synth_bits, "Fingerprint bits");
    synth->add_option("--missing", synth_missing, "Fraction of responses knocked out");
    synth->add_option("--seed", synth_seed, "Generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed() || sweep->parsed()) {
            CLI::App* sub = run->parsed() ? run : sweep;
            banditscreen::ExperimentConfig cfg = banditscreen::parse_config_file(config_path);
            if (sub->count("--seed")) cfg.base_seed = seed;
            if (sub->count("--trials")) cfg.trials = trials;
            if (sub->count("--rounds")) cfg.rounds = rounds;
            if (sub->count("--out")) cfg.out_dir = out;
            const banditscreen::ExperimentOutcome outcome =
                run->parsed() ? banditscreen::run_experiment(cfg, jobs, force)
                              : banditscreen::grid_sweep(cfg, jobs, force);
            bool failed = false;
            for (const banditscreen::AgentOutcome& agent : outcome.agents) {
                if (!agent.error.empty()) {
                    failed = true;
                    continue;
                }
                std::cout << agent.name << ": mean final cumulative regret "
                          << banditscreen::format_double(agent.best.mean_final) << " (sem "
                          << banditscreen::format_double(agent.best.sem) << ")\n";
            }
            std::cout << "wrote " << cfg.out_dir.string() << "\n";
            return failed ? 1 : 0;
        }
        if (report->parsed()) {
            banditscreen::write_report(dir, force);
            std::cout << "wrote " << (std::filesystem::path(dir) / "report.csv").string()
                      << "\n";
            return 0;
        }
        if (prepare->parsed()) {
            const std::filesystem::path in_dir = dir;
            const std::filesystem::path out_dir =
                out.empty() ? in_dir / "prepared" : std::filesystem::path(out);
            const banditscreen::RawScreen raw = banditscreen::load_screen(in_dir);
            const banditscreen::PreparedScreen screen =
                banditscreen::prepare(raw, components, negate);
            banditscreen::save_prepared(screen, out_dir);
            std::cout << "prepared " << screen.contexts.rows() << " cells x "
                      << screen.actions.size() << " drugs (" << screen.cells_dropped
                      << " cells, " << screen.drugs_dropped << " drugs dropped; "
                      << screen.pca_components << " components, "
                      << banditscreen::format_double(screen.pca_variance_explained * 100.0)
                      << "% variance) -> " << out_dir.string() << "\n";
            return 0;
        }
        if (synth->parsed()) {
            const banditscreen::RawScreen raw = banditscreen::synthesize_screen(
                synth_cells, synth_genes, synth_drugs, synth_bits, synth_missing, synth_seed);
            banditscreen::save_raw(raw, dir);
            std::cout << "wrote " << dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
