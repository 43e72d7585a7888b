// poelab: pressure out of equilibrium laboratory.
//
//   poelab <pressure|gibbs|poe|variational|hyperbolicity|reduce|report>
//          --config FILE [--out DIR] [--seed U64] [--threads N]
//
// Exit code 0: all checks passed; 1: an invariant check failed; 2: the
// configuration was rejected.

#include "poelab/experiment.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <exception>

using namespace poelab;

int main(int argc, char** argv) {
    CLI::App app{"pressure out of equilibrium laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    struct Cmd {
        const char* name;
        const char* help;
        std::vector<Stage> stages;
    };
    const std::vector<Cmd> cmds{
        {"pressure", "transfer spectra, Gibbs eigendata and constants",
         {Stage::Pressure}},
        {"gibbs", "exact Gibbs sampling calibration", {Stage::Gibbs}},
        {"poe", "partition sums, Fekete bound, structural checks",
         {Stage::Poe}},
        {"variational", "Markov lower bound and the sandwich",
         {Stage::Poe, Stage::Variational}},
        {"hyperbolicity", "moment identity, decay rates, tail bounds",
         {Stage::Gap, Stage::Hyperbolicity}},
        {"reduce", "two-sided to one-sided reduction residuals",
         {Stage::Reduce}},
        {"report", "full pipeline", all_stages()},
    };

    std::vector<CLI::App*> subs;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "experiment config (JSON)")
            ->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "64-bit seed override")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--threads", threads, "worker thread count");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed_set) cfg.seed = seed;
        if (threads > 0) cfg.threads = threads;

        for (std::size_t i = 0; i < cmds.size(); ++i) {
            if (subs[i]->parsed()) {
                int rc = run_experiment(cfg, cmds[i].stages);
                std::printf("%s: %s (artifacts in %s)\n", cmds[i].name,
                            rc == 0 ? "all checks passed"
                                    : "invariant violation",
                            cfg.out_dir.c_str());
                return rc;
            }
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
