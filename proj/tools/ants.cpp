// ants: command-line front end. See `ants --help` and `ants <command> --help`.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ants/app.hpp"
#include "ants/config.hpp"
#include "ants/errors.hpp"
#include "ants/kernels.hpp"

namespace fs = std::filesystem;
using namespace ants;

namespace {

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return app::kExitError;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Adaptive negative textual space OOD detection engine"};
    cli.require_subcommand(1);

    app::CommonOptions common;
    cli.add_option("--threads", common.threads, "Cap on kernel threads and generation fan-out")
        ->check(CLI::NonNegativeNumber);

    int code = app::kExitOk;

    // ingest
    auto* ingest = cli.add_subcommand("ingest", "Normalize a CSV or NSPC embedding file to NSPC");
    std::string ingest_in, ingest_out;
    std::size_t ingest_dim = 0;
    ingest->add_option("input", ingest_in, "CSV (id,x1,...,xD) or .nspc file")->required();
    ingest->add_option("-o,--output", ingest_out, "Output .nspc path")->required();
    ingest->add_option("--dim", ingest_dim, "Expected dimension");
    ingest->callback([&] {
        code = guarded([&] {
            const auto n = app::cmd_ingest(ingest_in, ingest_out,
                                           ingest_dim ? std::optional(ingest_dim) : std::nullopt);
            std::cout << n << " rows -> " << ingest_out << "\n";
            return app::kExitOk;
        });
    });

    // run
    auto* run = cli.add_subcommand("run", "Run the streaming pipeline described by a manifest");
    std::string manifest;
    run->add_option("--manifest", manifest, "Run manifest JSON")->required();
    run->add_option("--set", common.overrides, "Config override, e.g. score.temperature=0.02");
    run->callback([&] { code = app::cmd_run(manifest, common, std::cout, std::cerr); });

    // eval
    auto* eval = cli.add_subcommand("eval", "Recompute metrics from exported records");
    std::string records, truth;
    eval->add_option("--records", records, "records.csv from a run")->required();
    eval->add_option("--truth", truth, "Ground-truth CSV (image_id,tag[,dataset])")->required();
    eval->callback([&] {
        code = guarded([&] {
            std::cout << to_json(app::cmd_eval(records, truth)).dump(2) << "\n";
            return app::kExitOk;
        });
    });

    // sweep
    auto* sweep = cli.add_subcommand("sweep", "Run the pipeline once per parameter value");
    std::string axis;
    std::vector<double> values;
    std::string sweep_out;
    sweep->add_option("--manifest", manifest, "Run manifest JSON")->required();
    sweep->add_option("--axis", axis, "delta | lambda | eta | length")->required();
    sweep->add_option("--values", values, "Values (at least two)")->required()->delimiter(',');
    sweep->add_option("-o,--output", sweep_out, "CSV path (default <output_dir>/sweep_<axis>.csv)");
    sweep->add_option("--set", common.overrides, "Config override");
    sweep->callback([&] {
        code = guarded([&] {
            return app::cmd_sweep(manifest, app::sweep_axis_from_string(axis), values,
                                  sweep_out.empty() ? std::nullopt : std::optional<fs::path>(sweep_out),
                                  common, std::cout, std::cerr);
        });
    });

    // synth-world
    auto* sw = cli.add_subcommand("synth-world", "Write a synthetic world and a runnable manifest");
    std::string sw_dir, sw_config, sw_scenario = "far";
    std::uint64_t sw_seed = 42;
    app::SynthWorldOptions sw_opts;
    sw->add_option("-o,--output", sw_dir, "Output directory")->required();
    sw->add_option("--world-config", sw_config, "WorldConfig JSON overrides");
    sw->add_option("--scenario", sw_scenario, "far | near | mixed");
    sw->add_option("--seed", sw_seed, "World and stream seed");
    sw->add_option("--n-id", sw_opts.stream.n_id, "ID images");
    sw->add_option("--n-ood", sw_opts.stream.n_ood, "OOD images");
    sw->add_option("--batches", sw_opts.stream.batches, "Number of batches");
    sw->callback([&] {
        code = guarded([&] {
            if (!sw_config.empty()) {
                std::ifstream in(sw_config);
                if (!in) {
                    throw IoError("cannot open " + sw_config);
                }
                sw_opts.world = synth::world_config_from_json(nlohmann::json::parse(in));
            }
            sw_opts.world.seed = sw_seed;
            sw_opts.stream.seed = sw_seed;
            sw_opts.scenario = synth::scenario_from_string(sw_scenario);
            std::cout << app::cmd_synth_world(sw_dir, sw_opts).string() << "\n";
            return app::kExitOk;
        });
    });

    // scenario
    auto* scen = cli.add_subcommand(
        "scenario", "Baseline vs adaptive metrics on a synthetic scenario (JSON to stdout)");
    std::string scen_name = "far";
    std::uint64_t scen_seed = 42;
    scen->add_option("name", scen_name, "far | near | mixed");
    scen->add_option("--seed", scen_seed, "World and stream seed");
    scen->add_option("--set", common.overrides, "Config override");
    scen->callback([&] {
        code = guarded([&] {
            synth::WorldConfig wc;
            wc.seed = scen_seed;
            const auto world = synth::World::build(wc);
            auto cfg = synth::scenario_pipeline_config(world);
            for (const auto& o : common.overrides) {
                cfg = app::apply_override(cfg, o);
            }
            if (common.threads > 0) {
                kernels::set_thread_limit(static_cast<int>(common.threads));
            }
            synth::StreamSpec spec;
            spec.seed = scen_seed;
            const auto r = synth::run_scenario(world, synth::scenario_from_string(scen_name), cfg, spec);
            std::cout << nlohmann::json{{"scenario", scen_name},
                                        {"baseline", to_json(r.baseline)},
                                        {"ants", to_json(r.ants)},
                                        {"lambda", r.lambda_trajectory},
                                        {"degraded", r.degraded}}
                             .dump(2)
                      << "\n";
            return app::kExitOk;
        });
    });

    // fixtures
    auto* fx = cli.add_subcommand("fixtures", "Record or replay generation-client fixtures");
    fx->require_subcommand(1);
    auto* fx_rec = fx->add_subcommand("record", "Run with the manifest's client, recording fixtures");
    auto* fx_rep = fx->add_subcommand("replay", "Run against recorded fixtures only");
    for (auto* sub : {fx_rec, fx_rep}) {
        sub->add_option("--manifest", manifest, "Run manifest JSON")->required();
        sub->add_option("--set", common.overrides, "Config override");
    }
    fx_rec->callback([&] { code = app::cmd_fixtures(manifest, true, common, std::cout, std::cerr); });
    fx_rep->callback([&] { code = app::cmd_fixtures(manifest, false, common, std::cout, std::cerr); });

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : app::kExitError;
    }
    return code;
}
