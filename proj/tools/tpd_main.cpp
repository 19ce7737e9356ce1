#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "tpd/errors.hpp"
#include "tpd/runner.hpp"

namespace {

// exit-code contract: 0 success, 1 numerical failure, 2 input error
int guarded(int (*fn)(void*), void* args) {
    try {
        return fn(args);
    } catch (const tpd::InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const tpd::NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

template <class Args, int (*Fn)(const Args&)>
int guard(const Args& args) {
    return guarded([](void* a) { return Fn(*static_cast<const Args*>(a)); },
                   const_cast<Args*>(&args));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"discovery and prediction of traffic dynamics PDEs from sensor data"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags are accepted after the subcommand too

    tpd::CommonArgs common;
    std::uint64_t seed_flag = 0;
    bool seed_given = false;
    app.add_option("--seed", seed_flag, "override the run seed")
        ->each([&](const std::string&) { seed_given = true; });
    app.add_option("--config", common.config_path, "training configuration file");
    app.add_option("--out", common.out_dir, "output directory");
    app.add_option("--threads", common.threads, "worker thread count (0 = all cores)");
    bool serial = false;
    app.add_flag("--serial", serial, "use the serial reference kernels");

    auto finish_common = [&]() {
        if (seed_given) common.seed = seed_flag;
        if (serial) common.mode = tpd::par::Mode::Serial;
        tpd::par::set_threads(common.threads);
    };

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic sensor dataset");
    tpd::SynthArgs synth_args;
    synth->add_option("--scenario", synth_args.scenario_path, "scenario file (default scenario if omitted)");
    synth->add_option("--out-csv", synth_args.out_csv, "output sensor CSV")->required();
    synth->add_option("--clean-out", synth_args.clean_out_csv, "also write the noiseless full-coverage CSV");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate, aggregate, and window a sensor CSV");
    tpd::IngestArgs ingest_args;
    ingest->add_option("--data", ingest_args.data_path, "sensor CSV")->required();
    ingest->add_option("--grid", ingest_args.grid.spec, "x0,xm,dx,t0,tm,dt")->required();
    std::vector<int> window_steps;
    ingest->add_option("--window", window_steps, "keep time steps [first,last] (inclusive)")
        ->expected(2);
    ingest->add_option("--fine-dt", ingest_args.aggregate_fine_dt,
                       "aggregate raw rows recorded at this cadence (minutes)");

    // discover
    auto* discover = app.add_subcommand("discover", "fit the fields and identify the dynamics");
    tpd::DiscoverArgs discover_args;
    discover->add_option("--data", discover_args.data_path, "sensor CSV")->required();
    discover->add_option("--grid", discover_args.grid.spec, "x0,xm,dx,t0,tm,dt")->required();
    discover->add_flag("--collocation-all", discover_args.collocation_all,
                       "evaluate the residual on every grid point instead of the observed set");

    // predict
    auto* predict = app.add_subcommand("predict", "multi-step flow prediction from a trained model");
    tpd::PredictArgs predict_args;
    predict->add_option("--model", predict_args.model_dir, "discover output directory")->required();
    predict->add_option("--data", predict_args.data_path, "sensor CSV with the scoring truth")->required();
    predict->add_option("--horizon", predict_args.horizon, "steps ahead (default 5)");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "reference predictors");
    auto* ctm = baseline->add_subcommand("ctm", "calibrated cell-transmission-model baseline");
    tpd::BaselineArgs baseline_args;
    ctm->add_option("--data", baseline_args.data_path, "sensor CSV")->required();
    ctm->add_option("--grid", baseline_args.grid.spec, "x0,xm,dx,t0,tm,dt")->required();
    ctm->add_option("--horizon", baseline_args.horizon, "steps ahead (default 5)");

    // check-derivatives
    auto* checkd = app.add_subcommand("check-derivatives", "derivative oracle agreement table");
    tpd::CheckDerivativesArgs check_args;
    checkd->add_option("--seed", check_args.seed, "seed for the random networks");
    checkd->add_option("--triplets", check_args.triplets, "number of random network triplets");

    // report
    auto* report = app.add_subcommand("report", "render text + SVG summary of an artifact directory");
    tpd::ReportArgs report_args;
    report->add_option("dir", report_args.artifact_dir, "artifact directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // malformed invocations are input errors
    }
    finish_common();

    if (synth->parsed()) {
        synth_args.common = common;
        return guard<tpd::SynthArgs, tpd::run_synth>(synth_args);
    }
    if (ingest->parsed()) {
        ingest_args.common = common;
        if (!window_steps.empty())
            ingest_args.window_steps = std::make_pair(window_steps[0], window_steps[1]);
        return guard<tpd::IngestArgs, tpd::run_ingest>(ingest_args);
    }
    if (discover->parsed()) {
        discover_args.common = common;
        return guard<tpd::DiscoverArgs, tpd::run_discover>(discover_args);
    }
    if (predict->parsed()) {
        predict_args.common = common;
        return guard<tpd::PredictArgs, tpd::run_predict>(predict_args);
    }
    if (baseline->parsed()) {
        baseline_args.common = common;
        return guard<tpd::BaselineArgs, tpd::run_baseline_ctm>(baseline_args);
    }
    if (checkd->parsed()) return guard<tpd::CheckDerivativesArgs, tpd::run_check_derivatives>(check_args);
    if (report->parsed()) return guard<tpd::ReportArgs, tpd::run_report>(report_args);
    return 2;
}
