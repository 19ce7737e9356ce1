#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tpd/parallel.hpp"
#include "tpd/trainer.hpp"

namespace tpd {

// Resolved training configuration; file keys mirror the hyperparameter table
// (see README).
struct RunConfig {
    Schedule schedule;
    LossWeights weights;
    TrainOptions options;
};
RunConfig load_run_config(const std::string& path);
RunConfig default_run_config();

struct CommonArgs {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out_dir;
    int threads = 0;  // 0 = library default
    par::Mode mode = par::default_mode();
};

struct GridArg {
    std::string spec;  // "x0,xm,dx,t0,tm,dt"
    SpatiotemporalGrid parse() const;
};

struct SynthArgs {
    CommonArgs common;
    std::string scenario_path;  // empty = default scenario
    std::string out_csv;
    std::string clean_out_csv;  // optional
};
int run_synth(const SynthArgs& args);

struct IngestArgs {
    CommonArgs common;
    std::string data_path;
    GridArg grid;
    std::optional<std::pair<int, int>> window_steps;
    double aggregate_fine_dt = 0;  // minutes; 0 = rows already on the grid cadence
};
int run_ingest(const IngestArgs& args);

struct DiscoverArgs {
    CommonArgs common;
    std::string data_path;
    GridArg grid;
    bool collocation_all = false;
};
int run_discover(const DiscoverArgs& args);

struct PredictArgs {
    CommonArgs common;
    std::string model_dir;
    std::string data_path;  // truth for scoring; standard sensor CSV
    int horizon = 5;
};
int run_predict(const PredictArgs& args);

struct BaselineArgs {
    CommonArgs common;
    std::string data_path;
    GridArg grid;
    int horizon = 5;
};
int run_baseline_ctm(const BaselineArgs& args);

struct CheckDerivativesArgs {
    std::uint64_t seed = 1;
    int triplets = 20;
};
int run_check_derivatives(const CheckDerivativesArgs& args);

struct ReportArgs {
    std::string artifact_dir;
};
int run_report(const ReportArgs& args);

}  // namespace tpd
