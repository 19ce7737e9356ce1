#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tpd/engine.hpp"
#include "tpd/grid_data.hpp"
#include "tpd/term_library.hpp"

namespace tpd {

struct LossWeights {
    double eta_o = 2.0;
    double eta_q = 0.04;
    double eta_v = 0.6;
    double eta_pde = 10.0;
    double eta_spar = 0.1;
};

// Training protocol knobs; defaults follow the reference hyperparameter set.
struct Schedule {
    int burn_in_epochs = 1000;
    int main_epochs = 2500;
    int refine_epochs = 1500;
    double threshold = 0.0005;
    int threshold_frequency = 400;  // main-phase epochs between thresholding events
    double learning_rate = 0.001;
    double lr_shrink = 0.9;
    int lr_step = 500;  // epochs between learning-rate decays (global count)
    std::uint64_t seed = 1;

    int total_epochs() const { return burn_in_epochs + main_epochs + refine_epochs; }
    void validate() const;
};

enum class Phase { BurnIn, Main, Refine };
const char* phase_name(Phase p);

struct EpochRecord {
    int epoch = 0;  // 1-based, global
    Phase phase = Phase::BurnIn;
    double l_o = 0, l_q = 0, l_v = 0, l_pde = 0, l_spar = 0;
    double total = 0;  // weighted combination actually minimized this epoch
    int active_terms = 0;
    double lr = 0;
    bool threshold_event = false;
};

struct TrainingTrace {
    std::vector<EpochRecord> records;
    std::vector<std::string> warnings;
};

void write_trace_csv(std::ostream& out, const TrainingTrace& trace);
TrainingTrace read_trace_csv(std::istream& in);

// Raised when a loss or gradient turns non-finite; carries the trace up to
// the failing epoch.
struct TrainingFailure : NumericError {
    TrainingFailure(const std::string& what, TrainingTrace partial)
        : NumericError(what), trace(std::move(partial)) {}
    TrainingTrace trace;
};

enum class CollocationMode { Observed, AllGridPoints };

// Normalized view of a dataset, ready for optimization.
struct TrainingSet {
    std::vector<GridPoint> obs_points;               // normalized (x,t) per observation
    std::vector<std::array<double, 3>> obs_values;   // normalized o, q, v targets
    std::vector<GridPoint> collocation;              // PDE residual points
    NormalizationParams norm;
    SpatiotemporalGrid grid;
    std::vector<std::string> warnings;
};

TrainingSet build_training_set(const SensorDataset& physical, CollocationMode mode);

struct DataLosses {
    double l_o = 0, l_q = 0, l_v = 0;
};

// Mean squared reconstruction error over the observed points only.
DataLosses data_loss(const FieldTriplet& nets, const TrainingSet& ts,
                     par::Mode mode = par::default_mode());

// Mean over collocation points of (o_t - Theta^T xi)^2.
double pde_loss(const FieldTriplet& nets, const TermLibrary& lib, const Coefficients& xi,
                std::span<const GridPoint> collocation, par::Mode mode = par::default_mode());

// L1 norm of the active coefficients.
double sparsity_loss(const Coefficients& xi);

// Zeroes and permanently deactivates entries with |value| < tau.
Coefficients threshold_xi(const Coefficients& xi, double tau);

struct TrainOptions {
    CollocationMode collocation = CollocationMode::Observed;
    par::Mode mode = par::default_mode();
    std::vector<int> widths_o = {2, 50, 100, 100, 50, 1};
    std::vector<int> widths_q = {3, 50, 100, 100, 50, 1};
    std::vector<int> widths_v = {3, 50, 100, 100, 50, 1};
    int r_num = 3;
    int r_den = 2;
    int poly_order = 2;   // N
    int deriv_order = 2;  // M
};

struct TrainResult {
    FieldTriplet nets;
    Coefficients xi;
    TrainingTrace trace;
    TermLibrary lib;
    NormalizationParams norm;
    SpatiotemporalGrid grid;
};

// Three-phase minimization: burn-in (data + PDE), main (data + PDE +
// sparsity, with sequential thresholding), refinement (data + PDE with the
// active mask frozen). Deterministic for a fixed seed.
TrainResult train(const SensorDataset& dataset, const Schedule& schedule,
                  const LossWeights& weights = {}, const TrainOptions& options = {});

}  // namespace tpd
