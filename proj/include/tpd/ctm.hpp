#pragma once

#include <span>
#include <vector>

#include "tpd/grid_data.hpp"
#include "tpd/predictor.hpp"
#include "tpd/trainer.hpp"

namespace tpd {

// Triangular-fundamental-diagram cell transmission model.
struct CTMConfig {
    double cell_length = 2.0;       // miles
    double free_flow_speed = 30.0;  // mph
    double backward_wave = 8.0;     // mph
    double capacity = 500.0;        // vehicles per dt interval
    double jam_density = 240.0;     // vehicles per mile per cell
    double dt_minutes = 3.0;

    void validate() const;  // positivity and the free-flow CFL condition
    double critical_density() const;
};

struct CTMBoundary {
    double demand = 0;  // vehicles per interval offered upstream
    double supply = 1e18;  // vehicles per interval accepted downstream
};

// Interface flows y[0..n]: y[i] crosses from cell i-1 into cell i, with
// y[0]/y[n] the boundary flows. Each is min(sending, receiving) with demand
// and supply at the ends.
std::vector<double> ctm_interface_flows(const CTMConfig& config, std::span<const double> densities,
                                        const CTMBoundary& boundary);

// One step of densities (vehicles/mile) on a line of cells.
std::vector<double> ctm_step(const CTMConfig& config, std::span<const double> densities,
                             const CTMBoundary& boundary);

double ctm_sending(const CTMConfig& config, double density);
double ctm_receiving(const CTMConfig& config, double density);

// Periodic variant used for the conservation checks.
std::vector<double> ctm_step_ring(const CTMConfig& config, std::span<const double> densities);

// Data-driven calibration: capacity from the 95th-percentile flow, free-flow
// speed from the 85th-percentile speed, critical density from their ratio,
// jam density from a congested-branch fit when congested samples exist and
// from the documented 4x-critical fallback otherwise. The occupancy/density
// conversion factor comes from the q = k v identity on the observations.
struct CTMCalibration {
    CTMConfig config;
    double occupancy_per_density = 0;  // occupancy percent per vehicle/mile
    bool congested_fit = false;
};
CTMCalibration calibrate_ctm(const SensorDataset& ds);

// Rolls the calibrated CTM forward from the observed occupancy rows (missing
// stations filled by linear interpolation) and scores predicted flows
// against the observed ones, mirroring the discovered-PDE protocol.
PredictionReport ctm_predict(const SensorDataset& ds, const SensorDataset& truth,
                             int max_horizon);

// The discovery pipeline restricted to the first-order library (M = 1).
TrainResult first_order_discovery(const SensorDataset& dataset, const Schedule& schedule,
                                  const LossWeights& weights = {}, TrainOptions options = {});

}  // namespace tpd
