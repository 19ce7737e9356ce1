#pragma once

#include <span>
#include <vector>

#include "tpd/grid_data.hpp"
#include "tpd/network.hpp"
#include "tpd/term_library.hpp"

namespace tpd {

// Everything needed to roll the discovered dynamics forward on the physical
// grid: the library and sparse coefficients (normalized units), the trained
// fundamental-diagram networks, and the normalization that connects the two
// unit systems. The learned time unit is one grid step: a normalized-time
// derivative is converted with dT = dt / t_scale per step, so the update
// o(t+1) = o(t) + o_t(t) holds with o_t expressed per step.
struct DiscoveredPDE {
    TermLibrary lib;
    Coefficients xi;
    FieldTriplet nets;
    NormalizationParams norm;
    SpatiotemporalGrid grid;
};

struct SpatialDerivs {
    std::vector<double> d1, d2;
};

// Central differences at interior stations, one-sided second-order stencils
// at the boundaries. Requires at least 3 values.
SpatialDerivs spatial_derivs_numeric(std::span<const double> values, double step);

struct ClampStats {
    long events = 0;  // occupancy values clamped into [0, 100]
};

// One forward-Euler step of the discovered dynamics applied to a physical
// occupancy row (percent) at time index t_index.
std::vector<double> euler_step(const DiscoveredPDE& pde, std::span<const double> occupancy_row,
                               int t_index, ClampStats* clamps = nullptr);

struct Rollout {
    // rows [horizon][station] for horizons 1..k
    std::vector<std::vector<double>> occupancy;
    std::vector<std::vector<double>> flow;
    ClampStats clamps;
};

// Repeated Euler steps from an initial physical occupancy row at t_index;
// flow at each horizon through the learned flow-occupancy relation.
Rollout rollout(const DiscoveredPDE& pde, std::span<const double> initial_row, int t_index,
                int horizon_steps);

struct HorizonScore {
    int horizon = 0;  // steps ahead
    double rmse = 0;
    double mape = 0;  // percent, truths below the floor excluded
    long scored = 0;
};

struct PredictionReport {
    std::vector<HorizonScore> horizons;
    long clamp_events = 0;
};

inline constexpr double kMapeFloor = 1.0;  // vehicles per interval

// RMSE and MAPE between matched predicted/true series.
HorizonScore score(std::span<const double> predicted, std::span<const double> truth, int horizon);

// Occupancy reconstruction row at time index (physical percent), used as the
// rollout initial condition.
std::vector<double> reconstruct_occupancy_row(const DiscoveredPDE& pde, int t_index);
std::vector<double> reconstruct_flow_row(const DiscoveredPDE& pde, int t_index);

}  // namespace tpd
