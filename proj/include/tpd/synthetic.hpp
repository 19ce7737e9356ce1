#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpd/grid_data.hpp"
#include "tpd/term_library.hpp"

namespace tpd {

// Ground-truth dynamics used to generate validation data. Coefficients are in
// normalized units (x,t on [-1,1]); the simulator converts to physical units
// from the scenario grid, and the linear terms are invariant under the field
// z-scoring, so recovered coefficients are directly comparable.
struct PlantedPDE {
    double advection = 0;  // o_t += -advection * o_x
    double diffusion = 0;  // o_t += diffusion * o_xx
    std::string description;

    static PlantedPDE advection_diffusion(double advection, double diffusion);

    // The library-expressed truth; throws if a planted term is absent.
    Coefficients to_coefficients(const TermLibrary& lib) const;
};

struct GaussianBump {
    double amplitude = 0;  // occupancy percent
    double center = 0;     // miles
    double width = 1;      // miles (standard deviation)
};

struct SyntheticScenario {
    SpatiotemporalGrid grid;
    double ic_base = 6.0;  // background occupancy, percent
    std::vector<GaussianBump> ic_bumps;
    double free_flow_speed = 30.0;  // mph, Greenshields v = vf (1 - o/oj)
    double jam_occupancy = 60.0;    // percent
    double flow_scale = 1.5;        // q = flow_scale * o * v
    double noise_frac = 0.01;       // sigma per field = noise_frac * std(field)
    double missing_fraction = 0.0;  // fraction of stations removed
    std::uint64_t seed = 1;

    // 17 stations over 32 miles, 06:00-18:00 at 3 minutes, 7 of 17 stations
    // missing, 1% relative noise.
    static SyntheticScenario defaults(std::uint64_t seed = 1);
};

struct CleanFields {
    SpatiotemporalGrid grid;
    // row-major [time][station]
    std::vector<double> o, q, v;

    double& at(std::vector<double>& f, int i, int j) { return f[static_cast<std::size_t>(i) * grid.m + j]; }
    double value(const std::vector<double>& f, int i, int j) const {
        return f[static_cast<std::size_t>(i) * grid.m + j];
    }
};

// Integrates the planted PDE on a 10x-refined periodic internal grid (upwind
// advection, central diffusion) and subsamples onto the sensor grid. Speed
// and flow follow the scenario's fundamental diagram. Raises NumericError
// with the computed CFL numbers if the fine grid is unstable.
CleanFields simulate(const PlantedPDE& pde, const SyntheticScenario& scenario);

struct ObservationNoise {
    double sigma_o = 0, sigma_q = 0, sigma_v = 0;
};

// Applies the observation process: independent zero-mean Gaussian noise per
// field and seeded station removal. Deterministic for a fixed seed.
SensorDataset observe(const CleanFields& clean, const SyntheticScenario& scenario,
                      ObservationNoise* applied = nullptr);

// Scenario file: the observation scenario plus the planted dynamics, in the
// same key=value format as the training config.
struct ScenarioSpec {
    SyntheticScenario scenario;
    PlantedPDE pde = PlantedPDE::advection_diffusion(0.5, 0.05);

    static ScenarioSpec defaults(std::uint64_t seed = 1);
};
ScenarioSpec load_scenario(const std::string& path);
void save_scenario(const std::string& path, const ScenarioSpec& spec);

}  // namespace tpd
