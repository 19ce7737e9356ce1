#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tpd/errors.hpp"

namespace tpd {

// Evenly spaced sensor grid: m stations at spacing dx (miles), n time steps
// at spacing dt (minutes since midnight).
struct SpatiotemporalGrid {
    double x0 = 0, xm = 0, dx = 1;
    double t0 = 0, tm = 0, dt = 1;
    int m = 0;
    int n = 0;

    static SpatiotemporalGrid make(double x0, double xm, double dx, double t0, double tm,
                                   double dt);

    double station_position(int j) const { return x0 + dx * j; }
    double step_time(int i) const { return t0 + dt * i; }
    std::size_t point_count() const { return static_cast<std::size_t>(m) * n; }
};

struct SensorObservation {
    int station = 0;     // [0, m)
    int time_index = 0;  // [0, n)
    double occupancy = 0;  // percent, 0..100
    double flow = 0;       // vehicles per dt interval
    double speed = 0;      // mph
};

struct SensorDataset {
    SpatiotemporalGrid grid;
    std::vector<SensorObservation> observations;
    std::set<int> missing_stations;

    std::size_t observed_count() const { return observations.size(); }
    int present_station_count() const { return grid.m - static_cast<int>(missing_stations.size()); }
};

// Per-field affine transform; normalized = (value - shift) / scale.
struct Affine {
    double shift = 0;
    double scale = 1;
    double apply(double value) const { return (value - shift) / scale; }
    double invert(double normalized) const { return normalized * scale + shift; }
};

struct NormalizationParams {
    Affine x, t, o, q, v;
};

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

// Expected header of the sensor CSV (missing numeric cells are encoded as
// empty strings; such rows contribute no observation and the slot stays
// unobserved).
extern const char* kSensorCsvHeader;

// Reads the documented CSV schema, snapping each row to the nearest grid
// slot. Stations with no accepted rows are recorded as missing. Malformed
// rows, rows outside the grid, and duplicate (station,time) pairs raise
// InputError naming the offending row(s).
SensorDataset load_sensor_csv(const std::string& path, const SpatiotemporalGrid& grid);
SensorDataset parse_sensor_csv(std::istream& in, const SpatiotemporalGrid& grid,
                               const std::string& origin);

void write_sensor_csv(const std::string& path, const SensorDataset& ds);

// One raw detector sample at the native (fine) cadence.
struct FineSample {
    double t = 0;  // minutes since midnight
    double occupancy = 0, flow = 0, speed = 0;
};

struct AggregatedSample {
    double window_start = 0;
    double occupancy = 0, flow = 0, speed = 0;
};

// Aggregates fine-cadence samples into target_dt windows anchored at
// window_start: flow summed, occupancy averaged, speed flow-weighted when the
// window carries flow (plain mean otherwise). Windows with no samples are
// std::nullopt, never zero-filled.
std::vector<std::optional<AggregatedSample>> aggregate(std::span<const FineSample> raw,
                                                       double fine_dt, double target_dt,
                                                       double window_start, int window_count);

// Keeps time indices in [t_start, t_end] (inclusive) and rebases the grid.
SensorDataset window(const SensorDataset& ds, int t_start, int t_end);

struct NormalizedDataset {
    SensorDataset data;  // observation values in normalized units
    NormalizationParams params;
    std::vector<std::string> warnings;
};

// Maps x and t onto [-1,1] from the grid bounds and z-scores each field over
// the observed points. A constant field gets scale 1 and a warning.
NormalizedDataset normalize(const SensorDataset& ds);

}  // namespace tpd
