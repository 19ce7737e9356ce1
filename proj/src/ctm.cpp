#include "tpd/ctm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace tpd {

void CTMConfig::validate() const {
    if (cell_length <= 0 || free_flow_speed <= 0 || backward_wave <= 0 || capacity <= 0 ||
        jam_density <= 0 || dt_minutes <= 0)
        throw InputError("ctm: all parameters must be positive");
    const double travel = free_flow_speed * dt_minutes / 60.0;
    if (travel > cell_length + 1e-12) {
        std::ostringstream msg;
        msg << "ctm: free-flow CFL violated (vf*dt = " << travel << " miles > cell length "
            << cell_length << ")";
        throw InputError(msg.str());
    }
}

double CTMConfig::critical_density() const {
    return capacity / (free_flow_speed * dt_minutes / 60.0);
}

double ctm_sending(const CTMConfig& c, double k) {
    return std::min(c.free_flow_speed * (c.dt_minutes / 60.0) * k, c.capacity);
}

double ctm_receiving(const CTMConfig& c, double k) {
    return std::min(c.backward_wave * (c.dt_minutes / 60.0) * (c.jam_density - k), c.capacity);
}

namespace {

inline double sending(const CTMConfig& c, double k) { return ctm_sending(c, k); }
inline double receiving(const CTMConfig& c, double k) { return ctm_receiving(c, k); }

}  // namespace

std::vector<double> ctm_interface_flows(const CTMConfig& c, std::span<const double> k,
                                        const CTMBoundary& boundary) {
    c.validate();
    const std::size_t n = k.size();
    if (n == 0) return {};
    std::vector<double> y(n + 1);
    y[0] = std::min(std::max(0.0, boundary.demand), receiving(c, k[0]));
    for (std::size_t i = 1; i < n; ++i)
        y[i] = std::max(0.0, std::min(sending(c, k[i - 1]), receiving(c, k[i])));
    y[n] = std::max(0.0, std::min(sending(c, k[n - 1]), boundary.supply));
    return y;
}

std::vector<double> ctm_step(const CTMConfig& c, std::span<const double> k,
                             const CTMBoundary& boundary) {
    const std::vector<double> y = ctm_interface_flows(c, k, boundary);
    std::vector<double> next(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) next[i] = k[i] + (y[i] - y[i + 1]) / c.cell_length;
    return next;
}

std::vector<double> ctm_step_ring(const CTMConfig& c, std::span<const double> k) {
    c.validate();
    const std::size_t n = k.size();
    if (n == 0) return {};
    std::vector<double> y(n);  // y[i]: flow out of cell i into cell (i+1) mod n
    for (std::size_t i = 0; i < n; ++i)
        y[i] = std::max(0.0, std::min(sending(c, k[i]), receiving(c, k[(i + 1) % n])));
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i)
        next[i] = k[i] + (y[(i + n - 1) % n] - y[i]) / c.cell_length;
    return next;
}

CTMCalibration calibrate_ctm(const SensorDataset& ds) {
    if (ds.observations.empty()) throw InputError("calibrate_ctm: empty dataset");
    std::vector<double> flows, speeds, g_samples;
    flows.reserve(ds.observations.size());
    speeds.reserve(ds.observations.size());
    for (const auto& obs : ds.observations) {
        flows.push_back(obs.flow);
        speeds.push_back(obs.speed);
        // q [veh/interval] = k [veh/mile] * v [mph] * dt [h]  =>  k = q/(v dt)
        if (obs.speed > 1.0 && obs.flow > 0 && obs.occupancy > 0) {
            const double k = obs.flow / (obs.speed * ds.grid.dt / 60.0);
            g_samples.push_back(obs.occupancy / k);
        }
    }
    auto percentile = [](std::vector<double> v, double p) {
        std::sort(v.begin(), v.end());
        const double idx = p * static_cast<double>(v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    if (g_samples.empty()) throw InputError("calibrate_ctm: no usable flow/speed samples");

    CTMCalibration cal;
    cal.occupancy_per_density = percentile(g_samples, 0.5);
    CTMConfig& c = cal.config;
    c.cell_length = ds.grid.dx;
    c.dt_minutes = ds.grid.dt;
    c.capacity = percentile(flows, 0.95);
    c.free_flow_speed = percentile(speeds, 0.85);
    const double kc = c.capacity / (c.free_flow_speed * c.dt_minutes / 60.0);

    // congested branch: samples clearly above critical density
    std::vector<std::pair<double, double>> congested;  // (k, q)
    for (const auto& obs : ds.observations) {
        if (obs.speed <= 1.0) continue;
        const double k = obs.flow / (obs.speed * ds.grid.dt / 60.0);
        if (k > 1.2 * kc) congested.emplace_back(k, obs.flow);
    }
    if (congested.size() >= 30) {
        // least squares q = w_dt * (kj - k): fit slope and intercept of q on k
        double sk = 0, sq = 0, skk = 0, skq = 0;
        for (auto [k, q] : congested) {
            sk += k;
            sq += q;
            skk += k * k;
            skq += k * q;
        }
        const double nn = static_cast<double>(congested.size());
        const double slope = (nn * skq - sk * sq) / (nn * skk - sk * sk);
        const double intercept = (sq - slope * sk) / nn;
        if (slope < 0 && intercept > 0) {
            cal.congested_fit = true;
            const double w_dt = -slope;                  // veh/interval per veh/mile
            c.backward_wave = w_dt / (c.dt_minutes / 60.0);
            c.jam_density = intercept / w_dt;
        }
    }
    if (!cal.congested_fit) {
        // documented fallback for data without a congested branch
        c.jam_density = 4.0 * kc;
        c.backward_wave = c.capacity / ((c.jam_density - kc) * (c.dt_minutes / 60.0));
    }
    c.validate();
    return cal;
}

namespace {

// occupancy rows on the full grid, missing stations linearly interpolated
std::vector<std::vector<double>> dense_occupancy_rows(const SensorDataset& ds) {
    const auto& g = ds.grid;
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(g.n),
                                          std::vector<double>(static_cast<std::size_t>(g.m),
                                                              std::nan("")));
    for (const auto& obs : ds.observations)
        rows[static_cast<std::size_t>(obs.time_index)][static_cast<std::size_t>(obs.station)] =
            obs.occupancy;
    for (auto& row : rows) {
        // interpolate interior gaps, extend flat at the ends
        int prev = -1;
        for (int j = 0; j < g.m; ++j) {
            if (std::isnan(row[static_cast<std::size_t>(j)])) continue;
            if (prev < 0) {
                for (int i = 0; i < j; ++i) row[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(j)];
            } else {
                for (int i = prev + 1; i < j; ++i) {
                    const double f = static_cast<double>(i - prev) / (j - prev);
                    row[static_cast<std::size_t>(i)] =
                        (1 - f) * row[static_cast<std::size_t>(prev)] + f * row[static_cast<std::size_t>(j)];
                }
            }
            prev = j;
        }
        if (prev < 0) throw InputError("ctm_predict: a time step has no observations");
        for (int i = prev + 1; i < g.m; ++i)
            row[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(prev)];
    }
    return rows;
}

}  // namespace

PredictionReport ctm_predict(const SensorDataset& ds, const SensorDataset& truth,
                             int max_horizon) {
    if (max_horizon < 1) throw InputError("ctm_predict: horizon must be >= 1");
    const CTMCalibration cal = calibrate_ctm(ds);
    const CTMConfig& c = cal.config;
    const auto& g = ds.grid;
    const auto occ_rows = dense_occupancy_rows(ds);

    // truth lookup: flow at (time, station)
    std::map<std::pair<int, int>, double> true_flow;
    for (const auto& obs : truth.observations)
        true_flow[{obs.time_index, obs.station}] = obs.flow;

    std::vector<std::vector<double>> pred(static_cast<std::size_t>(max_horizon));
    std::vector<std::vector<double>> actual(static_cast<std::size_t>(max_horizon));

    PredictionReport report;
    for (int t = 0; t + max_horizon < g.n; ++t) {
        // density state from the observed occupancy row
        std::vector<double> k(static_cast<std::size_t>(g.m));
        for (int j = 0; j < g.m; ++j)
            k[static_cast<std::size_t>(j)] =
                occ_rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] /
                cal.occupancy_per_density;
        for (int h = 1; h <= max_horizon; ++h) {
            // open boundaries: repeat the upstream demand seen at the edge cell
            CTMBoundary boundary;
            boundary.demand = sending(c, k[0]);
            boundary.supply = c.capacity;
            k = ctm_step(c, k, boundary);
            for (int j = 0; j < g.m; ++j) {
                const auto it = true_flow.find({t + h, j});
                if (it == true_flow.end()) continue;
                // equilibrium flow of the predicted density
                const double q_pred =
                    std::max(0.0, std::min(sending(c, k[static_cast<std::size_t>(j)]),
                                           receiving(c, k[static_cast<std::size_t>(j)])));
                pred[static_cast<std::size_t>(h - 1)].push_back(q_pred);
                actual[static_cast<std::size_t>(h - 1)].push_back(it->second);
            }
        }
    }
    for (int h = 1; h <= max_horizon; ++h)
        report.horizons.push_back(score(pred[static_cast<std::size_t>(h - 1)],
                                        actual[static_cast<std::size_t>(h - 1)], h));
    return report;
}

TrainResult first_order_discovery(const SensorDataset& dataset, const Schedule& schedule,
                                  const LossWeights& weights, TrainOptions options) {
    options.deriv_order = 1;
    return train(dataset, schedule, weights, options);
}

}  // namespace tpd
