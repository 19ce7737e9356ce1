#include "tpd/predictor.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace tpd {

SpatialDerivs spatial_derivs_numeric(std::span<const double> f, double h) {
    const std::size_t n = f.size();
    if (n < 3) throw InputError("spatial_derivs_numeric: need at least 3 stations");
    if (h <= 0) throw InputError("spatial_derivs_numeric: step must be positive");
    SpatialDerivs out;
    out.d1.resize(n);
    out.d2.resize(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        out.d1[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        out.d2[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / (h * h);
    }
    // one-sided second-order boundary stencils; the 4-point second-derivative
    // stencil needs n >= 4, below that the 3-point first-order one is used
    out.d1[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    out.d1[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    if (n >= 4) {
        out.d2[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);
        out.d2[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (h * h);
    } else {
        out.d2[0] = (f[0] - 2.0 * f[1] + f[2]) / (h * h);
        out.d2[n - 1] = (f[n - 1] - 2.0 * f[n - 2] + f[n - 3]) / (h * h);
    }
    return out;
}

namespace {

struct NormalizedRow {
    std::vector<double> o, q, v;
};

// Evaluates the learned fundamental diagrams on a normalized occupancy row.
NormalizedRow evaluate_fd_row(const DiscoveredPDE& pde, std::span<const double> o_norm,
                              double t_norm) {
    NormalizedRow row;
    const std::size_t m = o_norm.size();
    row.o.assign(o_norm.begin(), o_norm.end());
    row.q.resize(m);
    row.v.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double x_norm = pde.norm.x.apply(pde.grid.station_position(static_cast<int>(j)));
        const std::array<double, 3> in{o_norm[j], x_norm, t_norm};
        row.q[j] = pde.nets.f_q.forward<double>(in);
        row.v[j] = pde.nets.f_v.forward<double>(in);
    }
    return row;
}

}  // namespace

std::vector<double> euler_step(const DiscoveredPDE& pde, std::span<const double> occupancy_row,
                               int t_index, ClampStats* clamps) {
    const int m = pde.grid.m;
    if (static_cast<int>(occupancy_row.size()) != m)
        throw InputError("euler_step: row length does not match the grid");
    for (double o : occupancy_row)
        if (!std::isfinite(o)) throw NumericError("euler_step: non-finite occupancy in input row");

    const double t_norm = pde.norm.t.apply(pde.grid.step_time(t_index));
    std::vector<double> o_norm(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
        o_norm[static_cast<std::size_t>(j)] = pde.norm.o.apply(occupancy_row[static_cast<std::size_t>(j)]);

    const NormalizedRow row = evaluate_fd_row(pde, o_norm, t_norm);

    // spatial derivatives in normalized coordinates (step dx / x_scale)
    const double h = pde.grid.dx / pde.norm.x.scale;
    const SpatialDerivs d_o = spatial_derivs_numeric(row.o, h);
    const SpatialDerivs d_q = spatial_derivs_numeric(row.q, h);
    const SpatialDerivs d_v = spatial_derivs_numeric(row.v, h);

    // one grid step in normalized time
    const double dT = pde.grid.dt / pde.norm.t.scale;

    std::vector<double> theta(pde.lib.size());
    std::vector<double> next(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        const std::size_t js = static_cast<std::size_t>(j);
        const std::array<double, 9> vars{row.o[js], row.q[js],   row.v[js],
                                         d_o.d1[js], d_q.d1[js], d_v.d1[js],
                                         d_o.d2[js], d_q.d2[js], d_v.d2[js]};
        evaluate_theta(pde.lib, vars, theta);
        const double o_t = rhs(theta, pde.xi);
        const double o_next_norm = row.o[js] + dT * o_t;
        double o_next = pde.norm.o.invert(o_next_norm);
        if (!std::isfinite(o_next))
            throw NumericError("euler_step: non-finite update at station " + std::to_string(j));
        if (o_next < 0.0 || o_next > 100.0) {
            o_next = std::clamp(o_next, 0.0, 100.0);
            if (clamps) ++clamps->events;
        }
        next[js] = o_next;
    }
    return next;
}

Rollout rollout(const DiscoveredPDE& pde, std::span<const double> initial_row, int t_index,
                int horizon_steps) {
    if (horizon_steps < 1) throw InputError("rollout: horizon must be >= 1");
    Rollout out;
    std::vector<double> row(initial_row.begin(), initial_row.end());
    for (int k = 1; k <= horizon_steps; ++k) {
        row = euler_step(pde, row, t_index + k - 1, &out.clamps);
        out.occupancy.push_back(row);
        // flow through the learned flow-occupancy relation at the predicted time
        const double t_norm = pde.norm.t.apply(pde.grid.step_time(t_index + k));
        std::vector<double> o_norm(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) o_norm[j] = pde.norm.o.apply(row[j]);
        const NormalizedRow fd = evaluate_fd_row(pde, o_norm, t_norm);
        std::vector<double> flow(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) flow[j] = pde.norm.q.invert(fd.q[j]);
        out.flow.push_back(std::move(flow));
    }
    return out;
}

HorizonScore score(std::span<const double> predicted, std::span<const double> truth, int horizon) {
    if (predicted.size() != truth.size()) throw InputError("score: shape mismatch");
    if (predicted.empty()) throw InputError("score: no scoreable points");
    HorizonScore s;
    s.horizon = horizon;
    double sq = 0, ape = 0;
    long mape_count = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = predicted[i] - truth[i];
        sq += e * e;
        if (std::abs(truth[i]) >= kMapeFloor) {
            ape += std::abs(e) / std::abs(truth[i]);
            ++mape_count;
        }
    }
    s.scored = static_cast<long>(predicted.size());
    s.rmse = std::sqrt(sq / static_cast<double>(predicted.size()));
    s.mape = mape_count ? 100.0 * ape / static_cast<double>(mape_count) : 0.0;
    return s;
}

std::vector<double> reconstruct_occupancy_row(const DiscoveredPDE& pde, int t_index) {
    std::vector<double> row(static_cast<std::size_t>(pde.grid.m));
    const double t_norm = pde.norm.t.apply(pde.grid.step_time(t_index));
    for (int j = 0; j < pde.grid.m; ++j) {
        const double x_norm = pde.norm.x.apply(pde.grid.station_position(j));
        const std::array<double, 2> in{x_norm, t_norm};
        row[static_cast<std::size_t>(j)] = pde.norm.o.invert(pde.nets.f_o.forward<double>(in));
    }
    return row;
}

std::vector<double> reconstruct_flow_row(const DiscoveredPDE& pde, int t_index) {
    std::vector<double> row(static_cast<std::size_t>(pde.grid.m));
    const double t_norm = pde.norm.t.apply(pde.grid.step_time(t_index));
    for (int j = 0; j < pde.grid.m; ++j) {
        const double x_norm = pde.norm.x.apply(pde.grid.station_position(j));
        const double o_norm = pde.nets.f_o.forward<double>(std::array<double, 2>{x_norm, t_norm});
        const double q_norm =
            pde.nets.f_q.forward<double>(std::array<double, 3>{o_norm, x_norm, t_norm});
        row[static_cast<std::size_t>(j)] = pde.norm.q.invert(q_norm);
    }
    return row;
}

}  // namespace tpd
