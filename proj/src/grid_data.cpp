#include "tpd/grid_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace tpd {

const char* kSensorCsvHeader =
    "station_id,milepost_miles,timestamp_iso8601,occupancy_pct,flow_veh,speed_mph";

SpatiotemporalGrid SpatiotemporalGrid::make(double x0, double xm, double dx, double t0, double tm,
                                            double dt) {
    if (dx <= 0 || dt <= 0) throw InputError("grid: dx and dt must be positive");
    if (xm < x0 || tm < t0) throw InputError("grid: upper bounds below lower bounds");
    SpatiotemporalGrid g{x0, xm, dx, t0, tm, dt, 0, 0};
    g.m = static_cast<int>(std::lround((xm - x0) / dx)) + 1;
    g.n = static_cast<int>(std::lround((tm - t0) / dt)) + 1;
    if (std::abs(x0 + (g.m - 1) * dx - xm) > 1e-9 * std::max(1.0, std::abs(xm)))
        throw InputError("grid: dx does not evenly divide [x0, xm]");
    if (std::abs(t0 + (g.n - 1) * dt - tm) > 1e-9 * std::max(1.0, std::abs(tm)))
        throw InputError("grid: dt does not evenly divide [t0, tm]");
    return g;
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell += ch;
        }
    }
    cells.push_back(cell);
    return cells;
}

double parse_number(const std::string& cell, std::size_t row, const char* what) {
    std::size_t pos = 0;
    double value = 0;
    try {
        value = std::stod(cell, &pos);
    } catch (const std::exception&) {
        throw InputError("row " + std::to_string(row) + ": malformed " + what + " '" + cell + "'");
    }
    if (pos != cell.size())
        throw InputError("row " + std::to_string(row) + ": malformed " + what + " '" + cell + "'");
    return value;
}

// ISO 8601 timestamp (date optional) to minutes since midnight.
double parse_timestamp_minutes(const std::string& cell, std::size_t row) {
    std::string hms = cell;
    if (const auto tpos = cell.find('T'); tpos != std::string::npos) hms = cell.substr(tpos + 1);
    int h = 0, m = 0;
    double s = 0;
    if (std::sscanf(hms.c_str(), "%d:%d:%lf", &h, &m, &s) < 2 || h < 0 || h > 23 || m < 0 ||
        m > 59 || s < 0 || s >= 60)
        throw InputError("row " + std::to_string(row) + ": malformed timestamp '" + cell + "'");
    return h * 60.0 + m + s / 60.0;
}

}  // namespace

SensorDataset parse_sensor_csv(std::istream& in, const SpatiotemporalGrid& grid,
                               const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) {
        // an empty file is a dataset with zero observations
        SensorDataset ds;
        ds.grid = grid;
        for (int j = 0; j < grid.m; ++j) ds.missing_stations.insert(j);
        return ds;
    }
    {
        auto cells = split_csv_row(line);
        if (cells.size() != 6 || cells[1] != "milepost_miles")
            throw InputError(origin + ": unexpected CSV header '" + line + "'");
    }

    SensorDataset ds;
    ds.grid = grid;
    std::map<std::pair<int, int>, std::size_t> seen;  // (station,time) -> row number
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_row(line);
        if (cells.size() != 6)
            throw InputError("row " + std::to_string(row) + ": expected 6 columns, got " +
                             std::to_string(cells.size()));
        const double milepost = parse_number(cells[1], row, "milepost");
        if (milepost < grid.x0 || milepost > grid.xm)
            throw InputError("row " + std::to_string(row) + ": station milepost " + cells[1] +
                             " outside grid [" + std::to_string(grid.x0) + ", " +
                             std::to_string(grid.xm) + "]");
        const double minutes = parse_timestamp_minutes(cells[2], row);
        if (minutes < grid.t0 - grid.dt / 2 || minutes > grid.tm + grid.dt / 2)
            throw InputError("row " + std::to_string(row) + ": timestamp outside grid time range");

        const int station = static_cast<int>(std::lround((milepost - grid.x0) / grid.dx));
        const int tindex =
            std::clamp(static_cast<int>(std::lround((minutes - grid.t0) / grid.dt)), 0, grid.n - 1);

        // any empty measurement cell leaves the slot unobserved (it joins U)
        if (cells[3].empty() || cells[4].empty() || cells[5].empty()) continue;

        SensorObservation obs;
        obs.station = station;
        obs.time_index = tindex;
        obs.occupancy = parse_number(cells[3], row, "occupancy");
        obs.flow = parse_number(cells[4], row, "flow");
        obs.speed = parse_number(cells[5], row, "speed");
        if (obs.occupancy < 0 || obs.occupancy > 100)
            throw InputError("row " + std::to_string(row) + ": occupancy out of [0,100]");
        if (obs.flow < 0 || obs.speed < 0)
            throw InputError("row " + std::to_string(row) + ": negative flow or speed");

        auto [it, inserted] = seen.emplace(std::make_pair(station, tindex), row);
        if (!inserted)
            throw InputError("duplicate (station,time) measurement: rows " +
                             std::to_string(it->second) + " and " + std::to_string(row));
        ds.observations.push_back(obs);
    }

    std::vector<char> has_row(static_cast<std::size_t>(grid.m), 0);
    for (const auto& obs : ds.observations) has_row[static_cast<std::size_t>(obs.station)] = 1;
    for (int j = 0; j < grid.m; ++j)
        if (!has_row[static_cast<std::size_t>(j)]) ds.missing_stations.insert(j);
    return ds;
}

SensorDataset load_sensor_csv(const std::string& path, const SpatiotemporalGrid& grid) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open sensor file '" + path + "'");
    return parse_sensor_csv(in, grid, path);
}

void write_sensor_csv(const std::string& path, const SensorDataset& ds) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write sensor file '" + path + "'");
    out << kSensorCsvHeader << "\n";
    char buf[256];
    for (const auto& obs : ds.observations) {
        const double minutes = ds.grid.step_time(obs.time_index);
        const int h = static_cast<int>(minutes) / 60;
        const int m = static_cast<int>(minutes) % 60;
        const double s = (minutes - static_cast<int>(minutes)) * 60.0;
        std::snprintf(buf, sizeof buf, "s%03d,%.6g,2023-08-15T%02d:%02d:%06.3f,%.10g,%.10g,%.10g\n",
                      obs.station, ds.grid.station_position(obs.station), h, m, s, obs.occupancy,
                      obs.flow, obs.speed);
        out << buf;
    }
}

std::vector<std::optional<AggregatedSample>> aggregate(std::span<const FineSample> raw,
                                                       double fine_dt, double target_dt,
                                                       double window_start, int window_count) {
    if (fine_dt <= 0 || target_dt <= 0) throw InputError("aggregate: intervals must be positive");
    const double ratio = target_dt / fine_dt;
    if (std::abs(ratio - std::lround(ratio)) > 1e-9)
        throw InputError("aggregate: fine interval does not divide the target interval");

    std::vector<std::optional<AggregatedSample>> out(static_cast<std::size_t>(window_count));
    struct Acc {
        double occ = 0, flow = 0, speed_plain = 0, speed_flow = 0;
        int count = 0;
    };
    std::vector<Acc> acc(static_cast<std::size_t>(window_count));
    for (const FineSample& s : raw) {
        const double rel = (s.t - window_start) / target_dt;
        const int w = static_cast<int>(std::floor(rel + 1e-12));
        if (w < 0 || w >= window_count) continue;
        Acc& a = acc[static_cast<std::size_t>(w)];
        a.occ += s.occupancy;
        a.flow += s.flow;
        a.speed_plain += s.speed;
        a.speed_flow += s.speed * s.flow;
        a.count += 1;
    }
    for (int w = 0; w < window_count; ++w) {
        const Acc& a = acc[static_cast<std::size_t>(w)];
        if (a.count == 0) continue;  // stays missing
        AggregatedSample s;
        s.window_start = window_start + w * target_dt;
        s.flow = a.flow;
        s.occupancy = a.occ / a.count;
        s.speed = a.flow > 0 ? a.speed_flow / a.flow : a.speed_plain / a.count;
        out[static_cast<std::size_t>(w)] = s;
    }
    return out;
}

SensorDataset window(const SensorDataset& ds, int t_start, int t_end) {
    if (t_start < 0 || t_start >= t_end || t_end >= ds.grid.n)
        throw InputError("window: require 0 <= t_start < t_end < n");
    SensorDataset out;
    out.grid = SpatiotemporalGrid::make(ds.grid.x0, ds.grid.xm, ds.grid.dx,
                                        ds.grid.t0 + t_start * ds.grid.dt,
                                        ds.grid.t0 + t_end * ds.grid.dt, ds.grid.dt);
    for (SensorObservation obs : ds.observations) {
        if (obs.time_index < t_start || obs.time_index > t_end) continue;
        obs.time_index -= t_start;
        out.observations.push_back(obs);
    }
    std::vector<char> has_row(static_cast<std::size_t>(out.grid.m), 0);
    for (const auto& obs : out.observations) has_row[static_cast<std::size_t>(obs.station)] = 1;
    for (int j = 0; j < out.grid.m; ++j)
        if (!has_row[static_cast<std::size_t>(j)]) out.missing_stations.insert(j);
    return out;
}

namespace {

Affine center_span(double lo, double hi, const char* what, std::vector<std::string>& warnings) {
    if (hi - lo <= 0) {
        warnings.push_back(std::string(what) + " range is degenerate; using identity scale");
        return {lo, 1.0};
    }
    return {(lo + hi) / 2.0, (hi - lo) / 2.0};
}

Affine zscore(std::span<const double> values, const char* what,
              std::vector<std::string>& warnings) {
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    const double sd = std::sqrt(var);
    if (sd == 0.0) {
        warnings.push_back(std::string(what) + " field is constant; using scale 1");
        return {mean, 1.0};
    }
    return {mean, sd};
}

}  // namespace

NormalizedDataset normalize(const SensorDataset& ds) {
    if (ds.observations.empty()) throw InputError("normalize: dataset has no observations");
    NormalizedDataset out;
    out.data.grid = ds.grid;
    out.data.missing_stations = ds.missing_stations;

    out.params.x = center_span(ds.grid.x0, ds.grid.xm, "x", out.warnings);
    out.params.t = center_span(ds.grid.t0, ds.grid.tm, "t", out.warnings);

    std::vector<double> o, q, v;
    o.reserve(ds.observations.size());
    q.reserve(ds.observations.size());
    v.reserve(ds.observations.size());
    for (const auto& obs : ds.observations) {
        o.push_back(obs.occupancy);
        q.push_back(obs.flow);
        v.push_back(obs.speed);
    }
    out.params.o = zscore(o, "occupancy", out.warnings);
    out.params.q = zscore(q, "flow", out.warnings);
    out.params.v = zscore(v, "speed", out.warnings);

    out.data.observations.reserve(ds.observations.size());
    for (const auto& obs : ds.observations) {
        SensorObservation nobs = obs;
        nobs.occupancy = out.params.o.apply(obs.occupancy);
        nobs.flow = out.params.q.apply(obs.flow);
        nobs.speed = out.params.v.apply(obs.speed);
        out.data.observations.push_back(nobs);
    }
    return out;
}

}  // namespace tpd
