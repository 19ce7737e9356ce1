#include "tpd/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tpd/artifacts.hpp"
#include "tpd/ctm.hpp"
#include "tpd/predictor.hpp"
#include "tpd/synthetic.hpp"

namespace tpd {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    auto strip = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError(path + ":" + std::to_string(lineno) + ": expected key = value");
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return kv;
}

std::vector<int> parse_widths(const std::string& s) {
    std::vector<int> out;
    std::istringstream in(s);
    std::string cell;
    while (std::getline(in, cell, ','))
        if (!cell.empty()) out.push_back(std::stoi(cell));
    return out;
}

std::string iso_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir + "'");
}

}  // namespace

RunConfig default_run_config() { return {}; }

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    const auto kv = read_kv_file(path);
    auto num = [&](const char* key, double dflt) {
        const auto it = kv.find(key);
        return it == kv.end() ? dflt : std::stod(it->second);
    };
    auto integer = [&](const char* key, int dflt) {
        const auto it = kv.find(key);
        return it == kv.end() ? dflt : std::stoi(it->second);
    };
    Schedule& s = cfg.schedule;
    s.learning_rate = num("learning_rate", s.learning_rate);
    s.lr_shrink = num("lr_shrink_rate", s.lr_shrink);
    s.lr_step = integer("lr_step_size", s.lr_step);
    s.threshold = num("coeff_threshold", s.threshold);
    s.threshold_frequency = integer("threshold_frequency", s.threshold_frequency);
    s.burn_in_epochs = integer("burn_in_epochs", s.burn_in_epochs);
    s.main_epochs = integer("main_epochs", s.main_epochs);
    s.refine_epochs = integer("refine_epochs", s.refine_epochs);
    if (const auto it = kv.find("seed"); it != kv.end()) s.seed = std::stoull(it->second);

    LossWeights& w = cfg.weights;
    w.eta_o = num("eta_o", w.eta_o);
    w.eta_q = num("eta_q", w.eta_q);
    w.eta_v = num("eta_v", w.eta_v);
    w.eta_pde = num("eta_pde", w.eta_pde);
    w.eta_spar = num("eta_spar", w.eta_spar);

    TrainOptions& o = cfg.options;
    o.poly_order = integer("poly_order_n", o.poly_order);
    o.deriv_order = integer("pde_order_m", o.deriv_order);
    o.r_num = integer("poly_order_rn", o.r_num);
    o.r_den = integer("poly_order_rd", o.r_den);
    if (const auto it = kv.find("width_fo"); it != kv.end()) o.widths_o = parse_widths(it->second);
    if (const auto it = kv.find("width_fq"); it != kv.end()) o.widths_q = parse_widths(it->second);
    if (const auto it = kv.find("width_fv"); it != kv.end()) o.widths_v = parse_widths(it->second);
    if (const auto it = kv.find("collocation"); it != kv.end()) {
        if (it->second == "all")
            o.collocation = CollocationMode::AllGridPoints;
        else if (it->second == "observed")
            o.collocation = CollocationMode::Observed;
        else
            throw InputError("config: collocation must be 'observed' or 'all'");
    }

    static const std::set<std::string> known = {
        "learning_rate", "lr_shrink_rate", "lr_step_size", "coeff_threshold",
        "threshold_frequency", "burn_in_epochs", "main_epochs", "refine_epochs", "seed",
        "eta_o", "eta_q", "eta_v", "eta_pde", "eta_spar", "poly_order_n", "pde_order_m",
        "poly_order_rn", "poly_order_rd", "width_fo", "width_fq", "width_fv", "collocation"};
    for (const auto& [key, value] : kv) {
        if (!known.count(key)) throw InputError("config: unknown key '" + key + "'");
        (void)value;
    }
    return cfg;
}

SpatiotemporalGrid GridArg::parse() const {
    std::vector<double> g;
    std::istringstream in(spec);
    std::string cell;
    while (std::getline(in, cell, ','))
        if (!cell.empty()) g.push_back(std::stod(cell));
    if (g.size() != 6) throw InputError("--grid expects x0,xm,dx,t0,tm,dt");
    return SpatiotemporalGrid::make(g[0], g[1], g[2], g[3], g[4], g[5]);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int run_synth(const SynthArgs& args) {
    ScenarioSpec spec = args.scenario_path.empty() ? ScenarioSpec::defaults()
                                                   : load_scenario(args.scenario_path);
    if (args.common.seed) spec.scenario.seed = *args.common.seed;
    const CleanFields clean = simulate(spec.pde, spec.scenario);
    ObservationNoise noise;
    const SensorDataset noisy = observe(clean, spec.scenario, &noise);
    write_sensor_csv(args.out_csv, noisy);
    if (!args.clean_out_csv.empty()) {
        SyntheticScenario clean_scenario = spec.scenario;
        clean_scenario.noise_frac = 0.0;
        clean_scenario.missing_fraction = 0.0;
        const SensorDataset full = observe(clean, clean_scenario, nullptr);
        write_sensor_csv(args.clean_out_csv, full);
    }
    std::printf("synth: wrote %zu observations (%d stations x %d steps, %zu missing stations)\n",
                noisy.observations.size(), noisy.grid.m, noisy.grid.n,
                noisy.missing_stations.size());
    std::printf("synth: noise sigma o=%.6g q=%.6g v=%.6g\n", noise.sigma_o, noise.sigma_q,
                noise.sigma_v);
    return 0;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

namespace {

// Fine-cadence ingestion: groups rows by snapped station and aggregates each
// series onto the grid cadence.
SensorDataset load_with_aggregation(const std::string& path, const SpatiotemporalGrid& grid,
                                    double fine_dt) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open sensor file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");

    std::map<int, std::vector<FineSample>> per_station;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream cells(line);
        std::string sid, mile, stamp, occ, flow, speed;
        std::getline(cells, sid, ',');
        std::getline(cells, mile, ',');
        std::getline(cells, stamp, ',');
        std::getline(cells, occ, ',');
        std::getline(cells, flow, ',');
        std::getline(cells, speed, ',');
        if (occ.empty() || flow.empty() || speed.empty()) continue;
        const double milepost = std::stod(mile);
        if (milepost < grid.x0 || milepost > grid.xm)
            throw InputError("row " + std::to_string(row) + ": station outside grid");
        const int station = static_cast<int>(std::lround((milepost - grid.x0) / grid.dx));
        std::string hms = stamp;
        if (const auto tpos = stamp.find('T'); tpos != std::string::npos) hms = stamp.substr(tpos + 1);
        int hh = 0, mm = 0;
        double ss = 0;
        if (std::sscanf(hms.c_str(), "%d:%d:%lf", &hh, &mm, &ss) < 2)
            throw InputError("row " + std::to_string(row) + ": malformed timestamp");
        FineSample s;
        s.t = hh * 60.0 + mm + ss / 60.0;
        s.occupancy = std::stod(occ);
        s.flow = std::stod(flow);
        s.speed = std::stod(speed);
        per_station[station].push_back(s);
    }

    SensorDataset ds;
    ds.grid = grid;
    for (auto& [station, samples] : per_station) {
        const auto agg = aggregate(samples, fine_dt, grid.dt, grid.t0 - grid.dt / 2.0, grid.n);
        for (int w = 0; w < grid.n; ++w) {
            const auto& a = agg[static_cast<std::size_t>(w)];
            if (!a) continue;
            SensorObservation obs;
            obs.station = station;
            obs.time_index = w;
            obs.occupancy = std::clamp(a->occupancy, 0.0, 100.0);
            obs.flow = std::max(0.0, a->flow);
            obs.speed = std::max(0.0, a->speed);
            ds.observations.push_back(obs);
        }
    }
    std::sort(ds.observations.begin(), ds.observations.end(),
              [](const SensorObservation& a, const SensorObservation& b) {
                  return std::tie(a.time_index, a.station) < std::tie(b.time_index, b.station);
              });
    std::vector<char> has_row(static_cast<std::size_t>(grid.m), 0);
    for (const auto& obs : ds.observations) has_row[static_cast<std::size_t>(obs.station)] = 1;
    for (int j = 0; j < grid.m; ++j)
        if (!has_row[static_cast<std::size_t>(j)]) ds.missing_stations.insert(j);
    return ds;
}

json dataset_summary(const SensorDataset& ds, const NormalizedDataset& nd) {
    json missing = json::array();
    for (int j : ds.missing_stations) missing.push_back(j);
    return json{{"stations", ds.grid.m},
                {"time_steps", ds.grid.n},
                {"observations", ds.observations.size()},
                {"missing_stations", missing},
                {"grid", {{"x0", ds.grid.x0}, {"xm", ds.grid.xm}, {"dx", ds.grid.dx},
                          {"t0", ds.grid.t0}, {"tm", ds.grid.tm}, {"dt", ds.grid.dt}}},
                {"normalization",
                 {{"o", {{"shift", nd.params.o.shift}, {"scale", nd.params.o.scale}}},
                  {"q", {{"shift", nd.params.q.shift}, {"scale", nd.params.q.scale}}},
                  {"v", {{"shift", nd.params.v.shift}, {"scale", nd.params.v.scale}}}}},
                {"warnings", nd.warnings}};
}

}  // namespace

int run_ingest(const IngestArgs& args) {
    const SpatiotemporalGrid grid = args.grid.parse();
    SensorDataset ds = args.aggregate_fine_dt > 0
                           ? load_with_aggregation(args.data_path, grid, args.aggregate_fine_dt)
                           : load_sensor_csv(args.data_path, grid);
    if (args.window_steps) ds = window(ds, args.window_steps->first, args.window_steps->second);
    const NormalizedDataset nd = normalize(ds);
    ensure_dir(args.common.out_dir);
    write_sensor_csv(args.common.out_dir + "/ingested.csv", ds);
    std::ofstream summary(args.common.out_dir + "/ingest_summary.json");
    summary << dataset_summary(ds, nd).dump(1) << "\n";
    for (const auto& w : nd.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("ingest: %zu observations, %zu missing stations -> %s\n", ds.observations.size(),
                ds.missing_stations.size(), args.common.out_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// discover
// ---------------------------------------------------------------------------

namespace {

void write_grids_csvs(const std::string& dir, const TrainResult& res, const SensorDataset& ds) {
    const SpatiotemporalGrid& g = res.grid;
    // observation lookup
    std::map<std::pair<int, int>, const SensorObservation*> obs_at;
    for (const auto& obs : ds.observations) obs_at[{obs.time_index, obs.station}] = &obs;

    std::vector<GridPoint> points;
    points.reserve(g.point_count());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.m; ++j)
            points.push_back({res.norm.x.apply(g.station_position(j)),
                              res.norm.t.apply(g.step_time(i))});
    std::vector<StateAtPoint> states(points.size());
    evaluate_states(res.nets, points, states);

    std::vector<double> theta(res.lib.size());
    char buf[512];

    std::ofstream recon(dir + "/reconstruction.csv");
    recon << "field,time_index,station,x_miles,t_minutes,observed,reconstructed\n";
    std::ofstream deriv(dir + "/derivatives.csv");
    deriv << "time_index,station,o_x,q_x,v_x,o_xx,q_xx,v_xx\n";
    std::ofstream dtcmp(dir + "/dt_comparison.csv");
    dtcmp << "time_index,station,o_t_autodiff,o_t_library\n";

    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.m; ++j) {
            const StateAtPoint& s = states[static_cast<std::size_t>(i) * g.m + j];
            const auto it = obs_at.find({i, j});
            const double phys[3] = {res.norm.o.invert(s.o), res.norm.q.invert(s.q),
                                    res.norm.v.invert(s.v)};
            const char* fields[3] = {"occupancy", "flow", "speed"};
            for (int f = 0; f < 3; ++f) {
                std::string observed;
                if (it != obs_at.end()) {
                    const double raw = f == 0   ? it->second->occupancy
                                       : f == 1 ? it->second->flow
                                                : it->second->speed;
                    std::snprintf(buf, sizeof buf, "%.10g", raw);
                    observed = buf;
                }
                std::snprintf(buf, sizeof buf, "%s,%d,%d,%.10g,%.10g,%s,%.10g\n", fields[f], i, j,
                              g.station_position(j), g.step_time(i), observed.c_str(), phys[f]);
                recon << buf;
            }
            std::snprintf(buf, sizeof buf, "%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", i, j,
                          s.o_x, s.q_x, s.v_x, s.o_xx, s.q_xx, s.v_xx);
            deriv << buf;
            const auto feats = s.features();
            evaluate_theta(res.lib, std::span<const double, 9>(feats), theta);
            std::snprintf(buf, sizeof buf, "%d,%d,%.10g,%.10g\n", i, j, s.o_t, rhs(theta, res.xi));
            dtcmp << buf;
        }
    }
}

}  // namespace

int run_discover(const DiscoverArgs& args) {
    RunConfig cfg = args.common.config_path.empty() ? default_run_config()
                                                    : load_run_config(args.common.config_path);
    if (args.common.seed) cfg.schedule.seed = *args.common.seed;
    if (args.collocation_all) cfg.options.collocation = CollocationMode::AllGridPoints;
    cfg.options.mode = args.common.mode;
    par::set_threads(args.common.threads);

    const SpatiotemporalGrid grid = args.grid.parse();
    const SensorDataset ds = load_sensor_csv(args.data_path, grid);
    const std::uint64_t checksum = fnv1a64_file(args.data_path);

    ensure_dir(args.common.out_dir);
    TrainResult res;
    try {
        res = train(ds, cfg.schedule, cfg.weights, cfg.options);
    } catch (const TrainingFailure& failure) {
        std::ofstream trace(args.common.out_dir + "/trace.csv");
        write_trace_csv(trace, failure.trace);
        throw;
    }
    for (const auto& w : res.trace.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    const std::string dir = args.common.out_dir;
    save_checkpoint(dir + "/checkpoint.json", {res.nets, res.norm, res.grid});
    save_coefficients(dir + "/coefficients.json", {res.lib, res.xi, res.norm});
    {
        std::ofstream trace(dir + "/trace.csv");
        write_trace_csv(trace, res.trace);
    }
    write_grids_csvs(dir, res, ds);

    char checksum_hex[32];
    std::snprintf(checksum_hex, sizeof checksum_hex, "%016llx",
                  static_cast<unsigned long long>(checksum));
    json manifest{{"format", "tpd-manifest"},
                  {"version", 1},
                  {"command", "discover"},
                  {"created_utc", iso_now()},
                  {"seed", cfg.schedule.seed},
                  {"data_path", args.data_path},
                  {"data_fnv1a64", checksum_hex},
                  {"config",
                   {{"learning_rate", cfg.schedule.learning_rate},
                    {"lr_shrink_rate", cfg.schedule.lr_shrink},
                    {"lr_step_size", cfg.schedule.lr_step},
                    {"coeff_threshold", cfg.schedule.threshold},
                    {"threshold_frequency", cfg.schedule.threshold_frequency},
                    {"burn_in_epochs", cfg.schedule.burn_in_epochs},
                    {"main_epochs", cfg.schedule.main_epochs},
                    {"refine_epochs", cfg.schedule.refine_epochs},
                    {"eta_o", cfg.weights.eta_o},
                    {"eta_q", cfg.weights.eta_q},
                    {"eta_v", cfg.weights.eta_v},
                    {"eta_pde", cfg.weights.eta_pde},
                    {"eta_spar", cfg.weights.eta_spar},
                    {"poly_order_n", cfg.options.poly_order},
                    {"pde_order_m", cfg.options.deriv_order},
                    {"collocation",
                     cfg.options.collocation == CollocationMode::Observed ? "observed" : "all"}}},
                  {"outputs",
                   {"checkpoint.json", "coefficients.json", "trace.csv", "reconstruction.csv",
                    "derivatives.csv", "dt_comparison.csv", "manifest.json"}}};
    std::ofstream mf(dir + "/manifest.json");
    mf << manifest.dump(1) << "\n";

    std::printf("discover: %s\n", format_pde(res.lib, res.xi).c_str());
    std::printf("discover: artifacts in %s\n", dir.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

int run_predict(const PredictArgs& args) {
    if (args.horizon < 1) throw InputError("predict: horizon must be >= 1");
    const DiscoveredPDE pde = load_discovered(args.model_dir);
    const SensorDataset truth = load_sensor_csv(args.data_path, pde.grid);
    ensure_dir(args.common.out_dir);

    std::map<std::pair<int, int>, double> true_flow;
    for (const auto& obs : truth.observations) true_flow[{obs.time_index, obs.station}] = obs.flow;

    const int H = args.horizon;
    struct Row {
        int station, time;
        double pred, truth;
    };
    std::vector<std::vector<Row>> rows(static_cast<std::size_t>(H));
    ClampStats clamps;

    for (int t = 0; t + H < pde.grid.n; ++t) {
        const std::vector<double> initial = reconstruct_occupancy_row(pde, t);
        Rollout roll = rollout(pde, initial, t, H);
        clamps.events += roll.clamps.events;
        for (int h = 1; h <= H; ++h) {
            for (int j = 0; j < pde.grid.m; ++j) {
                const auto it = true_flow.find({t + h, j});
                if (it == true_flow.end()) continue;
                rows[static_cast<std::size_t>(h - 1)].push_back(
                    {j, t + h, roll.flow[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(j)],
                     it->second});
            }
        }
    }

    PredictionReport report;
    report.clamp_events = clamps.events;
    char buf[256];
    for (int h = 1; h <= H; ++h) {
        const auto& hr = rows[static_cast<std::size_t>(h - 1)];
        if (hr.empty()) throw InputError("predict: no scoreable points at horizon " + std::to_string(h));
        std::ofstream out(args.common.out_dir + "/predictions_h" + std::to_string(h) + ".csv");
        out << "station,time_index,predicted_flow,true_flow\n";
        std::vector<double> p, tr;
        for (const Row& r : hr) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.10g,%.10g\n", r.station, r.time, r.pred, r.truth);
            out << buf;
            p.push_back(r.pred);
            tr.push_back(r.truth);
        }
        report.horizons.push_back(score(p, tr, h));
    }

    json jh = json::array();
    for (const HorizonScore& h : report.horizons)
        jh.push_back(json{{"horizon_steps", h.horizon},
                          {"horizon_minutes", h.horizon * pde.grid.dt},
                          {"rmse", h.rmse},
                          {"mape_percent", h.mape},
                          {"scored_points", h.scored}});
    json metrics{{"format", "tpd-metrics"},
                 {"version", 1},
                 {"model", "discovered-pde"},
                 {"clamp_events", report.clamp_events},
                 {"horizons", std::move(jh)}};
    std::ofstream mf(args.common.out_dir + "/metrics.json");
    mf << metrics.dump(1) << "\n";

    for (const HorizonScore& h : report.horizons)
        std::printf("predict: %2d-step (%g min)  RMSE %.4g  MAPE %.4g%%\n", h.horizon,
                    h.horizon * pde.grid.dt, h.rmse, h.mape);
    return 0;
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

int run_baseline_ctm(const BaselineArgs& args) {
    const SpatiotemporalGrid grid = args.grid.parse();
    const SensorDataset ds = load_sensor_csv(args.data_path, grid);
    const PredictionReport report = ctm_predict(ds, ds, args.horizon);
    ensure_dir(args.common.out_dir);
    json jh = json::array();
    for (const HorizonScore& h : report.horizons)
        jh.push_back(json{{"horizon_steps", h.horizon},
                          {"horizon_minutes", h.horizon * grid.dt},
                          {"rmse", h.rmse},
                          {"mape_percent", h.mape},
                          {"scored_points", h.scored}});
    json metrics{{"format", "tpd-metrics"},
                 {"version", 1},
                 {"model", "ctm"},
                 {"clamp_events", 0},
                 {"horizons", std::move(jh)}};
    std::ofstream mf(args.common.out_dir + "/metrics.json");
    mf << metrics.dump(1) << "\n";
    for (const HorizonScore& h : report.horizons)
        std::printf("baseline ctm: %2d-step (%g min)  RMSE %.4g  MAPE %.4g%%\n", h.horizon,
                    h.horizon * grid.dt, h.rmse, h.mape);
    return 0;
}

// ---------------------------------------------------------------------------
// check-derivatives
// ---------------------------------------------------------------------------

namespace {

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

}  // namespace

int run_check_derivatives(const CheckDerivativesArgs& args) {
    std::printf("%-10s %-14s %-14s %-14s %-14s\n", "triplet", "fd_first", "fd_second",
                "assembly_gap", "literal_gap");
    double worst_first = 0, worst_second = 0, worst_assembly = 0, max_literal = 0;
    for (int k = 0; k < args.triplets; ++k) {
        const FieldTriplet nets = make_field_triplet({2, 8, 8, 1}, {3, 8, 8, 1}, {3, 8, 8, 1}, 3, 2,
                                                     derive_seed(args.seed, static_cast<std::uint64_t>(k)));
        double fd1 = 0, fd2 = 0, asm_gap = 0, lit_gap = 0;
        for (double x : {-0.7, -0.2, 0.4}) {
            for (double t : {-0.5, 0.3}) {
                const Jet2 oj = occupancy_jet(nets.f_o, x, t);
                const double h = 1e-4;
                auto f = [&](double xx, double tt) {
                    return nets.f_o.forward<double>(std::array<double, 2>{xx, tt});
                };
                auto dcentral = [&](double step) { return (f(x + step, t) - f(x - step, t)) / (2 * step); };
                const double d1 = (4.0 * dcentral(h / 2) - dcentral(h)) / 3.0;
                auto d2central = [&](double step) {
                    return (f(x + step, t) - 2.0 * f(x, t) + f(x - step, t)) / (step * step);
                };
                const double d2 = (4.0 * d2central(h / 2) - d2central(h)) / 3.0;
                fd1 = std::max(fd1, rel_err(oj.dx, d1));
                fd2 = std::max(fd2, rel_err(oj.dxx, d2));

                const Jet2 assembled = flow_jet(nets.f_q, oj, x, t);
                const Jet2 composite = composite_jet(nets.f_q, oj, x, t);
                asm_gap = std::max({asm_gap, rel_err(assembled.dx, composite.dx),
                                    rel_err(assembled.dxx, composite.dxx)});
                lit_gap = std::max(lit_gap, std::abs(second_order_mixed_gap(nets.f_q, oj, x, t)));
            }
        }
        std::printf("%-10d %-14.3e %-14.3e %-14.3e %-14.3e\n", k, fd1, fd2, asm_gap, lit_gap);
        worst_first = std::max(worst_first, fd1);
        worst_second = std::max(worst_second, fd2);
        worst_assembly = std::max(worst_assembly, asm_gap);
        max_literal = std::max(max_literal, lit_gap);
    }
    std::printf("worst: fd_first %.3e  fd_second %.3e  assembly %.3e  (largest dropped mixed "
                "term %.3e)\n",
                worst_first, worst_second, worst_assembly, max_literal);
    return worst_first < 1e-5 && worst_second < 1e-3 && worst_assembly < 1e-8 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int run_report(const ReportArgs& args) {
    const std::string dir = args.artifact_dir;
    if (!fs::exists(dir + "/manifest.json"))
        throw InputError("report: no manifest in '" + dir + "'");
    const CoefficientsFile coeff = load_coefficients(dir + "/coefficients.json");
    std::ifstream trace_in(dir + "/trace.csv");
    if (!trace_in) throw InputError("report: missing trace.csv");
    const TrainingTrace trace = read_trace_csv(trace_in);

    // discovered equation, annotated for the untrained case
    std::string equation = format_pde(coeff.lib, coeff.xi);
    const bool untrained = trace.records.empty();
    bool any_nonzero = false;
    for (std::size_t h = 0; h < coeff.xi.size(); ++h)
        if (coeff.xi.active[h] && coeff.xi.values[h] != 0.0) any_nonzero = true;
    if (!any_nonzero && coeff.xi.active_count() == coeff.xi.size())
        equation += untrained || trace.records.empty()
                        ? " (all terms active, untrained)"
                        : " (all terms active)";

    std::ostringstream text;
    text << "discovered dynamics: " << equation << "\n";
    text << "active terms: " << coeff.xi.active_count() << " of " << coeff.xi.size() << "\n";
    if (!trace.records.empty()) {
        const EpochRecord& last = trace.records.back();
        text << "final losses: l_o " << last.l_o << ", l_q " << last.l_q << ", l_v " << last.l_v
             << ", l_pde " << last.l_pde << "\n";
    }
    // prediction table when metrics exist
    for (const char* name : {"metrics.json", "metrics_ctm.json"}) {
        const std::string path = dir + "/" + name;
        if (!fs::exists(path)) continue;
        std::ifstream mf(path);
        json metrics;
        mf >> metrics;
        text << "prediction metrics (" << metrics.value("model", "?") << "):\n";
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-14s %-12s %-12s\n", "horizon", "RMSE", "MAPE%%");
        text << "  horizon        RMSE         MAPE%\n";
        for (const auto& h : metrics.at("horizons")) {
            std::snprintf(buf, sizeof buf, "  %6.0f min     %-12.4g %-12.4g\n",
                          h.at("horizon_minutes").get<double>(), h.at("rmse").get<double>(),
                          h.at("mape_percent").get<double>());
            text << buf;
        }
    }

    std::ofstream txt(dir + "/report.txt");
    txt << text.str();

    // SVG: observation vs reconstruction heatmaps plus loss curves
    std::ostringstream svg;
    const int W = 900, Ht = 1200;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Ht
        << "\" font-family=\"monospace\">\n";
    svg << "<text x=\"10\" y=\"16\" font-size=\"12\">" << equation << "</text>\n";

    // reconstruction heatmaps from the CSV
    {
        std::ifstream rc(dir + "/reconstruction.csv");
        if (!rc) throw InputError("report: missing reconstruction.csv");
        std::string line;
        std::getline(rc, line);
        int max_t = 0, max_s = 0;
        struct Cell {
            double obs = std::nan("");
            double rec = 0;
        };
        std::map<std::string, std::map<std::pair<int, int>, Cell>> fields;
        while (std::getline(rc, line)) {
            std::istringstream cells(line);
            std::string f, ti, st, x, t, obs, rec;
            std::getline(cells, f, ',');
            std::getline(cells, ti, ',');
            std::getline(cells, st, ',');
            std::getline(cells, x, ',');
            std::getline(cells, t, ',');
            std::getline(cells, obs, ',');
            std::getline(cells, rec, ',');
            Cell c;
            c.obs = obs.empty() ? std::nan("") : std::stod(obs);
            c.rec = std::stod(rec);
            const int tix = std::stoi(ti), six = std::stoi(st);
            max_t = std::max(max_t, tix);
            max_s = std::max(max_s, six);
            fields[f][{six, tix}] = c;
        }
        double y = 60;
        for (const auto& [fname, cells] : fields) {
            const int rows = max_s + 1, cols = max_t + 1;
            std::vector<double> obs_m(static_cast<std::size_t>(rows) * cols, std::nan(""));
            std::vector<double> rec_m(static_cast<std::size_t>(rows) * cols, 0.0);
            for (const auto& [key, cell] : cells) {
                obs_m[static_cast<std::size_t>(key.first) * cols + key.second] = cell.obs;
                rec_m[static_cast<std::size_t>(key.first) * cols + key.second] = cell.rec;
            }
            HeatmapSpec ho{"observed " + fname, rows, cols, &obs_m};
            HeatmapSpec hr{"reconstructed " + fname, rows, cols, &rec_m};
            svg << "<g transform=\"translate(10," << y << ")\">" << render_heatmap_svg(ho) << "</g>\n";
            svg << "<g transform=\"translate(" << 30 + cols * 3 << "," << y << ")\">"
                << render_heatmap_svg(hr) << "</g>\n";
            y += rows * 3 + 30;
        }
        if (!trace.records.empty()) {
            svg << "<g transform=\"translate(10," << y + 10 << ")\">" << render_loss_curves_svg(trace)
                << "</g>\n";
        }
    }
    svg << "</svg>\n";
    std::ofstream sf(dir + "/report.svg");
    sf << svg.str();

    std::fputs(text.str().c_str(), stdout);
    std::printf("report: wrote %s/report.txt and report.svg\n", dir.c_str());
    return 0;
}

}  // namespace tpd
