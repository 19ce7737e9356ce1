#include "tpd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <random>
#include <sstream>

namespace tpd {

PlantedPDE PlantedPDE::advection_diffusion(double advection, double diffusion) {
    PlantedPDE p;
    p.advection = advection;
    p.diffusion = diffusion;
    std::ostringstream d;
    d << "o_t = " << -advection << " o_x + " << diffusion << " o_xx (normalized units)";
    p.description = d.str();
    return p;
}

Coefficients PlantedPDE::to_coefficients(const TermLibrary& lib) const {
    Coefficients xi = Coefficients::zeros(lib.size());
    std::fill(xi.active.begin(), xi.active.end(), 0);
    auto set = [&](const ExponentVector& e, double value) {
        if (value == 0.0) return;
        const long long h = lib.index_of(e);
        if (h < 0) throw InputError("planted term is not in the library");
        xi.values[static_cast<std::size_t>(h)] = value;
        xi.active[static_cast<std::size_t>(h)] = 1;
    };
    ExponentVector o_x{};
    o_x.c[3] = 1;
    ExponentVector o_xx{};
    o_xx.c[6] = 1;
    set(o_x, -advection);
    set(o_xx, diffusion);
    return xi;
}

SyntheticScenario SyntheticScenario::defaults(std::uint64_t seed) {
    SyntheticScenario s;
    s.grid = SpatiotemporalGrid::make(0.0, 32.0, 2.0, 360.0, 1080.0, 3.0);
    s.ic_base = 6.0;
    s.ic_bumps = {{10.0, 8.0, 4.0}, {7.0, 22.0, 2.5}};
    s.free_flow_speed = 30.0;
    s.jam_occupancy = 60.0;
    s.flow_scale = 1.5;
    s.noise_frac = 0.01;
    s.missing_fraction = 7.0 / 17.0;
    s.seed = seed;
    return s;
}

ScenarioSpec ScenarioSpec::defaults(std::uint64_t seed) {
    ScenarioSpec spec;
    spec.scenario = SyntheticScenario::defaults(seed);
    spec.pde = PlantedPDE::advection_diffusion(0.5, 0.05);
    return spec;
}

CleanFields simulate(const PlantedPDE& pde, const SyntheticScenario& sc) {
    const SpatiotemporalGrid& g = sc.grid;
    const double Lx = (g.xm - g.x0) / 2.0;
    const double Lt = (g.tm - g.t0) / 2.0;
    // planted coefficients are stated in normalized units; integrate in
    // physical units on the scenario grid
    const double c = pde.advection * Lx / Lt;       // miles per minute
    const double nu = pde.diffusion * Lx * Lx / Lt; // miles^2 per minute

    constexpr int kRefine = 10;  // internal grid refinement in x and t
    const int ncells = (g.m - 1) * kRefine;  // periodic: station m-1 aliases cell 0
    const int nsteps = (g.n - 1) * kRefine;
    const double dxf = g.dx / kRefine;
    const double dtf = g.dt / kRefine;

    const double cfl_adv = std::abs(c) * dtf / dxf;
    const double cfl_diff = nu * dtf / (dxf * dxf);
    if (cfl_adv > 1.0 || cfl_diff > 0.5) {
        std::ostringstream msg;
        msg << "simulate: unstable fine grid (advection CFL " << cfl_adv << " > 1 or diffusion number "
            << cfl_diff << " > 0.5)";
        throw NumericError(msg.str());
    }

    // the domain is periodic, so the initial condition is built from wrapped
    // Gaussian images to stay smooth across the seam
    const double domain = g.xm - g.x0;
    std::vector<double> o(static_cast<std::size_t>(ncells));
    for (int i = 0; i < ncells; ++i) {
        const double x = g.x0 + i * dxf;
        double val = sc.ic_base;
        for (const GaussianBump& b : sc.ic_bumps)
            for (int image = -2; image <= 2; ++image) {
                const double d = x - b.center + image * domain;
                val += b.amplitude * std::exp(-d * d / (2.0 * b.width * b.width));
            }
        o[static_cast<std::size_t>(i)] = val;
    }

    CleanFields out;
    out.grid = g;
    out.o.resize(g.point_count());
    out.q.resize(g.point_count());
    out.v.resize(g.point_count());

    auto record = [&](int row) {
        for (int j = 0; j < g.m; ++j) {
            const int cell = (j * kRefine) % ncells;
            const double oc = o[static_cast<std::size_t>(cell)];
            const double vv = sc.free_flow_speed * (1.0 - oc / sc.jam_occupancy);
            out.at(out.o, row, j) = oc;
            out.at(out.v, row, j) = vv;
            out.at(out.q, row, j) = sc.flow_scale * oc * vv;
        }
    };

    record(0);
    std::vector<double> next(o.size());
    for (int k = 1; k <= nsteps; ++k) {
        const int nc = ncells;
        for (int i = 0; i < nc; ++i) {
            const double oi = o[static_cast<std::size_t>(i)];
            const double om = o[static_cast<std::size_t>((i - 1 + nc) % nc)];
            const double op = o[static_cast<std::size_t>((i + 1) % nc)];
            const double adv = c >= 0 ? (oi - om) / dxf : (op - oi) / dxf;
            const double diff = (op - 2.0 * oi + om) / (dxf * dxf);
            next[static_cast<std::size_t>(i)] = oi + dtf * (-c * adv + nu * diff);
        }
        o.swap(next);
        if (k % kRefine == 0) record(k / kRefine);
    }
    return out;
}

SensorDataset observe(const CleanFields& clean, const SyntheticScenario& sc,
                      ObservationNoise* applied) {
    const SpatiotemporalGrid& g = clean.grid;
    SensorDataset ds;
    ds.grid = g;

    std::mt19937_64 rng(sc.seed);

    // seeded choice of removed stations
    const int n_missing = static_cast<int>(std::llround(sc.missing_fraction * g.m));
    std::vector<int> stations(static_cast<std::size_t>(g.m));
    std::iota(stations.begin(), stations.end(), 0);
    std::shuffle(stations.begin(), stations.end(), rng);
    for (int k = 0; k < n_missing; ++k) ds.missing_stations.insert(stations[static_cast<std::size_t>(k)]);

    auto field_std = [&](const std::vector<double>& f) {
        double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
        double var = 0;
        for (double x : f) var += (x - mean) * (x - mean);
        return std::sqrt(var / static_cast<double>(f.size()));
    };
    ObservationNoise noise;
    noise.sigma_o = sc.noise_frac * field_std(clean.o);
    noise.sigma_q = sc.noise_frac * field_std(clean.q);
    noise.sigma_v = sc.noise_frac * field_std(clean.v);
    if (applied) *applied = noise;

    // noise drawn for every grid point in fixed order so the stream does not
    // depend on which stations happen to be removed
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.m; ++j) {
            const double eo = noise.sigma_o > 0 ? gauss(rng) * noise.sigma_o : 0.0;
            const double eq = noise.sigma_q > 0 ? gauss(rng) * noise.sigma_q : 0.0;
            const double ev = noise.sigma_v > 0 ? gauss(rng) * noise.sigma_v : 0.0;
            if (ds.missing_stations.count(j)) continue;
            SensorObservation obs;
            obs.station = j;
            obs.time_index = i;
            obs.occupancy = std::clamp(clean.value(clean.o, i, j) + eo, 0.0, 100.0);
            obs.flow = std::max(0.0, clean.value(clean.q, i, j) + eq);
            obs.speed = std::max(0.0, clean.value(clean.v, i, j) + ev);
            ds.observations.push_back(obs);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Scenario files
// ---------------------------------------------------------------------------

namespace {

std::map<std::string, std::string> read_kv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open scenario file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError(path + ":" + std::to_string(lineno) + ": expected key = value");
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return kv;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::string cell;
    std::istringstream in(s);
    while (std::getline(in, cell, ','))
        if (!cell.empty()) out.push_back(std::stod(cell));
    return out;
}

}  // namespace

ScenarioSpec load_scenario(const std::string& path) {
    const auto kv = read_kv(path);
    ScenarioSpec spec = ScenarioSpec::defaults();
    SyntheticScenario& s = spec.scenario;
    auto get = [&](const char* key, double dflt) {
        const auto it = kv.find(key);
        return it == kv.end() ? dflt : std::stod(it->second);
    };
    const auto git = kv.find("grid");
    if (git != kv.end()) {
        const auto g = parse_list(git->second);
        if (g.size() != 6) throw InputError("scenario grid must be x0,xm,dx,t0,tm,dt");
        s.grid = SpatiotemporalGrid::make(g[0], g[1], g[2], g[3], g[4], g[5]);
    }
    s.ic_base = get("ic_base", s.ic_base);
    const auto bit = kv.find("ic_bumps");
    if (bit != kv.end()) {
        s.ic_bumps.clear();
        std::istringstream in(bit->second);
        std::string part;
        while (std::getline(in, part, ';')) {
            const auto b = parse_list(part);
            if (b.size() != 3) throw InputError("scenario ic_bumps entries must be amp,center,width");
            s.ic_bumps.push_back({b[0], b[1], b[2]});
        }
    }
    s.free_flow_speed = get("free_flow_speed", s.free_flow_speed);
    s.jam_occupancy = get("jam_occupancy", s.jam_occupancy);
    s.flow_scale = get("flow_scale", s.flow_scale);
    s.noise_frac = get("noise_frac", s.noise_frac);
    s.missing_fraction = get("missing_fraction", s.missing_fraction);
    if (s.missing_fraction < 0 || s.missing_fraction >= 1)
        throw InputError("scenario missing_fraction must be in [0,1)");
    if (s.noise_frac < 0) throw InputError("scenario noise_frac must be >= 0");
    const auto sit = kv.find("seed");
    if (sit != kv.end()) s.seed = std::stoull(sit->second);
    spec.pde = PlantedPDE::advection_diffusion(get("planted_advection", spec.pde.advection),
                                               get("planted_diffusion", spec.pde.diffusion));
    for (const auto& [key, value] : kv) {
        static const std::set<std::string> known = {
            "grid",          "ic_base",        "ic_bumps",        "free_flow_speed",
            "jam_occupancy", "flow_scale",     "noise_frac",      "missing_fraction",
            "seed",          "planted_advection", "planted_diffusion"};
        if (!known.count(key)) throw InputError("scenario: unknown key '" + key + "'");
        (void)value;
    }
    return spec;
}

void save_scenario(const std::string& path, const ScenarioSpec& spec) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write scenario file '" + path + "'");
    const SyntheticScenario& s = spec.scenario;
    out << "grid = " << s.grid.x0 << "," << s.grid.xm << "," << s.grid.dx << "," << s.grid.t0 << ","
        << s.grid.tm << "," << s.grid.dt << "\n";
    out << "ic_base = " << s.ic_base << "\n";
    out << "ic_bumps = ";
    for (std::size_t i = 0; i < s.ic_bumps.size(); ++i) {
        if (i) out << ";";
        out << s.ic_bumps[i].amplitude << "," << s.ic_bumps[i].center << "," << s.ic_bumps[i].width;
    }
    out << "\n";
    out << "free_flow_speed = " << s.free_flow_speed << "\n";
    out << "jam_occupancy = " << s.jam_occupancy << "\n";
    out << "flow_scale = " << s.flow_scale << "\n";
    out << "noise_frac = " << s.noise_frac << "\n";
    out << "missing_fraction = " << s.missing_fraction << "\n";
    out << "seed = " << s.seed << "\n";
    out << "planted_advection = " << spec.pde.advection << "\n";
    out << "planted_diffusion = " << spec.pde.diffusion << "\n";
}

}  // namespace tpd
