#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tpd/synthetic.hpp"

using namespace tpd;

namespace {

SyntheticScenario small_scenario() {
    SyntheticScenario s;
    s.grid = SpatiotemporalGrid::make(0, 32, 2, 0, 720, 3);
    s.ic_base = 6.0;
    s.ic_bumps = {{8.0, 16.0, 6.0}};
    s.noise_frac = 0.0;
    s.missing_fraction = 0.0;
    s.seed = 3;
    return s;
}

}  // namespace

TEST_CASE("frozen dynamics keep the field constant in time") {
    const SyntheticScenario sc = small_scenario();
    const CleanFields f = simulate(PlantedPDE::advection_diffusion(0.0, 0.0), sc);
    for (int i = 1; i < f.grid.n; ++i)
        for (int j = 0; j < f.grid.m; ++j)
            CHECK(f.value(f.o, i, j) == doctest::Approx(f.value(f.o, 0, j)).epsilon(1e-14));
}

TEST_CASE("pure advection translates the pulse with small shape error") {
    SyntheticScenario sc = small_scenario();
    // advection CFL on the fine grid is 8/(n-1) here; n = 10 keeps it at 0.889
    // so the upwind scheme's numerical diffusion stays small
    sc.grid = SpatiotemporalGrid::make(0, 32, 2, 0, 216, 24);
    const double c_norm = 0.5;
    const CleanFields f = simulate(PlantedPDE::advection_diffusion(c_norm, 0.0), sc);
    // physical speed: c_norm * Lx/Lt miles per minute, over the full run
    const double Lx = (sc.grid.xm - sc.grid.x0) / 2.0, Lt = (sc.grid.tm - sc.grid.t0) / 2.0;
    const double shift = c_norm * Lx / Lt * (sc.grid.tm - sc.grid.t0);  // miles
    const int last = f.grid.n - 1;
    double worst = 0, scale = 0;
    for (int j = 0; j < f.grid.m; ++j) {
        // exact translation of the image-summed initial condition
        double x = f.grid.station_position(j) - shift;
        const double L = f.grid.xm - f.grid.x0;
        while (x < f.grid.x0) x += L;
        double exact = sc.ic_base;
        for (int image = -2; image <= 2; ++image) {
            const double d = x - sc.ic_bumps[0].center + image * L;
            exact += sc.ic_bumps[0].amplitude *
                     std::exp(-d * d / (2 * sc.ic_bumps[0].width * sc.ic_bumps[0].width));
        }
        worst = std::max(worst, std::abs(f.value(f.o, last, j) - exact));
        scale = std::max(scale, std::abs(exact));
    }
    CHECK(worst / scale < 0.01);
}

TEST_CASE("pure diffusion matches the periodic heat kernel") {
    SyntheticScenario sc = small_scenario();
    sc.ic_bumps = {{8.0, 16.0, 3.0}};
    const double nu_norm = 0.05;
    const CleanFields f = simulate(PlantedPDE::advection_diffusion(0.0, nu_norm), sc);
    const double Lx = (sc.grid.xm - sc.grid.x0) / 2.0, Lt = (sc.grid.tm - sc.grid.t0) / 2.0;
    const double nu = nu_norm * Lx * Lx / Lt;
    const double T = sc.grid.tm - sc.grid.t0;
    // Gaussian spreads to width sqrt(w^2 + 2 nu T); sum over periodic images
    const double w0 = sc.ic_bumps[0].width;
    const double wT = std::sqrt(w0 * w0 + 2 * nu * T);
    const double amp = sc.ic_bumps[0].amplitude * w0 / wT;
    const int last = f.grid.n - 1;
    double worst = 0, scale = 0;
    for (int j = 0; j < f.grid.m; ++j) {
        const double x = f.grid.station_position(j);
        double exact = sc.ic_base;
        for (int image = -3; image <= 3; ++image) {
            const double d = x - sc.ic_bumps[0].center + image * (sc.grid.xm - sc.grid.x0);
            exact += amp * std::exp(-d * d / (2 * wT * wT));
        }
        worst = std::max(worst, std::abs(f.value(f.o, last, j) - exact));
        scale = std::max(scale, std::abs(exact));
    }
    CHECK(worst / scale < 0.01);
}

TEST_CASE("unstable configurations are rejected with CFL numbers") {
    SyntheticScenario sc = small_scenario();
    CHECK_THROWS_WITH_AS(simulate(PlantedPDE::advection_diffusion(0.0, 5.0), sc),
                         doctest::Contains("CFL"), NumericError);
}

TEST_CASE("planted coefficients live in the library") {
    const TermLibrary lib = enumerate_terms(2, 2);
    const PlantedPDE pde = PlantedPDE::advection_diffusion(0.5, 0.05);
    const Coefficients xi = pde.to_coefficients(lib);
    CHECK(xi.active_count() == 2);
    ExponentVector o_x{};
    o_x.c[3] = 1;
    ExponentVector o_xx{};
    o_xx.c[6] = 1;
    CHECK(xi.values[static_cast<std::size_t>(lib.index_of(o_x))] == doctest::Approx(-0.5));
    CHECK(xi.values[static_cast<std::size_t>(lib.index_of(o_xx))] == doctest::Approx(0.05));
}

TEST_CASE("library-expressed truth reproduces the simulated time derivative") {
    // the central oracle consistency check: Theta^T xi_true vs finite
    // differences of the simulated clean field, in normalized units; the
    // sensor grid here is fine enough that the differences resolve the field
    SyntheticScenario sc = small_scenario();
    sc.grid = SpatiotemporalGrid::make(0, 32, 0.5, 0, 720, 0.25);
    sc.ic_bumps = {{10.0, 8.0, 4.0}, {7.0, 22.0, 3.0}};
    const PlantedPDE pde = PlantedPDE::advection_diffusion(0.5, 0.05);
    const CleanFields f = simulate(pde, sc);
    const double Lx = (sc.grid.xm - sc.grid.x0) / 2.0, Lt = (sc.grid.tm - sc.grid.t0) / 2.0;
    double num = 0, den = 0;
    for (int i = 1; i + 1 < f.grid.n; ++i) {
        for (int j = 0; j < f.grid.m; ++j) {
            const int jm = (j - 1 + (f.grid.m - 1)) % (f.grid.m - 1);
            const int jp = (j + 1) % (f.grid.m - 1);
            // normalized-unit derivatives of the raw field (shift-invariant)
            const double o_t = (f.value(f.o, i + 1, j) - f.value(f.o, i - 1, j)) /
                               (2 * f.grid.dt) * Lt;
            const double o_x = (f.value(f.o, i, jp) - f.value(f.o, i, jm)) / (2 * f.grid.dx) * Lx;
            const double o_xx = (f.value(f.o, i, jp) - 2 * f.value(f.o, i, j) + f.value(f.o, i, jm)) /
                                (f.grid.dx * f.grid.dx) * Lx * Lx;
            const double modeled = -pde.advection * o_x + pde.diffusion * o_xx;
            num += (o_t - modeled) * (o_t - modeled);
            den += o_t * o_t;
        }
    }
    const double rel_rms = std::sqrt(num / den);
    // finite-difference truncation plus the integrator's numerical diffusion;
    // measured 1.1e-2 on this fixture
    MESSAGE("planted-truth residual (relative rms): ", rel_rms);
    CHECK(rel_rms < 0.03);
}

TEST_CASE("zero-noise full-coverage observation equals the clean fields") {
    SyntheticScenario sc = small_scenario();
    const CleanFields f = simulate(PlantedPDE::advection_diffusion(0.3, 0.02), sc);
    const SensorDataset ds = observe(f, sc);
    CHECK(ds.missing_stations.empty());
    REQUIRE(ds.observations.size() == f.grid.point_count());
    for (const auto& obs : ds.observations) {
        CHECK(obs.occupancy == doctest::Approx(f.value(f.o, obs.time_index, obs.station)));
        CHECK(obs.flow == doctest::Approx(f.value(f.q, obs.time_index, obs.station)));
        CHECK(obs.speed == doctest::Approx(f.value(f.v, obs.time_index, obs.station)));
    }
}

TEST_CASE("missing fraction removes the requested station count") {
    SyntheticScenario sc = SyntheticScenario::defaults(7);
    const CleanFields f = simulate(PlantedPDE::advection_diffusion(0.5, 0.05), sc);
    const SensorDataset ds = observe(f, sc);
    CHECK(ds.missing_stations.size() == 7);  // 7 of 17
    CHECK(ds.observations.size() == static_cast<std::size_t>((17 - 7) * f.grid.n));
    for (const auto& obs : ds.observations) CHECK(ds.missing_stations.count(obs.station) == 0);
}

TEST_CASE("observation is deterministic for a fixed seed") {
    SyntheticScenario sc = SyntheticScenario::defaults(11);
    sc.noise_frac = 0.02;
    const CleanFields f = simulate(PlantedPDE::advection_diffusion(0.5, 0.05), sc);
    const SensorDataset a = observe(f, sc);
    const SensorDataset b = observe(f, sc);
    REQUIRE(a.observations.size() == b.observations.size());
    for (std::size_t k = 0; k < a.observations.size(); ++k) {
        CHECK(a.observations[k].occupancy == b.observations[k].occupancy);
        CHECK(a.observations[k].flow == b.observations[k].flow);
    }
    sc.seed = 12;
    const SensorDataset c = observe(f, sc);
    CHECK(a.observations[0].occupancy != c.observations[0].occupancy);
}

TEST_CASE("empirical noise deviation matches the requested sigma") {
    SyntheticScenario sc = small_scenario();
    sc.grid = SpatiotemporalGrid::make(0, 32, 2, 0, 3000, 3);  // 17 x 1001 > 1e4 samples
    sc.noise_frac = 0.05;
    sc.seed = 21;
    const CleanFields f = simulate(PlantedPDE::advection_diffusion(0.0, 0.0), sc);
    ObservationNoise noise;
    const SensorDataset ds = observe(f, sc, &noise);
    REQUIRE(ds.observations.size() >= 10000);
    double sq = 0;
    for (const auto& obs : ds.observations) {
        const double e = obs.occupancy - f.value(f.o, obs.time_index, obs.station);
        sq += e * e;
    }
    const double sd = std::sqrt(sq / static_cast<double>(ds.observations.size()));
    CHECK(std::abs(sd - noise.sigma_o) / noise.sigma_o < 0.05);
}

TEST_CASE("scenario files round-trip") {
    ScenarioSpec spec = ScenarioSpec::defaults(99);
    spec.scenario.ic_bumps = {{9.5, 10.0, 3.5}, {4.0, 25.0, 2.0}};
    spec.pde = PlantedPDE::advection_diffusion(0.4, 0.03);
    save_scenario("/tmp/tpd_scenario.cfg", spec);
    const ScenarioSpec back = load_scenario("/tmp/tpd_scenario.cfg");
    CHECK(back.scenario.grid.m == spec.scenario.grid.m);
    CHECK(back.scenario.ic_bumps.size() == 2);
    CHECK(back.scenario.ic_bumps[1].center == doctest::Approx(25.0));
    CHECK(back.scenario.seed == 99);
    CHECK(back.pde.advection == doctest::Approx(0.4));
    CHECK(back.pde.diffusion == doctest::Approx(0.03));
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.cfg"), InputError);
}
