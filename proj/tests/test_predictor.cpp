#include <doctest.h>

#include <cmath>

#include "tpd/predictor.hpp"
#include "tpd/synthetic.hpp"

using namespace tpd;

namespace {

RationalMLP constant_net(int inputs, double value) {
    RationalMLP net;
    net.widths = {inputs, 1};
    Layer l;
    l.in_width = inputs;
    l.out_width = 1;
    l.weights.assign(static_cast<std::size_t>(inputs), 0.0);
    l.bias = {value};
    l.has_activation = false;
    net.layers.push_back(std::move(l));
    return net;
}

// identity normalization and a grid whose time step is one unit, so the
// update o + o_t holds literally
DiscoveredPDE identity_pde() {
    DiscoveredPDE pde;
    pde.lib = enumerate_terms(2, 2);
    pde.xi = Coefficients::zeros(pde.lib.size());
    pde.nets.f_o = constant_net(2, 0.0);
    pde.nets.f_q = constant_net(3, 0.0);
    pde.nets.f_v = constant_net(3, 0.0);
    pde.norm = NormalizationParams{};  // all identity
    pde.grid = SpatiotemporalGrid::make(0, 9, 1, 0, 9, 1);
    return pde;
}

}  // namespace

TEST_CASE("numeric spatial derivatives: linear and quadratic fields") {
    std::vector<double> linear(9), quad(9);
    const double dx = 0.5;
    for (int j = 0; j < 9; ++j) {
        const double x = j * dx;
        linear[static_cast<std::size_t>(j)] = 3.0 * x;
        quad[static_cast<std::size_t>(j)] = x * x;
    }
    const SpatialDerivs dl = spatial_derivs_numeric(linear, dx);
    for (int j = 0; j < 9; ++j) {
        CHECK(dl.d1[static_cast<std::size_t>(j)] == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(dl.d2[static_cast<std::size_t>(j)] == doctest::Approx(0.0).epsilon(1e-12));
    }
    const SpatialDerivs dq = spatial_derivs_numeric(quad, dx);
    for (int j = 1; j < 8; ++j)
        CHECK(dq.d2[static_cast<std::size_t>(j)] == doctest::Approx(2.0).epsilon(1e-12));
    // one-sided boundary stencils are exact on quadratics too
    CHECK(dq.d1[0] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(dq.d2[0] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK_THROWS_AS(spatial_derivs_numeric(std::vector<double>{1.0, 2.0}, dx), InputError);
}

TEST_CASE("numeric first derivative of sin stays within the second-order bound") {
    const double dx = 0.1;
    std::vector<double> f(41);
    for (int j = 0; j < 41; ++j) f[static_cast<std::size_t>(j)] = std::sin(j * dx);
    const SpatialDerivs d = spatial_derivs_numeric(f, dx);
    for (int j = 1; j < 40; ++j) {
        const double exact = std::cos(j * dx);
        CHECK(std::abs(d.d1[static_cast<std::size_t>(j)] - exact) < dx * dx);
    }
}

TEST_CASE("euler step with zero coefficients is the identity") {
    const DiscoveredPDE pde = identity_pde();
    const std::vector<double> row{3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    ClampStats clamps;
    const std::vector<double> next = euler_step(pde, row, 0, &clamps);
    for (std::size_t j = 0; j < row.size(); ++j) CHECK(next[j] == doctest::Approx(row[j]).epsilon(1e-12));
    CHECK(clamps.events == 0);
}

TEST_CASE("euler step with a one-hot constant shifts uniformly") {
    DiscoveredPDE pde = identity_pde();
    pde.xi.values[0] = 0.75;  // constant term
    const std::vector<double> row(10, 20.0);
    const std::vector<double> next = euler_step(pde, row, 0);
    for (double v : next) CHECK(v == doctest::Approx(20.75).epsilon(1e-12));
}

TEST_CASE("euler step clamps to the physical range and counts events") {
    DiscoveredPDE pde = identity_pde();
    pde.xi.values[0] = -5.0;
    const std::vector<double> row(10, 2.0);  // would go to -3
    ClampStats clamps;
    const std::vector<double> next = euler_step(pde, row, 0, &clamps);
    for (double v : next) CHECK(v == 0.0);
    CHECK(clamps.events == 10);
    CHECK_THROWS_AS(euler_step(pde, std::vector<double>{1.0, 2.0}, 0), InputError);
}

TEST_CASE("one-step error halves when the step is halved (first order)") {
    // planted advection-diffusion; truth from the fine-grid simulator
    const PlantedPDE planted = PlantedPDE::advection_diffusion(0.5, 0.05);
    auto make_scenario = [](double dt) {
        SyntheticScenario sc;
        sc.grid = SpatiotemporalGrid::make(0, 32, 2, 0, 720, dt);
        sc.ic_bumps = {{10.0, 12.0, 5.0}};
        sc.noise_frac = 0.0;
        sc.missing_fraction = 0.0;
        return sc;
    };
    auto one_step_error = [&](double dt) {
        const SyntheticScenario sc = make_scenario(dt);
        const CleanFields f = simulate(planted, sc);
        DiscoveredPDE pde;
        pde.lib = enumerate_terms(2, 2);
        pde.xi = planted.to_coefficients(pde.lib);
        pde.nets.f_o = constant_net(2, 0.0);
        pde.nets.f_q = constant_net(3, 0.0);
        pde.nets.f_v = constant_net(3, 0.0);
        pde.grid = sc.grid;
        // normalized coordinates as the trainer would set them; fields are
        // used raw so the planted normalized-unit coefficients apply directly
        pde.norm.x = {(sc.grid.x0 + sc.grid.xm) / 2, (sc.grid.xm - sc.grid.x0) / 2};
        pde.norm.t = {(sc.grid.t0 + sc.grid.tm) / 2, (sc.grid.tm - sc.grid.t0) / 2};
        pde.norm.o = {0.0, 1.0};
        // truth row at step 0 -> step 1
        std::vector<double> row(static_cast<std::size_t>(sc.grid.m));
        std::vector<double> truth(static_cast<std::size_t>(sc.grid.m));
        for (int j = 0; j < sc.grid.m; ++j) {
            row[static_cast<std::size_t>(j)] = f.value(f.o, 0, j);
            truth[static_cast<std::size_t>(j)] = f.value(f.o, 1, j);
        }
        const std::vector<double> pred = euler_step(pde, row, 0);
        double err = 0;
        for (int j = 2; j < sc.grid.m - 2; ++j)
            err = std::max(err, std::abs(pred[static_cast<std::size_t>(j)] -
                                         truth[static_cast<std::size_t>(j)]));
        return err;
    };
    const double e_dt = one_step_error(3.0);
    const double e_half = one_step_error(1.5);
    const double ratio = e_dt / e_half;
    CHECK(ratio > 1.7);
    CHECK(ratio < 2.3);
}

TEST_CASE("rollout with one step equals euler_step, flows through the learned relation") {
    DiscoveredPDE pde = identity_pde();
    pde.xi.values[0] = 0.5;
    // f_q returns 2*o + 1 regardless of x,t
    RationalMLP fq;
    fq.widths = {3, 1};
    Layer l;
    l.in_width = 3;
    l.out_width = 1;
    l.weights = {2.0, 0.0, 0.0};
    l.bias = {1.0};
    l.has_activation = false;
    fq.layers.push_back(std::move(l));
    pde.nets.f_q = fq;

    const std::vector<double> row(10, 10.0);
    const Rollout roll = rollout(pde, row, 0, 3);
    REQUIRE(roll.occupancy.size() == 3);
    const std::vector<double> one = euler_step(pde, row, 0);
    CHECK(roll.occupancy[0] == one);
    // occupancy advances by 0.5 per step; flow follows 2*o+1
    CHECK(roll.occupancy[2][4] == doctest::Approx(11.5).epsilon(1e-12));
    CHECK(roll.flow[0][0] == doctest::Approx(2 * 10.5 + 1).epsilon(1e-12));
    CHECK_THROWS_AS(rollout(pde, row, 0, 0), InputError);
}

TEST_CASE("rollout with frozen dynamics and a static relation predicts constant flow") {
    DiscoveredPDE pde = identity_pde();  // xi = 0
    RationalMLP fq = constant_net(3, 0.33);
    pde.nets.f_q = fq;
    const std::vector<double> row(10, 7.0);
    const Rollout roll = rollout(pde, row, 0, 5);
    for (const auto& flows : roll.flow)
        for (double q : flows) CHECK(q == doctest::Approx(0.33));
}

TEST_CASE("score identities") {
    const std::vector<double> truth{10, 20, 30, 40};
    CHECK(score(truth, truth, 1).rmse == 0.0);
    CHECK(score(truth, truth, 1).mape == 0.0);
    std::vector<double> off(truth);
    for (double& v : off) v += 2.0;
    const HorizonScore s = score(off, truth, 2);
    CHECK(s.rmse == doctest::Approx(2.0));
    CHECK(s.horizon == 2);
    CHECK(s.mape == doctest::Approx(100.0 * (2.0 / 10 + 2.0 / 20 + 2.0 / 30 + 2.0 / 40) / 4));
    // truths below the floor are excluded from MAPE
    const std::vector<double> small_truth{0.5, 20.0};
    const std::vector<double> pred{1.5, 22.0};
    CHECK(score(pred, small_truth, 1).mape == doctest::Approx(10.0));
    CHECK_THROWS_AS(score(std::vector<double>{}, std::vector<double>{}, 1), InputError);
    CHECK_THROWS_AS(score(pred, truth, 1), InputError);
}
