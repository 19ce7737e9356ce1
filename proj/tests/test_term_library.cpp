#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "tpd/term_library.hpp"

using namespace tpd;

namespace {

// independent brute-force enumeration: count all exponent tuples over nvars
// variables with total degree <= N
long brute_force_count(int nvars, int N) {
    long count = 0;
    std::vector<int> c(static_cast<std::size_t>(nvars), 0);
    while (true) {
        int total = 0;
        for (int e : c) total += e;
        if (total <= N) ++count;
        int k = 0;
        while (k < nvars) {
            if (++c[static_cast<std::size_t>(k)] <= N) break;
            c[static_cast<std::size_t>(k)] = 0;
            ++k;
        }
        if (k == nvars) break;
    }
    return count;
}

ExponentVector ev(std::initializer_list<int> exps) {
    ExponentVector e{};
    std::size_t k = 0;
    for (int x : exps) e.c[k++] = static_cast<std::uint8_t>(x);
    return e;
}

}  // namespace

TEST_CASE("library sizes match brute-force enumeration") {
    CHECK(brute_force_count(9, 1) == 10);
    CHECK(enumerate_terms(1, 2).size() == 10);
    CHECK(brute_force_count(9, 2) == 55);
    CHECK(enumerate_terms(2, 2).size() == 55);
    CHECK(brute_force_count(9, 3) == 220);
    CHECK(enumerate_terms(3, 2).size() == 220);
    CHECK(brute_force_count(6, 2) == 28);
    CHECK(enumerate_terms(2, 1).size() == 28);
    CHECK_THROWS_AS(enumerate_terms(0, 2), InputError);
    CHECK_THROWS_AS(enumerate_terms(2, 3), InputError);
}

TEST_CASE("ordering is graded-lexicographic, constant first, entries unique") {
    const TermLibrary lib = enumerate_terms(2, 2);
    CHECK(lib.terms[0] == ev({0, 0, 0, 0, 0, 0, 0, 0, 0}));
    CHECK(lib.terms[1] == ev({1, 0, 0, 0, 0, 0, 0, 0, 0}));  // o
    CHECK(lib.terms[2] == ev({0, 1, 0, 0, 0, 0, 0, 0, 0}));  // q
    CHECK(lib.terms[9] == ev({0, 0, 0, 0, 0, 0, 0, 0, 1}));  // v_xx
    CHECK(lib.terms[10] == ev({2, 0, 0, 0, 0, 0, 0, 0, 0})); // o^2
    CHECK(lib.terms[11] == ev({1, 1, 0, 0, 0, 0, 0, 0, 0})); // o q
    for (std::size_t h = 1; h < lib.size(); ++h)
        CHECK(lib.terms[h - 1].degree() <= lib.terms[h].degree());
    std::set<std::array<std::uint8_t, 9>> seen;
    for (const auto& t : lib.terms) seen.insert(t.c);
    CHECK(seen.size() == lib.size());
    long hits = 0;
    for (const auto& t : lib.terms)
        if (t == ev({1, 0, 0, 1, 0, 0, 0, 0, 0})) ++hits;
    CHECK(hits == 1);
    const TermLibrary lib1 = enumerate_terms(2, 1);
    for (const auto& t : lib1.terms) CHECK(t.c[6] + t.c[7] + t.c[8] == 0);
}

TEST_CASE("theta of the zero state keeps only the constant term") {
    const TermLibrary lib = enumerate_terms(2, 2);
    StateAtPoint s{};
    const auto theta = evaluate_theta(lib, s);
    CHECK(theta[0] == 1.0);
    for (std::size_t h = 1; h < theta.size(); ++h) CHECK(theta[h] == 0.0);
}

TEST_CASE("theta with only occupancy set") {
    const TermLibrary lib = enumerate_terms(2, 2);
    StateAtPoint s{};
    s.o = 2.0;
    const auto theta = evaluate_theta(lib, s);
    std::multiset<double> nonzero;
    for (double v : theta)
        if (v != 0.0) nonzero.insert(v);
    CHECK(nonzero == std::multiset<double>{1.0, 2.0, 4.0});
}

TEST_CASE("theta equals direct power-product recomputation") {
    const TermLibrary lib = enumerate_terms(2, 2);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
        std::array<double, 9> vars;
        for (double& v : vars) v = u(rng);
        std::vector<double> theta(lib.size());
        evaluate_theta(lib, vars, theta);
        for (std::size_t h = 0; h < lib.size(); ++h) {
            double direct = 1.0;
            for (int k = 0; k < 9; ++k)
                for (int e = 0; e < lib.terms[h].c[static_cast<std::size_t>(k)]; ++e)
                    direct *= vars[static_cast<std::size_t>(k)];
            CHECK(std::abs(theta[h] - direct) <= 1e-14 * std::max(1.0, std::abs(direct)));
        }
    }
}

TEST_CASE("theta is multiplicative under uniform state scaling") {
    const TermLibrary lib = enumerate_terms(2, 2);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    std::array<double, 9> vars;
    for (double& v : vars) v = u(rng);
    for (double s : {0.5, -1.3, 2.0}) {
        std::array<double, 9> scaled = vars;
        for (double& v : scaled) v *= s;
        std::vector<double> t0(lib.size()), t1(lib.size());
        evaluate_theta(lib, vars, t0);
        evaluate_theta(lib, scaled, t1);
        for (std::size_t h = 0; h < lib.size(); ++h) {
            const double expect = t0[h] * std::pow(s, lib.terms[h].degree());
            CHECK(t1[h] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("non-finite state is rejected") {
    const TermLibrary lib = enumerate_terms(2, 2);
    std::array<double, 9> vars{};
    vars[4] = std::numeric_limits<double>::infinity();
    std::vector<double> theta(lib.size());
    CHECK_THROWS_AS(evaluate_theta(lib, vars, theta), NumericError);
}

TEST_CASE("rhs identities") {
    const TermLibrary lib = enumerate_terms(2, 2);
    std::array<double, 9> vars{0.3, -1.0, 0.8, 2.0, 0.0, -0.5, 1.1, 0.4, -0.2};
    std::vector<double> theta(lib.size());
    evaluate_theta(lib, vars, theta);

    Coefficients zero = Coefficients::zeros(lib.size());
    CHECK(rhs(theta, zero) == 0.0);

    Coefficients onehot = Coefficients::zeros(lib.size());
    onehot.values[0] = 0.057;  // constant term
    CHECK(rhs(theta, onehot) == doctest::Approx(0.057).epsilon(1e-15));

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Coefficients x1 = Coefficients::zeros(lib.size());
    Coefficients x2 = Coefficients::zeros(lib.size());
    for (std::size_t h = 0; h < lib.size(); ++h) {
        x1.values[h] = u(rng);
        x2.values[h] = u(rng);
    }
    const double a = 0.7, b = -1.9;
    Coefficients mix = Coefficients::zeros(lib.size());
    for (std::size_t h = 0; h < lib.size(); ++h) mix.values[h] = a * x1.values[h] + b * x2.values[h];
    CHECK(rhs(theta, mix) ==
          doctest::Approx(a * rhs(theta, x1) + b * rhs(theta, x2)).epsilon(1e-12));

    Coefficients masked = x1;
    for (std::size_t h = 0; h < lib.size(); h += 2) masked.deactivate(h);
    double expect = 0;
    for (std::size_t h = 1; h < lib.size(); h += 2) expect += theta[h] * x1.values[h];
    CHECK(rhs(theta, masked) == doctest::Approx(expect).epsilon(1e-12));

    std::vector<double> short_theta(10);
    CHECK_THROWS_AS(rhs(short_theta, x1), InputError);
}

TEST_CASE("analytic partials of theta dot xi match finite differences") {
    const TermLibrary lib = enumerate_terms(2, 2);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    Coefficients xi = Coefficients::zeros(lib.size());
    for (std::size_t h = 0; h < lib.size(); ++h) xi.values[h] = u(rng);
    xi.deactivate(7);
    xi.deactivate(23);
    std::array<double, 9> vars;
    for (double& v : vars) v = u(rng);
    vars[2] = 0.0;  // exercise the zero-value branch

    const auto parts = theta_dot_xi_partials(lib, xi, vars);
    std::vector<double> theta(lib.size());
    for (int k = 0; k < 9; ++k) {
        const double h = 1e-7;
        auto f = [&](double delta) {
            std::array<double, 9> p = vars;
            p[static_cast<std::size_t>(k)] += delta;
            evaluate_theta(lib, p, theta);
            return rhs(theta, xi);
        };
        const double fd = (f(h) - f(-h)) / (2 * h);
        CHECK(parts[static_cast<std::size_t>(k)] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("format_pde prints active terms in library order") {
    const TermLibrary lib = enumerate_terms(2, 2);
    Coefficients xi = Coefficients::zeros(lib.size());
    std::fill(xi.active.begin(), xi.active.end(), 0);

    SUBCASE("single advection term") {
        const long long h = lib.index_of(ev({0, 0, 0, 1, 0, 0, 0, 0, 0}));
        xi.values[static_cast<std::size_t>(h)] = -0.014;
        xi.active[static_cast<std::size_t>(h)] = 1;
        CHECK(format_pde(lib, xi) == "o_t = -1.4e-02 o_x");
    }
    SUBCASE("empty active set") { CHECK(format_pde(lib, xi) == "o_t = 0"); }
    SUBCASE("several terms, squared factors, signs") {
        auto set = [&](std::initializer_list<int> exps, double value) {
            const long long h = lib.index_of(ev(exps));
            REQUIRE(h >= 0);
            xi.values[static_cast<std::size_t>(h)] = value;
            xi.active[static_cast<std::size_t>(h)] = 1;
        };
        set({0, 0, 0, 0, 0, 0, 0, 0, 0}, 0.057);
        set({0, 0, 0, 1, 0, 0, 0, 0, 0}, -0.014);
        set({0, 0, 0, 2, 0, 0, 0, 0, 0}, 0.26);
        CHECK(format_pde(lib, xi) == "o_t = 5.7e-02 - 1.4e-02 o_x + 2.6e-01 o_x^2");
    }
}

TEST_CASE("the reported equation round-trips through the parser") {
    // the full 24-term discovered table used for display testing
    const TermLibrary lib = enumerate_terms(2, 2);
    Coefficients xi = Coefficients::zeros(lib.size());
    std::fill(xi.active.begin(), xi.active.end(), 0);
    auto set = [&](std::initializer_list<int> exps, double value) {
        const long long h = lib.index_of(ev(exps));
        REQUIRE(h >= 0);
        xi.values[static_cast<std::size_t>(h)] = value;
        xi.active[static_cast<std::size_t>(h)] = 1;
    };
    set({0, 0, 0, 0, 0, 0, 0, 0, 0}, 5.7e-2);
    set({0, 0, 0, 1, 0, 0, 0, 0, 0}, -1.4e-2);
    set({0, 0, 0, 0, 0, 1, 0, 0, 0}, -1.6e-2);
    set({0, 0, 0, 0, 0, 0, 1, 0, 0}, -1.0e-2);
    set({0, 0, 0, 0, 0, 0, 0, 0, 1}, 2.3e-2);
    set({1, 0, 0, 1, 0, 0, 0, 0, 0}, -4.3e-2);
    set({1, 0, 0, 0, 0, 1, 0, 0, 0}, -5.6e-3);
    set({0, 1, 0, 1, 0, 0, 0, 0, 0}, -5.6e-3);
    set({0, 1, 0, 0, 0, 0, 0, 0, 1}, 3.5e-4);
    set({0, 0, 0, 2, 0, 0, 0, 0, 0}, 2.6e-1);
    set({0, 0, 0, 1, 0, 1, 0, 0, 0}, -3.7e-2);
    set({0, 0, 0, 1, 0, 0, 1, 0, 0}, -8.9e-2);
    set({0, 0, 0, 1, 0, 0, 0, 1, 0}, 1.0e-5);
    set({0, 0, 0, 1, 0, 0, 0, 0, 1}, -1.2e-2);
    set({0, 0, 0, 0, 1, 1, 0, 0, 0}, -4.7e-4);
    set({0, 0, 0, 0, 1, 0, 1, 0, 0}, 4.7e-4);
    set({0, 0, 0, 0, 1, 0, 0, 0, 1}, -2.3e-4);
    set({0, 0, 0, 0, 0, 2, 0, 0, 0}, 1.1e-2);
    set({0, 0, 0, 0, 0, 1, 1, 0, 0}, -3.6e-2);
    set({0, 0, 0, 0, 0, 1, 0, 0, 1}, 7.0e-4);
    set({0, 0, 0, 0, 0, 0, 2, 0, 0}, -3.2e-2);
    set({0, 0, 0, 0, 0, 0, 1, 1, 0}, -4.0e-5);
    set({0, 0, 0, 0, 0, 0, 1, 0, 1}, 2.6e-3);
    set({0, 0, 0, 0, 0, 0, 0, 0, 2}, 3.7e-3);
    CHECK(xi.active_count() == 24);

    const std::string eq = format_pde(lib, xi);
    const Coefficients parsed = parse_pde(eq, lib);
    REQUIRE(parsed.size() == xi.size());
    for (std::size_t h = 0; h < xi.size(); ++h) {
        CHECK(parsed.active[h] == xi.active[h]);
        if (xi.active[h]) CHECK(parsed.values[h] == doctest::Approx(xi.values[h]).epsilon(5e-2));
    }
    // the displayed values themselves survive exactly
    CHECK(format_pde(lib, parsed) == eq);
}

TEST_CASE("coefficient table carries full precision and activity") {
    const TermLibrary lib = enumerate_terms(2, 2);
    Coefficients xi = Coefficients::zeros(lib.size());
    xi.values[3] = 0.123456789012345;
    xi.deactivate(5);
    const auto rows = coefficient_table(lib, xi);
    CHECK(rows.size() == lib.size());
    CHECK(rows[3].value == 0.123456789012345);
    CHECK(rows[5].active == false);
    CHECK(rows[3].exponents == lib.terms[3]);
}

TEST_CASE("coefficients consistency checks") {
    Coefficients xi = Coefficients::zeros(4);
    CHECK(xi.consistent());
    xi.values[1] = 0.5;
    xi.active[1] = 0;
    CHECK_FALSE(xi.consistent());
    xi.deactivate(1);
    CHECK(xi.consistent());
    CHECK(xi.active_count() == 3);
}
