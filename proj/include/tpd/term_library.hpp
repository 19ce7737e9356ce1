#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpd/engine.hpp"
#include "tpd/errors.hpp"

namespace tpd {

// Exponents of (o, q, v, o_x, q_x, v_x, o_xx, q_xx, v_xx), in that fixed
// order.
struct ExponentVector {
    std::array<std::uint8_t, 9> c{};

    int degree() const {
        int d = 0;
        for (auto e : c) d += e;
        return d;
    }
    bool operator==(const ExponentVector&) const = default;
};

// The monomial observable dictionary. Ordering is graded-lexicographic
// (degree first, then lexicographic on the exponent tuple with earlier
// variables ranked higher), constant term first; the ordering is part of the
// coefficient-file contract.
struct TermLibrary {
    std::vector<ExponentVector> terms;
    int max_poly_order = 0;   // N
    int max_deriv_order = 2;  // M; M=1 restricts to the first six variables

    std::size_t size() const { return terms.size(); }
    // index of a term, or -1 if absent
    long long index_of(const ExponentVector& e) const;
};

TermLibrary enumerate_terms(int poly_order, int deriv_order = 2);

// Sparse coefficient vector over a library. Inactive entries hold exactly 0.
struct Coefficients {
    std::vector<double> values;
    std::vector<std::uint8_t> active;

    static Coefficients zeros(std::size_t n) {
        Coefficients c;
        c.values.assign(n, 0.0);
        c.active.assign(n, 1);
        return c;
    }
    std::size_t size() const { return values.size(); }
    std::size_t active_count() const;
    void deactivate(std::size_t h) {
        active[h] = 0;
        values[h] = 0.0;
    }
    bool consistent() const;  // inactive implies exactly zero
};

// Theta(x,t): every library monomial evaluated at one state, 0^0 := 1.
void evaluate_theta(const TermLibrary& lib, std::span<const double, 9> vars,
                    std::span<double> theta_out);
std::vector<double> evaluate_theta(const TermLibrary& lib, const StateAtPoint& s);

// d(Theta^T xi)/d(var_k) for the nine state variables, analytic monomial
// partials over active terms only. theta_scratch must hold lib.size() values
// of Theta already evaluated at the same state (unused entries ignored).
std::array<double, 9> theta_dot_xi_partials(const TermLibrary& lib, const Coefficients& xi,
                                            std::span<const double, 9> vars);

// Theta^T xi over active entries, fixed summation order.
double rhs(std::span<const double> theta, const Coefficients& xi);

// Default ASCII variable names for displaying and parsing equations.
const std::array<std::string, 9>& default_term_names();

// Human-readable equation over active terms (coefficients in scientific
// notation with 2 significant digits, library order), e.g.
// "o_t = -1.4e-02 o_x + 2.6e-01 o_x^2".
std::string format_pde(const TermLibrary& lib, const Coefficients& xi,
                       std::span<const std::string> names = default_term_names());

// Full-precision machine-readable table, one row per term.
struct CoefficientRow {
    ExponentVector exponents;
    double value;
    bool active;
};
std::vector<CoefficientRow> coefficient_table(const TermLibrary& lib, const Coefficients& xi);

// Parses a format_pde string back into a coefficient vector (displayed
// precision). Unknown names or malformed terms raise InputError.
Coefficients parse_pde(const std::string& equation, const TermLibrary& lib,
                       std::span<const std::string> names = default_term_names());

}  // namespace tpd
