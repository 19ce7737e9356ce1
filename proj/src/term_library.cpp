#include "tpd/term_library.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tpd {

long long TermLibrary::index_of(const ExponentVector& e) const {
    for (std::size_t h = 0; h < terms.size(); ++h)
        if (terms[h] == e) return static_cast<long long>(h);
    return -1;
}

namespace {

void enumerate_degree(int degree, int var, int nvars, ExponentVector& cur,
                      std::vector<ExponentVector>& out) {
    if (var == nvars - 1) {
        cur.c[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(degree);
        out.push_back(cur);
        cur.c[static_cast<std::size_t>(var)] = 0;
        return;
    }
    for (int e = degree; e >= 0; --e) {
        cur.c[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(e);
        enumerate_degree(degree - e, var + 1, nvars, cur, out);
    }
    cur.c[static_cast<std::size_t>(var)] = 0;
}

}  // namespace

TermLibrary enumerate_terms(int poly_order, int deriv_order) {
    if (poly_order < 1) throw InputError("enumerate_terms: polynomial order must be >= 1");
    if (deriv_order != 1 && deriv_order != 2)
        throw InputError("enumerate_terms: derivative order must be 1 or 2");
    TermLibrary lib;
    lib.max_poly_order = poly_order;
    lib.max_deriv_order = deriv_order;
    const int nvars = deriv_order == 2 ? 9 : 6;
    ExponentVector cur{};
    // graded order: all terms of degree d before degree d+1; within a degree,
    // lexicographic with earlier variables first
    for (int d = 0; d <= poly_order; ++d) enumerate_degree(d, 0, nvars, cur, lib.terms);
    return lib;
}

std::size_t Coefficients::active_count() const {
    std::size_t n = 0;
    for (auto a : active) n += a != 0;
    return n;
}

bool Coefficients::consistent() const {
    if (values.size() != active.size()) return false;
    for (std::size_t h = 0; h < values.size(); ++h)
        if (!active[h] && values[h] != 0.0) return false;
    return true;
}

void evaluate_theta(const TermLibrary& lib, std::span<const double, 9> vars,
                    std::span<double> theta_out) {
    if (theta_out.size() != lib.size()) throw InputError("evaluate_theta: output size mismatch");
    for (double v : vars)
        if (!std::isfinite(v)) throw NumericError("evaluate_theta: non-finite state variable");
    // power tables: pow[k][e] = vars[k]^e with 0^0 = 1
    const int N = lib.max_poly_order;
    double pw[9][16];
    for (int k = 0; k < 9; ++k) {
        pw[k][0] = 1.0;
        for (int e = 1; e <= N; ++e) pw[k][e] = pw[k][e - 1] * vars[static_cast<std::size_t>(k)];
    }
    for (std::size_t h = 0; h < lib.terms.size(); ++h) {
        double prod = 1.0;
        const auto& c = lib.terms[h].c;
        for (int k = 0; k < 9; ++k)
            if (c[static_cast<std::size_t>(k)]) prod *= pw[k][c[static_cast<std::size_t>(k)]];
        theta_out[h] = prod;
    }
}

std::vector<double> evaluate_theta(const TermLibrary& lib, const StateAtPoint& s) {
    std::vector<double> theta(lib.size());
    const auto f = s.features();
    evaluate_theta(lib, std::span<const double, 9>(f), theta);
    return theta;
}

std::array<double, 9> theta_dot_xi_partials(const TermLibrary& lib, const Coefficients& xi,
                                            std::span<const double, 9> vars) {
    if (xi.size() != lib.size()) throw InputError("theta_dot_xi_partials: length mismatch");
    const int N = lib.max_poly_order;
    double pw[9][16];
    for (int k = 0; k < 9; ++k) {
        pw[k][0] = 1.0;
        for (int e = 1; e <= N; ++e) pw[k][e] = pw[k][e - 1] * vars[static_cast<std::size_t>(k)];
    }
    std::array<double, 9> out{};
    for (std::size_t h = 0; h < lib.terms.size(); ++h) {
        if (!xi.active[h] || xi.values[h] == 0.0) continue;
        const auto& c = lib.terms[h].c;
        for (int k = 0; k < 9; ++k) {
            const int ck = c[static_cast<std::size_t>(k)];
            if (!ck) continue;
            // d/dv_k of the monomial: c_k * v_k^(c_k-1) * product of the others
            double part = ck * pw[k][ck - 1];
            for (int j = 0; j < 9; ++j)
                if (j != k && c[static_cast<std::size_t>(j)])
                    part *= pw[j][c[static_cast<std::size_t>(j)]];
            out[static_cast<std::size_t>(k)] += xi.values[h] * part;
        }
    }
    return out;
}

double rhs(std::span<const double> theta, const Coefficients& xi) {
    if (theta.size() != xi.size()) throw InputError("rhs: Theta and xi lengths differ");
    double acc = 0.0;
    for (std::size_t h = 0; h < theta.size(); ++h)
        if (xi.active[h]) acc += theta[h] * xi.values[h];
    return acc;
}

const std::array<std::string, 9>& default_term_names() {
    static const std::array<std::string, 9> names = {"o",    "q",    "v",    "o_x", "q_x",
                                                     "v_x",  "o_xx", "q_xx", "v_xx"};
    return names;
}

namespace {

std::string monomial_string(const ExponentVector& e, std::span<const std::string> names) {
    std::string out;
    for (int k = 0; k < 9; ++k) {
        const int ck = e.c[static_cast<std::size_t>(k)];
        if (!ck) continue;
        if (!out.empty()) out += " ";
        out += names[static_cast<std::size_t>(k)];
        if (ck > 1) out += "^" + std::to_string(ck);
    }
    return out;
}

std::string coeff_string(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", value);
    return buf;
}

}  // namespace

std::string format_pde(const TermLibrary& lib, const Coefficients& xi,
                       std::span<const std::string> names) {
    if (xi.size() != lib.size()) throw InputError("format_pde: length mismatch");
    std::string out = "o_t =";
    bool first = true;
    for (std::size_t h = 0; h < lib.size(); ++h) {
        if (!xi.active[h] || xi.values[h] == 0.0) continue;
        const double value = xi.values[h];
        if (first) {
            out += " " + coeff_string(value);
            first = false;
        } else {
            out += value < 0 ? " - " : " + ";
            out += coeff_string(std::abs(value));
        }
        const std::string mono = monomial_string(lib.terms[h], names);
        if (!mono.empty()) out += " " + mono;
    }
    if (first) out += " 0";
    return out;
}

std::vector<CoefficientRow> coefficient_table(const TermLibrary& lib, const Coefficients& xi) {
    if (xi.size() != lib.size()) throw InputError("coefficient_table: length mismatch");
    std::vector<CoefficientRow> rows(lib.size());
    for (std::size_t h = 0; h < lib.size(); ++h)
        rows[h] = {lib.terms[h], xi.values[h], xi.active[h] != 0};
    return rows;
}

Coefficients parse_pde(const std::string& equation, const TermLibrary& lib,
                       std::span<const std::string> names) {
    const auto eq = equation.find('=');
    if (eq == std::string::npos) throw InputError("parse_pde: missing '='");
    std::istringstream in(equation.substr(eq + 1));
    Coefficients xi = Coefficients::zeros(lib.size());
    std::fill(xi.active.begin(), xi.active.end(), 0);

    std::string tok;
    double sign = 1.0;
    bool expect_coeff = true;
    double coeff = 0.0;
    ExponentVector expo{};
    bool have_term = false;

    auto flush = [&]() {
        if (!have_term) return;
        const long long h = lib.index_of(expo);
        if (h < 0) throw InputError("parse_pde: term not in library");
        xi.values[static_cast<std::size_t>(h)] = sign * coeff;
        xi.active[static_cast<std::size_t>(h)] = 1;
        expo = ExponentVector{};
        have_term = false;
    };

    while (in >> tok) {
        if (tok == "+" || tok == "-") {
            flush();
            sign = tok == "-" ? -1.0 : 1.0;
            expect_coeff = true;
            continue;
        }
        if (expect_coeff) {
            std::size_t pos = 0;
            coeff = std::stod(tok, &pos);
            if (pos != tok.size()) throw InputError("parse_pde: malformed coefficient '" + tok + "'");
            have_term = true;
            expect_coeff = false;
            continue;
        }
        // variable token, possibly with ^power
        std::string name = tok;
        int power = 1;
        if (const auto caret = tok.find('^'); caret != std::string::npos) {
            name = tok.substr(0, caret);
            power = std::stoi(tok.substr(caret + 1));
        }
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw InputError("parse_pde: unknown variable '" + name + "'");
        expo.c[static_cast<std::size_t>(it - names.begin())] += static_cast<std::uint8_t>(power);
    }
    flush();
    // "o_t = 0" parses to the empty active set
    if (xi.active_count() == 1) {
        const long long h0 = lib.index_of(ExponentVector{});
        if (h0 >= 0 && xi.active[static_cast<std::size_t>(h0)] &&
            xi.values[static_cast<std::size_t>(h0)] == 0.0)
            xi.deactivate(static_cast<std::size_t>(h0));
    }
    return xi;
}

}  // namespace tpd
