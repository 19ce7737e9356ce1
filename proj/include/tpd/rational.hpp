#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tpd/errors.hpp"
#include "tpd/jet.hpp"

namespace tpd {

namespace detail {
inline double scalar_value(double x) { return x; }
inline double scalar_value(const Jet2& x) { return x.v; }
}  // namespace detail

// Trainable rational activation sigma(m) = N(m)/D(m) with N of order r_N and
// D of order r_D (coefficients stored in ascending powers). Both polynomials
// are evaluated with Horner's scheme; a denominator magnitude below
// kDenominatorFloor signals activation degeneration and raises
// ActivationError rather than clamping, since a clamped value would corrupt
// every derivative downstream.
struct RationalActivation {
    std::vector<double> num;  // a[0..r_N]
    std::vector<double> den;  // b[0..r_D]

    static constexpr double kDenominatorFloor = 1e-30;

    int numerator_order() const { return static_cast<int>(num.size()) - 1; }
    int denominator_order() const { return static_cast<int>(den.size()) - 1; }
    std::size_t coefficient_count() const { return num.size() + den.size(); }

    template <class T>
    static T horner(const std::vector<double>& coeffs, const T& m) {
        T acc(coeffs.back());
        for (std::size_t i = coeffs.size() - 1; i-- > 0;) acc = acc * m + T(coeffs[i]);
        return acc;
    }

    template <class T>
    T operator()(const T& m) const {
        const T n = horner(num, m);
        const T d = horner(den, m);
        if (std::abs(detail::scalar_value(d)) < kDenominatorFloor)
            throw ActivationError(detail::scalar_value(m));
        return n / d;
    }

    // sigma, sigma', sigma'', sigma''' at m via the quotient-rule recurrences
    // on Horner-evaluated N, D and their derivatives (avoids the cancellation
    // of the fully expanded quotient form).
    std::array<double, 4> derivatives(double m) const;

    // The published best type-(3,2) rational approximation of ReLU on [-1,1],
    // rescaled by positive homogeneity to [-half_range, half_range].
    static RationalActivation relu_approx(int r_num = 3, int r_den = 2, double half_range = 6.0);

    static RationalActivation identity();           // type (1,0)
    static RationalActivation identity_pad(int r_num, int r_den);
    static RationalActivation square_pad(int r_num, int r_den);  // sigma(m) = m^2
};

// Polynomial derivative in ascending-coefficient form, used by the quotient
// recurrences and by tests.
std::vector<double> polynomial_derivative(const std::vector<double>& coeffs);

}  // namespace tpd
