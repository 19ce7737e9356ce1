#include "tpd/rational.hpp"

namespace tpd {

std::vector<double> polynomial_derivative(const std::vector<double>& coeffs) {
    if (coeffs.size() <= 1) return {0.0};
    std::vector<double> out(coeffs.size() - 1);
    for (std::size_t i = 1; i < coeffs.size(); ++i)
        out[i - 1] = static_cast<double>(i) * coeffs[i];
    return out;
}

std::array<double, 4> RationalActivation::derivatives(double m) const {
    const auto n1 = polynomial_derivative(num);
    const auto n2 = polynomial_derivative(n1);
    const auto n3 = polynomial_derivative(n2);
    const auto d1 = polynomial_derivative(den);
    const auto d2 = polynomial_derivative(d1);
    const auto d3 = polynomial_derivative(d2);

    const double D = horner(den, m);
    if (std::abs(D) < kDenominatorFloor) throw ActivationError(m);
    const double N = horner(num, m);
    const double Np = horner(n1, m), Npp = horner(n2, m), Nppp = horner(n3, m);
    const double Dp = horner(d1, m), Dpp = horner(d2, m), Dppp = horner(d3, m);

    // From N = sigma*D differentiated k times and solved for sigma^(k).
    const double s0 = N / D;
    const double s1 = (Np - s0 * Dp) / D;
    const double s2 = (Npp - 2.0 * s1 * Dp - s0 * Dpp) / D;
    const double s3 = (Nppp - 3.0 * s2 * Dp - 3.0 * s1 * Dpp - s0 * Dppp) / D;
    return {s0, s1, s2, s3};
}

RationalActivation RationalActivation::relu_approx(int r_num, int r_den, double half_range) {
    if (r_num != 3 || r_den != 2)
        throw InputError("relu_approx: only the type-(3,2) initialization is available");
    // Best (3,2) approximation of ReLU on [-1,1]; max error ~0.0219.
    const double a0 = 0.0218, a1 = 0.5, a2 = 1.5957, a3 = 1.1915;
    const double b0 = 1.0, b1 = 0.0, b2 = 2.383;
    const double s = half_range;
    // relu(s*y) = s*relu(y), so s*sigma(m/s) keeps the equioscillation on the
    // widened interval; the max error scales by s.
    RationalActivation act;
    act.num = {s * a0, a1, a2 / s, a3 / (s * s)};
    act.den = {b0, b1 / s, b2 / (s * s)};
    return act;
}

RationalActivation RationalActivation::identity() { return {{0.0, 1.0}, {1.0}}; }

RationalActivation RationalActivation::identity_pad(int r_num, int r_den) {
    RationalActivation act;
    act.num.assign(static_cast<std::size_t>(r_num) + 1, 0.0);
    act.den.assign(static_cast<std::size_t>(r_den) + 1, 0.0);
    act.num[1] = 1.0;
    act.den[0] = 1.0;
    return act;
}

RationalActivation RationalActivation::square_pad(int r_num, int r_den) {
    RationalActivation act;
    act.num.assign(static_cast<std::size_t>(r_num) + 1, 0.0);
    act.den.assign(static_cast<std::size_t>(r_den) + 1, 0.0);
    act.num[2] = 1.0;
    act.den[0] = 1.0;
    return act;
}

}  // namespace tpd
