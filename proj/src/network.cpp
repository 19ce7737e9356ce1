#include "tpd/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace tpd {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 step; decorrelates per-network streams from one user seed
    std::uint64_t z = seed + (stream + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::size_t RationalMLP::linear_parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers)
        n += static_cast<std::size_t>(l.in_width) * l.out_width + l.out_width;
    return n;
}

std::size_t RationalMLP::activation_parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers)
        if (l.has_activation) n += l.activation.coefficient_count();
    return n;
}

std::size_t RationalMLP::parameter_count() const {
    return linear_parameter_count() + activation_parameter_count();
}

std::size_t RationalMLP::copy_params(std::span<double> out) const {
    std::size_t k = 0;
    auto put = [&](const std::vector<double>& v) {
        std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(k));
        k += v.size();
    };
    for (const Layer& l : layers) {
        put(l.weights);
        put(l.bias);
        if (l.has_activation) {
            put(l.activation.num);
            put(l.activation.den);
        }
    }
    return k;
}

std::size_t RationalMLP::load_params(std::span<const double> in) {
    std::size_t k = 0;
    auto get = [&](std::vector<double>& v) {
        std::copy(in.begin() + static_cast<std::ptrdiff_t>(k),
                  in.begin() + static_cast<std::ptrdiff_t>(k + v.size()), v.begin());
        k += v.size();
    };
    for (Layer& l : layers) {
        get(l.weights);
        get(l.bias);
        if (l.has_activation) {
            get(l.activation.num);
            get(l.activation.den);
        }
    }
    return k;
}

RationalMLP make_mlp(const std::vector<int>& widths, int r_num, int r_den, std::uint64_t seed) {
    if (widths.size() < 2) throw InputError("make_mlp: need at least input and output widths");
    for (int w : widths)
        if (w < 1) throw InputError("make_mlp: widths must be positive");

    RationalMLP net;
    net.widths = widths;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer;
        layer.in_width = widths[l];
        layer.out_width = widths[l + 1];
        layer.weights.resize(static_cast<std::size_t>(layer.in_width) * layer.out_width);
        layer.bias.assign(static_cast<std::size_t>(layer.out_width), 0.0);
        // variance-preserving fan-in scaling
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(layer.in_width)));
        for (double& w : layer.weights) w = dist(rng);
        layer.has_activation = (l + 2 < widths.size());
        if (layer.has_activation) layer.activation = RationalActivation::relu_approx(r_num, r_den);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::size_t FieldTriplet::copy_params(std::span<double> out) const {
    std::size_t k = f_o.copy_params(out);
    k += f_q.copy_params(out.subspan(k));
    k += f_v.copy_params(out.subspan(k));
    return k;
}

std::size_t FieldTriplet::load_params(std::span<const double> in) {
    std::size_t k = f_o.load_params(in);
    k += f_q.load_params(in.subspan(k));
    k += f_v.load_params(in.subspan(k));
    return k;
}

FieldTriplet make_field_triplet(const std::vector<int>& widths_o, const std::vector<int>& widths_q,
                                const std::vector<int>& widths_v, int r_num, int r_den,
                                std::uint64_t seed) {
    if (widths_o.front() != 2 || widths_q.front() != 3 || widths_v.front() != 3)
        throw InputError("field triplet requires input widths 2 (f_o), 3 (f_q), 3 (f_v)");
    FieldTriplet t;
    t.f_o = make_mlp(widths_o, r_num, r_den, derive_seed(seed, 0));
    t.f_q = make_mlp(widths_q, r_num, r_den, derive_seed(seed, 1));
    t.f_v = make_mlp(widths_v, r_num, r_den, derive_seed(seed, 2));
    return t;
}

FieldTriplet init_networks(std::uint64_t seed) {
    return make_field_triplet({2, 50, 100, 100, 50, 1}, {3, 50, 100, 100, 50, 1},
                              {3, 50, 100, 100, 50, 1}, 3, 2, seed);
}

bool in_normalized_domain(double x, double t) {
    return x >= -1.0 && x <= 1.0 && t >= -1.0 && t <= 1.0;
}

FieldValues reconstruct_fields(const FieldTriplet& nets, double x, double t) {
    const std::array<double, 2> in_o{x, t};
    const double o = nets.f_o.forward<double>(in_o);
    const std::array<double, 3> in_qv{o, x, t};
    FieldValues out;
    out.o = o;
    out.q = nets.f_q.forward<double>(in_qv);
    out.v = nets.f_v.forward<double>(in_qv);
    return out;
}

}  // namespace tpd
