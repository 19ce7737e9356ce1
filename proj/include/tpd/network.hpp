#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tpd/errors.hpp"
#include "tpd/jet.hpp"
#include "tpd/rational.hpp"

namespace tpd {

struct Layer {
    int in_width = 0;
    int out_width = 0;
    std::vector<double> weights;  // row-major, out_width x in_width
    std::vector<double> bias;     // out_width
    RationalActivation activation;
    bool has_activation = true;   // the output layer is affine
};

// Feed-forward network with one trainable rational activation per hidden
// layer (shared across the layer's units, independent across layers).
struct RationalMLP {
    std::vector<int> widths;
    std::vector<Layer> layers;

    int input_width() const { return widths.empty() ? 0 : widths.front(); }
    int output_width() const { return widths.empty() ? 0 : widths.back(); }

    std::size_t linear_parameter_count() const;
    std::size_t activation_parameter_count() const;
    std::size_t parameter_count() const;  // linear + activation

    // Reference evaluation path, generic over the scalar type (double for
    // values, Jet2 for input derivatives). Scalar output networks only.
    template <class T>
    T forward(std::span<const T> input) const {
        if (static_cast<int>(input.size()) != input_width())
            throw InputError("forward: input width mismatch");
        std::vector<T> cur(input.begin(), input.end());
        std::vector<T> next;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const Layer& layer = layers[l];
            next.assign(static_cast<std::size_t>(layer.out_width), T(0.0));
            for (int j = 0; j < layer.out_width; ++j) {
                T acc(layer.bias[static_cast<std::size_t>(j)]);
                const double* w = &layer.weights[static_cast<std::size_t>(j) * layer.in_width];
                for (int i = 0; i < layer.in_width; ++i) acc += cur[static_cast<std::size_t>(i)] * T(w[i]);
                if (layer.has_activation) {
                    try {
                        acc = layer.activation(acc);
                    } catch (const ActivationError& e) {
                        throw ActivationError(e.input, static_cast<int>(l));
                    }
                }
                next[static_cast<std::size_t>(j)] = acc;
            }
            cur.swap(next);
        }
        return cur.at(0);
    }

    // Flat parameter access. Layout per layer: weights, bias, activation
    // numerator, activation denominator; layers in order. The layout is the
    // contract for checkpoints, gradients, and optimizer state.
    std::size_t copy_params(std::span<double> out) const;
    std::size_t load_params(std::span<const double> in);
};

RationalMLP make_mlp(const std::vector<int>& widths, int r_num, int r_den, std::uint64_t seed);

struct FieldValues {
    double o = 0, q = 0, v = 0;
};

// The three field approximators: f_o(x,t), f_q(o,x,t), f_v(o,x,t), all in
// normalized coordinates.
struct FieldTriplet {
    RationalMLP f_o, f_q, f_v;

    std::size_t parameter_count() const {
        return f_o.parameter_count() + f_q.parameter_count() + f_v.parameter_count();
    }
    std::size_t copy_params(std::span<double> out) const;
    std::size_t load_params(std::span<const double> in);
};

FieldTriplet make_field_triplet(const std::vector<int>& widths_o, const std::vector<int>& widths_q,
                                const std::vector<int>& widths_v, int r_num, int r_den,
                                std::uint64_t seed);

// Default architecture: widths [2,50,100,100,50,1] for f_o and
// [3,50,100,100,50,1] for f_q and f_v, rational type (3,2).
FieldTriplet init_networks(std::uint64_t seed);

// o = f_o(x,t); q and v consume the freshly reconstructed o, never an
// observation. Inputs are normalized coordinates; values outside [-1,1] are
// permitted (extrapolation) — use in_normalized_domain to warn.
FieldValues reconstruct_fields(const FieldTriplet& nets, double x, double t);
bool in_normalized_domain(double x, double t);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace tpd
