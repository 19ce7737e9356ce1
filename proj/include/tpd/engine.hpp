#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tpd/network.hpp"
#include "tpd/parallel.hpp"

namespace tpd {

// The nine right-hand-side inputs of the hidden dynamics plus the occupancy
// time derivative, all at one normalized (x,t).
struct StateAtPoint {
    double o = 0, q = 0, v = 0;
    double o_x = 0, q_x = 0, v_x = 0;
    double o_xx = 0, q_xx = 0, v_xx = 0;
    double o_t = 0;

    std::array<double, 9> features() const { return {o, q, v, o_x, q_x, v_x, o_xx, q_xx, v_xx}; }
    bool finite() const;
};

// dLoss/d(state field), the seed for reverse accumulation.
struct StateAdjoint {
    double o = 0, q = 0, v = 0;
    double o_x = 0, q_x = 0, v_x = 0;
    double o_xx = 0, q_xx = 0, v_xx = 0;
    double o_t = 0;
};

struct GridPoint {
    double x = 0, t = 0;
};

// Full keeps the mixed partial 2*dq/do/dphi * do/dx in the second-order
// assembly; Literal reproduces the printed chain/product-rule form that
// drops it.
enum class SecondOrderMode { Full, Literal };

// ---------------------------------------------------------------------------
// Pointwise derivative operations
// ---------------------------------------------------------------------------

Jet2 occupancy_jet(const RationalMLP& f_o, double x, double t);

// Chain/product-rule assembly from the network's own partials with respect
// to its (o, phi, lambda) inputs.
Jet2 flow_jet(const RationalMLP& f_q, const Jet2& occupancy, double x, double t,
              SecondOrderMode mode = SecondOrderMode::Full);
Jet2 speed_jet(const RationalMLP& f_v, const Jet2& occupancy, double x, double t,
               SecondOrderMode mode = SecondOrderMode::Full);

// Direct nested propagation of the composite (x,t) -> net(f_o(x,t), x, t):
// the second algebraic route the assembly is checked against.
Jet2 composite_jet(const RationalMLP& net, const Jet2& occupancy, double x, double t);

// Size of the mixed-partial contribution the Literal mode drops (diagnostic).
double second_order_mixed_gap(const RationalMLP& net, const Jet2& occupancy, double x, double t);

StateAtPoint state_at(const FieldTriplet& nets, double x, double t);

// ---------------------------------------------------------------------------
// Cached kernel and reverse accumulation
// ---------------------------------------------------------------------------

namespace detail {

struct ActCache {
    double s0, s1, s2, s3;  // sigma and derivatives at the pre-activation value
    double d0, d1, d2;      // denominator and derivatives (for coefficient grads)
    double pad = 0;
};

struct ParamOffsets {
    std::size_t w = 0, b = 0, a_num = 0, a_den = 0;
};

// Per-network forward cache: layer inputs, pre-activation jets, and the
// activation scalars needed by the reverse sweep.
struct NetCache {
    std::vector<std::vector<Jet2>> z;        // z[l] = inputs of layer l; z[L] = output
    std::vector<std::vector<Jet2>> u;        // u[l] = affine outputs of layer l
    std::vector<std::vector<ActCache>> act;  // act[l] for activation layers
    std::vector<Jet2> bar_cur, bar_prev;     // reverse sweep buffers
    std::vector<ParamOffsets> offsets;       // flat-parameter layout per layer
    std::size_t param_count = 0;

    void bind(const RationalMLP& net);
};

}  // namespace detail

// Scratch space for one in-flight point evaluation; reusable across points
// and epochs. Bound to the architecture, not the parameter values.
struct EngineWorkspace {
    detail::NetCache o, q, v;
    bool bound = false;

    void bind(const FieldTriplet& nets);
};

// Forward jet propagation through all three networks with caches retained
// for backewards passes. This is the production route: jets are exact, so the
// result carries the complete second-order composite derivatives.
StateAtPoint eval_state_cached(const FieldTriplet& nets, double x, double t, EngineWorkspace& ws);

// Reverse accumulation of d(loss)/d(parameters) given d(loss)/d(state).
// Gradient layout matches FieldTriplet::copy_params. Must be called with the
// workspace of the matching eval_state_cached call.
void backprop_state(const FieldTriplet& nets, const StateAdjoint& adj, EngineWorkspace& ws,
                    std::span<double> grad);

// Batch evaluation. Serial and OpenMP modes produce identical results.
void evaluate_states(const FieldTriplet& nets, std::span<const GridPoint> points,
                     std::span<StateAtPoint> out, par::Mode mode = par::default_mode());

// Gradient of a scalar loss written as a sum over points of terms built from
// engine-produced states. The caller supplies the outer derivative
// d(term)/d(state) per point; the engine handles everything below, including
// differentiation through the second-order jet production. Throws
// NumericError naming the parameter block if a gradient component is not
// finite.
std::vector<double> parameter_gradient(
    const FieldTriplet& nets, std::span<const GridPoint> points,
    const std::function<StateAdjoint(std::size_t, const StateAtPoint&)>& pointwise_adjoint,
    par::Mode mode = par::default_mode());

// Human-readable name of the parameter block that flat index k falls in,
// e.g. "f_q layer 2 weights".
std::string describe_param(const FieldTriplet& nets, std::size_t k);

}  // namespace tpd
