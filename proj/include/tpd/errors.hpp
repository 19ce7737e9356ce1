#pragma once

#include <stdexcept>
#include <string>

namespace tpd {

// Exit-code contract of the CLI: input errors map to exit 2, numerical
// failures to exit 1.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a rational activation denominator collapses below the health
// threshold. Carries the offending pre-activation value and, when known, the
// layer it occurred in.
struct ActivationError : NumericError {
    ActivationError(double input_value, int layer_index = -1)
        : NumericError(describe(input_value, layer_index)),
          input(input_value),
          layer(layer_index) {}

    double input;
    int layer;

  private:
    static std::string describe(double input_value, int layer_index) {
        std::string msg = "rational activation denominator degenerated at input " +
                          std::to_string(input_value);
        if (layer_index >= 0) msg += " (layer " + std::to_string(layer_index) + ")";
        return msg;
    }
};

}  // namespace tpd
