#pragma once

#include <cstdint>
#include <string>

#include "tpd/predictor.hpp"
#include "tpd/trainer.hpp"

namespace tpd {

// Versioned JSON checkpoint: widths, weights, biases, rational coefficients,
// normalization, grid. Stable across versions of the tool.
struct Checkpoint {
    FieldTriplet nets;
    NormalizationParams norm;
    SpatiotemporalGrid grid;
};
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Coefficient file: one row per library term plus normalization metadata.
struct CoefficientsFile {
    TermLibrary lib;
    Coefficients xi;
    NormalizationParams norm;
};
void save_coefficients(const std::string& path, const CoefficientsFile& file);
CoefficientsFile load_coefficients(const std::string& path);

// Physical-unit view of a normalized coefficient: the degree-aware scaling
// law applied per term (value variables enter centered, i.e. as o - mean(o)).
double denormalized_coefficient(const ExponentVector& term, double normalized_value,
                                const NormalizationParams& norm);

DiscoveredPDE load_discovered(const std::string& artifact_dir);

std::uint64_t fnv1a64_file(const std::string& path);

// Static SVG building blocks for the report command.
struct HeatmapSpec {
    std::string title;
    int rows = 0, cols = 0;
    const std::vector<double>* values = nullptr;  // row-major, NaN = missing
};
std::string render_heatmap_svg(const HeatmapSpec& spec, double cell = 3.0);
std::string render_loss_curves_svg(const TrainingTrace& trace);

}  // namespace tpd
