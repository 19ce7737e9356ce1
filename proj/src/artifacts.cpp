#include "tpd/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tpd {

using json = nlohmann::json;

namespace {

json affine_to_json(const Affine& a) { return json{{"shift", a.shift}, {"scale", a.scale}}; }

Affine affine_from_json(const json& j) { return {j.at("shift").get<double>(), j.at("scale").get<double>()}; }

json norm_to_json(const NormalizationParams& n) {
    return json{{"x", affine_to_json(n.x)},
                {"t", affine_to_json(n.t)},
                {"o", affine_to_json(n.o)},
                {"q", affine_to_json(n.q)},
                {"v", affine_to_json(n.v)}};
}

NormalizationParams norm_from_json(const json& j) {
    NormalizationParams n;
    n.x = affine_from_json(j.at("x"));
    n.t = affine_from_json(j.at("t"));
    n.o = affine_from_json(j.at("o"));
    n.q = affine_from_json(j.at("q"));
    n.v = affine_from_json(j.at("v"));
    return n;
}

json grid_to_json(const SpatiotemporalGrid& g) {
    return json{{"x0", g.x0}, {"xm", g.xm}, {"dx", g.dx},
                {"t0", g.t0}, {"tm", g.tm}, {"dt", g.dt}};
}

SpatiotemporalGrid grid_from_json(const json& j) {
    return SpatiotemporalGrid::make(j.at("x0").get<double>(), j.at("xm").get<double>(),
                                    j.at("dx").get<double>(), j.at("t0").get<double>(),
                                    j.at("tm").get<double>(), j.at("dt").get<double>());
}

json mlp_to_json(const RationalMLP& net) {
    json layers = json::array();
    for (const Layer& l : net.layers) {
        json jl{{"in", l.in_width}, {"out", l.out_width}, {"weights", l.weights}, {"bias", l.bias}};
        if (l.has_activation)
            jl["activation"] = json{{"num", l.activation.num}, {"den", l.activation.den}};
        layers.push_back(std::move(jl));
    }
    return json{{"widths", net.widths}, {"layers", std::move(layers)}};
}

RationalMLP mlp_from_json(const json& j) {
    RationalMLP net;
    net.widths = j.at("widths").get<std::vector<int>>();
    for (const json& jl : j.at("layers")) {
        Layer l;
        l.in_width = jl.at("in").get<int>();
        l.out_width = jl.at("out").get<int>();
        l.weights = jl.at("weights").get<std::vector<double>>();
        l.bias = jl.at("bias").get<std::vector<double>>();
        l.has_activation = jl.contains("activation");
        if (l.has_activation) {
            l.activation.num = jl.at("activation").at("num").get<std::vector<double>>();
            l.activation.den = jl.at("activation").at("den").get<std::vector<double>>();
        }
        if (l.weights.size() != static_cast<std::size_t>(l.in_width) * l.out_width ||
            l.bias.size() != static_cast<std::size_t>(l.out_width))
            throw InputError("checkpoint: inconsistent layer shapes");
        net.layers.push_back(std::move(l));
    }
    return net;
}

json load_json_file(const std::string& path, const char* expected_format) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("'" + path + "' is not valid JSON: " + e.what());
    }
    if (j.value("format", "") != expected_format)
        throw InputError("'" + path + "': expected format '" + expected_format + "'");
    return j;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    json j{{"format", "tpd-checkpoint"},
           {"version", 1},
           {"networks",
            json{{"f_o", mlp_to_json(ckpt.nets.f_o)},
                 {"f_q", mlp_to_json(ckpt.nets.f_q)},
                 {"f_v", mlp_to_json(ckpt.nets.f_v)}}},
           {"normalization", norm_to_json(ckpt.norm)},
           {"grid", grid_to_json(ckpt.grid)}};
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    const json j = load_json_file(path, "tpd-checkpoint");
    Checkpoint ckpt;
    ckpt.nets.f_o = mlp_from_json(j.at("networks").at("f_o"));
    ckpt.nets.f_q = mlp_from_json(j.at("networks").at("f_q"));
    ckpt.nets.f_v = mlp_from_json(j.at("networks").at("f_v"));
    ckpt.norm = norm_from_json(j.at("normalization"));
    ckpt.grid = grid_from_json(j.at("grid"));
    return ckpt;
}

void save_coefficients(const std::string& path, const CoefficientsFile& file) {
    if (file.xi.size() != file.lib.size()) throw InputError("save_coefficients: length mismatch");
    json terms = json::array();
    for (std::size_t h = 0; h < file.lib.size(); ++h) {
        std::vector<int> exps(file.lib.terms[h].c.begin(), file.lib.terms[h].c.end());
        terms.push_back(json{{"exponents", exps},
                             {"value", file.xi.values[h]},
                             {"active", file.xi.active[h] != 0},
                             {"physical_value", denormalized_coefficient(
                                                    file.lib.terms[h], file.xi.values[h], file.norm)}});
    }
    json j{{"format", "tpd-coefficients"},
           {"version", 1},
           {"poly_order", file.lib.max_poly_order},
           {"deriv_order", file.lib.max_deriv_order},
           {"terms", std::move(terms)},
           {"normalization", norm_to_json(file.norm)}};
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << j.dump(1) << "\n";
}

CoefficientsFile load_coefficients(const std::string& path) {
    const json j = load_json_file(path, "tpd-coefficients");
    CoefficientsFile file;
    file.lib = enumerate_terms(j.at("poly_order").get<int>(), j.at("deriv_order").get<int>());
    file.norm = norm_from_json(j.at("normalization"));
    const json& terms = j.at("terms");
    if (terms.size() != file.lib.size())
        throw InputError("coefficients: term count does not match the library");
    file.xi = Coefficients::zeros(file.lib.size());
    for (std::size_t h = 0; h < terms.size(); ++h) {
        const auto exps = terms[h].at("exponents").get<std::vector<int>>();
        ExponentVector e;
        for (std::size_t k = 0; k < 9 && k < exps.size(); ++k)
            e.c[k] = static_cast<std::uint8_t>(exps[k]);
        if (!(e == file.lib.terms[h]))
            throw InputError("coefficients: term order does not match the library ordering");
        file.xi.values[h] = terms[h].at("value").get<double>();
        file.xi.active[h] = terms[h].at("active").get<bool>() ? 1 : 0;
        if (!file.xi.active[h] && file.xi.values[h] != 0.0)
            throw InputError("coefficients: inactive term with nonzero value");
    }
    return file;
}

double denormalized_coefficient(const ExponentVector& term, double normalized_value,
                                const NormalizationParams& norm) {
    // Normalized variable = lambda * centered physical variable, with lambda
    // depending on the variable kind; o_t_phys = (o_scale/t_scale) * o_t_norm.
    const double lx = norm.x.scale;
    const double lambda[9] = {1.0 / norm.o.scale,        1.0 / norm.q.scale,
                              1.0 / norm.v.scale,        lx / norm.o.scale,
                              lx / norm.q.scale,         lx / norm.v.scale,
                              lx * lx / norm.o.scale,    lx * lx / norm.q.scale,
                              lx * lx / norm.v.scale};
    double factor = norm.o.scale / norm.t.scale;
    for (int k = 0; k < 9; ++k)
        for (int e = 0; e < term.c[static_cast<std::size_t>(k)]; ++e) factor *= lambda[k];
    return normalized_value * factor;
}

DiscoveredPDE load_discovered(const std::string& artifact_dir) {
    const Checkpoint ckpt = load_checkpoint(artifact_dir + "/checkpoint.json");
    const CoefficientsFile coeff = load_coefficients(artifact_dir + "/coefficients.json");
    DiscoveredPDE pde;
    pde.lib = coeff.lib;
    pde.xi = coeff.xi;
    pde.nets = ckpt.nets;
    pde.norm = ckpt.norm;
    pde.grid = ckpt.grid;
    if (pde.xi.size() != pde.lib.size()) throw InputError("discovered model: coefficient length mismatch");
    return pde;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "' for checksumming");
    std::uint64_t hash = 1469598103934665603ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 1099511628211ULL;
        }
    }
    return hash;
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

namespace {

// compact viridis-like ramp
void colormap(double t, int& r, int& g, int& b) {
    static const double stops[6][3] = {{68, 1, 84},    {59, 82, 139},  {33, 145, 140},
                                       {94, 201, 98},  {210, 226, 27}, {253, 231, 37}};
    t = std::min(1.0, std::max(0.0, t)) * 5.0;
    const int i = std::min(4, static_cast<int>(t));
    const double f = t - i;
    r = static_cast<int>(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]));
    g = static_cast<int>(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]));
    b = static_cast<int>(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]));
}

}  // namespace

std::string render_heatmap_svg(const HeatmapSpec& spec, double cell) {
    const auto& vals = *spec.values;
    double lo = 1e300, hi = -1e300;
    for (double v : vals) {
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) hi = lo + 1;
    std::ostringstream out;
    const double w = spec.cols * cell, h = spec.rows * cell;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<g><text x=\"0\" y=\"-4\" font-size=\"10\" font-family=\"monospace\">%s</text>\n",
                  spec.title.c_str());
    out << buf;
    for (int i = 0; i < spec.rows; ++i) {
        for (int j = 0; j < spec.cols; ++j) {
            const double v = vals[static_cast<std::size_t>(i) * spec.cols + j];
            int r, g, b;
            if (std::isnan(v)) {
                r = g = b = 230;
            } else {
                colormap((v - lo) / (hi - lo), r, g, b);
            }
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                          "fill=\"rgb(%d,%d,%d)\"/>\n",
                          j * cell, i * cell, cell, cell, r, g, b);
            out << buf;
        }
    }
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"0\" y=\"0\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"black\" stroke-width=\"0.5\"/></g>\n",
                  w, h);
    out << buf;
    return out.str();
}

std::string render_loss_curves_svg(const TrainingTrace& trace) {
    const double W = 480, H = 160;
    std::ostringstream out;
    out << "<g><text x=\"0\" y=\"-4\" font-size=\"10\" font-family=\"monospace\">"
           "loss curves (log10) by epoch: l_o, l_q, l_v, l_pde</text>\n";
    const char* colors[4] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
    const std::size_t n = trace.records.size();
    if (n < 2) return out.str() + "</g>\n";
    auto get = [&](std::size_t i, int k) {
        const EpochRecord& r = trace.records[i];
        const double v = k == 0 ? r.l_o : k == 1 ? r.l_q : k == 2 ? r.l_v : r.l_pde;
        return std::log10(std::max(v, 1e-12));
    };
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 4; ++k) {
            lo = std::min(lo, get(i, k));
            hi = std::max(hi, get(i, k));
        }
    if (hi <= lo) hi = lo + 1;
    char buf[128];
    for (int k = 0; k < 4; ++k) {
        out << "<polyline fill=\"none\" stroke=\"" << colors[k] << "\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < n; ++i) {
            const double x = W * static_cast<double>(i) / static_cast<double>(n - 1);
            const double y = H - H * (get(i, k) - lo) / (hi - lo);
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", x, y);
            out << buf;
        }
        out << "\"/>\n";
    }
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"0\" y=\"0\" width=\"%.0f\" height=\"%.0f\" fill=\"none\" "
                  "stroke=\"black\" stroke-width=\"0.5\"/></g>\n",
                  W, H);
    out << buf;
    return out.str();
}

}  // namespace tpd
