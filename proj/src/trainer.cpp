#include "tpd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace tpd {

void Schedule::validate() const {
    if (burn_in_epochs < 0 || main_epochs < 0 || refine_epochs < 0)
        throw InputError("schedule: epoch counts must be >= 0");
    if (threshold < 0) throw InputError("schedule: threshold must be >= 0");
    if (threshold_frequency < 1) throw InputError("schedule: threshold frequency must be >= 1");
    if (learning_rate <= 0 || lr_shrink <= 0 || lr_step < 1)
        throw InputError("schedule: invalid learning-rate settings");
}

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::BurnIn: return "burn-in";
        case Phase::Main: return "main";
        case Phase::Refine: return "refine";
    }
    return "?";
}

void write_trace_csv(std::ostream& out, const TrainingTrace& trace) {
    out << "epoch,phase,l_o,l_q,l_v,l_pde,l_spar,total,active_terms,lr,threshold_event\n";
    char buf[320];
    for (const EpochRecord& r : trace.records) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%d\n",
                      r.epoch, phase_name(r.phase), r.l_o, r.l_q, r.l_v, r.l_pde, r.l_spar, r.total,
                      r.active_terms, r.lr, r.threshold_event ? 1 : 0);
        out << buf;
    }
}

TrainingTrace read_trace_csv(std::istream& in) {
    TrainingTrace trace;
    std::string line;
    if (!std::getline(in, line)) throw InputError("trace: empty file");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EpochRecord r;
        char phase[32];
        int event = 0;
        if (std::sscanf(line.c_str(), "%d,%31[^,],%lg,%lg,%lg,%lg,%lg,%lg,%d,%lg,%d", &r.epoch,
                        phase, &r.l_o, &r.l_q, &r.l_v, &r.l_pde, &r.l_spar, &r.total,
                        &r.active_terms, &r.lr, &event) != 11)
            throw InputError("trace: malformed row '" + line + "'");
        r.threshold_event = event != 0;
        const std::string p = phase;
        r.phase = p == "burn-in" ? Phase::BurnIn : (p == "main" ? Phase::Main : Phase::Refine);
        trace.records.push_back(r);
    }
    return trace;
}

TrainingSet build_training_set(const SensorDataset& physical, CollocationMode mode) {
    NormalizedDataset nd = normalize(physical);
    TrainingSet ts;
    ts.norm = nd.params;
    ts.grid = physical.grid;
    ts.warnings = nd.warnings;
    ts.obs_points.reserve(nd.data.observations.size());
    ts.obs_values.reserve(nd.data.observations.size());
    for (const SensorObservation& obs : nd.data.observations) {
        ts.obs_points.push_back({ts.norm.x.apply(physical.grid.station_position(obs.station)),
                                 ts.norm.t.apply(physical.grid.step_time(obs.time_index))});
        ts.obs_values.push_back({obs.occupancy, obs.flow, obs.speed});
    }
    if (mode == CollocationMode::Observed) {
        ts.collocation = ts.obs_points;
    } else {
        ts.collocation.reserve(physical.grid.point_count());
        for (int i = 0; i < physical.grid.n; ++i)
            for (int j = 0; j < physical.grid.m; ++j)
                ts.collocation.push_back({ts.norm.x.apply(physical.grid.station_position(j)),
                                          ts.norm.t.apply(physical.grid.step_time(i))});
    }
    return ts;
}

DataLosses data_loss(const FieldTriplet& nets, const TrainingSet& ts, par::Mode mode) {
    const std::size_t n = ts.obs_points.size();
    if (n == 0) throw InputError("data_loss: no observed points");
    const std::size_t nblocks = par::block_count(n);
    std::vector<std::array<double, 3>> parts(nblocks, {0, 0, 0});
    par::for_each_block(n, mode, [&](std::size_t b, std::size_t begin, std::size_t end) {
        EngineWorkspace ws;
        ws.bind(nets);
        for (std::size_t i = begin; i < end; ++i) {
            const StateAtPoint s = eval_state_cached(nets, ts.obs_points[i].x, ts.obs_points[i].t, ws);
            const auto& tgt = ts.obs_values[i];
            parts[b][0] += (s.o - tgt[0]) * (s.o - tgt[0]);
            parts[b][1] += (s.q - tgt[1]) * (s.q - tgt[1]);
            parts[b][2] += (s.v - tgt[2]) * (s.v - tgt[2]);
        }
    });
    par::tree_fold(parts, [](std::array<double, 3>& a, const std::array<double, 3>& b) {
        for (int k = 0; k < 3; ++k) a[static_cast<std::size_t>(k)] += b[static_cast<std::size_t>(k)];
    });
    const double inv = 1.0 / static_cast<double>(n);
    return {parts[0][0] * inv, parts[0][1] * inv, parts[0][2] * inv};
}

double pde_loss(const FieldTriplet& nets, const TermLibrary& lib, const Coefficients& xi,
                std::span<const GridPoint> collocation, par::Mode mode) {
    const std::size_t n = collocation.size();
    if (n == 0) throw InputError("pde_loss: no collocation points");
    if (xi.size() != lib.size()) throw InputError("pde_loss: xi length mismatch");
    const std::size_t nblocks = par::block_count(n);
    std::vector<double> parts(nblocks, 0.0);
    par::for_each_block(n, mode, [&](std::size_t b, std::size_t begin, std::size_t end) {
        EngineWorkspace ws;
        ws.bind(nets);
        std::vector<double> theta(lib.size());
        for (std::size_t i = begin; i < end; ++i) {
            const StateAtPoint s = eval_state_cached(nets, collocation[i].x, collocation[i].t, ws);
            const auto f = s.features();
            evaluate_theta(lib, std::span<const double, 9>(f), theta);
            const double r = s.o_t - rhs(theta, xi);
            parts[b] += r * r;
        }
    });
    par::tree_fold(parts, [](double& a, double b) { a += b; });
    return parts[0] / static_cast<double>(n);
}

double sparsity_loss(const Coefficients& xi) {
    double acc = 0;
    for (std::size_t h = 0; h < xi.size(); ++h)
        if (xi.active[h]) acc += std::abs(xi.values[h]);
    return acc;
}

Coefficients threshold_xi(const Coefficients& xi, double tau) {
    if (tau < 0) throw InputError("threshold_xi: tau must be >= 0");
    Coefficients out = xi;
    for (std::size_t h = 0; h < out.size(); ++h)
        if (out.active[h] && std::abs(out.values[h]) < tau) out.deactivate(h);
    return out;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

struct Adam {
    std::vector<double> m, v;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step_count = 0;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> theta, std::span<const double> g, double lr) {
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

// one unified pass: data-loss seeds and PDE-residual seeds share the state
// evaluation whenever a point serves both roles
struct PointTask {
    GridPoint p;
    long obs_index = -1;  // index into obs_values, or -1
    bool collocate = false;
};

}  // namespace

TrainResult train(const SensorDataset& dataset, const Schedule& schedule,
                  const LossWeights& weights, const TrainOptions& options) {
    schedule.validate();
    const TrainingSet ts = build_training_set(dataset, options.collocation);

    TrainResult res;
    res.lib = enumerate_terms(options.poly_order, options.deriv_order);
    res.nets = make_field_triplet(options.widths_o, options.widths_q, options.widths_v,
                                  options.r_num, options.r_den, schedule.seed);
    res.xi = Coefficients::zeros(res.lib.size());
    res.norm = ts.norm;
    res.grid = ts.grid;
    res.trace.warnings = ts.warnings;

    const std::size_t n_net = res.nets.parameter_count();
    const std::size_t H = res.lib.size();
    const std::size_t n_all = n_net + H;

    // task list: every collocation point, with observation targets attached
    // where they exist
    std::vector<PointTask> tasks;
    {
        auto key = [](const GridPoint& p) { return std::make_pair(p.x, p.t); };
        std::map<std::pair<double, double>, long> obs_at;
        for (std::size_t i = 0; i < ts.obs_points.size(); ++i)
            obs_at[key(ts.obs_points[i])] = static_cast<long>(i);
        tasks.reserve(ts.collocation.size());
        std::vector<char> obs_used(ts.obs_points.size(), 0);
        for (const GridPoint& p : ts.collocation) {
            PointTask task;
            task.p = p;
            task.collocate = true;
            const auto it = obs_at.find(key(p));
            if (it != obs_at.end()) {
                task.obs_index = it->second;
                obs_used[static_cast<std::size_t>(it->second)] = 1;
            }
            tasks.push_back(task);
        }
        // observation points outside the collocation set still need data loss
        for (std::size_t i = 0; i < ts.obs_points.size(); ++i)
            if (!obs_used[i]) tasks.push_back({ts.obs_points[i], static_cast<long>(i), false});
    }

    const std::size_t n_obs = ts.obs_points.size();
    const std::size_t n_col = ts.collocation.size();
    const std::size_t nblocks = par::block_count(tasks.size());

    std::vector<EngineWorkspace> workspaces(nblocks);
    for (auto& ws : workspaces) ws.bind(res.nets);
    std::vector<std::vector<double>> grad_blocks(nblocks, std::vector<double>(n_all, 0.0));
    // per block: sum sq o, q, v, pde
    std::vector<std::array<double, 4>> loss_blocks(nblocks);

    std::vector<double> theta_params(n_all, 0.0);
    res.nets.copy_params(std::span<double>(theta_params).subspan(0, n_net));
    Adam adam(n_all);

    const int total = schedule.total_epochs();
    res.trace.records.reserve(static_cast<std::size_t>(total));
    bool warned_all_thresholded = false;

    for (int epoch = 1; epoch <= total; ++epoch) {
        const Phase phase = epoch <= schedule.burn_in_epochs ? Phase::BurnIn
                            : epoch <= schedule.burn_in_epochs + schedule.main_epochs
                                ? Phase::Main
                                : Phase::Refine;
        const double lr = schedule.learning_rate *
                          std::pow(schedule.lr_shrink, (epoch - 1) / schedule.lr_step);

        for (auto& g : grad_blocks) std::fill(g.begin(), g.end(), 0.0);
        std::fill(loss_blocks.begin(), loss_blocks.end(), std::array<double, 4>{0, 0, 0, 0});

        const double wo = 2.0 * weights.eta_o / static_cast<double>(n_obs);
        const double wq = 2.0 * weights.eta_q / static_cast<double>(n_obs);
        const double wv = 2.0 * weights.eta_v / static_cast<double>(n_obs);
        const double wpde = 2.0 * weights.eta_pde / static_cast<double>(n_col);

        par::for_each_block(tasks.size(), options.mode,
                            [&](std::size_t b, std::size_t begin, std::size_t end) {
            EngineWorkspace& ws = workspaces[b];
            std::span<double> gnet(grad_blocks[b].data(), n_net);
            double* gxi = grad_blocks[b].data() + n_net;
            std::array<double, 4>& lb = loss_blocks[b];
            std::vector<double> theta(H);
            for (std::size_t k = begin; k < end; ++k) {
                const PointTask& task = tasks[k];
                const StateAtPoint s = eval_state_cached(res.nets, task.p.x, task.p.t, ws);
                StateAdjoint adj;
                if (task.obs_index >= 0) {
                    const auto& tgt = ts.obs_values[static_cast<std::size_t>(task.obs_index)];
                    const double eo = s.o - tgt[0];
                    const double eq = s.q - tgt[1];
                    const double ev = s.v - tgt[2];
                    lb[0] += eo * eo;
                    lb[1] += eq * eq;
                    lb[2] += ev * ev;
                    adj.o += wo * eo;
                    adj.q += wq * eq;
                    adj.v += wv * ev;
                }
                if (task.collocate) {
                    const auto f = s.features();
                    evaluate_theta(res.lib, std::span<const double, 9>(f), theta);
                    const double r = s.o_t - rhs(theta, res.xi);
                    lb[3] += r * r;
                    const double g = wpde * r;
                    adj.o_t += g;
                    const auto parts =
                        theta_dot_xi_partials(res.lib, res.xi, std::span<const double, 9>(f));
                    adj.o -= g * parts[0];
                    adj.q -= g * parts[1];
                    adj.v -= g * parts[2];
                    adj.o_x -= g * parts[3];
                    adj.q_x -= g * parts[4];
                    adj.v_x -= g * parts[5];
                    adj.o_xx -= g * parts[6];
                    adj.q_xx -= g * parts[7];
                    adj.v_xx -= g * parts[8];
                    for (std::size_t h = 0; h < H; ++h)
                        if (res.xi.active[h]) gxi[h] -= g * theta[h];
                }
                backprop_state(res.nets, adj, ws, gnet);
            }
        });

        par::tree_fold(grad_blocks, [](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        });
        par::tree_fold(loss_blocks, [](std::array<double, 4>& a, const std::array<double, 4>& b) {
            for (int k = 0; k < 4; ++k) a[static_cast<std::size_t>(k)] += b[static_cast<std::size_t>(k)];
        });

        EpochRecord rec;
        rec.epoch = epoch;
        rec.phase = phase;
        rec.lr = lr;
        rec.l_o = loss_blocks[0][0] / static_cast<double>(n_obs);
        rec.l_q = loss_blocks[0][1] / static_cast<double>(n_obs);
        rec.l_v = loss_blocks[0][2] / static_cast<double>(n_obs);
        rec.l_pde = loss_blocks[0][3] / static_cast<double>(n_col);
        rec.l_spar = sparsity_loss(res.xi);
        rec.total = weights.eta_o * rec.l_o + weights.eta_q * rec.l_q + weights.eta_v * rec.l_v +
                    weights.eta_pde * rec.l_pde;
        if (phase == Phase::Main) rec.total += weights.eta_spar * rec.l_spar;

        if (!std::isfinite(rec.total)) {
            res.trace.records.push_back(rec);
            throw TrainingFailure("training aborted: non-finite loss at epoch " +
                                      std::to_string(epoch),
                                  res.trace);
        }

        std::vector<double>& grad = grad_blocks[0];
        if (phase == Phase::Main) {
            for (std::size_t h = 0; h < H; ++h) {
                if (!res.xi.active[h]) continue;
                const double x = res.xi.values[h];
                grad[n_net + h] += weights.eta_spar * (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
            }
        }
        for (std::size_t h = 0; h < H; ++h)
            if (!res.xi.active[h]) grad[n_net + h] = 0.0;

        adam.step(theta_params, grad, lr);

        for (std::size_t h = 0; h < H; ++h) {
            if (res.xi.active[h])
                res.xi.values[h] = theta_params[n_net + h];
            else
                theta_params[n_net + h] = 0.0;
        }
        res.nets.load_params(std::span<const double>(theta_params).subspan(0, n_net));

        bool event = false;
        if (phase == Phase::Main && schedule.threshold > 0) {
            const int main_epoch = epoch - schedule.burn_in_epochs;
            if (main_epoch % schedule.threshold_frequency == 0) {
                event = true;
                res.xi = threshold_xi(res.xi, schedule.threshold);
                for (std::size_t h = 0; h < H; ++h) {
                    if (!res.xi.active[h]) {
                        theta_params[n_net + h] = 0.0;
                        adam.m[n_net + h] = 0.0;
                        adam.v[n_net + h] = 0.0;
                    }
                }
                if (res.xi.active_count() == 0 && !warned_all_thresholded) {
                    warned_all_thresholded = true;
                    res.trace.warnings.push_back(
                        "all coefficients thresholded to zero; the discovered dynamics are o_t = 0");
                }
            }
        }
        rec.active_terms = static_cast<int>(res.xi.active_count());
        rec.threshold_event = event;
        res.trace.records.push_back(rec);
    }

    return res;
}

}  // namespace tpd
