// Copyright 2026 The mblsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mblsim/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "mblsim/evolve.hpp"
#include "mblsim/fermion.hpp"
#include "mblsim/model.hpp"

namespace mblsim {

using nlohmann::json;

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(n);
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace {

constexpr std::size_t kTrajectoryChunk = 25;
constexpr double kTimeSlack = 1e-12;
constexpr std::uint64_t kTrajectoryTag = 0x7472616a;
constexpr std::uint64_t kShotTag = 0x73686f74;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(c), hi(c)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string tag(double v) { return fmt::format("{}", v); }

enum class Dynamics { closed, decoherent };

/// What to record at every grid time.
struct Probe {
    std::vector<std::size_t> entropy_sites;
    std::vector<std::vector<std::size_t>> matrix_sites;
    std::vector<std::size_t> snapshot_indices;
    bool post_select = true;
    std::optional<std::uint64_t> n_shots;
};

struct Record {
    std::vector<std::vector<double>> p_raw;  // [time][site]
    std::vector<std::vector<double>> p_sel;
    std::vector<double> entropy;
    std::vector<std::vector<Eigen::MatrixXcd>> matrices;  // [snapshot][subset]
};

struct Context {
    std::size_t n = 0;
    Config initial = 0;
    std::size_t excitations = 0;
    TimeGrid grid{std::vector<double>{0.0}};
    Probe probe;
    EvolutionSpec evolution;
    std::vector<CollapseChannel> channels;
    std::vector<int> snapshot_slot;  // grid index -> snapshot slot or -1
    BasisPtr full;
    BasisPtr sector;
    std::size_t workers = 1;
};

struct Plans {
    std::optional<PartialTracePlan> entropy;
    std::vector<PartialTracePlan> matrices;

    Plans(const SectorBasis& basis, const Probe& probe) {
        if (!probe.entropy_sites.empty()) entropy.emplace(basis, probe.entropy_sites);
        for (const auto& s : probe.matrix_sites) matrices.emplace_back(basis, s);
    }
};

/// Sums of state contributions per grid time. Linear in the state, so
/// trajectory averages and ensemble sums commute with it.
struct Accumulator {
    std::vector<Eigen::VectorXd> dist;
    std::vector<double> total;
    std::vector<double> selected;
    std::vector<Eigen::MatrixXcd> ent;
    std::vector<std::vector<Eigen::MatrixXcd>> snap;

    explicit Accumulator(const Context& ctx) {
        const std::size_t T = ctx.grid.size();
        dist.assign(T, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ctx.full->dim())));
        total.assign(T, 0.0);
        selected.assign(T, 0.0);
        if (!ctx.probe.entropy_sites.empty()) {
            const auto d = Eigen::Index{1} << ctx.probe.entropy_sites.size();
            ent.assign(T, Eigen::MatrixXcd::Zero(d, d));
        }
        for (std::size_t s = 0; s < ctx.probe.snapshot_indices.size(); ++s) {
            std::vector<Eigen::MatrixXcd> row;
            for (const auto& sites : ctx.probe.matrix_sites) {
                const auto d = Eigen::Index{1} << sites.size();
                row.push_back(Eigen::MatrixXcd::Zero(d, d));
            }
            snap.push_back(std::move(row));
        }
    }

    void merge(const Accumulator& o) {
        for (std::size_t t = 0; t < dist.size(); ++t) {
            dist[t] += o.dist[t];
            total[t] += o.total[t];
            selected[t] += o.selected[t];
        }
        for (std::size_t t = 0; t < ent.size(); ++t) ent[t] += o.ent[t];
        for (std::size_t s = 0; s < snap.size(); ++s) {
            for (std::size_t j = 0; j < snap[s].size(); ++j) snap[s][j] += o.snap[s][j];
        }
    }

    void add_distribution(std::size_t t, const SectorBasis& basis, const Eigen::VectorXcd& psi, double w) {
        for (Eigen::Index a = 0; a < psi.size(); ++a) dist[t](basis.state(static_cast<std::size_t>(a))) += w * std::norm(psi(a));
        total[t] += w;
    }

    void add_distribution(std::size_t t, const SectorBasis& basis, const Eigen::MatrixXcd& rho, double w) {
        for (Eigen::Index a = 0; a < rho.rows(); ++a) dist[t](basis.state(static_cast<std::size_t>(a))) += w * rho(a, a).real();
        total[t] += w;
    }

    template <typename State>
    void add_reduced(std::size_t t, const Context& ctx, const Plans& plans, const State& s, double w) {
        selected[t] += w;
        if (plans.entropy) ent[t] += w * (*plans.entropy)(s);
        const int slot = ctx.snapshot_slot[t];
        if (slot >= 0) {
            for (std::size_t j = 0; j < plans.matrices.size(); ++j) {
                snap[static_cast<std::size_t>(slot)][j] += w * plans.matrices[j](s);
            }
        }
    }
};

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& m) { return 0.5 * (m + m.adjoint()); }

std::vector<double> marginals(const Eigen::VectorXd& dist, std::size_t n, std::optional<std::size_t> sector) {
    std::vector<double> p(n, 0.0);
    double norm = 0.0;
    for (Eigen::Index c = 0; c < dist.size(); ++c) {
        const auto cfg = static_cast<Config>(c);
        if (sector && static_cast<std::size_t>(std::popcount(cfg)) != *sector) continue;
        const double w = dist(c);
        if (w == 0.0) continue;
        norm += w;
        for (std::size_t i = 0; i < n; ++i) {
            if (occupied(cfg, n, i)) p[i] += w;
        }
    }
    if (!(norm > 0.0)) throw std::runtime_error("post-selection discarded every outcome");
    for (auto& v : p) v /= norm;
    return p;
}

Record finalize(const Context& ctx, const Accumulator& acc, std::uint64_t shot_seed) {
    const std::size_t T = ctx.grid.size();
    Record r;
    r.p_raw.resize(T);
    r.p_sel.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        Eigen::VectorXd dist = acc.dist[t] / acc.dist[t].sum();
        if (ctx.probe.n_shots) {
            std::vector<double> d(dist.data(), dist.data() + dist.size());
            const auto counts = sample_shots(d, *ctx.probe.n_shots, derive_seed(shot_seed, t, 0));
            Eigen::VectorXd empirical = Eigen::VectorXd::Zero(dist.size());
            for (const auto& [c, k] : counts) empirical(c) = static_cast<double>(k);
            dist = empirical;
        }
        r.p_raw[t] = marginals(dist, ctx.n, std::nullopt);
        r.p_sel[t] = marginals(dist, ctx.n, ctx.excitations);
    }
    if (!ctx.probe.entropy_sites.empty()) {
        for (std::size_t t = 0; t < T; ++t) {
            if (!(acc.selected[t] > 0.0)) throw std::runtime_error("no trajectory survived post-selection");
            r.entropy.push_back(von_neumann_entropy(hermitian_part(acc.ent[t] / acc.selected[t])));
        }
    }
    for (std::size_t s = 0; s < acc.snap.size(); ++s) {
        const double w = acc.selected[ctx.probe.snapshot_indices[s]];
        if (!(w > 0.0)) throw std::runtime_error("no trajectory survived post-selection");
        std::vector<Eigen::MatrixXcd> row;
        for (const auto& m : acc.snap[s]) row.push_back(hermitian_part(m / w));
        r.matrices.push_back(std::move(row));
    }
    return r;
}

Record simulate_closed(const Context& ctx, const SpinModel& model, std::uint64_t shot_seed) {
    const Plans plans(*ctx.sector, ctx.probe);
    const auto H = build_hamiltonian(model, ctx.sector);
    const Propagator U(H);
    const Eigen::VectorXcd psi0 = QuantumState::basis_state(ctx.sector, ctx.initial).vector();
    Accumulator acc(ctx);
    for (std::size_t t = 0; t < ctx.grid.size(); ++t) {
        const Eigen::VectorXcd psi = U.apply(psi0, ctx.grid[t]);
        acc.add_distribution(t, *ctx.sector, psi, 1.0);
        acc.add_reduced(t, ctx, plans, psi, 1.0);
    }
    return finalize(ctx, acc, shot_seed);
}

Record simulate_dense(const Context& ctx, const SpinModel& model, std::uint64_t shot_seed) {
    const Plans plans(*ctx.full, ctx.probe);
    const auto H = build_hamiltonian(model, ctx.full);
    const auto rho0 = QuantumState::basis_state(ctx.full, ctx.initial).as_density();
    std::vector<bool> in_sector(ctx.full->dim());
    for (std::size_t a = 0; a < in_sector.size(); ++a) {
        in_sector[a] = static_cast<std::size_t>(std::popcount(ctx.full->state(a))) == ctx.excitations;
    }
    Accumulator acc(ctx);
    lindblad_evolve(H, rho0, ctx.channels, ctx.grid, DenseRk4{ctx.evolution.step_us},
                    [&](std::size_t t, const QuantumState& s) {
                        const Eigen::MatrixXcd& rho = s.matrix();
                        acc.add_distribution(t, *ctx.full, rho, 1.0);
                        if (!ctx.probe.post_select) {
                            acc.add_reduced(t, ctx, plans, rho, 1.0);
                            return;
                        }
                        Eigen::MatrixXcd projected = rho;
                        for (Eigen::Index a = 0; a < projected.rows(); ++a) {
                            if (in_sector[static_cast<std::size_t>(a)]) continue;
                            projected.row(a).setZero();
                            projected.col(a).setZero();
                        }
                        const double weight = projected.trace().real();
                        if (!(weight > 0.0)) throw std::runtime_error("post-selection discarded the whole state");
                        acc.add_reduced(t, ctx, plans, Eigen::MatrixXcd(projected / weight), 1.0);
                    });
    return finalize(ctx, acc, shot_seed);
}

Record simulate_trajectories(const Context& ctx, const SpinModel& model, std::uint64_t traj_seed,
                             std::uint64_t shot_seed) {
    const Plans plans(*ctx.full, ctx.probe);
    const auto H = build_hamiltonian(model, ctx.full);
    const QuantumJumpUnraveler unraveler(H, ctx.channels);
    const auto psi0 = QuantumState::basis_state(ctx.full, ctx.initial);
    const std::size_t n_traj = ctx.evolution.n_traj;
    const std::size_t n_chunks = (n_traj + kTrajectoryChunk - 1) / kTrajectoryChunk;
    std::vector<Accumulator> parts(n_chunks, Accumulator(ctx));
    parallel_for(n_chunks, ctx.workers, [&](std::size_t c) {
        Accumulator& acc = parts[c];
        const std::size_t end = std::min(n_traj, (c + 1) * kTrajectoryChunk);
        for (std::size_t j = c * kTrajectoryChunk; j < end; ++j) {
            unraveler.run(psi0, ctx.grid, j, traj_seed, [&](std::size_t t, const QuantumState& s) {
                const Eigen::VectorXcd& psi = s.vector();
                acc.add_distribution(t, *ctx.full, psi, 1.0);
                bool keep = true;
                if (ctx.probe.post_select) {
                    // A trajectory occupies one excitation block at a time.
                    for (Eigen::Index a = 0; a < psi.size(); ++a) {
                        if (std::norm(psi(a)) > 0.0) {
                            keep = static_cast<std::size_t>(std::popcount(ctx.full->state(static_cast<std::size_t>(a)))) ==
                                   ctx.excitations;
                            break;
                        }
                    }
                }
                if (keep) acc.add_reduced(t, ctx, plans, psi, 1.0);
            });
        }
    });
    for (std::size_t c = 1; c < n_chunks; ++c) parts[0].merge(parts[c]);
    return finalize(ctx, parts[0], shot_seed);
}

struct Item {
    std::size_t bound_index;
    std::size_t realization;  // 0-based
};

/// Simulates every (bound, realization) pair; records are stored by item index.
std::vector<Record> simulate_ensemble(const ExperimentConfig& config, const Context& ctx, Dynamics dynamics,
                                      std::vector<Item>& items_out) {
    const SpinModel base = derive_couplings(config.device);
    std::vector<Item> items;
    for (std::size_t b = 0; b < config.disorder_bounds.size(); ++b) {
        for (std::size_t k = 0; k < config.n_realizations; ++k) items.push_back({b, k});
    }
    auto model_of = [&](const Item& it) {
        const DisorderSpec spec{config.disorder_bounds[it.bound_index], config.n_realizations, config.seed};
        return base.with_disorder(sample_disorder(spec, it.realization + 1, ctx.n));
    };
    auto shot_seed_of = [&](const Item& it) { return derive_seed(config.seed, kShotTag, it.bound_index, it.realization); };

    std::vector<Record> records(items.size());
    if (dynamics == Dynamics::decoherent && config.evolution.mode == EvolutionMode::lindblad_trajectory) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto traj_seed = derive_seed(config.seed, kTrajectoryTag, items[i].realization);
            records[i] = simulate_trajectories(ctx, model_of(items[i]), traj_seed, shot_seed_of(items[i]));
        }
    } else {
        parallel_for(items.size(), config.workers, [&](std::size_t i) {
            records[i] = dynamics == Dynamics::closed ? simulate_closed(ctx, model_of(items[i]), shot_seed_of(items[i]))
                                                      : simulate_dense(ctx, model_of(items[i]), shot_seed_of(items[i]));
        });
    }
    items_out = std::move(items);
    return records;
}

Context make_context(const ExperimentConfig& config, TimeGrid grid, Probe probe) {
    validate(config);
    Context ctx;
    ctx.n = config.device.n_sites;
    ctx.initial = config.initial_state.config(ctx.n);
    ctx.excitations = static_cast<std::size_t>(std::popcount(ctx.initial));
    ctx.grid = std::move(grid);
    ctx.probe = std::move(probe);
    ctx.evolution = config.evolution;
    ctx.channels = collapse_channels(config.device);
    ctx.snapshot_slot.assign(ctx.grid.size(), -1);
    for (std::size_t s = 0; s < ctx.probe.snapshot_indices.size(); ++s) {
        ctx.snapshot_slot[ctx.probe.snapshot_indices[s]] = static_cast<int>(s);
    }
    ctx.full = make_full_basis(ctx.n);
    ctx.sector = make_sector_basis(ctx.n, ctx.excitations);
    ctx.workers = config.workers;
    return ctx;
}

Dynamics configured_dynamics(const ExperimentConfig& config) {
    return config.evolution.mode == EvolutionMode::unitary_sector ? Dynamics::closed : Dynamics::decoherent;
}

/// Grid indices of the records belonging to bound `b`, in realization order.
std::vector<std::size_t> indices_of_bound(const std::vector<Item>& items, std::size_t b) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].bound_index == b) out.push_back(i);
    }
    return out;
}

std::vector<ObservableSeries> site_series(const std::vector<Record>& records, const std::vector<std::size_t>& idx,
                                          const std::vector<double>& times, std::size_t n, bool selected) {
    std::vector<ObservableSeries> out;
    for (std::size_t site = 0; site < n; ++site) {
        std::vector<std::vector<double>> values;
        for (auto i : idx) {
            const auto& p = selected ? records[i].p_sel : records[i].p_raw;
            std::vector<double> row;
            for (const auto& pt : p) row.push_back(pt[site]);
            values.push_back(std::move(row));
        }
        out.push_back(ensemble_stats(times, std::move(values)));
    }
    return out;
}

std::vector<std::size_t> window_indices(const std::vector<double>& times, double lo, double hi) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= lo - kTimeSlack && times[i] <= hi + kTimeSlack) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> occupied_sites(Config c, std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (occupied(c, n, i)) out.push_back(i);
    }
    return out;
}

EntropyBound entropy_bound(const ExperimentConfig& config, double bound, const std::vector<double>& times,
                           std::vector<std::vector<double>> values,
                           const std::vector<const Eigen::MatrixXcd*>& final_blocks) {
    EntropyBound eb;
    eb.bound = bound;
    eb.half_chain = ensemble_stats(times, std::move(values));
    if (!final_blocks.empty()) {
        const std::size_t k = config.subsystem.size();
        for (std::size_t N = 1; N <= k; ++N) {
            std::vector<double> per;
            for (const auto* m : final_blocks) per.push_back(site_averaged_entropy(*m, N));
            Summary s;
            for (double v : per) s.mean += v;
            s.mean /= static_cast<double>(per.size());
            for (double v : per) s.sd += (v - s.mean) * (v - s.mean);
            s.sd = std::sqrt(s.sd / static_cast<double>(per.size()));
            eb.site_averaged.push_back(s);
        }
    }
    if (config.window_lo > 0.0) eb.fit = logfit_entropy(eb.half_chain, config.window_lo, config.window_hi);
    return eb;
}

std::vector<EntropyBound> entropy_bounds(const ExperimentConfig& config, const TimeGrid& grid, Dynamics dynamics) {
    Probe probe;
    probe.entropy_sites = config.subsystem;
    probe.matrix_sites = {config.subsystem};
    probe.snapshot_indices = {grid.size() - 1};
    probe.post_select = config.post_select;
    const Context ctx = make_context(config, grid, probe);
    std::vector<Item> items;
    const auto records = simulate_ensemble(config, ctx, dynamics, items);
    std::vector<EntropyBound> out;
    for (std::size_t b = 0; b < config.disorder_bounds.size(); ++b) {
        std::vector<std::vector<double>> values;
        std::vector<const Eigen::MatrixXcd*> blocks;
        for (auto i : indices_of_bound(items, b)) {
            values.push_back(records[i].entropy);
            blocks.push_back(&records[i].matrices[0][0]);
        }
        out.push_back(entropy_bound(config, config.disorder_bounds[b], grid.times(), std::move(values), blocks));
    }
    return out;
}

TimeGrid merged_grid(const TimeGrid& base, const std::vector<double>& extra) {
    std::vector<double> t = base.times();
    t.insert(t.end(), extra.begin(), extra.end());
    std::sort(t.begin(), t.end());
    std::vector<double> out;
    for (double v : t) {
        if (out.empty() || v > out.back() + kTimeSlack) out.push_back(v);
    }
    return TimeGrid(std::move(out));
}

std::size_t grid_index(const TimeGrid& grid, double t) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid[i] - t) <= kTimeSlack) return i;
    }
    throw std::logic_error("time not on grid");
}

std::vector<EthBound> eth_bounds(const ExperimentConfig& config, const TimeGrid& grid, Dynamics dynamics) {
    Probe probe;
    const auto& sub = config.subsystem;
    probe.matrix_sites = {{sub[0]}, {sub[0], sub[1]}, sub};
    for (double t : config.snapshot_times) probe.snapshot_indices.push_back(grid_index(grid, t));
    probe.post_select = config.post_select;
    const Context ctx = make_context(config, grid, probe);
    std::vector<Item> items;
    const auto records = simulate_ensemble(config, ctx, dynamics, items);

    const auto initial_state = QuantumState::basis_state(ctx.full, ctx.initial);
    std::vector<Eigen::MatrixXcd> initial;
    for (const auto& sites : probe.matrix_sites) initial.push_back(partial_trace(initial_state, sites));

    std::vector<EthBound> out;
    for (std::size_t b = 0; b < config.disorder_bounds.size(); ++b) {
        const auto idx = indices_of_bound(items, b);
        const auto k = static_cast<double>(idx.size());
        EthBound eb;
        eb.bound = config.disorder_bounds[b];
        for (std::size_t s = 0; s < config.snapshot_times.size(); ++s) {
            for (std::size_t j = 0; j < probe.matrix_sites.size(); ++j) {
                ReducedSnapshot snap;
                snap.time = config.snapshot_times[s];
                snap.sites = probe.matrix_sites[j];
                const auto d = initial[j].rows();
                snap.mean = Eigen::MatrixXcd::Zero(d, d);
                snap.mean_of_abs = Eigen::MatrixXd::Zero(d, d);
                for (auto i : idx) {
                    snap.mean += records[i].matrices[s][j];
                    snap.mean_of_abs += records[i].matrices[s][j].cwiseAbs();
                }
                snap.mean /= k;
                snap.mean_of_abs /= k;
                snap.mean = hermitian_part(snap.mean);
                snap.abs_of_mean = snap.mean.cwiseAbs();
                snap.initial = initial[j];
                const Eigen::MatrixXcd thermal = Eigen::MatrixXcd::Identity(d, d) / static_cast<double>(d);
                snap.distance_thermal = trace_distance(snap.mean, thermal);
                snap.distance_initial = trace_distance(snap.mean, snap.initial);
                eb.snapshots.push_back(std::move(snap));
            }
        }
        out.push_back(std::move(eb));
    }
    return out;
}

}  // namespace

ImbalanceResult compute_imbalance(const ExperimentConfig& config) {
    Probe probe;
    probe.post_select = config.post_select;
    if (config.shots.enabled) probe.n_shots = config.shots.n_shots;
    const Context ctx = make_context(config, config.time_grid.build(), probe);
    std::vector<Item> items;
    const auto records = simulate_ensemble(config, ctx, configured_dynamics(config), items);

    const bool domain = config.initial_state.kind == InitialKind::domain_wall;
    ImbalanceResult result;
    result.times = ctx.grid.times();
    const auto window = window_indices(result.times, config.window_lo, config.window_hi);
    for (std::size_t b = 0; b < config.disorder_bounds.size(); ++b) {
        const auto idx = indices_of_bound(items, b);
        ImbalanceBound ib;
        ib.bound = config.disorder_bounds[b];
        ib.probabilities = site_series(records, idx, result.times, ctx.n, config.post_select);
        ib.raw_probabilities = site_series(records, idx, result.times, ctx.n, false);

        std::vector<std::vector<double>> imb;
        std::vector<std::vector<double>> dn;
        for (auto i : idx) {
            const auto& p = config.post_select ? records[i].p_sel : records[i].p_raw;
            std::vector<double> ri;
            std::vector<double> rd;
            for (const auto& pt : p) {
                const SiteProbabilities sp{pt};
                ri.push_back(domain ? imbalance_domain(sp) : imbalance_neel(sp));
                rd.push_back(delta_n(sp));
            }
            imb.push_back(std::move(ri));
            dn.push_back(std::move(rd));
        }
        ib.imbalance = ensemble_stats(result.times, std::move(imb));
        ib.delta_n = ensemble_stats(result.times, std::move(dn));
        ib.imbalance_quasi_steady = quasi_steady_summary(ib.imbalance, config.window_lo, config.window_hi);
        ib.imbalance_final = quasi_steady_summary(ib.imbalance, result.times.back(), result.times.back());
        ib.delta_n_series_quasi_steady = quasi_steady_summary(ib.delta_n, config.window_lo, config.window_hi);

        SiteProbabilities window_mean;
        SiteProbabilities final_mean;
        for (const auto& s : ib.probabilities) {
            double acc = 0.0;
            for (auto t : window) acc += s.mean[t];
            window_mean.values.push_back(acc / static_cast<double>(window.size()));
            final_mean.values.push_back(s.mean.back());
        }
        ib.delta_n_quasi_steady = delta_n(window_mean);
        ib.delta_n_final = delta_n(final_mean);
        result.bounds.push_back(std::move(ib));
    }
    return result;
}

EthResult compute_eth(const ExperimentConfig& config) {
    const TimeGrid grid = merged_grid(config.time_grid.build(), config.snapshot_times);
    EthResult r;
    r.closed = eth_bounds(config, grid, Dynamics::closed);
    if (configured_dynamics(config) == Dynamics::decoherent) r.decoherent = eth_bounds(config, grid, Dynamics::decoherent);
    return r;
}

EntropyResult compute_entropy(const ExperimentConfig& config) {
    const TimeGrid grid = config.time_grid.build();
    EntropyResult r;
    r.times = grid.times();
    r.closed = entropy_bounds(config, grid, Dynamics::closed);
    if (configured_dynamics(config) == Dynamics::decoherent) {
        r.decoherent = entropy_bounds(config, grid, Dynamics::decoherent);
    }
    return r;
}

ComparisonResult compute_entropy_comparison(const ExperimentConfig& config) {
    validate(config);
    const TimeGrid grid = config.time_grid.build();
    const auto closed = entropy_bounds(config, grid, Dynamics::closed);
    std::vector<EntropyBound> decoherent;
    if (configured_dynamics(config) == Dynamics::decoherent) decoherent = entropy_bounds(config, grid, Dynamics::decoherent);

    const std::size_t n = config.device.n_sites;
    const SpinModel base = derive_couplings(config.device);
    const auto filled = occupied_sites(config.initial_state.config(n), n);
    const CorrelationMatrix c0 = initial_correlation(n, filled);

    ComparisonResult r;
    r.times = grid.times();
    for (std::size_t b = 0; b < config.disorder_bounds.size(); ++b) {
        const DisorderSpec spec{config.disorder_bounds[b], config.n_realizations, config.seed};
        std::vector<std::vector<double>> values(config.n_realizations);
        parallel_for(config.n_realizations, config.workers, [&](std::size_t k) {
            const SpinModel model = base.with_disorder(sample_disorder(spec, k + 1, n));
            const auto h = SingleParticleHamiltonian::from_spin_model(restrict_nearest_neighbor(model, ChainBoundary::open));
            const CorrelationEvolver evolver(h, c0);
            for (double t : grid.times()) values[k].push_back(entropy_from_correlation(evolver.at(t), config.subsystem));
        });
        ComparisonBound cb;
        cb.bound = config.disorder_bounds[b];
        cb.interacting = closed[b];
        cb.anderson = entropy_bound(config, cb.bound, r.times, std::move(values), {});
        if (!decoherent.empty()) cb.decoherent = decoherent[b];
        r.bounds.push_back(std::move(cb));
    }
    return r;
}

std::vector<SwapCurve> compute_dephasing_swap(const ExperimentConfig& config) {
    validate(config);
    const SpinModel base = derive_couplings(config.device);
    const TimeGrid grid = config.time_grid.build();
    struct Job {
        double t_phi;
        std::vector<std::size_t> sites;
    };
    std::vector<Job> jobs;
    for (double tp : config.t_phi_sweep) {
        for (const auto& g : config.swap_groups) jobs.push_back({tp, g});
    }
    std::vector<SwapCurve> curves(jobs.size());
    parallel_for(jobs.size(), config.workers, [&](std::size_t j) {
        const auto& job = jobs[j];
        const std::size_t k = job.sites.size();
        DeviceParams sub;
        sub.n_sites = k;
        sub.delta = config.device.delta;
        sub.lambda_c.assign(k, 0.0);
        for (auto s : job.sites) {
            sub.g.push_back(config.device.g[s]);
            sub.t1.push_back(config.device.t1[s]);
        }
        sub.t_phi.assign(k, job.t_phi);
        const auto basis = make_full_basis(k);
        const auto H = build_hamiltonian(base.subsystem(job.sites), basis);
        const auto rho0 = QuantumState::basis_state(basis, site_mask(k, 0)).as_density();
        SwapCurve curve;
        curve.t_phi = job.t_phi;
        curve.sites = job.sites;
        curve.times = grid.times();
        curve.probabilities.assign(k, std::vector<double>(grid.size()));
        lindblad_evolve(H, rho0, collapse_channels(sub), grid, DenseRk4{config.evolution.step_us},
                        [&](std::size_t t, const QuantumState& s) {
                            const auto p = site_probabilities(s);
                            for (std::size_t i = 0; i < k; ++i) curve.probabilities[i][t] = p[i];
                        });
        curves[j] = std::move(curve);
    });
    return curves;
}

namespace {

std::string site_label(std::size_t site) { return fmt::format("q{:02d}", site + 1); }

json sites_json(const std::vector<std::size_t>& sites) {
    json a = json::array();
    for (auto s : sites) a.push_back(s + 1);
    return a;
}

json summary_json(const Summary& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

json fit_json(const std::optional<LogFit>& f) {
    if (!f) return nullptr;
    return {{"slope", f->slope}, {"intercept", f->intercept}, {"slope_se", f->slope_se}, {"n_points", f->n_points}};
}

std::string heatmap_csv(const std::vector<double>& times, const std::vector<ObservableSeries>& sites) {
    std::string out = "time_us";
    for (std::size_t i = 0; i < sites.size(); ++i) out += "," + site_label(i);
    for (std::size_t i = 0; i < sites.size(); ++i) out += "," + site_label(i) + "_sd";
    out += '\n';
    for (std::size_t t = 0; t < times.size(); ++t) {
        out += format_number(times[t]);
        for (const auto& s : sites) out += "," + format_number(s.mean[t]);
        for (const auto& s : sites) out += "," + format_number(s.sd[t]);
        out += '\n';
    }
    return out;
}

void render_coupling(const ExperimentConfig& config, RunOutput& out) {
    const SpinModel m = derive_couplings(config.device);
    const std::size_t n = m.n_sites();
    std::string jcsv = "site";
    for (std::size_t j = 0; j < n; ++j) jcsv += "," + site_label(j);
    jcsv += '\n';
    for (std::size_t i = 0; i < n; ++i) {
        jcsv += site_label(i);
        for (std::size_t j = 0; j < n; ++j) jcsv += "," + format_number(m.J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        jcsv += '\n';
    }
    std::string hcsv = "site,h_mhz\n";
    for (std::size_t i = 0; i < n; ++i) hcsv += site_label(i) + "," + format_number(m.h(static_cast<Eigen::Index>(i))) + "\n";
    out.files.add("coupling_matrix.csv", std::move(jcsv));
    out.files.add("fields.csv", std::move(hcsv));
    out.results = {{"J_mhz", matrix_to_json(Eigen::MatrixXd(m.J))}, {"h_mhz", std::vector<double>(m.h.data(), m.h.data() + n)}};
}

void render_imbalance(const ExperimentConfig& config, RunOutput& out) {
    const auto r = compute_imbalance(config);
    const bool lindblad = config.evolution.mode != EvolutionMode::unitary_sector;
    std::string crossover =
        "bound_mhz,imbalance_qs_mean,imbalance_qs_sd,imbalance_final_mean,imbalance_final_sd,delta_n_qs,delta_n_final,"
        "delta_n_series_qs_mean,delta_n_series_qs_sd\n";
    json bounds = json::array();
    for (const auto& b : r.bounds) {
        const std::string t = tag(b.bound);
        out.files.add("heatmap_dh" + t + ".csv", heatmap_csv(r.times, b.probabilities));
        if (lindblad) out.files.add("heatmap_raw_dh" + t + ".csv", heatmap_csv(r.times, b.raw_probabilities));
        out.files.add("imbalance_dh" + t + ".csv", series_csv(b.imbalance));
        out.files.add("delta_n_dh" + t + ".csv", series_csv(b.delta_n));
        crossover += fmt::format("{},{},{},{},{},{},{},{},{}\n", b.bound, b.imbalance_quasi_steady.mean,
                                 b.imbalance_quasi_steady.sd, b.imbalance_final.mean, b.imbalance_final.sd,
                                 b.delta_n_quasi_steady, b.delta_n_final, b.delta_n_series_quasi_steady.mean,
                                 b.delta_n_series_quasi_steady.sd);
        std::vector<double> final_p;
        for (const auto& s : b.probabilities) final_p.push_back(s.mean.back());
        bounds.push_back({{"bound_mhz", b.bound},
                          {"imbalance_quasi_steady", summary_json(b.imbalance_quasi_steady)},
                          {"imbalance_final", summary_json(b.imbalance_final)},
                          {"delta_n_quasi_steady", b.delta_n_quasi_steady},
                          {"delta_n_final", b.delta_n_final},
                          {"delta_n_series_quasi_steady", summary_json(b.delta_n_series_quasi_steady)},
                          {"final_probabilities", final_p}});
    }
    out.files.add("crossover.csv", std::move(crossover));
    out.results = {{"window_us", {config.window_lo, config.window_hi}}, {"bounds", bounds}};
}

json eth_json(const std::vector<EthBound>& bounds, std::string& csv, const std::string& variant) {
    json arr = json::array();
    for (const auto& b : bounds) {
        json snaps = json::array();
        for (const auto& s : b.snapshots) {
            std::string sites;
            for (auto q : s.sites) sites += (sites.empty() ? "" : " ") + site_label(q);
            csv += fmt::format("{},{},{},{},{},{},{}\n", variant, b.bound, s.time, s.sites.size(), sites,
                               s.distance_thermal, s.distance_initial);
            snaps.push_back({{"time_us", s.time},
                             {"sites", sites_json(s.sites)},
                             {"mean", matrix_to_json(s.mean)},
                             {"abs_of_mean", matrix_to_json(s.abs_of_mean)},
                             {"mean_of_abs", matrix_to_json(s.mean_of_abs)},
                             {"initial", matrix_to_json(s.initial)},
                             {"distance_thermal", s.distance_thermal},
                             {"distance_initial", s.distance_initial}});
        }
        arr.push_back({{"bound_mhz", b.bound}, {"snapshots", snaps}});
    }
    return arr;
}

void render_eth(const ExperimentConfig& config, RunOutput& out) {
    const auto r = compute_eth(config);
    std::string csv = "variant,bound_mhz,time_us,n_qubits,sites,distance_thermal,distance_initial\n";
    json results = {{"closed", eth_json(r.closed, csv, "closed")}};
    if (!r.decoherent.empty()) results["decoherent"] = eth_json(r.decoherent, csv, "decoherent");
    out.files.add("eth_distances.csv", std::move(csv));
    out.results = std::move(results);
}

json entropy_json(const EntropyBound& b, const std::string& variant, const std::string& file, RunOutput& out,
                  std::string& sa_csv, std::string& fit_csv) {
    out.files.add(file, series_csv(b.half_chain));
    json sa = json::array();
    for (std::size_t N = 1; N <= b.site_averaged.size(); ++N) {
        const auto& s = b.site_averaged[N - 1];
        sa_csv += fmt::format("{},{},{},{},{},{}\n", variant, b.bound, N, s.mean, s.sd, static_cast<double>(N) * std::log(2.0));
        sa.push_back(summary_json(s));
    }
    if (b.fit) fit_csv += fmt::format("{},{},{},{},{},{}\n", variant, b.bound, b.fit->slope, b.fit->slope_se, b.fit->intercept, b.fit->n_points);
    return {{"variant", variant}, {"bound_mhz", b.bound}, {"file", file}, {"site_averaged", sa}, {"fit", fit_json(b.fit)}};
}

constexpr const char* kSiteAveragedHeader = "variant,bound_mhz,n_sites,mean,sd,thermal\n";
constexpr const char* kFitHeader = "variant,bound_mhz,slope,slope_se,intercept,n_points\n";

void render_entropy(const ExperimentConfig& config, RunOutput& out) {
    const auto r = compute_entropy(config);
    std::string sa = kSiteAveragedHeader;
    std::string fits = kFitHeader;
    json arr = json::array();
    for (const auto& b : r.closed) arr.push_back(entropy_json(b, "closed", "entropy_dh" + tag(b.bound) + ".csv", out, sa, fits));
    for (const auto& b : r.decoherent) {
        arr.push_back(entropy_json(b, "decoherent", "entropy_decoherent_dh" + tag(b.bound) + ".csv", out, sa, fits));
    }
    out.files.add("site_averaged_entropy.csv", std::move(sa));
    out.files.add("entropy_fits.csv", std::move(fits));
    out.results = {{"subsystem", sites_json(config.subsystem)}, {"series", arr}};
}

void render_comparison(const ExperimentConfig& config, RunOutput& out) {
    const auto r = compute_entropy_comparison(config);
    std::string sa = kSiteAveragedHeader;
    std::string fits = kFitHeader;
    json arr = json::array();
    for (const auto& b : r.bounds) {
        const std::string t = tag(b.bound);
        arr.push_back(entropy_json(b.interacting, "interacting", "entropy_interacting_dh" + t + ".csv", out, sa, fits));
        arr.push_back(entropy_json(b.anderson, "anderson", "entropy_anderson_dh" + t + ".csv", out, sa, fits));
        if (b.decoherent) {
            arr.push_back(entropy_json(*b.decoherent, "decoherent", "entropy_decoherent_dh" + t + ".csv", out, sa, fits));
        }
    }
    out.files.add("site_averaged_entropy.csv", std::move(sa));
    out.files.add("entropy_fits.csv", std::move(fits));
    out.results = {{"subsystem", sites_json(config.subsystem)}, {"series", arr}};
}

void render_swap(const ExperimentConfig& config, RunOutput& out) {
    const auto curves = compute_dephasing_swap(config);
    json arr = json::array();
    for (const auto& c : curves) {
        std::string name = "swap_tphi" + tag(c.t_phi);
        for (auto s : c.sites) name += "_" + site_label(s);
        name += ".csv";
        std::string csv = "time_us";
        for (auto s : c.sites) csv += "," + site_label(s);
        csv += '\n';
        for (std::size_t t = 0; t < c.times.size(); ++t) {
            csv += format_number(c.times[t]);
            for (const auto& p : c.probabilities) csv += "," + format_number(p[t]);
            csv += '\n';
        }
        out.files.add(name, std::move(csv));
        arr.push_back({{"t_phi_us", c.t_phi}, {"sites", sites_json(c.sites)}, {"file", name}});
    }
    out.results = {{"curves", arr}};
}

std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(tp)));
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

RunOutput render_experiment(const ExperimentConfig& config) {
    validate(config);
    RunOutput out;
    const auto& e = config.experiment;
    if (e == "coupling-matrix") {
        render_coupling(config, out);
    } else if (e == "imbalance-neel" || e == "imbalance-domain" || e == "post-selection") {
        render_imbalance(config, out);
    } else if (e == "eth-matrices") {
        render_eth(config, out);
    } else if (e == "entropy") {
        render_entropy(config, out);
    } else if (e == "entropy-comparison") {
        render_comparison(config, out);
    } else if (e == "dephasing-swap") {
        render_swap(config, out);
    } else {
        throw ConfigError("unknown experiment '" + e + "'");
    }
    out.results["experiment"] = e;
    return out;
}

RunManifest run_experiment(const ExperimentConfig& config) {
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    RunOutput out = render_experiment(config);
    out.files.add("results.json", out.results.dump(2) + "\n");
    out.files.add("config.json", config.to_json().dump(2) + "\n");

    RunManifest m;
    m.config = config.to_json();
    m.code_version = code_version();
    m.directory = config.output_dir;
    m.files = write_files(config.output_dir, out.files);
    m.started_at = utc_timestamp(started);
    m.finished_at = utc_timestamp(std::chrono::system_clock::now());
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_text(config.output_dir / "manifest.json", m.to_json().dump(2) + "\n");
    write_text(config.output_dir / "manifest.txt", m.to_text());
    return m;
}

}  // namespace mblsim
