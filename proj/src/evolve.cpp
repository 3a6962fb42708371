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

#include "mblsim/evolve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/Sparse>

namespace mblsim {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

double hermiticity_error(const Eigen::MatrixXcd& m) {
    if (m.size() == 0) return 0.0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

void require_same_basis(const SectorBasis& a, const SectorBasis& b) {
    if (!(a == b)) throw std::invalid_argument("state basis does not match the Hamiltonian basis");
}

bool has_relaxation(const std::vector<CollapseChannel>& channels) {
    return std::any_of(channels.begin(), channels.end(), [](const CollapseChannel& c) {
        return c.kind == ChannelKind::relaxation && c.rate > 0.0;
    });
}

void check_channels(const SectorBasis& basis, const std::vector<CollapseChannel>& channels) {
    for (const auto& c : channels) {
        require(c.site < basis.n_sites(), "collapse channel site out of range");
        require(c.rate >= 0.0 && std::isfinite(c.rate), "collapse channel rate must be finite and >= 0");
    }
    if (!basis.is_full() && has_relaxation(channels)) {
        throw std::invalid_argument("relaxation leaves the excitation sector; use the full basis");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// QuantumState

QuantumState QuantumState::pure(BasisPtr basis, Eigen::VectorXcd psi) {
    require(basis != nullptr, "null basis");
    require(static_cast<std::size_t>(psi.size()) == basis->dim(), "state vector size does not match basis");
    require(std::abs(psi.norm() - 1.0) <= 1e-10, "pure state is not normalized");
    return QuantumState(std::move(basis), std::move(psi));
}

QuantumState QuantumState::density(BasisPtr basis, Eigen::MatrixXcd rho) {
    require(basis != nullptr, "null basis");
    require(rho.rows() == rho.cols() && static_cast<std::size_t>(rho.rows()) == basis->dim(),
            "density matrix shape does not match basis");
    require(hermiticity_error(rho) <= 1e-10, "density matrix is not Hermitian");
    require(std::abs(rho.trace().real() - 1.0) <= 1e-8, "density matrix trace is not 1");
    return QuantumState(std::move(basis), std::move(rho));
}

QuantumState QuantumState::basis_state(BasisPtr basis, Config config) {
    require(basis != nullptr, "null basis");
    const auto idx = basis->index_of(config);
    require(idx.has_value(), "configuration " + format_bitstring(config, basis->n_sites()) + " is not in the basis");
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->dim()));
    psi(static_cast<Eigen::Index>(*idx)) = 1.0;
    return QuantumState(std::move(basis), std::move(psi));
}

const Eigen::VectorXcd& QuantumState::vector() const {
    if (!is_pure()) throw std::logic_error("state is a density matrix");
    return std::get<Eigen::VectorXcd>(data_);
}

const Eigen::MatrixXcd& QuantumState::matrix() const {
    if (is_pure()) throw std::logic_error("state is a pure vector");
    return std::get<Eigen::MatrixXcd>(data_);
}

Eigen::MatrixXcd QuantumState::density_matrix() const {
    if (is_pure()) {
        const auto& v = vector();
        return v * v.adjoint();
    }
    return matrix();
}

QuantumState QuantumState::as_density() const { return QuantumState(basis_, density_matrix()); }

QuantumState QuantumState::to_full_basis() const {
    if (basis_->is_full()) return *this;
    auto full = make_full_basis(basis_->n_sites());
    const auto D = static_cast<Eigen::Index>(full->dim());
    const auto& states = basis_->states();
    if (is_pure()) {
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(D);
        for (std::size_t i = 0; i < states.size(); ++i) out(states[i]) = vector()(static_cast<Eigen::Index>(i));
        return QuantumState(std::move(full), std::move(out));
    }
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(D, D);
    for (std::size_t i = 0; i < states.size(); ++i) {
        for (std::size_t j = 0; j < states.size(); ++j) {
            out(states[i], states[j]) = matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return QuantumState(std::move(full), std::move(out));
}

double QuantumState::min_eigenvalue() const {
    if (is_pure()) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(matrix(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// TimeGrid

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
    require(!times_.empty(), "time grid is empty");
    require(times_.front() == 0.0, "time grid must start at 0");
    for (std::size_t i = 1; i < times_.size(); ++i) {
        require(std::isfinite(times_[i]) && times_[i] > times_[i - 1], "time grid must be strictly increasing");
    }
}

TimeGrid TimeGrid::linear(double stop, std::size_t n_points) {
    require(n_points >= 2 && stop > 0.0, "linear grid needs stop > 0 and at least 2 points");
    std::vector<double> t(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        t[i] = stop * static_cast<double>(i) / static_cast<double>(n_points - 1);
    }
    return TimeGrid(std::move(t));
}

TimeGrid TimeGrid::logarithmic(double first, double stop, std::size_t n_log) {
    require(first > 0.0 && stop > first && n_log >= 2, "log grid needs 0 < first < stop and at least 2 points");
    std::vector<double> t{0.0};
    const double a = std::log(first);
    const double b = std::log(stop);
    for (std::size_t i = 0; i < n_log; ++i) {
        t.push_back(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n_log - 1)));
    }
    t.back() = stop;
    return TimeGrid(std::move(t));
}

// ---------------------------------------------------------------------------
// Channels and unitary evolution

std::vector<CollapseChannel> collapse_channels(const DeviceParams& params) {
    params.validate();
    std::vector<CollapseChannel> out;
    for (std::size_t i = 0; i < params.n_sites; ++i) {
        out.push_back({i, ChannelKind::relaxation, 1.0 / params.t1[i]});
        out.push_back({i, ChannelKind::dephasing, 1.0 / (2.0 * params.t_phi[i])});
    }
    return out;
}

Propagator::Propagator(const HamiltonianMatrix& H) : basis_(H.basis) {
    require(basis_ != nullptr, "Hamiltonian has no basis");
    const double scale = std::max(1.0, H.entries.cwiseAbs().maxCoeff());
    require(hermiticity_error(H.entries) <= 1e-12 * scale, "Hamiltonian is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H.entries);
    require(es.info() == Eigen::Success, "Hamiltonian eigendecomposition failed");
    energies_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
}

Eigen::MatrixXcd Propagator::unitary(double t) const {
    require(t >= 0.0, "evolution time must be >= 0");
    const Eigen::VectorXcd phases = (energies_.cast<cplx>() * cplx(0.0, -kTwoPi * t)).array().exp();
    return vectors_ * phases.asDiagonal() * vectors_.adjoint();
}

Eigen::VectorXcd Propagator::apply(const Eigen::VectorXcd& psi, double t) const {
    require(t >= 0.0, "evolution time must be >= 0");
    const Eigen::VectorXcd phases = (energies_.cast<cplx>() * cplx(0.0, -kTwoPi * t)).array().exp();
    return vectors_ * (phases.asDiagonal() * (vectors_.adjoint() * psi));
}

Eigen::MatrixXcd propagator(const HamiltonianMatrix& H, double t) { return Propagator(H).unitary(t); }

std::vector<QuantumState> evolve_pure(const HamiltonianMatrix& H, const QuantumState& psi0, const TimeGrid& grid) {
    require(psi0.is_pure(), "evolve_pure needs a pure state");
    require_same_basis(*psi0.basis(), *H.basis);
    const Propagator U(H);
    // Project once onto the eigenbasis; each sample is then a phase rotation.
    const Eigen::VectorXcd coeffs = U.eigenvectors().adjoint() * psi0.vector();
    std::vector<QuantumState> out;
    out.reserve(grid.size());
    for (double t : grid.times()) {
        const Eigen::VectorXcd phases = (U.energies().cast<cplx>() * cplx(0.0, -kTwoPi * t)).array().exp();
        Eigen::VectorXcd psi = U.eigenvectors() * phases.cwiseProduct(coeffs);
        out.push_back(QuantumState::pure(H.basis, std::move(psi)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dense master equation

namespace {

class LindbladRhs {
public:
    LindbladRhs(const HamiltonianMatrix& H, const std::vector<CollapseChannel>& channels) {
        const SectorBasis& basis = *H.basis;
        const std::size_t n = basis.n_sites();
        const auto D = static_cast<Eigen::Index>(basis.dim());
        hamiltonian_ = (H.entries * cplx(kTwoPi, 0.0)).sparseView();
        hamiltonian_.makeCompressed();

        // Non-jump dissipators are element-wise in the computational basis.
        decay_ = Eigen::MatrixXd::Zero(D, D);
        for (const auto& c : channels) {
            if (c.rate == 0.0) continue;
            const Config mask = site_mask(n, c.site);
            for (Eigen::Index b = 0; b < D; ++b) {
                const Config cb = basis.state(static_cast<std::size_t>(b));
                for (Eigen::Index a = 0; a < D; ++a) {
                    const Config ca = basis.state(static_cast<std::size_t>(a));
                    if (c.kind == ChannelKind::dephasing) {
                        if (((ca ^ cb) & mask) != 0) decay_(a, b) -= 2.0 * c.rate;
                    } else {
                        const int occ = ((ca & mask) != 0) + ((cb & mask) != 0);
                        decay_(a, b) -= 0.5 * c.rate * occ;
                    }
                }
            }
            if (c.kind == ChannelKind::relaxation) {
                Jump jump{c.rate, {}, {}};
                for (Eigen::Index a = 0; a < D; ++a) {
                    const Config ca = basis.state(static_cast<std::size_t>(a));
                    if ((ca & mask) == 0) continue;
                    jump.from.push_back(a);
                    jump.to.push_back(static_cast<Eigen::Index>(*basis.index_of(ca ^ mask)));
                }
                jumps_.push_back(std::move(jump));
            }
        }
    }

    /// Valid for Hermitian rho only: H rho is taken as (rho H)^+.
    void operator()(const Eigen::MatrixXcd& rho, Eigen::MatrixXcd& out) const {
        rh_.setZero(rho.rows(), rho.cols());
        for (Eigen::Index j = 0; j < hamiltonian_.outerSize(); ++j) {
            for (Eigen::SparseMatrix<cplx>::InnerIterator it(hamiltonian_, j); it; ++it) {
                rh_.col(j) += it.value() * rho.col(it.row());
            }
        }
        out = cplx(0.0, -1.0) * (rh_.adjoint() - rh_);
        out.array() += decay_.array().cast<cplx>() * rho.array();
        for (const auto& j : jumps_) {
            const std::size_t m = j.from.size();
            for (std::size_t b = 0; b < m; ++b) {
                for (std::size_t a = 0; a < m; ++a) {
                    out(j.to[a], j.to[b]) += j.rate * rho(j.from[a], j.from[b]);
                }
            }
        }
    }

private:
    struct Jump {
        double rate;
        std::vector<Eigen::Index> from;
        std::vector<Eigen::Index> to;
    };

    Eigen::SparseMatrix<cplx> hamiltonian_;
    Eigen::MatrixXd decay_;
    mutable Eigen::MatrixXcd rh_;
    std::vector<Jump> jumps_;
};

}  // namespace

void lindblad_evolve(const HamiltonianMatrix& H, const QuantumState& rho0,
                     const std::vector<CollapseChannel>& channels, const TimeGrid& grid, const DenseRk4& method,
                     const StateObserver& observer) {
    require(method.step_us > 0.0 && std::isfinite(method.step_us), "RK4 step must be positive");
    require_same_basis(*rho0.basis(), *H.basis);
    check_channels(*H.basis, channels);

    const LindbladRhs rhs(H, channels);
    Eigen::MatrixXcd rho = rho0.density_matrix();
    Eigen::MatrixXcd k1, k2, k3, k4, tmp;
    observer(0, QuantumState::density(H.basis, rho));
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double span = grid[i] - grid[i - 1];
        const auto steps = static_cast<std::size_t>(std::ceil(span / method.step_us - 1e-9));
        const double dt = span / static_cast<double>(std::max<std::size_t>(steps, 1));
        for (std::size_t s = 0; s < std::max<std::size_t>(steps, 1); ++s) {
            rhs(rho, k1);
            tmp = rho + 0.5 * dt * k1;
            rhs(tmp, k2);
            tmp = rho + 0.5 * dt * k2;
            rhs(tmp, k3);
            tmp = rho + dt * k3;
            rhs(tmp, k4);
            rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        // Strip the antihermitian rounding residue before handing the state out.
        rho = 0.5 * (rho + rho.adjoint()).eval();
        observer(i, QuantumState::density(H.basis, rho));
    }
}

// ---------------------------------------------------------------------------
// Quantum jumps

struct QuantumJumpUnraveler::Impl {
    struct Block {
        std::vector<Eigen::Index> indices;  // positions in the Hamiltonian basis
        Eigen::VectorXcd eigenvalues;       // of H_eff = 2pi H - i Gamma / 2
        Eigen::MatrixXcd vectors;
        Eigen::MatrixXcd inverse;
    };

    BasisPtr basis;
    std::vector<CollapseChannel> channels;
    std::vector<Block> blocks;
    std::vector<std::size_t> block_of;  // basis index -> block

    Impl(const HamiltonianMatrix& H, std::vector<CollapseChannel> ch) : basis(H.basis), channels(std::move(ch)) {
        require(basis != nullptr, "Hamiltonian has no basis");
        check_channels(*basis, channels);
        std::erase_if(channels, [](const CollapseChannel& c) { return c.rate == 0.0; });
        const std::size_t n = basis->n_sites();
        const std::size_t D = basis->dim();

        std::map<int, std::size_t> by_count;
        block_of.resize(D);
        for (std::size_t a = 0; a < D; ++a) {
            const int m = std::popcount(basis->state(a));
            auto [it, inserted] = by_count.try_emplace(m, blocks.size());
            if (inserted) blocks.emplace_back();
            blocks[it->second].indices.push_back(static_cast<Eigen::Index>(a));
            block_of[a] = it->second;
        }
        for (Eigen::Index r = 0; r < H.entries.rows(); ++r) {
            for (Eigen::Index c = 0; c < H.entries.cols(); ++c) {
                if (block_of[r] != block_of[c] && H.entries(r, c) != cplx(0.0)) {
                    throw std::invalid_argument("trajectory unraveling needs an excitation-conserving Hamiltonian");
                }
            }
        }
        for (auto& blk : blocks) {
            const auto d = static_cast<Eigen::Index>(blk.indices.size());
            Eigen::MatrixXcd heff(d, d);
            for (Eigen::Index a = 0; a < d; ++a) {
                for (Eigen::Index b = 0; b < d; ++b) heff(a, b) = kTwoPi * H.entries(blk.indices[a], blk.indices[b]);
                const Config ca = basis->state(static_cast<std::size_t>(blk.indices[a]));
                double gamma = 0.0;
                for (const auto& c : channels) {
                    // L^+ L is n_i for sigma^-, identity for sigma^z.
                    if (c.kind == ChannelKind::dephasing || occupied(ca, n, c.site)) gamma += c.rate;
                }
                heff(a, a) -= cplx(0.0, 0.5 * gamma);
            }
            Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(heff);
            require(es.info() == Eigen::Success, "effective Hamiltonian eigendecomposition failed");
            blk.eigenvalues = es.eigenvalues();
            blk.vectors = es.eigenvectors();
            blk.inverse = blk.vectors.partialPivLu().inverse();
        }
    }

    /// Unnormalized no-jump evolution from an anchor state, block by block.
    struct Anchor {
        std::vector<Eigen::VectorXcd> coeffs;  // empty for inactive blocks
    };

    Anchor decompose(const Eigen::VectorXcd& psi) const {
        Anchor a;
        a.coeffs.resize(blocks.size());
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto& blk = blocks[b];
            Eigen::VectorXcd local(static_cast<Eigen::Index>(blk.indices.size()));
            for (Eigen::Index i = 0; i < local.size(); ++i) local(i) = psi(blk.indices[i]);
            if (local.squaredNorm() == 0.0) continue;
            a.coeffs[b] = blk.inverse * local;
        }
        return a;
    }

    Eigen::VectorXcd evaluate(const Anchor& a, double s) const {
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis->dim()));
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (a.coeffs[b].size() == 0) continue;
            const auto& blk = blocks[b];
            const Eigen::VectorXcd phases = (blk.eigenvalues * cplx(0.0, -s)).array().exp();
            const Eigen::VectorXcd local = blk.vectors * phases.cwiseProduct(a.coeffs[b]);
            for (Eigen::Index i = 0; i < local.size(); ++i) psi(blk.indices[i]) = local(i);
        }
        return psi;
    }

    /// Applies a randomly chosen jump; returns false when no channel has weight.
    bool jump(Eigen::VectorXcd& psi, std::mt19937_64& rng) const {
        const std::size_t n = basis->n_sites();
        std::vector<double> weights(channels.size(), 0.0);
        for (std::size_t c = 0; c < channels.size(); ++c) {
            const auto& ch = channels[c];
            if (ch.kind == ChannelKind::dephasing) {
                weights[c] = ch.rate * psi.squaredNorm();
                continue;
            }
            double occ = 0.0;
            for (Eigen::Index a = 0; a < psi.size(); ++a) {
                if (occupied(basis->state(static_cast<std::size_t>(a)), n, ch.site)) occ += std::norm(psi(a));
            }
            weights[c] = ch.rate * occ;
        }
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) return false;
        double pick = uniform(rng) * total;
        std::size_t chosen = 0;
        while (chosen + 1 < weights.size() && pick >= weights[chosen]) pick -= weights[chosen++];

        const auto& ch = channels[chosen];
        const Config mask = site_mask(n, ch.site);
        if (ch.kind == ChannelKind::dephasing) {
            for (Eigen::Index a = 0; a < psi.size(); ++a) {
                if (basis->state(static_cast<std::size_t>(a)) & mask) psi(a) = -psi(a);
            }
        } else {
            Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
            for (Eigen::Index a = 0; a < psi.size(); ++a) {
                const Config ca = basis->state(static_cast<std::size_t>(a));
                if (ca & mask) out(static_cast<Eigen::Index>(*basis->index_of(ca ^ mask))) += psi(a);
            }
            psi = std::move(out);
        }
        psi.normalize();
        return true;
    }

    static double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

    Eigen::VectorXcd sample_initial(const QuantumState& initial, std::mt19937_64& rng) const {
        if (initial.is_pure()) return initial.vector();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(initial.matrix());
        const Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
        double pick = uniform(rng) * w.sum();
        Eigen::Index k = 0;
        while (k + 1 < w.size() && pick >= w(k)) pick -= w(k++);
        return es.eigenvectors().col(k).normalized();
    }

    void run(const QuantumState& initial, const TimeGrid& grid, std::size_t index, std::uint64_t seed,
             const StateObserver& observer) const {
        require_same_basis(*initial.basis(), *basis);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
        std::mt19937_64 rng(seq);

        Eigen::VectorXcd psi = sample_initial(initial, rng);
        observer(0, QuantumState::pure(basis, psi));
        double t_anchor = 0.0;
        Anchor anchor = decompose(psi);
        double threshold = uniform(rng);
        double t_checked = 0.0;  // latest time known to have norm^2 above threshold

        for (std::size_t k = 1; k < grid.size(); ++k) {
            Eigen::VectorXcd current;
            while (true) {
                current = evaluate(anchor, grid[k] - t_anchor);
                if (current.squaredNorm() > threshold) break;
                // The jump lies in (t_checked, grid[k]]; bisect on the norm decay.
                double lo = t_checked - t_anchor;
                double hi = grid[k] - t_anchor;
                for (int it = 0; it < 80 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (evaluate(anchor, mid).squaredNorm() > threshold) lo = mid;
                    else hi = mid;
                }
                Eigen::VectorXcd at_jump = evaluate(anchor, hi);
                at_jump.normalize();
                jump(at_jump, rng);
                t_anchor += hi;
                t_checked = t_anchor;
                anchor = decompose(at_jump);
                threshold = uniform(rng);
            }
            t_checked = grid[k];
            current.normalize();
            observer(k, QuantumState::pure(basis, std::move(current)));
        }
    }
};

QuantumJumpUnraveler::QuantumJumpUnraveler(const HamiltonianMatrix& H, std::vector<CollapseChannel> channels)
    : impl_(std::make_unique<Impl>(H, std::move(channels))) {}
QuantumJumpUnraveler::~QuantumJumpUnraveler() = default;
QuantumJumpUnraveler::QuantumJumpUnraveler(QuantumJumpUnraveler&&) noexcept = default;
QuantumJumpUnraveler& QuantumJumpUnraveler::operator=(QuantumJumpUnraveler&&) noexcept = default;

void QuantumJumpUnraveler::run(const QuantumState& initial, const TimeGrid& grid, std::size_t index,
                               std::uint64_t seed, const StateObserver& observer) const {
    impl_->run(initial, grid, index, seed, observer);
}

// ---------------------------------------------------------------------------

std::vector<QuantumState> lindblad_evolve(const HamiltonianMatrix& H, const QuantumState& rho0,
                                          const std::vector<CollapseChannel>& channels, const TimeGrid& grid,
                                          const LindbladMethod& method) {
    std::vector<QuantumState> out;
    if (const auto* rk4 = std::get_if<DenseRk4>(&method)) {
        out.reserve(grid.size());
        lindblad_evolve(H, rho0, channels, grid, *rk4, [&](std::size_t, const QuantumState& s) { out.push_back(s); });
        return out;
    }
    const auto& traj = std::get<Trajectories>(method);
    require(traj.n_traj > 0, "trajectory count must be positive");
    const QuantumJumpUnraveler unraveler(H, channels);
    const auto D = static_cast<Eigen::Index>(H.basis->dim());
    std::vector<Eigen::MatrixXcd> sums(grid.size(), Eigen::MatrixXcd::Zero(D, D));
    for (std::size_t i = 0; i < traj.n_traj; ++i) {
        unraveler.run(rho0, grid, i, traj.seed, [&](std::size_t k, const QuantumState& psi) {
            sums[k].noalias() += psi.vector() * psi.vector().adjoint();
        });
    }
    out.reserve(grid.size());
    for (auto& s : sums) {
        s /= static_cast<double>(traj.n_traj);
        s = 0.5 * (s + s.adjoint()).eval();
        out.push_back(QuantumState::density(H.basis, std::move(s)));
    }
    return out;
}

}  // namespace mblsim
