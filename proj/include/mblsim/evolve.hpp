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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mblsim/model.hpp"

namespace mblsim {

enum class StateKind { pure, density };

/// A pure state vector or a density matrix, expressed in `basis`.
class QuantumState {
public:
    /// Throws std::invalid_argument unless |psi| = 1 within 1e-10.
    static QuantumState pure(BasisPtr basis, Eigen::VectorXcd psi);
    /// Throws std::invalid_argument unless rho is Hermitian (1e-10) with unit trace (1e-8).
    static QuantumState density(BasisPtr basis, Eigen::MatrixXcd rho);
    static QuantumState basis_state(BasisPtr basis, Config config);

    StateKind kind() const { return std::holds_alternative<Eigen::VectorXcd>(data_) ? StateKind::pure : StateKind::density; }
    bool is_pure() const { return kind() == StateKind::pure; }
    const BasisPtr& basis() const { return basis_; }
    std::size_t dim() const { return basis_->dim(); }

    const Eigen::VectorXcd& vector() const;  // pure only
    const Eigen::MatrixXcd& matrix() const;  // density only

    /// |psi><psi| for pure states, the stored matrix otherwise.
    Eigen::MatrixXcd density_matrix() const;
    QuantumState as_density() const;
    /// Same state embedded in the 2^n computational basis.
    QuantumState to_full_basis() const;

    /// Smallest eigenvalue of the density matrix (0 for pure states).
    double min_eigenvalue() const;

private:
    QuantumState(BasisPtr basis, std::variant<Eigen::VectorXcd, Eigen::MatrixXcd> data)
        : basis_(std::move(basis)), data_(std::move(data)) {}

    BasisPtr basis_;
    std::variant<Eigen::VectorXcd, Eigen::MatrixXcd> data_;
};

/// Sample times in microseconds: strictly increasing, first entry 0.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times);

    static TimeGrid linear(double stop, std::size_t n_points);
    /// 0 followed by `n_log` logarithmically spaced points on [first, stop].
    static TimeGrid logarithmic(double first, double stop, std::size_t n_log);

    const std::vector<double>& times() const { return times_; }
    std::size_t size() const { return times_.size(); }
    double operator[](std::size_t i) const { return times_[i]; }

private:
    std::vector<double> times_;
};

enum class ChannelKind { relaxation, dephasing };

/// Relaxation uses sigma^-, dephasing uses sigma^z. Rates in 1/us.
struct CollapseChannel {
    std::size_t site = 0;
    ChannelKind kind = ChannelKind::relaxation;
    double rate = 0.0;
};

/// Relaxation at 1/T1 and dephasing at 1/(2 T_phi) per site, so coherences
/// decay at 1/(2 T1) + 1/T_phi.
std::vector<CollapseChannel> collapse_channels(const DeviceParams& params);

/// Spectral form of exp(-i 2pi H t); the decomposition is reused across times.
class Propagator {
public:
    /// Throws std::invalid_argument for non-Hermitian input (1e-12 relative).
    explicit Propagator(const HamiltonianMatrix& H);

    Eigen::MatrixXcd unitary(double t) const;
    Eigen::VectorXcd apply(const Eigen::VectorXcd& psi, double t) const;

    const Eigen::VectorXd& energies() const { return energies_; }
    const Eigen::MatrixXcd& eigenvectors() const { return vectors_; }
    const BasisPtr& basis() const { return basis_; }

private:
    BasisPtr basis_;
    Eigen::VectorXd energies_;
    Eigen::MatrixXcd vectors_;
};

Eigen::MatrixXcd propagator(const HamiltonianMatrix& H, double t);

std::vector<QuantumState> evolve_pure(const HamiltonianMatrix& H, const QuantumState& psi0, const TimeGrid& grid);

struct DenseRk4 {
    double step_us = 1e-3;
};

/// Quantum-jump unraveling; trajectory i draws from a stream keyed on (seed, i).
struct Trajectories {
    std::size_t n_traj = 500;
    std::uint64_t seed = 1;
};

using LindbladMethod = std::variant<DenseRk4, Trajectories>;

using StateObserver = std::function<void(std::size_t time_index, const QuantumState& state)>;

/// d rho/dt = -i 2pi [H, rho] + sum_c rate_c (L rho L^+ - {L^+ L, rho}/2).
std::vector<QuantumState> lindblad_evolve(const HamiltonianMatrix& H, const QuantumState& rho0,
                                          const std::vector<CollapseChannel>& channels, const TimeGrid& grid,
                                          const LindbladMethod& method);

/// Streaming RK4 variant: holds one density matrix at a time.
void lindblad_evolve(const HamiltonianMatrix& H, const QuantumState& rho0,
                     const std::vector<CollapseChannel>& channels, const TimeGrid& grid, const DenseRk4& method,
                     const StateObserver& observer);

/// Monte Carlo wave-function unraveling. The Hamiltonian must conserve the
/// excitation number, which lets every trajectory live inside one sector
/// between jumps and be propagated exactly there.
class QuantumJumpUnraveler {
public:
    QuantumJumpUnraveler(const HamiltonianMatrix& H, std::vector<CollapseChannel> channels);
    ~QuantumJumpUnraveler();
    QuantumJumpUnraveler(QuantumJumpUnraveler&&) noexcept;
    QuantumJumpUnraveler& operator=(QuantumJumpUnraveler&&) noexcept;

    /// Runs trajectory `index`; `observer` receives the normalized pure state at
    /// every grid time. A mixed `initial` is sampled through its eigenvectors.
    void run(const QuantumState& initial, const TimeGrid& grid, std::size_t index, std::uint64_t seed,
             const StateObserver& observer) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace mblsim
