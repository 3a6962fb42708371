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
#include <span>

#include <Eigen/Dense>

#include "mblsim/model.hpp"

namespace mblsim {

// Free-fermion engine for the nearest-neighbour open chain. Through the
// Jordan-Wigner map the XY model with only J_{i,i+1} becomes quadratic, so a
// Gaussian state is fully described by C_ij = <c_i^+ c_j>.

/// Tridiagonal single-particle Hamiltonian, MHz.
class SingleParticleHamiltonian {
public:
    /// Throws std::invalid_argument unless `m` is real symmetric and tridiagonal.
    explicit SingleParticleHamiltonian(Eigen::MatrixXd m);

    /// Diagonal h + dh, off-diagonal J_{i,i+1}. Rejects models with any coupling
    /// beyond the first off-diagonal, including the ring-closing pair.
    static SingleParticleHamiltonian from_spin_model(const SpinModel& model);

    const Eigen::MatrixXd& matrix() const { return m_; }
    std::size_t n_sites() const { return static_cast<std::size_t>(m_.rows()); }

private:
    Eigen::MatrixXd m_;
};

class CorrelationMatrix {
public:
    /// Throws std::invalid_argument unless Hermitian with spectrum in [0, 1] (1e-9).
    explicit CorrelationMatrix(Eigen::MatrixXcd c);

    const Eigen::MatrixXcd& matrix() const { return c_; }
    std::size_t n_sites() const { return static_cast<std::size_t>(c_.rows()); }
    double particle_number() const { return c_.trace().real(); }
    /// Occupations <n_i> = C_ii.
    std::vector<double> occupations() const;

private:
    Eigen::MatrixXcd c_;
};

/// Product state with the listed (0-based) sites filled.
CorrelationMatrix initial_correlation(std::size_t n_sites, std::span<const std::size_t> occupied_sites);

/// C(t) = exp(i 2pi h t) C0 exp(-i 2pi h t).
CorrelationMatrix evolve_correlation(const SingleParticleHamiltonian& h, const CorrelationMatrix& c0, double t);

/// Evolves one initial correlation matrix to many times, diagonalizing h once.
class CorrelationEvolver {
public:
    CorrelationEvolver(const SingleParticleHamiltonian& h, const CorrelationMatrix& c0);
    CorrelationMatrix at(double t) const;

private:
    Eigen::VectorXd energies_;
    Eigen::MatrixXd modes_;
    Eigen::MatrixXcd c0_modes_;  // C0 in the eigenmode basis
};

/// -sum_k [l ln l + (1 - l) ln(1 - l)] over the eigenvalues of C restricted to
/// `subset`, clipped to [1e-12, 1 - 1e-12]. Equals the spin entanglement
/// entropy when `subset` is a contiguous block.
double entropy_from_correlation(const CorrelationMatrix& c, std::span<const std::size_t> subset);

}  // namespace mblsim
