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

#include "mblsim/fermion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace mblsim {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kClip = 1e-12;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

SingleParticleHamiltonian::SingleParticleHamiltonian(Eigen::MatrixXd m) : m_(std::move(m)) {
    require(m_.rows() == m_.cols() && m_.rows() >= 1, "single-particle Hamiltonian must be square");
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
        for (Eigen::Index j = 0; j < m_.cols(); ++j) {
            require(m_(i, j) == m_(j, i), "single-particle Hamiltonian must be symmetric");
            if (std::abs(i - j) > 1) require(m_(i, j) == 0.0, "single-particle Hamiltonian must be tridiagonal");
        }
    }
}

SingleParticleHamiltonian SingleParticleHamiltonian::from_spin_model(const SpinModel& model) {
    Eigen::MatrixXd m = model.J;
    m.diagonal() = model.h + model.dh;
    return SingleParticleHamiltonian(std::move(m));
}

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXcd c) : c_(std::move(c)) {
    require(c_.rows() == c_.cols(), "correlation matrix must be square");
    if (c_.size() == 0) return;
    require((c_ - c_.adjoint()).cwiseAbs().maxCoeff() <= 1e-9, "correlation matrix must be Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(c_, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-9 && es.eigenvalues().maxCoeff() <= 1.0 + 1e-9,
            "correlation matrix spectrum must lie in [0, 1]");
}

std::vector<double> CorrelationMatrix::occupations() const {
    std::vector<double> n(n_sites());
    for (std::size_t i = 0; i < n.size(); ++i) {
        n[i] = c_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
    }
    return n;
}

CorrelationMatrix initial_correlation(std::size_t n_sites, std::span<const std::size_t> occupied_sites) {
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n_sites), static_cast<Eigen::Index>(n_sites));
    for (std::size_t s : occupied_sites) {
        require(s < n_sites, "occupied site out of range");
        c(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) = 1.0;
    }
    return CorrelationMatrix(std::move(c));
}

CorrelationEvolver::CorrelationEvolver(const SingleParticleHamiltonian& h, const CorrelationMatrix& c0) {
    require(h.n_sites() == c0.n_sites(), "Hamiltonian and correlation matrix sizes differ");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.matrix());
    energies_ = es.eigenvalues();
    modes_ = es.eigenvectors();
    c0_modes_ = modes_.transpose().cast<cplx>() * c0.matrix() * modes_.cast<cplx>();
}

CorrelationMatrix CorrelationEvolver::at(double t) const {
    require(t >= 0.0, "evolution time must be >= 0");
    // In the mode basis C_kl(t) = exp(i 2pi (e_k - e_l) t) C0_kl.
    const Eigen::VectorXcd phase = (energies_.cast<cplx>() * cplx(0.0, kTwoPi * t)).array().exp();
    const Eigen::MatrixXcd ct = phase.asDiagonal() * c0_modes_ * phase.conjugate().asDiagonal();
    Eigen::MatrixXcd c = modes_.cast<cplx>() * ct * modes_.transpose().cast<cplx>();
    c = 0.5 * (c + c.adjoint()).eval();
    return CorrelationMatrix(std::move(c));
}

CorrelationMatrix evolve_correlation(const SingleParticleHamiltonian& h, const CorrelationMatrix& c0, double t) {
    return CorrelationEvolver(h, c0).at(t);
}

double entropy_from_correlation(const CorrelationMatrix& c, std::span<const std::size_t> subset) {
    require(!subset.empty(), "entropy subset must be nonempty");
    const auto k = static_cast<Eigen::Index>(subset.size());
    Eigen::MatrixXcd block(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        require(subset[a] < c.n_sites(), "entropy subset site out of range");
        for (Eigen::Index b = 0; b < k; ++b) {
            block(a, b) = c.matrix()(static_cast<Eigen::Index>(subset[a]), static_cast<Eigen::Index>(subset[b]));
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double l = std::clamp(es.eigenvalues()(i), kClip, 1.0 - kClip);
        s -= l * std::log(l) + (1.0 - l) * std::log1p(-l);
    }
    return std::max(s, 0.0);
}

}  // namespace mblsim
