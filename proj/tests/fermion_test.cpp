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

#include <cmath>
#include <random>
#include <stdexcept>

#include "gtest/gtest.h"
#include "mblsim/evolve.hpp"
#include "mblsim/observables.hpp"
#include "test_support.hpp"

using namespace mblsim;

namespace {

SpinModel open_chain(std::size_t n, double bound, std::size_t k) {
    DeviceParams p = DeviceParams::reference();
    p.n_sites = n;
    p.g.resize(n);
    p.lambda_c.resize(n);
    p.t1.resize(n);
    p.t_phi.resize(n);
    const SpinModel m = derive_couplings(p).with_disorder(sample_disorder({bound, 20, 31}, k, n));
    return restrict_nearest_neighbor(m, ChainBoundary::open);
}

}  // namespace

TEST(InitialCorrelation, Examples) {
    const std::vector<std::size_t> neel{1, 3, 5, 7, 9};
    const auto c = initial_correlation(10, neel);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(c.occupations()[i], i % 2 == 1 ? 1.0 : 0.0);
    EXPECT_EQ(c.matrix().cwiseAbs().sum(), 5.0);
    EXPECT_EQ(initial_correlation(4, {}).matrix(), Eigen::MatrixXcd::Zero(4, 4));
    const std::vector<std::size_t> all{0, 1, 2, 3};
    EXPECT_EQ(initial_correlation(4, all).matrix(), Eigen::MatrixXcd::Identity(4, 4));
    EXPECT_THROW(initial_correlation(4, std::vector<std::size_t>{4}), std::invalid_argument);
}

TEST(CorrelationMatrix, RejectsInvalidSpectrum) {
    EXPECT_THROW(CorrelationMatrix(Eigen::MatrixXcd::Identity(2, 2) * 1.5), std::invalid_argument);
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(2, 2);
    c(0, 1) = 0.2;
    EXPECT_THROW(CorrelationMatrix{c}, std::invalid_argument);
}

TEST(SingleParticleHamiltonian, Validation) {
    EXPECT_THROW(SingleParticleHamiltonian(Eigen::MatrixXd::Ones(3, 3)), std::invalid_argument);
    const SpinModel m = derive_couplings(DeviceParams::reference());
    EXPECT_THROW(SingleParticleHamiltonian::from_spin_model(m), std::invalid_argument);
    EXPECT_THROW(SingleParticleHamiltonian::from_spin_model(restrict_nearest_neighbor(m)), std::invalid_argument);
    const auto h = SingleParticleHamiltonian::from_spin_model(restrict_nearest_neighbor(m, ChainBoundary::open));
    EXPECT_EQ(h.matrix()(4, 5), m.J(4, 5));
    EXPECT_EQ(h.matrix()(2, 2), m.h(2));
}

TEST(EvolveCorrelation, Examples) {
    const auto h = SingleParticleHamiltonian::from_spin_model(open_chain(6, 3.0, 1));
    const std::vector<std::size_t> occ{0, 2, 5};
    const auto c0 = initial_correlation(6, occ);
    EXPECT_LT((evolve_correlation(h, c0, 0.0).matrix() - c0.matrix()).norm(), 1e-14);

    Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(3, 3);
    diag.diagonal() << 0.3, -0.2, 0.5;
    const std::vector<std::size_t> one{1};
    const auto cd = evolve_correlation(SingleParticleHamiltonian(diag), initial_correlation(3, one), 0.7);
    EXPECT_NEAR(cd.occupations()[1], 1.0, 1e-14);

    const double J = 1.1;
    Eigen::Matrix2d two = Eigen::Matrix2d::Zero();
    two(0, 1) = two(1, 0) = J;
    const std::vector<std::size_t> first{0};
    for (double t : {0.05, 0.2, 0.63}) {
        const auto c = evolve_correlation(SingleParticleHamiltonian(two), initial_correlation(2, first), t);
        const double co = std::cos(oracle::kTwoPi * J * t);
        EXPECT_NEAR(c.matrix()(0, 0).real(), co * co, 1e-13);
    }
}

TEST(EvolveCorrelation, ConservesParticleNumber) {
    const auto h = SingleParticleHamiltonian::from_spin_model(open_chain(10, 8.0, 2));
    const std::vector<std::size_t> neel{1, 3, 5, 7, 9};
    const CorrelationEvolver ev(h, initial_correlation(10, neel));
    for (double t = 0.0; t <= 1.0; t += 0.1) EXPECT_NEAR(ev.at(t).particle_number(), 5.0, 1e-10);
}

TEST(EntropyFromCorrelation, Examples) {
    const std::vector<std::size_t> occ{1, 2};
    const std::vector<std::size_t> a{0, 1};
    EXPECT_NEAR(entropy_from_correlation(initial_correlation(4, occ), a), 0.0, 1e-10);
    Eigen::MatrixXcd half = Eigen::MatrixXcd::Zero(2, 2);
    half(0, 0) = 0.5;
    half(1, 1) = 1.0;
    EXPECT_NEAR(entropy_from_correlation(CorrelationMatrix(half), std::vector<std::size_t>{0}), std::log(2.0), 1e-12);
    EXPECT_THROW(entropy_from_correlation(CorrelationMatrix(half), std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(EntropyFromCorrelation, MatchesSpinSimulationOnOpenChains) {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> when(0.0, 1.0);
    for (std::size_t n : {4u, 6u, 8u}) {
        const SpinModel m = open_chain(n, 6.0, n);
        std::vector<std::size_t> filled;
        Config cfg = 0;
        for (std::size_t i = 1; i < n; i += 2) {
            filled.push_back(i);
            cfg |= site_mask(n, i);
        }
        const auto basis = make_sector_basis(n, filled.size());
        const Propagator U(build_hamiltonian(m, basis));
        const auto psi0 = QuantumState::basis_state(basis, cfg);
        const CorrelationEvolver ev(SingleParticleHamiltonian::from_spin_model(m), initial_correlation(n, filled));
        std::vector<std::size_t> block;
        for (std::size_t i = n / 4; i < n / 4 + n / 2; ++i) block.push_back(i);
        for (int r = 0; r < 5; ++r) {
            const double t = when(rng);
            const auto psi = QuantumState::pure(basis, U.apply(psi0.vector(), t));
            const auto c = ev.at(t);
            const auto p = site_probabilities(psi);
            for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(c.occupations()[i], p[i], 1e-8);
            EXPECT_NEAR(entropy_from_correlation(c, block), von_neumann_entropy(partial_trace(psi, block)), 1e-8);
        }
    }
}
