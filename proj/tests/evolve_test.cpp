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

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gtest/gtest.h"
#include "mblsim/observables.hpp"
#include "test_support.hpp"

using namespace mblsim;

namespace {

SpinModel two_site(double J, double h0 = 0.0, double h1 = 0.0) {
    SpinModel m;
    m.J = Eigen::MatrixXd::Zero(2, 2);
    m.J(0, 1) = m.J(1, 0) = J;
    m.h = Eigen::Vector2d(h0, h1);
    m.dh = Eigen::VectorXd::Zero(2);
    return m;
}

DeviceParams truncated(std::size_t n) {
    DeviceParams p = DeviceParams::reference();
    p.n_sites = n;
    p.g.resize(n);
    p.lambda_c.resize(n);
    p.t1.resize(n);
    p.t_phi.resize(n);
    return p;
}

SpinModel disordered(std::size_t n, double bound, std::size_t k = 1) {
    return derive_couplings(truncated(n)).with_disorder(sample_disorder({bound, 5, 77}, k, n));
}

double energy(const HamiltonianMatrix& H, const Eigen::VectorXcd& psi) { return psi.dot(H.entries * psi).real(); }

}  // namespace

TEST(QuantumState, ValidatesInvariants) {
    const auto b = make_full_basis(2);
    EXPECT_THROW(QuantumState::pure(b, Eigen::VectorXcd::Ones(4)), std::invalid_argument);
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Identity(4, 4) / 4.0;
    EXPECT_NO_THROW(QuantumState::density(b, rho));
    rho(0, 1) = 0.1;
    EXPECT_THROW(QuantumState::density(b, rho), std::invalid_argument);
    EXPECT_THROW(QuantumState::density(b, Eigen::MatrixXcd::Identity(4, 4)), std::invalid_argument);
    EXPECT_THROW(QuantumState::basis_state(make_sector_basis(2, 1), parse_bitstring("11")), std::invalid_argument);
}

TEST(QuantumState, EmbedsSectorStateInFullBasis) {
    const auto s = QuantumState::basis_state(make_sector_basis(4, 2), parse_bitstring("0110"));
    const auto f = s.to_full_basis();
    EXPECT_TRUE(f.basis()->is_full());
    EXPECT_EQ(f.vector()(6), std::complex<double>(1.0, 0.0));
    EXPECT_NEAR(f.vector().norm(), 1.0, 1e-15);
}

TEST(TimeGrid, Construction) {
    EXPECT_THROW(TimeGrid({0.1, 0.2}), std::invalid_argument);
    EXPECT_THROW(TimeGrid({0.0, 0.2, 0.2}), std::invalid_argument);
    const auto lin = TimeGrid::linear(1.0, 101);
    EXPECT_EQ(lin.size(), 101u);
    EXPECT_DOUBLE_EQ(lin[100], 1.0);
    const auto lg = TimeGrid::logarithmic(0.01, 1.0, 30);
    ASSERT_EQ(lg.size(), 31u);
    EXPECT_EQ(lg[0], 0.0);
    EXPECT_NEAR(lg[1], 0.01, 1e-15);
    EXPECT_NEAR(lg[30], 1.0, 1e-15);
}

TEST(Propagator, IdentityAtZeroAndUnitary) {
    const auto H = build_hamiltonian(disordered(6, 4.0), make_sector_basis(6, 3));
    const Propagator P(H);
    const auto d = H.entries.rows();
    EXPECT_LT((P.unitary(0.0) - Eigen::MatrixXcd::Identity(d, d)).norm(), 1e-12);
    const Eigen::MatrixXcd U = P.unitary(0.73);
    EXPECT_LT((U.adjoint() * U - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Propagator, GroupProperty) {
    const auto H = build_hamiltonian(disordered(5, 6.0), make_full_basis(5));
    const Propagator P(H);
    const Eigen::MatrixXcd lhs = P.unitary(0.31 + 0.52);
    const Eigen::MatrixXcd rhs = P.unitary(0.52) * P.unitary(0.31);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((propagator(H, 0.4) - P.unitary(0.4)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Propagator, TwoSiteRabiOscillation) {
    const double J = 1.3;
    const auto basis = make_sector_basis(2, 1);
    const auto H = build_hamiltonian(two_site(J), basis);
    const auto psi0 = QuantumState::basis_state(basis, parse_bitstring("10"));
    const Propagator P(H);
    const auto i01 = static_cast<Eigen::Index>(*basis->index_of(parse_bitstring("01")));
    for (double t : {0.0, 0.05, 0.13, 0.4, 0.77, 1.0}) {
        const Eigen::VectorXcd psi = P.apply(psi0.vector(), t);
        const double s = std::sin(oracle::kTwoPi * J * t);
        EXPECT_NEAR(std::norm(psi(i01)), s * s, 1e-12) << "t=" << t;
    }
}

TEST(Propagator, RejectsNonHermitian) {
    HamiltonianMatrix H{make_full_basis(1), Eigen::MatrixXcd::Zero(2, 2)};
    H.entries(0, 1) = 1.0;
    EXPECT_THROW(Propagator{H}, std::invalid_argument);
}

TEST(EvolvePure, DiagonalHamiltonianKeepsPopulations) {
    SpinModel m = two_site(0.0, 0.3, -0.2);
    const auto basis = make_full_basis(2);
    const auto H = build_hamiltonian(m, basis);
    const auto states = evolve_pure(H, QuantumState::basis_state(basis, parse_bitstring("10")), TimeGrid::linear(1.0, 11));
    for (const auto& s : states) {
        const auto p = site_probabilities(s);
        EXPECT_NEAR(p[0], 1.0, 1e-14);
        EXPECT_NEAR(p[1], 0.0, 1e-14);
    }
}

TEST(EvolvePure, ConservesNormExcitationsAndEnergy) {
    const auto basis = make_full_basis(8);
    const auto H = build_hamiltonian(disordered(8, 5.0), basis);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(256);
    v(parse_bitstring("01010101")) = std::sqrt(0.5);
    v(parse_bitstring("11010101")) = std::complex<double>(0.0, std::sqrt(0.3));
    v(parse_bitstring("00000001")) = std::sqrt(0.2);
    const auto psi0 = QuantumState::pure(basis, v);
    const double n0 = 0.5 * 4 + 0.3 * 5 + 0.2 * 1;
    const double e0 = energy(H, v);
    for (const auto& s : evolve_pure(H, psi0, TimeGrid::linear(1.0, 51))) {
        EXPECT_NEAR(s.vector().norm(), 1.0, 1e-10);
        double n = 0.0;
        for (double p : site_probabilities(s).values) n += p;
        EXPECT_NEAR(n, n0, 1e-10);
        EXPECT_NEAR(energy(H, s.vector()), e0, 1e-9 * std::abs(e0));
    }
}

TEST(EvolvePure, EigenvectorOnlyAcquiresPhase) {
    const auto H = build_hamiltonian(disordered(6, 2.0), make_sector_basis(6, 3));
    const Propagator P(H);
    const Eigen::VectorXcd v = P.eigenvectors().col(4);
    for (const auto& s : evolve_pure(H, QuantumState::pure(H.basis, v), TimeGrid::linear(1.0, 6))) {
        EXPECT_NEAR(std::abs(v.dot(s.vector())), 1.0, 1e-10);
    }
}

TEST(EvolvePure, NeelThermalizesWithoutDisorder) {
    const auto basis = make_sector_basis(10, 5);
    const auto H = build_hamiltonian(derive_couplings(DeviceParams::reference()), basis);
    const auto psi0 = QuantumState::basis_state(basis, parse_bitstring("0101010101"));
    const auto grid = TimeGrid::linear(1.0, 41);
    const auto out = evolve_pure(H, psi0, grid);
    std::vector<double> avg(10, 0.0);
    double count = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] < 0.25) continue;
        const auto p = site_probabilities(out[k]);
        for (std::size_t i = 0; i < 10; ++i) avg[i] += p[i];
        count += 1.0;
    }
    for (double& p : avg) p /= count;
    for (double p : avg) EXPECT_NEAR(p, 0.5, 0.15);
}

TEST(EvolvePure, RejectsBasisMismatch) {
    const auto H = build_hamiltonian(disordered(4, 1.0), make_sector_basis(4, 2));
    const auto psi0 = QuantumState::basis_state(make_full_basis(4), parse_bitstring("0101"));
    EXPECT_THROW(evolve_pure(H, psi0, TimeGrid::linear(1.0, 3)), std::invalid_argument);
}

TEST(CollapseChannels, RatesFromDeviceTimes) {
    const auto ch = collapse_channels(DeviceParams::reference());
    ASSERT_EQ(ch.size(), 20u);
    double relax0 = -1.0;
    double dephase0 = -1.0;
    for (const auto& c : ch) {
        if (c.site != 0) continue;
        (c.kind == ChannelKind::relaxation ? relax0 : dephase0) = c.rate;
    }
    EXPECT_NEAR(relax0, 0.03906, 1e-5);
    EXPECT_DOUBLE_EQ(relax0, 1.0 / 25.6);
    EXPECT_DOUBLE_EQ(dephase0, 1.0 / 60.0);
}

TEST(CollapseChannels, InfiniteTimesGiveZeroRates) {
    DeviceParams p = truncated(3);
    p.t1.assign(3, std::numeric_limits<double>::infinity());
    p.t_phi.assign(3, std::numeric_limits<double>::infinity());
    for (const auto& c : collapse_channels(p)) EXPECT_EQ(c.rate, 0.0);
}

TEST(Lindblad, SingleQubitDecay) {
    SpinModel m;
    m.J = Eigen::MatrixXd::Zero(1, 1);
    m.h = Eigen::VectorXd::Constant(1, 0.4);
    m.dh = Eigen::VectorXd::Zero(1);
    const auto basis = make_full_basis(1);
    const auto H = build_hamiltonian(m, basis);
    const double gamma = 0.8;
    const auto rho0 = QuantumState::basis_state(basis, 1).as_density();
    const auto grid = TimeGrid::linear(1.0, 11);
    const auto out = lindblad_evolve(H, rho0, {{0, ChannelKind::relaxation, gamma}}, grid, DenseRk4{1e-3});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(out[i].matrix()(1, 1).real(), std::exp(-gamma * grid[i]), 1e-12);
    }
}

TEST(Lindblad, ClosedSystemLimit) {
    const auto basis = make_full_basis(5);
    const auto H = build_hamiltonian(disordered(5, 3.0), basis);
    const auto psi0 = QuantumState::basis_state(basis, parse_bitstring("01010"));
    const auto grid = TimeGrid::linear(1.0, 11);
    const auto pure = evolve_pure(H, psi0, grid);
    const auto mixed = lindblad_evolve(H, psi0.as_density(), {}, grid, DenseRk4{1e-3});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_LT((mixed[i].matrix() - pure[i].density_matrix()).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Lindblad, PreservesTraceHermiticityPositivity) {
    const std::size_t n = 4;
    const auto basis = make_full_basis(n);
    const auto H = build_hamiltonian(disordered(n, 2.0), basis);
    DeviceParams p = truncated(n);
    const auto out = lindblad_evolve(H, QuantumState::basis_state(basis, parse_bitstring("0101")).as_density(),
                                     collapse_channels(p), TimeGrid::linear(1.0, 21), DenseRk4{1e-3});
    for (const auto& s : out) {
        EXPECT_NEAR(s.matrix().trace().real(), 1.0, 1e-6);
        EXPECT_LT((s.matrix() - s.matrix().adjoint()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GE(s.min_eigenvalue(), -1e-6);
    }
}

TEST(Lindblad, StepHalvingIsStable) {
    const std::size_t n = 4;
    const auto basis = make_full_basis(n);
    const auto H = build_hamiltonian(disordered(n, 6.0, 2), basis);
    DeviceParams p = truncated(n);
    p.t_phi.assign(n, 5.0);
    const auto rho0 = QuantumState::basis_state(basis, parse_bitstring("1010")).as_density();
    const auto grid = TimeGrid::linear(1.0, 11);
    const auto coarse = lindblad_evolve(H, rho0, collapse_channels(p), grid, DenseRk4{1e-3});
    const auto fine = lindblad_evolve(H, rho0, collapse_channels(p), grid, DenseRk4{5e-4});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto a = site_probabilities(coarse[i]);
        const auto b = site_probabilities(fine[i]);
        for (std::size_t s = 0; s < n; ++s) EXPECT_LT(std::abs(a[s] - b[s]), 1e-6);
        EXPECT_LT((coarse[i].matrix() - fine[i].matrix()).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Lindblad, DampedSwapMatchesLiouvillianExponential) {
    const DeviceParams ref = DeviceParams::reference();
    const std::vector<std::size_t> pair{6, 7};
    const SpinModel m = derive_couplings(ref).subsystem(pair);
    const auto basis = make_full_basis(2);
    const auto H = build_hamiltonian(m, basis);
    std::vector<CollapseChannel> channels;
    std::vector<std::pair<Eigen::MatrixXcd, double>> jumps;
    for (std::size_t i = 0; i < 2; ++i) {
        const double g1 = 1.0 / ref.t1[pair[i]];
        const double gz = 1.0 / (2.0 * 30.0);
        channels.push_back({i, ChannelKind::relaxation, g1});
        channels.push_back({i, ChannelKind::dephasing, gz});
        jumps.emplace_back(oracle::on_site(oracle::sigma_minus(), i, 2), g1);
        jumps.emplace_back(oracle::on_site(oracle::pauli_z(), i, 2), gz);
    }
    const Eigen::MatrixXcd Hk = oracle::kron_hamiltonian(m.J, m.h);
    const Eigen::MatrixXcd L = oracle::liouvillian(Hk, jumps);
    const auto rho0 = QuantumState::basis_state(basis, parse_bitstring("10")).as_density();
    const auto grid = TimeGrid::linear(1.0, 41);
    const auto out = lindblad_evolve(H, rho0, channels, grid, DenseRk4{1e-3});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Eigen::MatrixXcd oracle = oracle::propagate_liouvillian(L, rho0.matrix(), grid[i]);
        EXPECT_LT((out[i].matrix() - oracle).cwiseAbs().maxCoeff(), 1e-8) << "t=" << grid[i];
    }
}

TEST(Lindblad, RejectsInvalidSetups) {
    const auto sector = make_sector_basis(3, 1);
    const auto H = build_hamiltonian(disordered(3, 1.0), sector);
    const auto rho0 = QuantumState::basis_state(sector, parse_bitstring("010")).as_density();
    const auto grid = TimeGrid::linear(0.1, 3);
    EXPECT_THROW(lindblad_evolve(H, rho0, {{0, ChannelKind::relaxation, 0.1}}, grid, DenseRk4{}), std::invalid_argument);
    EXPECT_NO_THROW(lindblad_evolve(H, rho0, {{0, ChannelKind::dephasing, 0.1}}, grid, DenseRk4{}));
    EXPECT_THROW(lindblad_evolve(H, rho0, {}, grid, DenseRk4{0.0}), std::invalid_argument);
    EXPECT_THROW(lindblad_evolve(H, rho0, {}, grid, Trajectories{0, 1}), std::invalid_argument);
    EXPECT_THROW(lindblad_evolve(H, rho0, {{0, ChannelKind::dephasing, -1.0}}, grid, DenseRk4{}), std::invalid_argument);
}

TEST(Lindblad, TrajectoriesAgreeWithDenseWithinMonteCarloError) {
    const std::size_t n = 4;
    const auto basis = make_full_basis(n);
    const auto H = build_hamiltonian(disordered(n, 3.0, 3), basis);
    std::vector<CollapseChannel> channels;
    for (std::size_t i = 0; i < n; ++i) {
        channels.push_back({i, ChannelKind::relaxation, 0.6 + 0.1 * static_cast<double>(i)});
        channels.push_back({i, ChannelKind::dephasing, 0.4});
    }
    const auto rho0 = QuantumState::basis_state(basis, parse_bitstring("0101")).as_density();
    const auto grid = TimeGrid::linear(1.0, 11);
    const std::size_t n_traj = 500;
    const auto dense = lindblad_evolve(H, rho0, channels, grid, DenseRk4{1e-3});
    const auto traj = lindblad_evolve(H, rho0, channels, grid, Trajectories{n_traj, 2024});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto a = site_probabilities(dense[i]);
        const auto b = site_probabilities(traj[i]);
        for (std::size_t s = 0; s < n; ++s) {
            // Per-trajectory values lie in [0, 1], so their variance is at most p(1 - p).
            const double se = std::sqrt(std::max(a[s] * (1.0 - a[s]), 1e-12) / static_cast<double>(n_traj));
            EXPECT_LE(std::abs(a[s] - b[s]), 3.0 * se + 1e-12) << "t=" << grid[i] << " site=" << s;
        }
        EXPECT_NEAR(traj[i].matrix().trace().real(), 1.0, 1e-10);
    }
}

TEST(Lindblad, TrajectoriesAreReproducible) {
    const auto basis = make_full_basis(3);
    const auto H = build_hamiltonian(disordered(3, 2.0), basis);
    const std::vector<CollapseChannel> channels{{0, ChannelKind::relaxation, 1.0}, {2, ChannelKind::dephasing, 1.0}};
    const auto rho0 = QuantumState::basis_state(basis, parse_bitstring("101")).as_density();
    const auto grid = TimeGrid::linear(1.0, 5);
    const auto a = lindblad_evolve(H, rho0, channels, grid, Trajectories{40, 9});
    const auto b = lindblad_evolve(H, rho0, channels, grid, Trajectories{40, 9});
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(a[i].matrix(), b[i].matrix());
}

TEST(QuantumJumpUnraveler, NoChannelsReproducesUnitaryEvolution) {
    const auto basis = make_full_basis(4);
    const auto H = build_hamiltonian(disordered(4, 4.0), basis);
    const auto psi0 = QuantumState::basis_state(basis, parse_bitstring("0110"));
    const auto grid = TimeGrid::linear(1.0, 6);
    const auto pure = evolve_pure(H, psi0, grid);
    const QuantumJumpUnraveler u(H, {});
    u.run(psi0, grid, 0, 1, [&](std::size_t i, const QuantumState& s) {
        EXPECT_NEAR(std::abs(pure[i].vector().dot(s.vector())), 1.0, 1e-10);
    });
}
