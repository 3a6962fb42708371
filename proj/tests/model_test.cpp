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

#include "mblsim/model.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "gtest/gtest.h"
#include "test_support.hpp"

using namespace mblsim;

namespace {

bool nearest_ring_pair(std::size_t i, std::size_t j, std::size_t n) {
    const std::size_t d = i > j ? i - j : j - i;
    return d == 1 || d == n - 1;
}

}  // namespace

TEST(DeriveCouplings, WorkedExamples) {
    const SpinModel m = derive_couplings(DeviceParams::reference());
    EXPECT_NEAR(m.J(0, 1), 1.8 + 14.2 * 20.5 / -650.0, 1e-14);
    EXPECT_NEAR(m.J(0, 1), 1.3522, 5e-5);
    EXPECT_NEAR(m.J(4, 5), -0.3654, 5e-5);
    EXPECT_NEAR(m.h(0), -0.3102, 5e-5);
    EXPECT_EQ(m.dh, Eigen::VectorXd::Zero(10));
}

TEST(DeriveCouplings, StatedRanges) {
    const DeviceParams p = DeviceParams::reference();
    const SpinModel m = derive_couplings(p);
    constexpr double slack = 0.005;
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_GE(m.h(i), -0.65 - slack);
        EXPECT_LE(m.h(i), -0.31 + slack);
        for (std::size_t j = i + 1; j < 10; ++j) {
            const double se = p.g[i] * p.g[j] / p.delta;
            EXPECT_GE(se, -0.64 - slack);
            EXPECT_LE(se, -0.33 + slack);
            if (!nearest_ring_pair(i, j, 10)) {
                EXPECT_LT(m.J(i, j), 0.0);
                EXPECT_DOUBLE_EQ(m.J(i, j), se);
            }
        }
    }
}

TEST(DeriveCouplings, SymmetricWithZeroDiagonal) {
    const SpinModel m = derive_couplings(DeviceParams::reference());
    EXPECT_EQ(m.J, m.J.transpose());
    EXPECT_EQ(m.J.diagonal(), Eigen::VectorXd::Zero(10));
}

TEST(DeriveCouplings, WraparoundPairCarriesOnlySuperExchange) {
    const DeviceParams p = DeviceParams::reference();
    const SpinModel m = derive_couplings(p);
    EXPECT_DOUBLE_EQ(m.J(9, 0), p.g[9] * p.g[0] / p.delta);
}

TEST(DeriveCouplings, RejectsZeroDetuning) {
    DeviceParams p = DeviceParams::reference();
    p.delta = 0.0;
    EXPECT_THROW(derive_couplings(p), std::invalid_argument);
}

TEST(DeviceParams, ValidateRejectsBadEntries) {
    DeviceParams p = DeviceParams::reference();
    p.lambda_c.pop_back();
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = DeviceParams::reference();
    p.t1[3] = 0.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = DeviceParams::reference();
    p.g[0] = -1.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(DeviceParams, JsonOverridesKeepOtherValues) {
    const DeviceParams p = device_params_from_json(R"({"delta": -700, "t_phi": 20})");
    EXPECT_EQ(p.delta, -700.0);
    EXPECT_EQ(p.t_phi, std::vector<double>(10, 20.0));
    EXPECT_EQ(p.g, DeviceParams::reference().g);
    EXPECT_THROW(device_params_from_json(R"({"g": [1, 2]})"), std::invalid_argument);
    EXPECT_THROW(device_params_from_json("not json"), std::invalid_argument);
}

TEST(SampleDisorder, ZeroBoundGivesZeros) {
    const auto dh = sample_disorder({0.0, 30, 7}, 4, 10);
    for (double v : dh) EXPECT_EQ(v, 0.0);
}

TEST(SampleDisorder, SupportAndMean) {
    const DisorderSpec spec{12.0, 30, 1234};
    double sum = 0.0;
    for (std::size_t k = 1; k <= 30; ++k) {
        for (double v : sample_disorder(spec, k, 10)) {
            EXPECT_LE(std::abs(v), 12.0);
            sum += v;
        }
    }
    EXPECT_LT(std::abs(sum / 300.0), 3.0 * 12.0 / std::sqrt(3.0 * 300.0));
}

TEST(SampleDisorder, ReproducibleAndAddressable) {
    const DisorderSpec spec{8.0, 30, 99};
    const auto a = sample_disorder(spec, 17, 10);
    for (std::size_t k = 1; k < 17; ++k) (void)sample_disorder(spec, k, 10);
    EXPECT_EQ(a, sample_disorder(spec, 17, 10));
    EXPECT_NE(a, sample_disorder(spec, 18, 10));
    EXPECT_NE(a, sample_disorder({8.0, 30, 100}, 17, 10));
}

TEST(SampleDisorder, PairedAcrossBounds) {
    const auto a = sample_disorder({12.0, 30, 5}, 3, 10);
    const auto b = sample_disorder({6.0, 30, 5}, 3, 10);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(a[i], 2.0 * b[i]);
}

TEST(SampleDisorder, RejectsOutOfRangeRealization) {
    const DisorderSpec spec{1.0, 30, 1};
    EXPECT_THROW(sample_disorder(spec, 0, 10), std::out_of_range);
    EXPECT_THROW(sample_disorder(spec, 31, 10), std::out_of_range);
    EXPECT_THROW(DisorderSpec({-1.0, 30, 1}).validate(), std::invalid_argument);
}

TEST(SectorBasis, SmallCases) {
    const auto b = SectorBasis::sector(2, 1);
    ASSERT_EQ(b.dim(), 2u);
    EXPECT_EQ(format_bitstring(b.state(0), 2), "01");
    EXPECT_EQ(format_bitstring(b.state(1), 2), "10");
    EXPECT_EQ(SectorBasis::sector(10, 5).dim(), 252u);
    EXPECT_EQ(SectorBasis::full(4).dim(), 16u);
    EXPECT_THROW(SectorBasis::sector(3, 4), std::invalid_argument);
}

TEST(SectorBasis, OrderedAndIndexRoundTrips) {
    for (std::size_t m = 0; m <= 8; ++m) {
        const auto b = SectorBasis::sector(8, m);
        for (std::size_t i = 0; i < b.dim(); ++i) {
            EXPECT_EQ(static_cast<std::size_t>(std::popcount(b.state(i))), m);
            if (i > 0) EXPECT_LT(b.state(i - 1), b.state(i));
            EXPECT_EQ(b.index_of(b.state(i)), i);
        }
    }
    EXPECT_FALSE(SectorBasis::sector(4, 2).index_of(0b0111).has_value());
}

TEST(Bitstrings, SiteZeroIsLeftmost) {
    EXPECT_EQ(parse_bitstring("1000"), 8u);
    EXPECT_TRUE(occupied(parse_bitstring("0100"), 4, 1));
    EXPECT_EQ(format_bitstring(5, 4), "0101");
    EXPECT_THROW(parse_bitstring("01a1"), std::invalid_argument);
}

TEST(BuildHamiltonian, TwoSiteStructure) {
    SpinModel m;
    m.J = Eigen::MatrixXd::Zero(2, 2);
    m.J(0, 1) = m.J(1, 0) = 0.7;
    m.h = Eigen::VectorXd::Zero(2);
    m.dh = Eigen::VectorXd::Zero(2);
    const auto basis = make_full_basis(2);
    const auto H = build_hamiltonian(m, basis);
    const auto i01 = static_cast<Eigen::Index>(*basis->index_of(parse_bitstring("01")));
    const auto i10 = static_cast<Eigen::Index>(*basis->index_of(parse_bitstring("10")));
    EXPECT_EQ(H.entries(i01, i10), std::complex<double>(0.7, 0.0));
    EXPECT_EQ(H.entries.diagonal().norm(), 0.0);
    EXPECT_NEAR((H.entries - H.entries.adjoint()).norm(), 0.0, 1e-15);
}

TEST(BuildHamiltonian, NeelDiagonal) {
    SpinModel m = derive_couplings(DeviceParams::reference());
    m = m.with_disorder(sample_disorder({12.0, 30, 3}, 2, 10));
    const auto basis = make_sector_basis(10, 5);
    const auto H = build_hamiltonian(m, basis);
    const Config neel = parse_bitstring("0101010101");
    const auto idx = static_cast<Eigen::Index>(*basis->index_of(neel));
    double expected = 0.0;
    for (std::size_t i = 1; i < 10; i += 2) expected += m.h(i) + m.dh(i);
    EXPECT_NEAR(H.entries(idx, idx).real(), expected, 1e-13);
    EXPECT_EQ(H.entries.rows(), 252);
}

TEST(BuildHamiltonian, MatchesKroneckerOracle) {
    const DeviceParams ref = DeviceParams::reference();
    for (std::size_t n = 2; n <= 6; ++n) {
        DeviceParams p = ref;
        p.n_sites = n;
        p.g.resize(n);
        p.lambda_c.resize(n);
        p.t1.resize(n);
        p.t_phi.resize(n);
        const SpinModel m = derive_couplings(p).with_disorder(sample_disorder({5.0, 3, 11}, 2, n));
        const Eigen::MatrixXcd oracle = oracle::kron_hamiltonian(m.J, m.h + m.dh);
        const auto full = build_hamiltonian(m, make_full_basis(n));
        EXPECT_LT((full.entries - oracle).cwiseAbs().maxCoeff(), 1e-14) << "n=" << n;
        const Eigen::MatrixXcd sparse_full = Eigen::MatrixXcd(full.sparse());
        EXPECT_EQ(sparse_full, full.entries);
        for (std::size_t k = 0; k <= n; ++k) {
            const auto sb = make_sector_basis(n, k);
            const auto sector = build_hamiltonian(m, sb);
            for (std::size_t a = 0; a < sb->dim(); ++a) {
                for (std::size_t b = 0; b < sb->dim(); ++b) {
                    EXPECT_EQ(sector.entries(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)),
                              full.entries(sb->state(a), sb->state(b)));
                }
            }
        }
    }
}

TEST(BuildHamiltonian, CommutesWithExcitationNumber) {
    for (std::size_t n = 2; n <= 6; ++n) {
        DeviceParams p = DeviceParams::reference();
        p.n_sites = n;
        p.g.resize(n);
        p.lambda_c.resize(n);
        p.t1.resize(n);
        p.t_phi.resize(n);
        const SpinModel m = derive_couplings(p).with_disorder(sample_disorder({3.0, 1, 2}, 1, n));
        const auto H = build_hamiltonian(m, make_full_basis(n));
        Eigen::MatrixXcd N = Eigen::MatrixXcd::Zero(H.entries.rows(), H.entries.cols());
        for (Eigen::Index c = 0; c < N.rows(); ++c) N(c, c) = std::popcount(static_cast<Config>(c));
        EXPECT_LT((H.entries * N - N * H.entries).norm(), 1e-12);
    }
}

TEST(BuildHamiltonian, RejectsDimensionMismatch) {
    const SpinModel m = derive_couplings(DeviceParams::reference());
    EXPECT_THROW(build_hamiltonian(m, make_full_basis(4)), std::invalid_argument);
}

TEST(RestrictNearestNeighbor, ZeroesLongRangeOnly) {
    const SpinModel m = derive_couplings(DeviceParams::reference());
    const SpinModel r = restrict_nearest_neighbor(m);
    EXPECT_EQ(r.J(0, 2), 0.0);
    EXPECT_EQ(r.J(4, 5), m.J(4, 5));
    EXPECT_NEAR(r.J(4, 5), -0.3654, 5e-5);
    EXPECT_EQ(r.J(9, 0), m.J(9, 0));
    EXPECT_EQ(r.h, m.h);
    EXPECT_EQ(restrict_nearest_neighbor(r).J, r.J);
}

TEST(RestrictNearestNeighbor, OpenChainDropsRingPair) {
    const SpinModel m = derive_couplings(DeviceParams::reference());
    const SpinModel r = restrict_nearest_neighbor(m, ChainBoundary::open);
    EXPECT_EQ(r.J(9, 0), 0.0);
    EXPECT_EQ(r.J(0, 9), 0.0);
    EXPECT_EQ(r.J(8, 9), m.J(8, 9));
}

TEST(SpinModel, SubsystemKeepsListedOrder) {
    const SpinModel m = derive_couplings(DeviceParams::reference());
    const std::vector<std::size_t> sites{7, 6};
    const SpinModel s = m.subsystem(sites);
    EXPECT_EQ(s.J(0, 1), m.J(7, 6));
    EXPECT_EQ(s.h(0), m.h(7));
    EXPECT_THROW(m.subsystem(std::vector<std::size_t>{10}), std::invalid_argument);
}
