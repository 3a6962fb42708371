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
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mblsim {

namespace {

constexpr std::size_t kMaxSites = 20;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Config parse_bitstring(const std::string& bits) {
    require(!bits.empty() && bits.size() <= kMaxSites, "bitstring length must be 1.." + std::to_string(kMaxSites));
    Config c = 0;
    for (char ch : bits) {
        require(ch == '0' || ch == '1', "bitstring may only contain '0' and '1': " + bits);
        c = (c << 1) | static_cast<Config>(ch == '1');
    }
    return c;
}

std::string format_bitstring(Config c, std::size_t n_sites) {
    std::string out(n_sites, '0');
    for (std::size_t i = 0; i < n_sites; ++i) {
        if (occupied(c, n_sites, i)) out[i] = '1';
    }
    return out;
}

DeviceParams DeviceParams::reference() {
    DeviceParams p;
    p.n_sites = 10;
    p.g = {14.2, 20.5, 19.9, 20.2, 15.2, 19.9, 19.6, 18.9, 19.8, 16.3};
    p.lambda_c = {1.8, 1.9, 1.9, 1.8, 0.1, 1.8, 1.8, 1.9, 1.8, 0.0};
    p.delta = -650.0;
    p.t1 = {25.6, 21.6, 9.8, 14.3, 14.2, 32.5, 11.9, 9.4, 17.9, 30.6};
    p.t_phi.assign(10, 30.0);
    return p;
}

void DeviceParams::validate() const {
    require(n_sites >= 2 && n_sites <= kMaxSites, "n_sites must be in [2, 20]");
    require(g.size() == n_sites, "g must have n_sites entries");
    require(lambda_c.size() == n_sites, "lambda_c must have n_sites entries (ring order)");
    require(t1.size() == n_sites, "t1 must have n_sites entries");
    require(t_phi.size() == n_sites, "t_phi must have n_sites entries");
    require(delta != 0.0 && std::isfinite(delta), "delta must be finite and nonzero");
    for (std::size_t i = 0; i < n_sites; ++i) {
        require(g[i] > 0.0, "g must be positive");
        require(lambda_c[i] >= 0.0, "lambda_c must be non-negative");
        // Infinite lifetimes are allowed and switch the channel off.
        require(t1[i] > 0.0, "t1 must be positive");
        require(t_phi[i] > 0.0, "t_phi must be positive");
    }
}

DeviceParams device_params_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("device parameters: ") + e.what());
    }
    require(doc.is_object(), "device parameters must be a JSON object");

    DeviceParams p = DeviceParams::reference();
    auto read_vec = [&](const char* key, std::vector<double>& dst) {
        if (!doc.contains(key)) return;
        try {
            dst = doc.at(key).get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument(std::string("device parameter '") + key + "' must be a number array");
        }
    };
    read_vec("g", p.g);
    read_vec("lambda_c", p.lambda_c);
    read_vec("t1", p.t1);
    if (doc.contains("t_phi") && doc["t_phi"].is_number()) {
        p.t_phi.assign(p.g.size(), doc["t_phi"].get<double>());
    } else {
        read_vec("t_phi", p.t_phi);
    }
    if (doc.contains("delta")) {
        require(doc["delta"].is_number(), "device parameter 'delta' must be a number");
        p.delta = doc["delta"].get<double>();
    }
    p.n_sites = p.g.size();
    p.validate();
    return p;
}

DeviceParams load_device_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open device parameter file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return device_params_from_json(ss.str());
}

void DisorderSpec::validate() const {
    require(bound >= 0.0 && std::isfinite(bound), "disorder bound must be finite and >= 0");
    require(n_realizations >= 1, "n_realizations must be >= 1");
}

SpinModel SpinModel::with_disorder(std::span<const double> offsets) const {
    require(offsets.size() == n_sites(), "disorder offsets do not match the number of sites");
    SpinModel out = *this;
    out.dh = Eigen::Map<const Eigen::VectorXd>(offsets.data(), static_cast<Eigen::Index>(offsets.size()));
    return out;
}

SpinModel SpinModel::subsystem(std::span<const std::size_t> sites) const {
    require(!sites.empty(), "subsystem must contain at least one site");
    const auto m = static_cast<Eigen::Index>(sites.size());
    SpinModel out{Eigen::MatrixXd::Zero(m, m), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
    for (Eigen::Index a = 0; a < m; ++a) {
        require(sites[a] < n_sites(), "subsystem site out of range");
        out.h(a) = h(sites[a]);
        out.dh(a) = dh(sites[a]);
        for (Eigen::Index b = 0; b < m; ++b) out.J(a, b) = J(sites[a], sites[b]);
    }
    return out;
}

SectorBasis::SectorBasis(std::size_t n_sites, std::optional<std::size_t> excitations)
    : n_sites_(n_sites), excitations_(excitations) {
    require(n_sites >= 1 && n_sites <= kMaxSites, "basis size must be 1..20 sites");
    if (excitations) require(*excitations <= n_sites, "excitation count out of range");
    const Config total = Config{1} << n_sites;
    lookup_.assign(total, -1);
    for (Config c = 0; c < total; ++c) {
        if (excitations && static_cast<std::size_t>(std::popcount(c)) != *excitations) continue;
        lookup_[c] = static_cast<std::int32_t>(states_.size());
        states_.push_back(c);
    }
}

SectorBasis SectorBasis::sector(std::size_t n_sites, std::size_t excitations) {
    return SectorBasis(n_sites, excitations);
}

SectorBasis SectorBasis::full(std::size_t n_sites) { return SectorBasis(n_sites, std::nullopt); }

std::optional<std::size_t> SectorBasis::index_of(Config c) const {
    if (c >= lookup_.size() || lookup_[c] < 0) return std::nullopt;
    return static_cast<std::size_t>(lookup_[c]);
}

BasisPtr make_sector_basis(std::size_t n_sites, std::size_t excitations) {
    return std::make_shared<const SectorBasis>(SectorBasis::sector(n_sites, excitations));
}

BasisPtr make_full_basis(std::size_t n_sites) {
    return std::make_shared<const SectorBasis>(SectorBasis::full(n_sites));
}

Eigen::SparseMatrix<std::complex<double>> HamiltonianMatrix::sparse() const {
    return entries.sparseView();
}

SpinModel derive_couplings(const DeviceParams& params) {
    params.validate();
    const auto n = static_cast<Eigen::Index>(params.n_sites);
    SpinModel m{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        m.h(i) = params.g[i] * params.g[i] / params.delta;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) m.J(i, j) = params.g[i] * params.g[j] / params.delta;
        }
    }
    // Two sites share a single link; the wraparound entry would double it.
    const Eigen::Index links = n > 2 ? n : n - 1;
    for (Eigen::Index i = 0; i < links; ++i) {
        const Eigen::Index j = (i + 1) % n;
        m.J(i, j) += params.lambda_c[i];
        m.J(j, i) += params.lambda_c[i];
    }
    return m;
}

std::vector<double> sample_disorder(const DisorderSpec& spec, std::size_t k, std::size_t n_sites) {
    spec.validate();
    if (k < 1 || k > spec.n_realizations) {
        throw std::out_of_range("realization index " + std::to_string(k) + " outside 1.." +
                                std::to_string(spec.n_realizations));
    }
    // Fresh engine per (seed, k): realization k never depends on the draws of 1..k-1.
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    std::mt19937_64 engine(seq);
    std::vector<double> dh(n_sites);
    for (auto& v : dh) {
        const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;  // [0, 1)
        v = spec.bound * (2.0 * u - 1.0);
    }
    return dh;
}

namespace {

template <typename Emit>
void for_each_element(const SpinModel& model, const SectorBasis& basis, Emit&& emit) {
    const std::size_t n = model.n_sites();
    for (std::size_t col = 0; col < basis.dim(); ++col) {
        const Config c = basis.state(col);
        double diag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!occupied(c, n, i)) continue;
            diag += model.h(i) + model.dh(i);
            // sigma_j^+ sigma_i^-: move the excitation from i to an empty j.
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i || occupied(c, n, j) || model.J(i, j) == 0.0) continue;
                const Config target = c ^ site_mask(n, i) ^ site_mask(n, j);
                const auto row = basis.index_of(target);
                if (row) emit(*row, col, model.J(i, j));
            }
        }
        emit(col, col, diag);
    }
}

void check_dimensions(const SpinModel& model, const SectorBasis& basis) {
    if (basis.n_sites() != model.n_sites()) {
        throw std::invalid_argument("basis has " + std::to_string(basis.n_sites()) + " sites but model has " +
                                    std::to_string(model.n_sites()));
    }
}

}  // namespace

HamiltonianMatrix build_hamiltonian(const SpinModel& model, const BasisPtr& basis) {
    require(basis != nullptr, "null basis");
    check_dimensions(model, *basis);
    const auto d = static_cast<Eigen::Index>(basis->dim());
    HamiltonianMatrix H{basis, Eigen::MatrixXcd::Zero(d, d)};
    for_each_element(model, *basis, [&](std::size_t r, std::size_t c, double v) { H.entries(r, c) += v; });
    return H;
}

Eigen::SparseMatrix<std::complex<double>> build_hamiltonian_sparse(const SpinModel& model, const SectorBasis& basis) {
    check_dimensions(model, basis);
    std::vector<Eigen::Triplet<std::complex<double>>> triplets;
    for_each_element(model, basis, [&](std::size_t r, std::size_t c, double v) {
        triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
    });
    const auto d = static_cast<Eigen::Index>(basis.dim());
    Eigen::SparseMatrix<std::complex<double>> H(d, d);
    H.setFromTriplets(triplets.begin(), triplets.end());
    return H;
}

SpinModel restrict_nearest_neighbor(const SpinModel& model, ChainBoundary boundary) {
    SpinModel out = model;
    const auto n = static_cast<Eigen::Index>(model.n_sites());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index dist = std::abs(i - j);
            const bool wrap = dist == n - 1 && n > 2;
            const bool keep = dist == 1 || (wrap && boundary == ChainBoundary::ring);
            if (!keep) out.J(i, j) = 0.0;
        }
    }
    return out;
}

}  // namespace mblsim
