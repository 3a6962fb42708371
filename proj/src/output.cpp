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

#include "mblsim/output.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

#ifndef MBLSIM_VERSION
#define MBLSIM_VERSION "unknown"
#endif

namespace mblsim {

using nlohmann::json;

const std::string* FileSet::find(const std::string& name) const {
    for (const auto& [n, content] : files) {
        if (n == name) return &content;
    }
    return nullptr;
}

std::string format_number(double v) { return fmt::format("{}", v); }

std::string series_csv(const ObservableSeries& series) {
    std::string out = "time_us,mean,sd";
    for (std::size_t r = 0; r < series.realizations.size(); ++r) out += fmt::format(",r{:03d}", r + 1);
    out += '\n';
    for (std::size_t t = 0; t < series.times.size(); ++t) {
        out += fmt::format("{},{},{}", series.times[t], series.mean[t], series.sd[t]);
        for (const auto& row : series.realizations) out += fmt::format(",{}", row[t]);
        out += '\n';
    }
    return out;
}

json matrix_to_json(const Eigen::MatrixXcd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

json RunManifest::to_json() const {
    json files_json = json::array();
    for (const auto& f : files) files_json.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    return {{"config", config},
            {"code_version", code_version},
            {"files", files_json},
            {"started_at", started_at},
            {"finished_at", finished_at},
            {"wall_seconds", wall_seconds}};
}

std::string RunManifest::to_text() const {
    std::string out;
    out += fmt::format("experiment: {}\n", config.value("experiment", std::string("?")));
    out += fmt::format("code_version: {}\n", code_version);
    out += fmt::format("started_at: {}\n", started_at);
    out += fmt::format("finished_at: {}\n", finished_at);
    out += fmt::format("wall_seconds: {:.3f}\n", wall_seconds);
    out += "files:\n";
    for (const auto& f : files) out += fmt::format("  {}  {}  {}\n", f.sha256, f.bytes, f.name);
    return out;
}

RunManifest RunManifest::from_json(const json& doc) {
    RunManifest m;
    try {
        m.config = doc.at("config");
        m.code_version = doc.at("code_version").get<std::string>();
        for (const auto& f : doc.at("files")) {
            m.files.push_back({f.at("name").get<std::string>(), f.at("sha256").get<std::string>(),
                               f.at("bytes").get<std::size_t>()});
        }
        m.started_at = doc.value("started_at", std::string());
        m.finished_at = doc.value("finished_at", std::string());
        m.wall_seconds = doc.value("wall_seconds", 0.0);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

std::vector<FileChecksum> write_files(const std::filesystem::path& dir, const FileSet& files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    std::vector<FileChecksum> sums;
    for (const auto& [name, content] : files.files) {
        const auto path = dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for " + path.string());
        sums.push_back({name, sha256_hex(content), content.size()});
    }
    return sums;
}

std::string code_version() { return MBLSIM_VERSION; }

}  // namespace mblsim
