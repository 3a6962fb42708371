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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mblsim/observables.hpp"

namespace mblsim {

/// Named in-memory output files, kept in emission order.
struct FileSet {
    std::vector<std::pair<std::string, std::string>> files;

    void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
    const std::string* find(const std::string& name) const;
};

/// Shortest round-trip decimal form; deterministic across runs.
std::string format_number(double v);

/// Columns: time_us, mean, sd, r001..rNNN.
std::string series_csv(const ObservableSeries& series);

/// Row-major entries as [[re, im], ...].
nlohmann::json matrix_to_json(const Eigen::MatrixXcd& m);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);

std::string sha256_hex(const std::string& data);

struct FileChecksum {
    std::string name;
    std::string sha256;
    std::size_t bytes = 0;
};

struct RunManifest {
    nlohmann::json config;
    std::string code_version;
    std::vector<FileChecksum> files;
    std::string started_at;
    std::string finished_at;
    double wall_seconds = 0.0;
    std::filesystem::path directory;

    nlohmann::json to_json() const;
    std::string to_text() const;
    static RunManifest from_json(const nlohmann::json& doc);
};

/// Writes every file under `dir` (created if needed). Throws std::runtime_error on I/O failure.
std::vector<FileChecksum> write_files(const std::filesystem::path& dir, const FileSet& files);

std::string code_version();

}  // namespace mblsim
