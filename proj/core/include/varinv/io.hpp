#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include <Eigen/Core>

namespace varinv {

/// Write-to-temp + atomic rename; no partial outputs on failure.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

nlohmann::json load_json(const std::filesystem::path& path);
void save_json_atomic(const std::filesystem::path& path, const nlohmann::json& value,
                      int indent = 2);

nlohmann::json eigen_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd eigen_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit of a string, hex-encoded (config fingerprints).
std::string fnv1a_hex(const std::string& data);

}  // namespace varinv
