#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include <Eigen/Core>

#include "varinv/optimizer.hpp"
#include "varinv/regularization.hpp"

namespace varinv {

struct PhantomSpec {
  enum class Kind { affine, layered, disk };
  Kind kind = Kind::affine;
  double background = 1.0;
  double value = 2.0;                    ///< inclusion / left-layer value
  Eigen::Vector2d center{0.5, 0.5};      ///< disk only
  double radius = 0.2;                   ///< disk only
};

/// Full experiment description; every CLI command starts from one of these.
struct RunConfig {
  int mesh_n = 8;
  int experiments = 2;
  PhantomSpec phantom;
  double sigma_lower = 0.5;
  double sigma_upper = 2.0;
  double delta = 0.0;
  std::uint64_t seed = 42;
  RegConfig reg;
  SolveMode mode = SolveMode::maao_ls;
  SolverOptions solver;
  std::string output_dir = "out";

  /// Schema validation followed by semantic checks (nonempty box, phantom
  /// values inside [lower, upper]). Throws std::invalid_argument with all
  /// collected schema errors.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// FNV-1a fingerprint of the canonical JSON dump.
  std::string hash() const;
};

/// The shipped JSON schema text (also at schema/runconfig.schema.json).
const char* run_config_schema();

/// Minimal JSON-Schema subset checker (type, required, properties,
/// additionalProperties, enum, minimum/maximum and exclusive variants,
/// items, minItems/maxItems). Returns human-readable violations.
std::vector<std::string> validate_against_schema(const nlohmann::json& instance,
                                                 const nlohmann::json& schema,
                                                 const std::string& where = "$");

}  // namespace varinv
