#include "varinv/run_config.hpp"

#include <stdexcept>

#include "varinv/io.hpp"
#include "varinv/schema_data.hpp"

namespace varinv {

const char* run_config_schema() { return detail::kRunConfigSchema; }

namespace {

bool is_integerish(const nlohmann::json& v) {
  return v.is_number_integer() || v.is_number_unsigned();
}

void check_numeric_bounds(const nlohmann::json& value, const nlohmann::json& rule,
                          const std::string& where, std::vector<std::string>& errors) {
  const double x = value.get<double>();
  if (rule.contains("minimum") && x < rule["minimum"].get<double>())
    errors.push_back(where + ": " + std::to_string(x) + " below minimum");
  if (rule.contains("exclusiveMinimum") && x <= rule["exclusiveMinimum"].get<double>())
    errors.push_back(where + ": " + std::to_string(x) + " not above exclusiveMinimum");
  if (rule.contains("maximum") && x > rule["maximum"].get<double>())
    errors.push_back(where + ": " + std::to_string(x) + " above maximum");
  if (rule.contains("exclusiveMaximum") && x >= rule["exclusiveMaximum"].get<double>())
    errors.push_back(where + ": " + std::to_string(x) + " not below exclusiveMaximum");
}

}  // namespace

std::vector<std::string> validate_against_schema(const nlohmann::json& instance,
                                                 const nlohmann::json& schema,
                                                 const std::string& where) {
  std::vector<std::string> errors;

  if (schema.contains("type")) {
    const std::string type = schema["type"].get<std::string>();
    bool ok = false;
    if (type == "object") ok = instance.is_object();
    else if (type == "array") ok = instance.is_array();
    else if (type == "string") ok = instance.is_string();
    else if (type == "integer") ok = is_integerish(instance);
    else if (type == "number") ok = instance.is_number();
    else if (type == "boolean") ok = instance.is_boolean();
    if (!ok) {
      errors.push_back(where + ": expected " + type);
      return errors;  // further checks would be meaningless
    }
  }

  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& candidate : schema["enum"]) {
      if (instance == candidate) found = true;
    }
    if (!found) errors.push_back(where + ": value not in enum");
  }

  if (instance.is_number()) check_numeric_bounds(instance, schema, where, errors);

  if (instance.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!instance.contains(key.get<std::string>()))
          errors.push_back(where + ": missing required key '" + key.get<std::string>() + "'");
      }
    }
    const bool closed =
        schema.contains("additionalProperties") && schema["additionalProperties"].is_boolean() &&
        !schema["additionalProperties"].get<bool>();
    for (const auto& [key, value] : instance.items()) {
      if (schema.contains("properties") && schema["properties"].contains(key)) {
        const auto sub = validate_against_schema(value, schema["properties"][key],
                                                 where + "." + key);
        errors.insert(errors.end(), sub.begin(), sub.end());
      } else if (closed) {
        errors.push_back(where + ": unknown key '" + key + "'");
      }
    }
  }

  if (instance.is_array()) {
    if (schema.contains("minItems") && instance.size() < schema["minItems"].get<std::size_t>())
      errors.push_back(where + ": too few items");
    if (schema.contains("maxItems") && instance.size() > schema["maxItems"].get<std::size_t>())
      errors.push_back(where + ": too many items");
    if (schema.contains("items")) {
      for (std::size_t k = 0; k < instance.size(); ++k) {
        const auto sub = validate_against_schema(instance[k], schema["items"],
                                                 where + "[" + std::to_string(k) + "]");
        errors.insert(errors.end(), sub.begin(), sub.end());
      }
    }
  }

  return errors;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  const nlohmann::json schema = nlohmann::json::parse(run_config_schema());
  const auto errors = validate_against_schema(j, schema);
  if (!errors.empty()) {
    std::string message = "run config rejected by schema:";
    for (const auto& e : errors) message += "\n  " + e;
    throw std::invalid_argument(message);
  }

  RunConfig cfg;
  cfg.mesh_n = j["mesh_n"].get<int>();
  cfg.experiments = j["experiments"].get<int>();

  const auto& ph = j["phantom"];
  const std::string kind = ph["kind"].get<std::string>();
  if (kind == "affine") cfg.phantom.kind = PhantomSpec::Kind::affine;
  else if (kind == "layered") cfg.phantom.kind = PhantomSpec::Kind::layered;
  else cfg.phantom.kind = PhantomSpec::Kind::disk;
  cfg.phantom.background = ph["background"].get<double>();
  if (ph.contains("value")) cfg.phantom.value = ph["value"].get<double>();
  if (ph.contains("center"))
    cfg.phantom.center = {ph["center"][0].get<double>(), ph["center"][1].get<double>()};
  if (ph.contains("radius")) cfg.phantom.radius = ph["radius"].get<double>();

  cfg.sigma_lower = j["bounds"]["lower"].get<double>();
  cfg.sigma_upper = j["bounds"]["upper"].get<double>();
  cfg.delta = j["noise"]["delta"].get<double>();
  cfg.seed = j["noise"]["seed"].get<std::uint64_t>();

  const auto& reg = j["regularization"];
  if (reg.contains("alpha_c")) cfg.reg.alpha_c = reg["alpha_c"].get<std::vector<double>>();
  if (reg.contains("alpha_p")) cfg.reg.alpha_p = reg["alpha_p"].get<std::vector<double>>();
  if (reg.contains("alpha_min")) cfg.reg.alpha_min = reg["alpha_min"].get<double>();
  if (reg.contains("eps")) cfg.reg.eps = reg["eps"].get<double>();
  if (reg.contains("eps_tilde")) cfg.reg.eps_tilde = reg["eps_tilde"].get<double>();
  if (reg.contains("tau")) cfg.reg.tau = reg["tau"].get<double>();
  if (reg.contains("sigma_component")) cfg.reg.sigma_component = reg["sigma_component"].get<bool>();

  cfg.mode = parse_mode(j["mode"].get<std::string>());

  if (j.contains("solver")) {
    const auto& sv = j["solver"];
    if (sv.contains("max_outer")) cfg.solver.max_outer = sv["max_outer"].get<int>();
    if (sv.contains("max_inner")) cfg.solver.max_inner = sv["max_inner"].get<int>();
    if (sv.contains("tol_rel_decrease"))
      cfg.solver.tol_rel_decrease = sv["tol_rel_decrease"].get<double>();
    if (sv.contains("tol_pg")) cfg.solver.tol_pg = sv["tol_pg"].get<double>();
  }
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();

  // Semantic checks beyond the schema.
  if (cfg.sigma_upper < cfg.sigma_lower)
    throw std::invalid_argument("run config: empty sigma box (upper < lower)");
  if (cfg.reg.alpha_c.size() != cfg.reg.alpha_p.size())
    throw std::invalid_argument("run config: alpha_c / alpha_p length mismatch");
  const double lo = cfg.sigma_lower, hi = cfg.sigma_upper;
  auto inside = [lo, hi](double v) { return lo <= v && v <= hi; };
  bool phantom_ok = inside(cfg.phantom.background);
  if (cfg.phantom.kind != PhantomSpec::Kind::affine)
    phantom_ok = phantom_ok && inside(cfg.phantom.value);
  if (!phantom_ok)
    throw std::invalid_argument("run config: phantom values must lie inside the sigma box");
  if (cfg.reg.tau <= 1.0 && cfg.delta > 0.0 && cfg.mode != SolveMode::aao_ls)
    throw std::invalid_argument("run config: tau must be > 1 for noisy Morozov-type runs");

  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["mesh_n"] = mesh_n;
  j["experiments"] = experiments;
  nlohmann::json ph;
  switch (phantom.kind) {
    case PhantomSpec::Kind::affine: ph["kind"] = "affine"; break;
    case PhantomSpec::Kind::layered: ph["kind"] = "layered"; break;
    case PhantomSpec::Kind::disk: ph["kind"] = "disk"; break;
  }
  ph["background"] = phantom.background;
  if (phantom.kind != PhantomSpec::Kind::affine) ph["value"] = phantom.value;
  if (phantom.kind == PhantomSpec::Kind::disk) {
    ph["center"] = {phantom.center.x(), phantom.center.y()};
    ph["radius"] = phantom.radius;
  }
  j["phantom"] = ph;
  j["bounds"] = {{"lower", sigma_lower}, {"upper", sigma_upper}};
  j["noise"] = {{"delta", delta}, {"seed", seed}};
  j["regularization"] = {{"alpha_c", reg.alpha_c},   {"alpha_p", reg.alpha_p},
                         {"alpha_min", reg.alpha_min}, {"eps", reg.eps},
                         {"eps_tilde", reg.eps_tilde}, {"tau", reg.tau},
                         {"sigma_component", reg.sigma_component}};
  j["mode"] = to_string(mode);
  j["solver"] = {{"max_outer", solver.max_outer},
                 {"max_inner", solver.max_inner},
                 {"tol_rel_decrease", solver.tol_rel_decrease},
                 {"tol_pg", solver.tol_pg}};
  j["output_dir"] = output_dir;
  return j;
}

std::string RunConfig::hash() const { return fnv1a_hex(to_json().dump()); }

}  // namespace varinv
