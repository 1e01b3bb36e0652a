#include "codestop/config_json.hpp"

#include <cmath>
#include <string>

#include "codestop/errors.hpp"

namespace codestop {

namespace {

using json = nlohmann::json;

double read_real(const json& v, const char* key) {
  if (!v.is_number()) throw ValidationError("expected a number", key);
  return v.get<double>();
}

int read_int(const json& v, const char* key) {
  if (!v.is_number_integer()) throw ValidationError("expected an integer", key);
  return v.get<int>();
}

std::string read_string(const json& v, const char* key) {
  if (!v.is_string()) throw ValidationError("expected a string", key);
  return v.get<std::string>();
}

double read_tau(const json& v) {
  if (v.is_null()) return kInfinity;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "+inf") return kInfinity;
    throw ValidationError("expected a number or \"inf\"", "tau");
  }
  return read_real(v, "tau");
}

}  // namespace

nlohmann::ordered_json config_to_json(const PolicyConfig& cfg) {
  nlohmann::ordered_json j;
  j["rule"] = to_string(cfg.rule);
  j["v_variant"] = to_string(cfg.v_variant);
  j["w_variant"] = to_string(cfg.w_variant);
  j["r_min"] = cfg.r_min;
  j["r_max"] = cfg.r_max;
  j["steps"] = cfg.ramp_steps;
  if (std::isinf(cfg.tau)) {
    j["tau"] = "inf";
  } else {
    j["tau"] = cfg.tau;
  }
  j["delta"] = cfg.delta;
  j["deer_threshold"] = cfg.deer_threshold;
  j["fixed_step_cap"] = cfg.fixed_step_cap;
  j["convergence_window"] = cfg.convergence_window;
  return j;
}

PolicyConfig config_from_json(const nlohmann::json& j, PolicyConfig defaults) {
  if (!j.is_object()) throw ValidationError("policy must be an object", "policy");
  PolicyConfig cfg = defaults;
  for (const auto& [key, value] : j.items()) {
    if (key == "rule") {
      cfg.rule = parse_rule(read_string(value, "rule"));
    } else if (key == "v_variant") {
      cfg.v_variant = parse_instability_variant(read_string(value, "v_variant"));
    } else if (key == "w_variant") {
      cfg.w_variant = parse_weight_variant(read_string(value, "w_variant"));
    } else if (key == "r_min") {
      cfg.r_min = read_real(value, "r_min");
    } else if (key == "r_max") {
      cfg.r_max = read_real(value, "r_max");
    } else if (key == "steps") {
      cfg.ramp_steps = read_int(value, "steps");
    } else if (key == "tau") {
      cfg.tau = read_tau(value);
    } else if (key == "delta") {
      cfg.delta = read_real(value, "delta");
    } else if (key == "deer_threshold") {
      cfg.deer_threshold = read_real(value, "deer_threshold");
    } else if (key == "fixed_step_cap") {
      cfg.fixed_step_cap = read_int(value, "fixed_step_cap");
    } else if (key == "convergence_window") {
      cfg.convergence_window = read_int(value, "convergence_window");
    }
  }
  validate(cfg);
  return cfg;
}

}  // namespace codestop
