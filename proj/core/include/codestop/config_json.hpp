#pragma once

// JSON form of PolicyConfig, shared by the sidecar "open" message and the
// report writers:
//   {"rule":"codestop","v_variant":"trend_aware","w_variant":"log",
//    "r_min":0.0,"r_max":0.95,"steps":5,"tau":7.1,"delta":0.55,
//    "deer_threshold":0.95,"fixed_step_cap":40,"convergence_window":3}
// Missing keys keep their defaults. An infinite tau is written as "inf" and
// read back from "inf", "infinity" or null.

#include <nlohmann/json.hpp>

#include "codestop/types.hpp"

namespace codestop {

nlohmann::ordered_json config_to_json(const PolicyConfig& cfg);

/// Throws ValidationError naming the offending key; the result is validated.
PolicyConfig config_from_json(const nlohmann::json& j,
                              PolicyConfig defaults = {});

}  // namespace codestop
