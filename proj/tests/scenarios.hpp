#pragma once

#include <string>

#include "tlta/scenario.hpp"

#ifndef TLTA_SCENARIO_DIR
#  error "TLTA_SCENARIO_DIR must point at the shipped scenarios"
#endif

namespace shipped {

inline std::string path(const std::string& name) { return std::string(TLTA_SCENARIO_DIR) + "/" + name + ".scenario"; }

inline tlta::scenario::ResolvedScenario load(const std::string& name) {
  return tlta::scenario::resolve(tlta::scenario::load_scenario(path(name)));
}

inline const char* const kAll[] = {"journey",       "shielded_crossing", "handover_suppression", "tampered_lte",
                                   "nonce_replay",  "gps_spoof",         "judder",               "judder_control",
                                   "bottleneck",    "bottleneck_distributed", "tradefair",       "stadium"};

}  // namespace shipped
