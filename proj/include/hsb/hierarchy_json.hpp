#pragma once

#include <nlohmann/json.hpp>

#include "hsb/hierarchy.hpp"

namespace hsb {

// Descriptor layout:
//   {"kind": "binary-tree", "psi": 2, "hs": 1, "branching": 2, "dims": 1,
//    "grid": [4], "root": 0,
//    "nodes": [{"id": 0, "region": [[0, 3]], "groups": [[1, 2]]}, ...]}
// Region intervals are inclusive cell ranges.
nlohmann::json structure_to_json(const Structure& structure);

// Rebuilds and validates a structure (ConfigError on any violation).
Structure structure_from_json(const nlohmann::json& doc);

}  // namespace hsb
