#pragma once

// Internal helpers shared by the module implementations.

#include <string>
#include <vector>

#include "pklab/lattice.hpp"

namespace pklab::detail {

inline std::string node_str(int i, NodeId k) {
  return "(" + std::to_string(i) + ", " + std::to_string(k) + ")";
}

// Assigns a value pushed forward from a parent node, requiring bitwise
// agreement when several parents reach the same node: path-dependent
// constructions are only representable on trees.
inline void assign_from_parent(std::vector<double>& lv, std::vector<bool>& seen,
                               NodeId v, double value, const char* where,
                               int i) {
  if (!seen[v]) {
    lv[v] = value;
    seen[v] = true;
    return;
  }
  if (lv[v] != value) {
    fail(where, "value is path-dependent at merged node " + node_str(i, v) +
                    "; use a tree lattice");
  }
}

}  // namespace pklab::detail
