#pragma once

#include <variant>
#include <vector>

namespace vrer {

// Discrete index or continuous vector, depending on the action space.
using Action = std::variant<int, std::vector<double>>;

inline int discrete(const Action& a) { return std::get<int>(a); }
inline const std::vector<double>& continuous(const Action& a) {
  return std::get<std::vector<double>>(a);
}

}  // namespace vrer
