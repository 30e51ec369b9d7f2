#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecs {

/// One verified identity. Exact checks carry a zero residual by definition;
/// numeric checks carry the measured residual and the tolerance it was held to.
/// A lower-bound check passes when the measured value exceeds the tolerance.
struct Check {
  std::string name;
  bool exact = true;
  bool pass = false;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string detail;
  bool lower_bound = false;
};

struct CheckList {
  std::vector<Check> checks;

  bool pass() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  bool contains(const std::string& name) const {
    return std::any_of(checks.begin(), checks.end(), [&](const Check& c) { return c.name == name; });
  }
  const Check& operator[](const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw std::out_of_range("CheckList: no check named " + name);
  }

  void exact(std::string name, bool pass, std::string detail = {}) {
    checks.push_back({std::move(name), true, pass, 0.0, 0.0, std::move(detail)});
  }
  void numeric(std::string name, double residual, double tolerance, std::string detail = {}) {
    checks.push_back({std::move(name), false, residual < tolerance, residual, tolerance, std::move(detail)});
  }
  void at_least(std::string name, double value, double minimum, std::string detail = {}) {
    checks.push_back({std::move(name), false, value > minimum, value, minimum, std::move(detail), true});
  }
  void append(const CheckList& other) { checks.insert(checks.end(), other.checks.begin(), other.checks.end()); }
};

}  // namespace ecs
