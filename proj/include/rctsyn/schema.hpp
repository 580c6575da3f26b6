#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rctsyn/common.hpp"

namespace rctsyn {

using json = nlohmann::ordered_json;

enum class Role { response, treatment, covariate, block };
enum class Kind { continuous, discrete };

inline const char *role_name(Role r) {
  switch (r) {
    case Role::response: return "response";
    case Role::treatment: return "treatment";
    case Role::covariate: return "covariate";
    case Role::block: return "block";
  }
  return "?";
}

inline const char *kind_name(Kind k) {
  return k == Kind::continuous ? "continuous" : "discrete";
}

/// One column of a study frame. Continuous columns carry declared support
/// bounds (possibly infinite); discrete columns carry an ordered level list.
struct ColumnSpec {
  std::string name;
  Role role = Role::covariate;
  Kind kind = Kind::continuous;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  std::vector<std::string> levels;

  bool bounded() const {
    return std::isfinite(lower) && std::isfinite(upper);
  }

  int level_index(const std::string &label) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] == label) return static_cast<int>(i);
    }
    return -1;
  }
};

/// Column layout of a study: exactly one response, zero or more treatment
/// dummies (one per active arm; control is the all-zero row), optional block
/// columns, and covariates. Order of declaration is preserved and meaningful:
/// it fixes CSV layout, grid dimension order, and regressor order.
struct Schema {
  std::vector<ColumnSpec> columns;

  std::size_t n_columns() const { return columns.size(); }

  const ColumnSpec &column(std::size_t i) const { return columns[i]; }

  int find(const std::string &name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  std::size_t require(const std::string &name) const {
    const int i = find(name);
    if (i < 0) throw ValidationError("unknown column '" + name + "'");
    return static_cast<std::size_t>(i);
  }

  std::size_t response_index() const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].role == Role::response) return i;
    }
    throw ValidationError("schema has no response column");
  }

  std::vector<std::size_t> indices_of(Role role) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].role == role) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> treatment_indices() const {
    return indices_of(Role::treatment);
  }
  std::vector<std::size_t> block_indices() const {
    return indices_of(Role::block);
  }
  std::vector<std::size_t> covariate_indices() const {
    return indices_of(Role::covariate);
  }

  void validate() const {
    if (columns.empty()) throw ValidationError("schema declares no columns");
    std::set<std::string> seen;
    std::size_t responses = 0;
    for (const auto &c : columns) {
      if (c.name.empty()) throw ValidationError("schema column with empty name");
      if (!seen.insert(c.name).second) {
        throw ValidationError("duplicate column name '" + c.name + "'");
      }
      if (c.role == Role::response) ++responses;
      if (c.kind == Kind::continuous) {
        if (!c.levels.empty()) {
          throw ValidationError("continuous column '" + c.name +
                                "' must not declare levels");
        }
        if (std::isnan(c.lower) || std::isnan(c.upper) || !(c.lower < c.upper)) {
          throw ValidationError("continuous column '" + c.name +
                                "' has invalid bounds");
        }
      } else {
        if (c.levels.empty()) {
          throw ValidationError("discrete column '" + c.name +
                                "' declares no levels");
        }
        std::set<std::string> lv;
        for (const auto &l : c.levels) {
          if (!lv.insert(l).second) {
            throw ValidationError("discrete column '" + c.name +
                                  "' has duplicate level '" + l + "'");
          }
        }
      }
      if (c.role == Role::treatment) {
        if (c.kind != Kind::discrete || c.levels != std::vector<std::string>{"0", "1"}) {
          throw ValidationError("treatment column '" + c.name +
                                "' must be a discrete 0/1 indicator");
        }
      }
      if (c.role == Role::block && c.kind != Kind::discrete) {
        throw ValidationError("block column '" + c.name + "' must be discrete");
      }
    }
    if (responses != 1) {
      throw ValidationError("exactly one response column required, found " +
                            std::to_string(responses));
    }
  }

  json to_json() const {
    json cols = json::array();
    for (const auto &c : columns) {
      json jc;
      jc["name"] = c.name;
      jc["role"] = role_name(c.role);
      jc["kind"] = kind_name(c.kind);
      if (c.kind == Kind::continuous) {
        json b = json::array();
        b.push_back(std::isfinite(c.lower) ? json(c.lower) : json("-inf"));
        b.push_back(std::isfinite(c.upper) ? json(c.upper) : json("inf"));
        jc["bounds"] = b;
      } else {
        jc["levels"] = c.levels;
      }
      cols.push_back(jc);
    }
    return json{{"columns", cols}};
  }

  static Schema from_json(const json &j);
  static Schema parse(const std::string &text);
};

namespace detail {

inline double parse_bound(const json &v, const std::string &col) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ValidationError("continuous column '" + col +
                        "': bounds entries must be numbers or \"inf\"/\"-inf\"");
}

}  // namespace detail

inline Schema Schema::from_json(const json &j) {
  if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array()) {
    throw ValidationError("schema must be an object with a \"columns\" array");
  }
  Schema s;
  for (const auto &jc : j["columns"]) {
    if (!jc.is_object() || !jc.contains("name") || !jc["name"].is_string()) {
      throw ValidationError("schema column entries need a string \"name\"");
    }
    ColumnSpec c;
    c.name = jc["name"].get<std::string>();
    const std::string role = jc.value("role", std::string("covariate"));
    if (role == "response") c.role = Role::response;
    else if (role == "treatment") c.role = Role::treatment;
    else if (role == "covariate") c.role = Role::covariate;
    else if (role == "block") c.role = Role::block;
    else throw ValidationError("column '" + c.name + "': unknown role '" + role + "'");

    std::string kind;
    if (jc.contains("kind")) {
      kind = jc["kind"].get<std::string>();
    } else if (c.role == Role::treatment) {
      kind = "discrete";  // treatments default to 0/1 indicators
    } else if (jc.contains("levels")) {
      kind = "discrete";
    } else if (jc.contains("bounds")) {
      kind = "continuous";
    } else {
      throw ValidationError("column '" + c.name + "': kind cannot be inferred");
    }
    if (kind == "continuous") c.kind = Kind::continuous;
    else if (kind == "discrete") c.kind = Kind::discrete;
    else throw ValidationError("column '" + c.name + "': unknown kind '" + kind + "'");

    if (c.kind == Kind::continuous) {
      if (!jc.contains("bounds")) {
        throw ValidationError("continuous column '" + c.name +
                              "' missing declared bounds");
      }
      const auto &b = jc["bounds"];
      if (!b.is_array() || b.size() != 2) {
        throw ValidationError("continuous column '" + c.name +
                              "': bounds must be a [lower, upper] pair");
      }
      c.lower = detail::parse_bound(b[0], c.name);
      c.upper = detail::parse_bound(b[1], c.name);
    } else {
      if (c.role == Role::treatment && !jc.contains("levels")) {
        c.levels = {"0", "1"};
      } else {
        if (!jc.contains("levels") || !jc["levels"].is_array()) {
          throw ValidationError("discrete column '" + c.name +
                                "' missing level list");
        }
        for (const auto &l : jc["levels"]) {
          if (l.is_string()) c.levels.push_back(l.get<std::string>());
          else if (l.is_number_integer()) c.levels.push_back(std::to_string(l.get<long long>()));
          else throw ValidationError("discrete column '" + c.name +
                                     "': levels must be strings");
        }
      }
    }
    s.columns.push_back(std::move(c));
  }
  s.validate();
  return s;
}

inline Schema Schema::parse(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception &e) {
    throw ValidationError(std::string("schema is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

}  // namespace rctsyn
