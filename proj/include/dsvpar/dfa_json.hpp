#pragma once

// JSON form of a DfaSpec:
//   { "states": [names], "start": name, "accepting": [names], "invalid": name,
//     "groups": [{"bytes": [0-255 | "c"], "catch_all": bool}],
//     "transitions": [[name per state] per group],
//     "emissions": [[{"record","field","control"} per state] per group] }

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dsvpar/dfa.hpp"

namespace dsvpar {

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(std::string("dialect: missing field '") + key + "'");
  return *it;
}

inline StateIndex state_by_name(const std::vector<std::string>& names, const nlohmann::json& v,
                                const std::string& where) {
  if (!v.is_string()) throw ConfigError("dialect: " + where + " must be a state name");
  const auto name = v.get<std::string>();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<StateIndex>(i);
  }
  throw ConfigError("dialect: " + where + " names unknown state '" + name + "'");
}

inline std::uint8_t byte_value(const nlohmann::json& v) {
  if (v.is_number_integer()) {
    const auto x = v.get<std::int64_t>();
    if (x < 0 || x > 255) throw ConfigError("dialect: byte value " + std::to_string(x) + " out of range 0-255");
    return static_cast<std::uint8_t>(x);
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s.size() != 1) throw ConfigError("dialect: byte strings must be exactly one byte, got '" + s + "'");
    return static_cast<std::uint8_t>(s[0]);
  }
  throw ConfigError("dialect: byte values are integers or one-character strings");
}

}  // namespace detail

inline DfaSpec load_spec(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("dialect: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("dialect: top level must be an object");

  try {
    std::vector<std::string> states;
    for (const auto& s : detail::require(doc, "states")) states.push_back(s.get<std::string>());
    if (states.empty()) throw ConfigError("invariant violated: state_count >= 1");

    const StateIndex start = detail::state_by_name(states, detail::require(doc, "start"), "start");
    const StateIndex invalid = detail::state_by_name(states, detail::require(doc, "invalid"), "invalid");
    std::vector<StateIndex> accepting;
    for (const auto& s : detail::require(doc, "accepting")) {
      accepting.push_back(detail::state_by_name(states, s, "accepting"));
    }

    std::vector<SymbolGroup> groups;
    for (const auto& g : detail::require(doc, "groups")) {
      SymbolGroup group;
      if (auto it = g.find("bytes"); it != g.end()) {
        for (const auto& b : *it) group.bytes.push_back(detail::byte_value(b));
      }
      group.catch_all = g.value("catch_all", false);
      groups.push_back(std::move(group));
    }
    if (groups.empty()) throw ConfigError("invariant violated: group_count >= 2");

    const auto& rows = detail::require(doc, "transitions");
    if (!rows.is_array() || rows.size() != groups.size()) {
      throw ConfigError("dialect: transitions needs one row per group");
    }
    std::vector<StateIndex> transitions;
    for (std::size_t g = 0; g < rows.size(); ++g) {
      if (!rows[g].is_array() || rows[g].size() != states.size()) {
        throw ConfigError("dialect: transition row " + std::to_string(g) + " needs one entry per state");
      }
      for (const auto& t : rows[g]) {
        if (t.is_number_integer()) {
          const auto x = t.get<std::int64_t>();
          if (x < 0 || x > 255) {
            throw ConfigError("invariant violated: transition target " + std::to_string(x) +
                              " is not a valid state index");
          }
          transitions.push_back(static_cast<StateIndex>(x));
        } else {
          transitions.push_back(detail::state_by_name(states, t, "transition"));
        }
      }
    }

    const auto& erows = detail::require(doc, "emissions");
    if (!erows.is_array() || erows.size() != groups.size()) {
      throw ConfigError("dialect: emissions needs one row per group");
    }
    std::vector<EmissionAction> emissions;
    for (std::size_t g = 0; g < erows.size(); ++g) {
      if (!erows[g].is_array() || erows[g].size() != states.size()) {
        throw ConfigError("dialect: emission row " + std::to_string(g) + " needs one entry per state");
      }
      for (const auto& e : erows[g]) {
        emissions.push_back({e.value("record", false), e.value("field", false), e.value("control", false)});
      }
    }

    return DfaSpec(std::move(states), start, std::move(accepting), invalid, std::move(groups),
                   std::move(transitions), std::move(emissions));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dialect: ") + e.what());
  }
}

inline DfaSpec load_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dialect file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_spec(ss.str());
}

inline std::string dump_spec(const DfaSpec& spec) {
  nlohmann::json doc;
  const auto& names = spec.state_names();
  doc["states"] = names;
  doc["start"] = names[spec.start_state()];
  doc["invalid"] = names[spec.invalid_state()];
  doc["accepting"] = nlohmann::json::array();
  for (StateIndex s : spec.accepting_states()) doc["accepting"].push_back(names[s]);
  doc["groups"] = nlohmann::json::array();
  doc["transitions"] = nlohmann::json::array();
  doc["emissions"] = nlohmann::json::array();
  for (std::size_t g = 0; g < spec.group_count(); ++g) {
    const auto gi = static_cast<GroupIndex>(g);
    doc["groups"].push_back({{"bytes", spec.groups()[g].bytes}, {"catch_all", spec.groups()[g].catch_all}});
    nlohmann::json trow = nlohmann::json::array();
    nlohmann::json erow = nlohmann::json::array();
    for (std::size_t s = 0; s < spec.state_count(); ++s) {
      const auto si = static_cast<StateIndex>(s);
      trow.push_back(names[spec.transition(si, gi)]);
      const auto& e = spec.emission(si, gi);
      erow.push_back({{"record", e.record}, {"field", e.field}, {"control", e.control}});
    }
    doc["transitions"].push_back(std::move(trow));
    doc["emissions"].push_back(std::move(erow));
  }
  return doc.dump(2);
}

}  // namespace dsvpar
