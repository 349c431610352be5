#pragma once

// Parsing rules as a DFA over symbol groups. Transitions and emission actions
// are stored group-major ("one symbol group per row"), so all transitions for
// a read symbol are adjacent and can be applied to every simulated instance.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsvpar/error.hpp"
#include "dsvpar/scan.hpp"

namespace dsvpar {

using GroupIndex = std::uint8_t;

/// Classification of a symbol read in a given state. Record and field
/// delimiters are always control symbols; everything that is not control is
/// field content.
struct EmissionAction {
  bool record = false;
  bool field = false;
  bool control = false;

  friend constexpr bool operator==(const EmissionAction&, const EmissionAction&) = default;
};

struct SymbolGroup {
  std::vector<std::uint8_t> bytes;
  bool catch_all = false;

  friend bool operator==(const SymbolGroup&, const SymbolGroup&) = default;
};

class DfaSpec {
 public:
  DfaSpec(std::vector<std::string> state_names, StateIndex start_state,
          std::vector<StateIndex> accepting_states, StateIndex invalid_state,
          std::vector<SymbolGroup> groups, std::vector<StateIndex> transitions,
          std::vector<EmissionAction> emissions)
      : state_names_(std::move(state_names)),
        start_(start_state),
        invalid_(invalid_state),
        groups_(std::move(groups)),
        transitions_(std::move(transitions)),
        emissions_(std::move(emissions)) {
    const std::size_t states = state_names_.size();
    if (states < 1) throw ConfigError("invariant violated: state_count >= 1");
    if (states > 256) throw ConfigError("invariant violated: at most 256 states are supported");
    if (groups_.size() < 2) throw ConfigError("invariant violated: group_count >= 2");
    if (groups_.size() > 256) throw ConfigError("invariant violated: at most 256 groups are supported");
    if (start_ >= states) throw ConfigError("invariant violated: start state out of range");
    if (invalid_ >= states) throw ConfigError("invariant violated: invalid state out of range");

    accepting_.assign(states, false);
    for (StateIndex s : accepting_states) {
      if (s >= states) throw ConfigError("invariant violated: accepting state out of range");
      accepting_[s] = true;
    }

    std::size_t catch_alls = 0;
    std::array<bool, 256> seen{};
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      if (groups_[g].catch_all) {
        ++catch_alls;
        catch_all_ = static_cast<GroupIndex>(g);
        if (!groups_[g].bytes.empty()) {
          throw ConfigError("invariant violated: the catch-all group lists no bytes");
        }
      }
      for (std::uint8_t b : groups_[g].bytes) {
        if (seen[b]) {
          throw ConfigError("invariant violated: byte " + std::to_string(b) +
                            " appears in more than one symbol group");
        }
        seen[b] = true;
      }
    }
    if (catch_alls != 1) throw ConfigError("invariant violated: exactly one group is designated catch-all");

    const std::size_t cells = states * groups_.size();
    if (transitions_.size() != cells) {
      throw ConfigError("invariant violated: transition table must have group_count x state_count entries");
    }
    if (emissions_.size() != cells) {
      throw ConfigError("invariant violated: emission table must have group_count x state_count entries");
    }
    for (StateIndex t : transitions_) {
      if (t >= states) {
        throw ConfigError("invariant violated: transition target " + std::to_string(t) +
                          " is not a valid state index in [0, " + std::to_string(states) + ")");
      }
    }
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      if (transition(invalid_, static_cast<GroupIndex>(g)) != invalid_) {
        throw ConfigError("invariant violated: invalid state is absorbing");
      }
    }
    for (const auto& e : emissions_) {
      if ((e.record || e.field) && !e.control) {
        throw ConfigError("invariant violated: record and field delimiters are control symbols");
      }
    }
  }

  std::size_t state_count() const { return state_names_.size(); }
  std::size_t group_count() const { return groups_.size(); }
  StateIndex start_state() const { return start_; }
  StateIndex invalid_state() const { return invalid_; }
  GroupIndex catch_all_group() const { return catch_all_; }
  bool is_accepting(StateIndex s) const { return accepting_[s]; }

  const std::vector<std::string>& state_names() const { return state_names_; }
  const std::vector<SymbolGroup>& groups() const { return groups_; }

  std::vector<StateIndex> accepting_states() const {
    std::vector<StateIndex> out;
    for (std::size_t s = 0; s < accepting_.size(); ++s) {
      if (accepting_[s]) out.push_back(static_cast<StateIndex>(s));
    }
    return out;
  }

  StateIndex transition(StateIndex state, GroupIndex group) const {
    return transitions_[group * state_count() + state];
  }

  /// All transitions of one symbol group, indexed by current state.
  std::span<const StateIndex> row(GroupIndex group) const {
    return {transitions_.data() + group * state_count(), state_count()};
  }

  const EmissionAction& emission(StateIndex state, GroupIndex group) const {
    return emissions_[group * state_count() + state];
  }

  std::span<const EmissionAction> emission_row(GroupIndex group) const {
    return {emissions_.data() + group * state_count(), state_count()};
  }

  /// Linear search over the groups' byte lists.
  GroupIndex group_of(std::uint8_t byte) const {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& bytes = groups_[g].bytes;
      if (std::find(bytes.begin(), bytes.end(), byte) != bytes.end()) return static_cast<GroupIndex>(g);
    }
    return catch_all_;
  }

  friend bool operator==(const DfaSpec&, const DfaSpec&) = default;

 private:
  std::vector<std::string> state_names_;
  StateIndex start_;
  StateIndex invalid_;
  std::vector<bool> accepting_;
  std::vector<SymbolGroup> groups_;
  GroupIndex catch_all_ = 0;
  std::vector<StateIndex> transitions_;
  std::vector<EmissionAction> emissions_;
};

inline StateIndex transition(const DfaSpec& spec, StateIndex state, GroupIndex group) {
  return spec.transition(state, group);
}

// ---------------------------------------------------------------------------
// Delimiter-separated dialect with quoting

namespace csv {
inline constexpr StateIndex kEndOfRecord = 0;  // EOR
inline constexpr StateIndex kEnclosed = 1;     // ENC
inline constexpr StateIndex kField = 2;        // FLD
inline constexpr StateIndex kEndOfField = 3;   // EOF
inline constexpr StateIndex kEscape = 4;       // ESC
inline constexpr StateIndex kInvalid = 5;      // INV

inline constexpr GroupIndex kRecordGroup = 0;
inline constexpr GroupIndex kQuoteGroup = 1;
inline constexpr GroupIndex kFieldGroup = 2;
inline constexpr GroupIndex kOtherGroup = 3;
}  // namespace csv

/// Six-state quoted-field dialect. A doubled quote inside a quoted field
/// yields one literal quote: the first is control, the second is data.
inline DfaSpec build_csv_dialect(std::uint8_t field_delim, std::uint8_t quote, std::uint8_t record_delim) {
  if (field_delim == quote || field_delim == record_delim || quote == record_delim) {
    throw ConfigError("field delimiter, quote and record delimiter must be pairwise distinct");
  }
  using namespace csv;
  constexpr StateIndex EOR = kEndOfRecord, ENC = kEnclosed, FLD = kField, EOF_ = kEndOfField,
                       ESC = kEscape, INV = kInvalid;
  std::vector<StateIndex> transitions = {
      EOR, ENC, EOR, EOR,  EOR, INV,  // record delimiter
      ENC, ESC, INV, ENC,  ENC, INV,  // quote
      EOF_, ENC, EOF_, EOF_, EOF_, INV,  // field delimiter
      FLD, ENC, FLD, FLD,  INV, INV,  // anything else
  };
  constexpr EmissionAction R{true, true, true};
  constexpr EmissionAction F{false, true, true};
  constexpr EmissionAction C{false, false, true};
  constexpr EmissionAction D{false, false, false};
  std::vector<EmissionAction> emissions = {
      R, D, R, R, R, R,  // record delimiter: data only inside quotes
      C, C, C, C, D, C,  // quote: literal only as the second of a doubled pair
      F, D, F, F, F, F,  // field delimiter
      D, D, D, D, D, D,  // anything else
  };
  std::vector<SymbolGroup> groups = {
      {{record_delim}, false},
      {{quote}, false},
      {{field_delim}, false},
      {{}, true},
  };
  return DfaSpec({"EOR", "ENC", "FLD", "EOF", "ESC", "INV"}, EOR, {EOR, FLD, EOF_, ESC}, INV,
                 std::move(groups), std::move(transitions), std::move(emissions));
}

}  // namespace dsvpar
