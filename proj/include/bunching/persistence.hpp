#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bunching/session.hpp"

namespace bunching {

// Spin log, version 1. Append-only text:
//
//   #bunching-spinlog v1
//   #config window=12 bet_unit=1 bankroll=1000 pockets=37 payout=36
//   0,1700000000000,17
//   1,1700000061000,00
//
// Data lines are `index,timestamp,outcome`: a zero-based sequential index,
// Unix milliseconds and the pocket label. The #config line is optional;
// other `#` lines are comments.
inline constexpr const char* kSpinLogHeader = "#bunching-spinlog v1";
inline constexpr const char* kSnapshotSchema = "bunching.session.v1";

struct SpinLogEntry {
    std::size_t line = 0;
    std::uint64_t index = 0;
    std::int64_t timestamp_ms = 0;
    std::string outcome;
};

struct SpinLog {
    std::optional<SessionConfig> config;
    std::vector<SpinLogEntry> entries;
};

/// Throws ParseError with the offending line number.
SpinLog read_spin_log(std::istream& in);

/// Resolves pocket labels against the wheel; ParseError on an unknown pocket.
std::vector<SpinRecord> resolve_spins(const SpinLog& log, const WheelSpec& wheel);

/// replay() over a parsed log, reporting bad entries by line number.
SessionState replay_log(const SpinLog& log, const SessionConfig& config);

void write_spin_log_header(std::ostream& out, const SessionConfig& config);
void write_spin_line(std::ostream& out, std::uint64_t index, const SpinRecord& spin,
                     const WheelSpec& wheel);
void write_spin_log(std::ostream& out, const SessionState& state);

nlohmann::json to_json(const SessionConfig& config);
SessionConfig session_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Recommendation& rec, const WheelSpec& wheel);
nlohmann::json to_json(const DecisionReport& report);

/// Full snapshot: config, spins, ledger, bankroll, phase, running omega, next recommendation.
nlohmann::json to_json(const SessionState& state);

/// Rebuilds a state by replaying the snapshot's spins, then checks the stored
/// bankroll and ledger against the replay. Throws DomainError("bad_snapshot").
SessionState session_from_json(const nlohmann::json& j);

}  // namespace bunching
