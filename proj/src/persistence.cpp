#include "bunching/persistence.hpp"

#include <charconv>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

#include "bunching/errors.hpp"

namespace bunching {

using nlohmann::json;

namespace {

template <class Int>
std::optional<Int> parse_int(std::string_view text) {
    Int value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

SessionConfig parse_config_line(std::string_view body, std::size_t line) {
    SessionConfig config;
    std::istringstream fields{std::string(body)};
    std::string field;
    while (fields >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw ParseError(line, "config field without '=': " + field);
        const std::string key = field.substr(0, eq);
        const auto value = parse_int<std::int64_t>(std::string_view(field).substr(eq + 1));
        if (!value) throw ParseError(line, "config value is not an integer: " + field);
        if (key == "window") {
            config.strategy.window = static_cast<int>(*value);
        } else if (key == "bet_unit") {
            config.strategy.bet_unit = Money{*value};
        } else if (key == "bankroll") {
            config.initial_bankroll = Money{*value};
        } else if (key == "pockets") {
            config.strategy.wheel.pockets = static_cast<int>(*value);
        } else if (key == "payout") {
            config.strategy.wheel.payout = static_cast<int>(*value);
        } else {
            throw ParseError(line, "unknown config key: " + key);
        }
    }
    try {
        config.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(line, e.what());
    }
    return config;
}

}  // namespace

SpinLog read_spin_log(std::istream& in) {
    SpinLog log;
    std::string raw;
    std::size_t line = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line;
        const std::string_view text = trim(raw);
        if (text.empty()) continue;
        if (!header_seen) {
            if (text != kSpinLogHeader) {
                throw ParseError(line, fmt::format("expected header '{}'", kSpinLogHeader));
            }
            header_seen = true;
            continue;
        }
        if (text.front() == '#') {
            if (text.starts_with("#config")) {
                if (log.config) throw ParseError(line, "duplicate #config line");
                if (!log.entries.empty()) throw ParseError(line, "#config after spin entries");
                log.config = parse_config_line(text.substr(7), line);
            }
            continue;
        }
        const auto c1 = text.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : text.find(',', c1 + 1);
        if (c2 == std::string_view::npos || text.find(',', c2 + 1) != std::string_view::npos) {
            throw ParseError(line, "expected 'index,timestamp,outcome'");
        }
        const auto index = parse_int<std::uint64_t>(trim(text.substr(0, c1)));
        const auto stamp = parse_int<std::int64_t>(trim(text.substr(c1 + 1, c2 - c1 - 1)));
        const std::string_view outcome = trim(text.substr(c2 + 1));
        if (!index) throw ParseError(line, "index is not a non-negative integer");
        if (!stamp) throw ParseError(line, "timestamp is not an integer");
        if (outcome.empty()) throw ParseError(line, "missing outcome");
        if (*index != log.entries.size()) {
            throw ParseError(line, fmt::format("expected index {}, got {}", log.entries.size(), *index));
        }
        log.entries.push_back(SpinLogEntry{line, *index, *stamp, std::string(outcome)});
    }
    if (!header_seen && line > 0) throw ParseError(line, "missing spin log header");
    return log;
}

std::vector<SpinRecord> resolve_spins(const SpinLog& log, const WheelSpec& wheel) {
    std::vector<SpinRecord> spins;
    spins.reserve(log.entries.size());
    for (const auto& e : log.entries) {
        const auto pocket = wheel.parse_pocket(e.outcome);
        if (!pocket) {
            throw ParseError(e.line, fmt::format("'{}' is not a pocket of a {}-pocket wheel",
                                                 e.outcome, wheel.pockets));
        }
        spins.push_back(SpinRecord{*pocket, e.timestamp_ms});
    }
    return spins;
}

SessionState replay_log(const SpinLog& log, const SessionConfig& config) {
    const auto spins = resolve_spins(log, config.strategy.wheel);
    return replay(spins, config);
}

void write_spin_log_header(std::ostream& out, const SessionConfig& config) {
    const auto& s = config.strategy;
    out << kSpinLogHeader << '\n'
        << fmt::format("#config window={} bet_unit={} bankroll={} pockets={} payout={}\n", s.window,
                       s.bet_unit.minor, config.initial_bankroll.minor, s.wheel.pockets,
                       s.wheel.payout);
}

void write_spin_line(std::ostream& out, std::uint64_t index, const SpinRecord& spin,
                     const WheelSpec& wheel) {
    out << fmt::format("{},{},{}\n", index, spin.timestamp_ms, wheel.label(spin.outcome));
}

void write_spin_log(std::ostream& out, const SessionState& state) {
    write_spin_log_header(out, state.config);
    for (std::size_t i = 0; i < state.spins.size(); ++i) {
        write_spin_line(out, i, state.spins[i], state.config.strategy.wheel);
    }
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const SessionConfig& config) {
    const auto& s = config.strategy;
    return json{{"n", s.window},
                {"bet_unit", s.bet_unit.minor},
                {"bankroll", config.initial_bankroll.minor},
                {"wheel", {{"pockets", s.wheel.pockets}, {"payout", s.wheel.payout}}}};
}

SessionConfig session_config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("session config must be a JSON object");
    SessionConfig config;
    try {
        config.strategy.window = j.at("n").get<int>();
        config.strategy.bet_unit = Money{j.value("bet_unit", std::int64_t{1})};
        config.initial_bankroll = Money{j.value("bankroll", std::int64_t{0})};
        if (j.contains("wheel")) {
            const auto& w = j.at("wheel");
            if (w.is_string()) {
                const auto name = w.get<std::string>();
                if (name == "european") {
                    config.strategy.wheel = WheelSpec::european();
                } else if (name == "american") {
                    config.strategy.wheel = WheelSpec::american();
                } else {
                    throw std::invalid_argument("wheel must be 'european', 'american' or an object");
                }
            } else {
                config.strategy.wheel.pockets = w.value("pockets", 37);
                config.strategy.wheel.payout = w.value("payout", 36);
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("invalid session config: ") + e.what());
    }
    config.validate();
    return config;
}

namespace {

json labels(const std::vector<int>& pockets, const WheelSpec& wheel) {
    json out = json::array();
    for (int p : pockets) out.push_back(wheel.label(p));
    return out;
}

}  // namespace

json to_json(const Recommendation& rec, const WheelSpec& wheel) {
    return json{{"bets", labels(rec.bets, wheel)},
                {"stake_per_bet", rec.stake_per_bet.minor},
                {"total_stake", rec.total_stake().minor},
                {"rationale", to_string(rec.rationale)}};
}

json to_json(const DecisionReport& report) {
    return json{{"omega", report.omega},
                {"std_error", report.std_error},
                {"spins_observed", report.spins_observed},
                {"settled_bets", report.settled_bets},
                {"verdict", to_string(report.verdict)}};
}

json to_json(const SessionState& state) {
    const auto& wheel = state.config.strategy.wheel;
    json spins = json::array();
    for (std::size_t i = 0; i < state.spins.size(); ++i) {
        spins.push_back({{"index", i},
                         {"timestamp", state.spins[i].timestamp_ms},
                         {"outcome", wheel.label(state.spins[i].outcome)}});
    }
    json ledger = json::array();
    for (const auto& e : state.ledger) {
        ledger.push_back({{"spin_index", e.spin_index},
                          {"bets", labels(e.bets, wheel)},
                          {"stake", e.stake.minor},
                          {"collected", e.collected.minor}});
    }
    const OmegaEstimate omega = state.running_omega();
    return json{{"schema", kSnapshotSchema},
                {"config", to_json(state.config)},
                {"spins", std::move(spins)},
                {"bankroll", state.bankroll.minor},
                {"ledger", std::move(ledger)},
                {"phase", to_string(state.phase)},
                {"running_omega",
                 {{"omega", omega.omega},
                  {"std_error", omega.std_error},
                  {"settled", state.running.settled},
                  {"staked", state.running.staked.minor},
                  {"collected", state.running.collected.minor}}},
                {"next", to_json(state.next, wheel)}};
}

SessionState session_from_json(const json& j) {
    try {
        if (j.at("schema").get<std::string>() != kSnapshotSchema) {
            throw DomainError("bad_snapshot", "unsupported snapshot schema");
        }
        const SessionConfig config = session_config_from_json(j.at("config"));
        const auto& wheel = config.strategy.wheel;
        std::vector<SpinRecord> spins;
        for (const auto& s : j.at("spins")) {
            const auto label = s.at("outcome").get<std::string>();
            const auto pocket = wheel.parse_pocket(label);
            if (!pocket) throw DomainError("bad_snapshot", "unknown pocket " + label);
            spins.push_back(SpinRecord{*pocket, s.at("timestamp").get<std::int64_t>()});
        }
        SessionState state = replay(spins, config);
        if (state.bankroll.minor != j.at("bankroll").get<std::int64_t>() ||
            state.ledger.size() != j.at("ledger").size()) {
            throw DomainError("bad_snapshot", "snapshot disagrees with the replay of its spins");
        }
        return state;
    } catch (const json::exception& e) {
        throw DomainError("bad_snapshot", std::string("malformed snapshot: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DomainError("bad_snapshot", std::string("malformed snapshot: ") + e.what());
    }
}

}  // namespace bunching
