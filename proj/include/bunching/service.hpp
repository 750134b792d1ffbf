#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stop_token>
#include <string>

#include <json.hpp>

#include "bunching/errors.hpp"
#include "bunching/session.hpp"

namespace httplib {
class Server;
}

namespace bunching {

class UnknownSession : public DomainError {
public:
    explicit UnknownSession(const std::string& id)
        : DomainError("unknown_session", "no session with id '" + id + "'") {}
};

class SequenceConflict : public DomainError {
public:
    SequenceConflict(std::uint64_t expected, std::uint64_t got)
        : DomainError("sequence_conflict",
                      "sequence number " + std::to_string(got) + " conflicts; next expected is " +
                          std::to_string(expected)) {}
};

/**
 * Sessions persisted under a directory: `<id>.log` is the write-ahead spin
 * log (appended and flushed before the state changes) and `<id>.json` the
 * latest snapshot. On open, every log is replayed to rebuild its session.
 *
 * Writes to one session are serialized; distinct sessions proceed in parallel.
 */
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path directory);

    std::string create(const SessionConfig& config);

    /// Appends a spin. `sequence`, when given, must equal the current spin count.
    Recommendation record(const std::string& id, int outcome, std::optional<std::uint64_t> sequence,
                          std::int64_t timestamp_ms);

    SessionState get(const std::string& id) const;

    std::size_t size() const;
    const std::filesystem::path& directory() const noexcept { return directory_; }

private:
    struct Entry {
        mutable std::mutex mutex;
        SessionState state;
    };

    Entry& find(const std::string& id) const;
    void write_snapshot(const std::string& id, const SessionState& state) const;

    std::filesystem::path directory_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::unique_ptr<Entry>> sessions_;
    std::uint64_t next_id_ = 1;
};

struct ServiceOptions {
    std::filesystem::path store = "sessions";
    /// Concurrent /simulate requests; further requests wait briefly, then get 503.
    unsigned simulation_slots = 2;
    std::uint64_t max_trials = 50'000'000;
    /// Threads per simulation (0 = hardware concurrency).
    unsigned mc_workers = 0;
};

/**
 * JSON API over a SessionStore plus on-demand simulation:
 *
 *   POST /sessions                {n, bet_unit, bankroll, wheel}
 *   POST /sessions/{id}/spins     {outcome, seq?, timestamp?}
 *   GET  /sessions/{id}
 *   GET  /sessions/{id}/decision
 *   GET  /sessions/{id}/log       spin log text
 *   POST /simulate                {family, param, n, trials, seed, estimator?, spins?}
 *   GET  /schema, /schema/{name}
 *
 * Errors are `{"error": {"code", "message"}}` with 400/404/409/422/503.
 */
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    void attach(httplib::Server& server);

    /// Cancels running simulations and rejects new ones.
    void shutdown();

    SessionStore& store() noexcept { return store_; }

    nlohmann::json simulate(const nlohmann::json& request);

private:
    struct SimulationSlots;

    ServiceOptions options_;
    SessionStore store_;
    std::unique_ptr<SimulationSlots> slots_;
    std::stop_source stop_;
};

/// JSON schema documents served under /schema.
const nlohmann::json& api_schemas();

/// Blocking server on host:port until the process is interrupted.
int serve(const std::string& host, int port, ServiceOptions options);

}  // namespace bunching
