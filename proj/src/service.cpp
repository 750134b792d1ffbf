#include "bunching/service.hpp"

#include <algorithm>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <semaphore>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <httplib.h>

#include "bunching/analytics.hpp"
#include "bunching/persistence.hpp"

namespace bunching {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// SessionStore

SessionStore::SessionStore(fs::path directory) : directory_(std::move(directory)) {
    fs::create_directories(directory_);
    std::vector<fs::path> logs;
    for (const auto& entry : fs::directory_iterator(directory_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".log") logs.push_back(entry.path());
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
        std::ifstream in(path);
        const SpinLog log = read_spin_log(in);
        if (!log.config) {
            throw DomainError("bad_store", fmt::format("{}: spin log has no #config line", path.string()));
        }
        auto entry = std::make_unique<Entry>();
        entry->state = replay_log(log, *log.config);
        const std::string id = path.stem().string();
        write_snapshot(id, entry->state);
        sessions_.emplace(id, std::move(entry));
        if (id.size() > 1 && id.front() == 's') {
            try {
                next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(1)) + 1);
            } catch (const std::exception&) {
                // Foreign file name; keep numbering as is.
            }
        }
    }
}

std::string SessionStore::create(const SessionConfig& config) {
    SessionState state = start_session(config);
    std::unique_lock lock(map_mutex_);
    const std::string id = fmt::format("s{:06}", next_id_++);
    {
        std::ofstream log(directory_ / (id + ".log"), std::ios::trunc);
        write_spin_log_header(log, config);
        log.flush();
        if (!log) throw DomainError("store_io", "cannot write spin log for " + id);
    }
    write_snapshot(id, state);
    auto entry = std::make_unique<Entry>();
    entry->state = std::move(state);
    sessions_.emplace(id, std::move(entry));
    return id;
}

SessionStore::Entry& SessionStore::find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw UnknownSession(id);
    return *it->second;
}

Recommendation SessionStore::record(const std::string& id, int outcome,
                                    std::optional<std::uint64_t> sequence,
                                    std::int64_t timestamp_ms) {
    Entry& entry = find(id);
    std::lock_guard lock(entry.mutex);
    SessionState& state = entry.state;
    const auto expected = static_cast<std::uint64_t>(state.spins.size());
    if (sequence && *sequence != expected) throw SequenceConflict(expected, *sequence);
    const auto& wheel = state.config.strategy.wheel;
    if (!wheel.contains(outcome)) {
        throw std::invalid_argument(fmt::format("pocket {} is not on the wheel", outcome));
    }
    const SpinRecord spin{outcome, timestamp_ms};
    {
        std::ofstream log(directory_ / (id + ".log"), std::ios::app);
        write_spin_line(log, expected, spin, wheel);
        log.flush();
        if (!log) throw DomainError("store_io", "cannot append to spin log for " + id);
    }
    Recommendation rec = record_spin(state, outcome, timestamp_ms);
    write_snapshot(id, state);
    return rec;
}

SessionState SessionStore::get(const std::string& id) const {
    const Entry& entry = find(id);
    std::lock_guard lock(entry.mutex);
    return entry.state;
}

std::size_t SessionStore::size() const {
    std::shared_lock lock(map_mutex_);
    return sessions_.size();
}

void SessionStore::write_snapshot(const std::string& id, const SessionState& state) const {
    const fs::path target = directory_ / (id + ".json");
    const fs::path tmp = directory_ / (id + ".json.tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << to_json(state).dump(2) << '\n';
        if (!out) throw DomainError("store_io", "cannot write snapshot for " + id);
    }
    fs::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Service

struct Service::SimulationSlots {
    explicit SimulationSlots(unsigned n) : available(static_cast<std::ptrdiff_t>(n)) {}
    std::counting_semaphore<1024> available;
};

Service::Service(ServiceOptions options)
    : options_(std::move(options)),
      store_(options_.store),
      slots_(std::make_unique<SimulationSlots>(std::clamp(options_.simulation_slots, 1u, 1024u))) {}

Service::~Service() { shutdown(); }

void Service::shutdown() { stop_.request_stop(); }

namespace {

json error_body(std::string_view code, std::string_view message) {
    return json{{"error", {{"code", code}, {"message", message}}}};
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
    send_json(res, status, error_body(code, message));
}

template <class F>
void guarded(httplib::Response& res, F&& body) {
    try {
        body();
    } catch (const json::parse_error& e) {
        send_error(res, 400, "invalid_json", e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, "invalid_params", e.what());
    } catch (const UnknownSession& e) {
        send_error(res, 404, e.code(), e.what());
    } catch (const SequenceConflict& e) {
        send_error(res, 409, e.code(), e.what());
    } catch (const Cancelled& e) {
        send_error(res, 503, e.code(), e.what());
    } catch (const DomainError& e) {
        send_error(res, e.code() == "busy" ? 503 : 422, e.code(), e.what());
    } catch (const std::invalid_argument& e) {
        send_error(res, 400, "invalid_params", e.what());
    } catch (const std::out_of_range& e) {
        send_error(res, 400, "invalid_params", e.what());
    }
}

int pocket_from_json(const json& value, const WheelSpec& wheel) {
    std::optional<int> pocket;
    if (value.is_string()) {
        pocket = wheel.parse_pocket(value.get<std::string>());
    } else if (value.is_number_integer()) {
        pocket = wheel.parse_pocket(std::to_string(value.get<long long>()));
    }
    if (!pocket) {
        throw std::invalid_argument(fmt::format("'{}' is not a pocket of a {}-pocket wheel",
                                                value.dump(), wheel.pockets));
    }
    return *pocket;
}

std::int64_t now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

json state_body(const std::string& id, const SessionState& state) {
    json body = to_json(state);
    body["id"] = id;
    body["decision"] = to_json(decision_status(state));
    return body;
}

json xi_json(const SpreadRatio& xi) {
    if (xi.finite()) return xi.value;
    return "inf";
}

}  // namespace

json Service::simulate(const json& request) {
    if (!request.is_object()) throw std::invalid_argument("simulation request must be an object");
    const auto family_name = request.value("family", std::string("uniform"));
    const auto family = parse_bias_kind(family_name);
    if (!family) throw std::invalid_argument("unknown family '" + family_name + "'");
    const double param = request.value("param", 0.0);
    const int n = request.at("n").get<int>();
    const auto trials = request.value("trials", std::uint64_t{100'000});
    const auto seed = request.value("seed", std::uint64_t{1});
    const auto estimator = request.value("estimator", std::string("independent"));
    WheelSpec wheel = WheelSpec::european();
    if (request.contains("wheel")) {
        json cfg{{"n", 1}, {"wheel", request.at("wheel")}};
        wheel = session_config_from_json(cfg).strategy.wheel;
    }
    validate_window(n);
    if (trials == 0 || trials > options_.max_trials) {
        throw std::invalid_argument(
            fmt::format("trials must lie in [1, {}]", options_.max_trials));
    }
    const BiasModel model = BiasModel::make(*family, param, wheel);

    if (stop_.stop_requested()) throw Cancelled();
    if (!slots_->available.try_acquire_for(std::chrono::seconds(5))) {
        throw DomainError("busy", "all simulation slots are in use; retry later");
    }
    struct Release {
        SimulationSlots& s;
        ~Release() { s.available.release(); }
    } release{*slots_};

    OmegaEstimate e;
    if (estimator == "independent") {
        McOptions mc;
        mc.workers = options_.mc_workers;
        mc.stop = stop_.get_token();
        e = mc_omega(model, n, trials, seed, mc);
    } else if (estimator == "sliding") {
        const auto spins = request.value("spins", trials + static_cast<std::uint64_t>(n));
        if (spins > options_.max_trials) throw std::invalid_argument("too many spins");
        e = mc_omega_session(model, n, spins, seed, stop_.get_token());
    } else {
        throw std::invalid_argument("estimator must be 'independent' or 'sliding'");
    }
    json out{{"family", to_string(*family)},
             {"param", model.parameter()},
             {"n", n},
             {"seed", seed},
             {"xi", xi_json(model.spread_ratio())},
             {"omega", e.omega},
             {"std_error", e.std_error},
             {"trials", e.trials},
             {"estimator", to_string(e.estimator)}};
    if (e.bunching) out["bunching"] = *e.bunching;
    if (e.profit_per_spin) out["profit_per_spin"] = *e.profit_per_spin;
    return out;
}

void Service::attach(httplib::Server& server) {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const SessionConfig config = session_config_from_json(json::parse(req.body));
            const std::string id = store_.create(config);
            send_json(res, 201, state_body(id, store_.get(id)));
        });
    });

    server.Post("/sessions/:id/spins", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.path_params.at("id");
            const json body = json::parse(req.body);
            if (!body.is_object() || !body.contains("outcome")) {
                throw std::invalid_argument("body must be an object with 'outcome'");
            }
            const SessionState before = store_.get(id);
            const int pocket = pocket_from_json(body.at("outcome"), before.config.strategy.wheel);
            std::optional<std::uint64_t> seq;
            if (body.contains("seq")) seq = body.at("seq").get<std::uint64_t>();
            const std::int64_t stamp = body.value("timestamp", now_ms());
            store_.record(id, pocket, seq, stamp);
            send_json(res, 200, state_body(id, store_.get(id)));
        });
    });

    server.Get("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.path_params.at("id");
            send_json(res, 200, state_body(id, store_.get(id)));
        });
    });

    server.Get("/sessions/:id/decision", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            send_json(res, 200, to_json(decision_status(store_.get(req.path_params.at("id")))));
        });
    });

    server.Get("/sessions/:id/log", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            std::ostringstream out;
            write_spin_log(out, store_.get(req.path_params.at("id")));
            res.status = 200;
            res.set_content(out.str(), "text/plain");
        });
    });

    server.Post("/simulate", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, simulate(json::parse(req.body))); });
    });

    server.Get("/schema", [](const httplib::Request&, httplib::Response& res) {
        json names = json::array();
        for (const auto& [name, _] : api_schemas().items()) names.push_back(name);
        send_json(res, 200, json{{"version", "v1"}, {"schemas", names}});
    });

    server.Get("/schema/:name", [](const httplib::Request& req, httplib::Response& res) {
        const auto& schemas = api_schemas();
        const std::string name = req.path_params.at("name");
        if (!schemas.contains(name)) {
            send_error(res, 404, "unknown_schema", "no schema named '" + name + "'");
            return;
        }
        send_json(res, 200, schemas.at(name));
    });

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
        const std::string code = res.status == 404 ? "not_found" : "http_error";
        send_error(res, res.status, code, fmt::format("{} {} -> {}", req.method, req.path, res.status));
        return httplib::Server::HandlerResponse::Handled;
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        send_error(res, 500, "internal", message);
    });
}

// ---------------------------------------------------------------------------
// Schemas

const json& api_schemas() {
    static const json schemas = [] {
        auto object = [](json properties, json required) {
            return json{{"$schema", "https://json-schema.org/draft/2020-12/schema"},
                        {"type", "object"},
                        {"properties", std::move(properties)},
                        {"required", std::move(required)}};
        };
        const json pocket{{"type", "string"}, {"description", "pocket label, '00' on American wheels"}};
        const json wheel{{"oneOf",
                          json::array({json{{"enum", {"european", "american"}}},
                                       json{{"type", "object"},
                                            {"properties",
                                             {{"pockets", {{"type", "integer"}, {"minimum", 2}}},
                                              {"payout", {{"type", "integer"}, {"minimum", 1}}}}}}})}};
        json s;
        s["session_create"] = object(
            {{"n", {{"type", "integer"}, {"minimum", 1}, {"maximum", 64}}},
             {"bet_unit", {{"type", "integer"}, {"minimum", 1}, {"description", "minor currency units"}}},
             {"bankroll", {{"type", "integer"}, {"minimum", 0}}},
             {"wheel", wheel}},
            {"n"});
        s["spin"] = object({{"outcome", {{"type", {"string", "integer"}}}},
                            {"seq", {{"type", "integer"}, {"minimum", 0}}},
                            {"timestamp", {{"type", "integer"}, {"description", "Unix milliseconds"}}}},
                           {"outcome"});
        s["decision"] = object({{"omega", {{"type", "number"}}},
                                {"std_error", {{"type", "number"}}},
                                {"spins_observed", {{"type", "integer"}}},
                                {"settled_bets", {{"type", "integer"}}},
                                {"verdict", {{"enum", {"above-critical", "below-critical", "undecided"}}}}},
                               {"omega", "std_error", "spins_observed", "settled_bets", "verdict"});
        s["session_state"] = object(
            {{"schema", {{"const", kSnapshotSchema}}},
             {"id", {{"type", "string"}}},
             {"config", s["session_create"]},
             {"spins", {{"type", "array"},
                        {"items", object({{"index", {{"type", "integer"}}},
                                          {"timestamp", {{"type", "integer"}}},
                                          {"outcome", pocket}},
                                         {"index", "timestamp", "outcome"})}}},
             {"bankroll", {{"type", "integer"}}},
             {"ledger", {{"type", "array"},
                         {"items", object({{"spin_index", {{"type", "integer"}}},
                                           {"bets", {{"type", "array"}, {"items", pocket}}},
                                           {"stake", {{"type", "integer"}}},
                                           {"collected", {{"type", "integer"}}}},
                                          {"spin_index", "bets", "stake", "collected"})}}},
             {"phase", {{"enum", {"warmup", "probing", "confident", "stopped"}}}},
             {"running_omega", {{"type", "object"}}},
             {"next", object({{"bets", {{"type", "array"}, {"items", pocket}}},
                              {"stake_per_bet", {{"type", "integer"}}},
                              {"total_stake", {{"type", "integer"}}},
                              {"rationale", {{"enum", {"warmup-no-bet", "probing-minimum",
                                                       "confident-scale-up", "stop-loss"}}}}},
                             {"bets", "stake_per_bet", "rationale"})},
             {"decision", s["decision"]}},
            {"schema", "config", "spins", "bankroll", "ledger", "phase", "next"});
        s["simulate_request"] = object(
            {{"family", {{"enum", {"uniform", "gaussian", "linear"}}}},
             {"param", {{"type", "number"}, {"minimum", 0}}},
             {"n", {{"type", "integer"}, {"minimum", 1}, {"maximum", 64}}},
             {"trials", {{"type", "integer"}, {"minimum", 1}}},
             {"seed", {{"type", "integer"}, {"minimum", 0}}},
             {"estimator", {{"enum", {"independent", "sliding"}}}},
             {"spins", {{"type", "integer"}}},
             {"wheel", wheel}},
            {"n"});
        s["simulate_response"] = object(
            {{"family", {{"type", "string"}}},
             {"param", {{"type", "number"}}},
             {"n", {{"type", "integer"}}},
             {"seed", {{"type", "integer"}}},
             {"xi", {{"type", {"number", "string"}}}},
             {"omega", {{"type", "number"}}},
             {"std_error", {{"type", "number"}}},
             {"trials", {{"type", "integer"}}},
             {"estimator", {{"enum", {"independent", "sliding"}}}},
             {"bunching", {{"type", "number"}}},
             {"profit_per_spin", {{"type", "number"}}}},
            {"omega", "std_error", "trials", "estimator"});
        s["error"] = object({{"error", object({{"code", {{"type", "string"}}},
                                               {"message", {{"type", "string"}}}},
                                              {"code", "message"})}},
                            {"error"});
        for (auto& [name, schema] : s.items()) schema["$id"] = "bunching/" + name + "/v1";
        return s;
    }();
    return schemas;
}

// ---------------------------------------------------------------------------

namespace {
httplib::Server* g_server = nullptr;

extern "C" void stop_on_signal(int) {
    if (g_server != nullptr) g_server->stop();
}
}  // namespace

int serve(const std::string& host, int port, ServiceOptions options) {
    httplib::Server server;
    Service service(std::move(options));
    service.attach(server);
    g_server = &server;
    std::signal(SIGINT, stop_on_signal);
    std::signal(SIGTERM, stop_on_signal);
    std::cerr << fmt::format("listening on http://{}:{} (store: {})\n", host, port,
                             service.store().directory().string());
    const bool ok = server.listen(host, port);
    service.shutdown();
    g_server = nullptr;
    return ok ? 0 : 1;
}

}  // namespace bunching
