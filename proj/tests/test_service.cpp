#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "bunching/persistence.hpp"
#include "bunching/service.hpp"

using namespace bunching;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    static std::atomic<int> counter{0};
    const auto dir = fs::temp_directory_path() /
                     ("bunching-" + name + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter++));
    fs::remove_all(dir);
    return dir;
}

// Service on an ephemeral port, torn down on scope exit.
class Running {
public:
    explicit Running(const fs::path& store) : service_(options(store)) {
        service_.attach(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        while (!server_.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    ~Running() {
        service_.shutdown();
        server_.stop();
        thread_.join();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(60, 0);
        return c;
    }
    Service& service() { return service_; }

private:
    static ServiceOptions options(const fs::path& store) {
        ServiceOptions o;
        o.store = store;
        o.mc_workers = 2;
        return o;
    }

    Service service_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
    const auto res = c.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expect = 200) {
    const auto res = c.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
}

}  // namespace

TEST_CASE("warmup ends on the window-th spin") {
    const auto dir = fresh_dir("warmup");
    Running app(dir);
    auto c = app.client();
    const json created = post(c, "/sessions", {{"n", 12}, {"bankroll", 1000}}, 201);
    const std::string id = created.at("id");
    CHECK(created.at("phase") == "warmup");
    CHECK(created.at("next").at("rationale") == "warmup-no-bet");

    for (int i = 0; i < 11; ++i) {
        const json s = post(c, "/sessions/" + id + "/spins", {{"outcome", std::to_string(i)}}, 200);
        CHECK(s.at("next").at("rationale") == "warmup-no-bet");
    }
    const json s = post(c, "/sessions/" + id + "/spins", {{"outcome", 11}, {"seq", 11}}, 200);
    CHECK(s.at("phase") == "probing");
    CHECK(s.at("next").at("rationale") == "probing-minimum");
    CHECK(s.at("next").at("bets").size() == 12);
    CHECK(s.at("decision").at("verdict") == "undecided");
    CHECK(get(c, "/sessions/" + id + "/decision").at("spins_observed") == 12);
    fs::remove_all(dir);
}

TEST_CASE("sequence numbers make retries safe") {
    const auto dir = fresh_dir("seq");
    Running app(dir);
    auto c = app.client();
    const std::string id = post(c, "/sessions", {{"n", 3}}, 201).at("id");
    post(c, "/sessions/" + id + "/spins", {{"outcome", "5"}, {"seq", 0}}, 200);
    const json dup = post(c, "/sessions/" + id + "/spins", {{"outcome", "5"}, {"seq", 0}}, 409);
    CHECK(dup.at("error").at("code") == "sequence_conflict");
    post(c, "/sessions/" + id + "/spins", {{"outcome", "6"}, {"seq", 2}}, 409);
    post(c, "/sessions/" + id + "/spins", {{"outcome", "6"}, {"seq", 1}}, 200);
    CHECK(get(c, "/sessions/" + id).at("spins").size() == 2);
    fs::remove_all(dir);
}

TEST_CASE("request errors") {
    const auto dir = fresh_dir("errors");
    Running app(dir);
    auto c = app.client();
    CHECK(get(c, "/sessions/s999999", 404).at("error").at("code") == "unknown_session");
    CHECK(get(c, "/nowhere", 404).at("error").at("code") == "not_found");
    post(c, "/sessions", {{"bankroll", 10}}, 400);
    post(c, "/sessions", {{"n", 0}}, 400);

    const auto res = c.Post("/sessions", "{not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body).at("error").at("code") == "invalid_json");

    const std::string id = post(c, "/sessions", {{"n", 3}}, 201).at("id");
    post(c, "/sessions/" + id + "/spins", {{"outcome", "37"}}, 400);
    post(c, "/sessions/" + id + "/spins", {{"outcome", "00"}}, 400);
    post(c, "/sessions/" + id + "/spins", json::object(), 400);
    post(c, "/sessions/s999999/spins", {{"outcome", "1"}}, 404);
    CHECK(get(c, "/sessions/" + id).at("spins").empty());

    post(c, "/simulate", {{"family", "cauchy"}, {"n", 3}}, 400);
    post(c, "/simulate", {{"n", 3}, {"trials", 0}}, 400);
    post(c, "/simulate", {{"n", 3}, {"trials", 1'000'000'000}}, 400);
    fs::remove_all(dir);
}

TEST_CASE("simulate endpoint") {
    const auto dir = fresh_dir("simulate");
    Running app(dir);
    auto c = app.client();
    const json r = post(c, "/simulate", {{"family", "uniform"}, {"n", 10}, {"trials", 100'000}, {"seed", 3}}, 200);
    CHECK(r.at("estimator") == "independent");
    CHECK(std::abs(r.at("omega").get<double>() + 1.0 / 37) <= 4.0 * r.at("std_error").get<double>());
    CHECK(r.at("xi") == 1.0);

    const json again = post(c, "/simulate", {{"family", "uniform"}, {"n", 10}, {"trials", 100'000}, {"seed", 3}}, 200);
    CHECK(again.at("omega") == r.at("omega"));

    const json sliding = post(c, "/simulate",
                              {{"family", "gaussian"}, {"param", 0.1}, {"n", 12},
                               {"estimator", "sliding"}, {"trials", 200'000}},
                              200);
    CHECK(sliding.at("estimator") == "sliding");
    CHECK(sliding.at("omega").get<double>() > 0.0);

    const json inf = post(c, "/simulate", {{"family", "gaussian"}, {"param", 3.0}, {"n", 2}, {"trials", 10}}, 200);
    CHECK(inf.at("xi") == "inf");

    app.service().shutdown();
    const json cancelled = post(c, "/simulate", {{"n", 3}}, 503);
    CHECK(cancelled.at("error").at("code") == "cancelled");
    fs::remove_all(dir);
}

TEST_CASE("HTTP session equals replay of its log, and survives a restart") {
    const auto dir = fresh_dir("replay");
    PocketSampler sampler(BiasModel::gaussian_tail(0.1, WheelSpec::american()));
    RandomStream rng(77, 0);
    std::string id;
    json final_state;
    {
        Running app(dir);
        auto c = app.client();
        id = post(c, "/sessions", {{"n", 6}, {"bankroll", 2000}, {"bet_unit", 3}, {"wheel", "american"}}, 201)
                 .at("id");
        for (int i = 0; i < 300; ++i) {
            const int pocket = sampler(rng);
            post(c, "/sessions/" + id + "/spins",
                 {{"outcome", WheelSpec::american().label(pocket)}, {"seq", i}, {"timestamp", 1000 * i}}, 200);
        }
        final_state = get(c, "/sessions/" + id);

        const auto res = c.Get("/sessions/" + id + "/log");
        REQUIRE(res);
        CHECK(res->status == 200);
        std::istringstream text(res->body);
        const auto log = read_spin_log(text);
        REQUIRE(log.config.has_value());
        const SessionState replayed = replay_log(log, *log.config);
        CHECK(replayed == app.service().store().get(id));
        CHECK(to_json(replayed).at("ledger") == final_state.at("ledger"));
        CHECK(replayed.bankroll.minor == final_state.at("bankroll").get<std::int64_t>());

        std::ifstream on_disk(dir / (id + ".log"));
        std::stringstream disk;
        disk << on_disk.rdbuf();
        CHECK(disk.str() == res->body);
    }
    {
        Running app(dir);
        auto c = app.client();
        const json reloaded = get(c, "/sessions/" + id);
        CHECK(reloaded == final_state);
        const std::string next = post(c, "/sessions", {{"n", 2}}, 201).at("id");
        CHECK(next != id);
        CHECK(app.service().store().size() == 2);
    }
    fs::remove_all(dir);
}

TEST_CASE("schemas") {
    const auto dir = fresh_dir("schema");
    Running app(dir);
    auto c = app.client();
    const json index = get(c, "/schema");
    CHECK(index.at("version") == "v1");
    for (const auto& name : index.at("schemas")) {
        const json schema = get(c, "/schema/" + name.get<std::string>());
        CHECK(schema.at("$id") == "bunching/" + name.get<std::string>() + "/v1");
        CHECK(schema.at("type") == "object");
    }
    CHECK(index.at("schemas").size() == api_schemas().size());
    get(c, "/schema/nothing", 404);

    // Every field a snapshot carries is described by the session_state schema.
    const std::string id = post(c, "/sessions", {{"n", 2}}, 201).at("id");
    const json state = get(c, "/sessions/" + id);
    const json& properties = api_schemas().at("session_state").at("properties");
    for (const auto& [key, value] : state.items()) CHECK(properties.contains(key));
    fs::remove_all(dir);
}
