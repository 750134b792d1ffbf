#include "bunching/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "bunching/analytics.hpp"
#include "bunching/capital.hpp"
#include "bunching/errors.hpp"
#include "bunching/manifest.hpp"
#include "bunching/persistence.hpp"
#include "bunching/service.hpp"
#include "bunching/session.hpp"

namespace bunching::cli {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

template <class T>
T parse_number(std::string_view text) {
    text = trim(text);
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        throw std::invalid_argument(fmt::format("'{}' is not a valid number", text));
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

}  // namespace

std::vector<double> parse_real_list(std::string_view text) {
    if (text.find(':') != std::string_view::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw std::invalid_argument("range must be start:stop:step");
        const double start = parse_number<double>(parts[0]);
        const double stop = parse_number<double>(parts[1]);
        const double step = parse_number<double>(parts[2]);
        if (!(step > 0.0) || stop < start) {
            throw std::invalid_argument("range needs step > 0 and stop >= start");
        }
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        if (count > 1'000'000) throw std::invalid_argument("range has too many points");
        std::vector<double> values;
        values.reserve(count);
        for (std::size_t i = 0; i < count; ++i) values.push_back(start + static_cast<double>(i) * step);
        return values;
    }
    std::vector<double> values;
    for (auto part : split(text, ',')) values.push_back(parse_number<double>(part));
    return values;
}

std::vector<int> parse_int_list(std::string_view text) {
    if (text.find(':') != std::string_view::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw std::invalid_argument("range must be start:stop:step");
        const int start = parse_number<int>(parts[0]);
        const int stop = parse_number<int>(parts[1]);
        const int step = parse_number<int>(parts[2]);
        if (step <= 0 || stop < start) throw std::invalid_argument("range needs step > 0 and stop >= start");
        std::vector<int> values;
        for (int v = start; v <= stop; v += step) values.push_back(v);
        return values;
    }
    std::vector<int> values;
    for (auto part : split(text, ',')) values.push_back(parse_number<int>(part));
    return values;
}

namespace {

struct ModelArgs {
    std::string family;
    std::optional<std::string> delta;
    std::optional<std::string> beta;
    int pockets = 37;
    int payout = 36;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--family", family, "uniform | gaussian | linear");
        cmd->add_option("--delta", delta, "Gaussian-tail spread (implies --family gaussian)");
        cmd->add_option("--beta", beta, "linear spread in [0, 1) (implies --family linear)");
        cmd->add_option("--pockets", pockets, "wheel pockets (37 European, 38 American)");
        cmd->add_option("--payout", payout, "multiplier collected on a win");
    }

    WheelSpec wheel() const {
        WheelSpec w{pockets, payout};
        w.validate();
        return w;
    }

    BiasKind kind() const {
        if (delta && beta) throw std::invalid_argument("give either --delta or --beta, not both");
        if (!family.empty()) {
            const auto k = parse_bias_kind(family);
            if (!k) throw std::invalid_argument("unknown family '" + family + "'");
            if ((*k == BiasKind::GaussianTail && beta) || (*k == BiasKind::Linear && delta)) {
                throw std::invalid_argument("parameter does not match --family " + family);
            }
            return *k;
        }
        if (delta) return BiasKind::GaussianTail;
        if (beta) return BiasKind::Linear;
        return BiasKind::Uniform;
    }

    /// Raw parameter text for the selected family ("0" when absent).
    std::string parameter_text() const {
        if (delta) return *delta;
        if (beta) return *beta;
        return "0";
    }

    BiasModel single_model() const {
        return BiasModel::make(kind(), parse_number<double>(parameter_text()), wheel());
    }

    json to_json() const {
        return json{{"family", to_string(kind())},
                    {"param", parameter_text()},
                    {"pockets", pockets},
                    {"payout", payout}};
    }
};

void print_error(std::ostream& err, std::string_view code, std::string_view message) {
    err << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
}

std::string format_xi(const SpreadRatio& xi) {
    switch (xi.kind) {
        case SpreadRatio::Kind::Finite: return fmt::format("{:.17g}", xi.value);
        case SpreadRatio::Kind::Infinite: return "inf";
        case SpreadRatio::Kind::Overflow: return "overflow";
    }
    return "?";
}

json estimate_json(const BiasModel& model, int n, const OmegaEstimate& e) {
    json j{{"family", to_string(model.kind())},
           {"param", model.parameter()},
           {"xi", format_xi(model.spread_ratio())},
           {"N", n},
           {"estimator", to_string(e.estimator)},
           {"omega", e.omega},
           {"std_error", e.std_error},
           {"trials", e.trials}};
    if (e.bunching) j["bunching"] = *e.bunching;
    if (e.profit_per_spin) j["profit_per_spin"] = *e.profit_per_spin;
    return j;
}

void print_estimate(std::ostream& out, const BiasModel& model, int n, const OmegaEstimate& e,
                    bool as_json) {
    if (as_json) {
        out << estimate_json(model, n, e).dump(2) << '\n';
        return;
    }
    out << fmt::format("family = {}\n", to_string(model.kind()))
        << fmt::format("param = {}\n", model.parameter())
        << fmt::format("xi = {}\n", format_xi(model.spread_ratio()))
        << fmt::format("N = {}\n", n)
        << fmt::format("estimator = {}\n", to_string(e.estimator))
        << fmt::format("omega = {:.17g}\n", e.omega)
        << fmt::format("std_error = {:.17g}\n", e.std_error)
        << fmt::format("trials = {}\n", e.trials);
    if (e.bunching) out << fmt::format("bunching = {:.17g}\n", *e.bunching);
    if (e.profit_per_spin) out << fmt::format("profit_per_spin = {:.17g}\n", *e.profit_per_spin);
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DomainError("io_error", "cannot open " + path + " for writing");
    return out;
}

// Writes `content` to `path` with its manifest sidecar, or to `out` when no path.
void emit(std::ostream& out, const std::string& path, const std::string& content,
          RunManifest manifest, const Stopwatch& clock) {
    if (path.empty()) {
        out << content;
        return;
    }
    {
        auto file = open_output(path);
        file << content;
    }
    manifest.outputs.push_back(path);
    manifest.wall_time_s = clock.seconds();
    write_manifest(manifest_path_for(path), manifest);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Last-N roulette strategy analysis under biased wheels", "bunching"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", std::string(version()));

    // dist
    ModelArgs dist_model;
    std::string dist_out;
    auto* dist = app.add_subcommand("dist", "Probability table k,probability of a bias model");
    dist_model.add_to(dist);
    dist->add_option("--out", dist_out, "CSV output path (stdout when omitted)");

    // exact
    ModelArgs exact_model;
    int exact_n = 0;
    std::uint64_t exact_budget = ExactOptions{}.budget;
    bool exact_json = false;
    auto* exact = app.add_subcommand("exact", "Expected return by exact enumeration");
    exact_model.add_to(exact);
    exact->add_option("--n", exact_n, "window N")->required();
    exact->add_option("--budget", exact_budget, "maximum enumerated sequences");
    exact->add_flag("--json", exact_json, "print JSON");

    // simulate
    ModelArgs sim_model;
    int sim_n = 0;
    std::uint64_t sim_trials = 1'000'000;
    std::uint64_t sim_seed = 1;
    std::optional<std::uint64_t> sim_spins;
    unsigned sim_workers = 0;
    std::string sim_estimator = "independent";
    bool sim_json = false;
    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo expected return");
    sim_model.add_to(simulate);
    simulate->add_option("--n", sim_n, "window N")->required();
    simulate->add_option("--trials", sim_trials, "independent trials");
    simulate->add_option("--seed", sim_seed, "master seed");
    simulate->add_option("--workers", sim_workers, "threads (0 = all cores)");
    simulate->add_option("--estimator", sim_estimator, "independent | sliding")
        ->check(CLI::IsMember({"independent", "sliding"}));
    simulate->add_option("--spins", sim_spins, "stream length for --estimator sliding");
    simulate->add_flag("--json", sim_json, "print JSON");

    // grid
    std::string grid_family;
    std::optional<std::string> grid_delta, grid_beta, grid_param;
    std::string grid_n;
    std::uint64_t grid_trials = 1'000'000;
    std::uint64_t grid_seed = 1;
    unsigned grid_workers = 0;
    int grid_pockets = 37, grid_payout = 36;
    std::string grid_out, grid_json;
    auto* grid = app.add_subcommand("grid", "Omega over a parameter x N grid (CSV)");
    grid->add_option("--family", grid_family, "gaussian | linear | uniform");
    grid->add_option("--delta", grid_delta, "delta values: start:stop:step or a,b,c");
    grid->add_option("--beta", grid_beta, "beta values: start:stop:step or a,b,c");
    grid->add_option("--param", grid_param, "parameter values for --family");
    grid->add_option("--n", grid_n, "window values: start:stop:step or a,b,c")->required();
    grid->add_option("--trials", grid_trials, "trials per cell");
    grid->add_option("--seed", grid_seed, "master seed (shared by all cells)");
    grid->add_option("--workers", grid_workers, "threads (0 = all cores)");
    grid->add_option("--pockets", grid_pockets, "wheel pockets");
    grid->add_option("--payout", grid_payout, "win multiplier");
    grid->add_option("--out", grid_out, "CSV output path (stdout when omitted)");
    grid->add_option("--json", grid_json, "also write the grid as JSON to this path");

    // critical
    std::string crit_family = "gaussian";
    int crit_n = 0;
    CriticalOptions crit;
    int crit_pockets = 37, crit_payout = 36;
    bool crit_no_exact = false;
    bool crit_json = false;
    auto* critical = app.add_subcommand("critical", "Bias level where Omega crosses zero");
    critical->add_option("--family", crit_family, "gaussian | linear");
    critical->add_option("--n", crit_n, "window N")->required();
    critical->add_option("--trials", crit.trials_per_eval, "trials per evaluation");
    critical->add_option("--seed", crit.seed, "master seed");
    critical->add_option("--tolerance", crit.tolerance, "bracket width to stop at");
    critical->add_option("--max-escalation", crit.max_escalation, "trial growth cap per point");
    critical->add_option("--param-max", crit.parameter_max, "upper end of the search interval");
    critical->add_option("--workers", crit.mc.workers, "threads (0 = all cores)");
    critical->add_option("--pockets", crit_pockets, "wheel pockets");
    critical->add_option("--payout", crit_payout, "win multiplier");
    critical->add_flag("--no-exact", crit_no_exact, "always sample, even when enumeration fits");
    critical->add_flag("--json", crit_json, "print JSON");

    // capital
    std::string cap_omega, cap_javg, cap_out;
    CapitalOptions cap_options;
    int cap_pockets = 37, cap_payout = 36;
    auto* capital = app.add_subcommand("capital", "Critical initial capital");
    capital->add_option("--omega", cap_omega, "expected return(s)")->required();
    capital->add_option("--j-avg", cap_javg, "average bets per spin")->required();
    capital->add_option("--c-max", cap_options.capital_max, "largest capital searched");
    capital->add_option("--pockets", cap_pockets, "wheel pockets");
    capital->add_option("--payout", cap_payout, "win multiplier");
    capital->add_option("--out", cap_out, "CSV output path; forces table output");

    // session-replay
    std::string replay_log_path, replay_state_out;
    std::optional<int> replay_n;
    std::int64_t replay_unit = 1, replay_bankroll = 0;
    int replay_pockets = 37, replay_payout = 36;
    auto* session_replay = app.add_subcommand("session-replay", "Replay a recorded spin log");
    session_replay->add_option("--log", replay_log_path, "spin log file")->required();
    session_replay->add_option("--n", replay_n, "window N (overrides the log's #config)");
    session_replay->add_option("--bet-unit", replay_unit, "stake per number, minor units");
    session_replay->add_option("--bankroll", replay_bankroll, "initial bankroll, minor units");
    session_replay->add_option("--pockets", replay_pockets, "wheel pockets");
    session_replay->add_option("--payout", replay_payout, "win multiplier");
    session_replay->add_option("--state-out", replay_state_out, "write the JSON snapshot here");

    // serve
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    ServiceOptions serve_options;
    if (const char* env = std::getenv("BUNCHING_STORE"); env != nullptr && *env != '\0') {
        serve_options.store = env;
    }
    std::string serve_store = serve_options.store.string();
    auto* serve_cmd = app.add_subcommand("serve", "HTTP JSON service");
    serve_cmd->add_option("--host", serve_host, "bind address");
    serve_cmd->add_option("--port", serve_port, "TCP port");
    serve_cmd->add_option("--store", serve_store, "session directory (env BUNCHING_STORE)");
    serve_cmd->add_option("--sim-slots", serve_options.simulation_slots, "concurrent simulations");
    serve_cmd->add_option("--workers", serve_options.mc_workers, "threads per simulation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        print_error(err, "usage", e.what());
        return kExitUsage;
    }

    Stopwatch clock;
    try {
        if (*dist) {
            const BiasModel model = dist_model.single_model();
            std::ostringstream csv;
            write_distribution_csv(csv, model);
            RunManifest m{"dist", dist_model.to_json(), 0, {}, 0.0};
            emit(out, dist_out, csv.str(), m, clock);
            if (!dist_out.empty()) out << fmt::format("xi = {}\n", format_xi(model.spread_ratio()));
        } else if (*exact) {
            const BiasModel model = exact_model.single_model();
            print_estimate(out, model, exact_n, exact_omega(model, exact_n, {exact_budget}), exact_json);
        } else if (*simulate) {
            const BiasModel model = sim_model.single_model();
            OmegaEstimate e;
            if (sim_estimator == "sliding") {
                const std::uint64_t spins = sim_spins.value_or(sim_trials + sim_n);
                e = mc_omega_session(model, sim_n, spins, sim_seed);
            } else {
                McOptions mc;
                mc.workers = sim_workers;
                e = mc_omega(model, sim_n, sim_trials, sim_seed, mc);
            }
            print_estimate(out, model, sim_n, e, sim_json);
        } else if (*grid) {
            BiasKind family = BiasKind::Uniform;
            std::optional<std::string> values = grid_param;
            if (grid_delta && grid_beta) throw std::invalid_argument("give either --delta or --beta");
            if (!grid_family.empty()) {
                const auto k = parse_bias_kind(grid_family);
                if (!k) throw std::invalid_argument("unknown family '" + grid_family + "'");
                family = *k;
            } else if (grid_delta) {
                family = BiasKind::GaussianTail;
            } else if (grid_beta) {
                family = BiasKind::Linear;
            }
            if (grid_delta) values = grid_delta;
            if (grid_beta) values = grid_beta;
            if (!values) values = "0";
            const auto params = parse_real_list(*values);
            const auto windows = parse_int_list(grid_n);
            const WheelSpec wheel{grid_pockets, grid_payout};
            McOptions mc;
            mc.workers = grid_workers;
            const auto cells = omega_grid(family, params, windows, grid_trials, grid_seed, wheel, mc);

            RunManifest m{"grid",
                          json{{"family", to_string(family)},
                               {"params", *values},
                               {"n", grid_n},
                               {"trials", grid_trials},
                               {"workers", grid_workers},
                               {"pockets", grid_pockets},
                               {"payout", grid_payout}},
                          grid_seed,
                          {},
                          0.0};
            if (!grid_json.empty()) {
                json rows = json::array();
                for (const auto& c : cells) {
                    rows.push_back({{"family", to_string(c.family)},
                                    {"param", c.parameter},
                                    {"xi", format_xi(c.xi)},
                                    {"N", c.window},
                                    {"omega", c.estimate.omega},
                                    {"std_error", c.estimate.std_error},
                                    {"trials", c.estimate.trials}});
                }
                json manifest = m.to_json();
                manifest.erase("wall_time_s");
                auto file = open_output(grid_json);
                file << json{{"manifest", manifest}, {"cells", rows}}.dump(2) << '\n';
                m.outputs.push_back(grid_json);
            }
            std::ostringstream csv;
            write_grid_csv(csv, cells);
            emit(out, grid_out, csv.str(), m, clock);
        } else if (*critical) {
            const auto k = parse_bias_kind(crit_family);
            if (!k) throw std::invalid_argument("unknown family '" + crit_family + "'");
            crit.wheel = WheelSpec{crit_pockets, crit_payout};
            crit.prefer_exact = !crit_no_exact;
            const CriticalPoint cp = critical_spread(*k, crit_n, crit);
            const json j{{"family", to_string(cp.family)},
                         {"N", cp.window},
                         {"parameter", cp.parameter},
                         {"xi", cp.xi},
                         {"bracket_lo", cp.bracket_lo},
                         {"bracket_hi", cp.bracket_hi},
                         {"bracket_width", cp.bracket_width()},
                         {"omega_lo", cp.omega_lo},
                         {"omega_hi", cp.omega_hi},
                         {"estimator", to_string(cp.estimator)},
                         {"trials_per_eval", cp.trials_per_eval},
                         {"evaluations", cp.evaluations}};
            if (crit_json) {
                out << j.dump(2) << '\n';
            } else {
                for (const auto& [key, value] : j.items()) out << key << " = " << value.dump() << '\n';
            }
        } else if (*capital) {
            const auto omegas = parse_real_list(cap_omega);
            const auto javgs = parse_real_list(cap_javg);
            const WheelSpec wheel{cap_pockets, cap_payout};
            wheel.validate();
            if (omegas.size() == 1 && javgs.size() == 1 && cap_out.empty()) {
                const auto s = solve_capital(javgs[0], omegas[0], wheel, cap_options);
                out << fmt::format("C = {:.17g}\nM = {:.17g}\nS = {:.17g}\nf = {:.17g}\n", s.capital,
                                   s.mean_spins, s.losing_streak, s.fluctuation_frequency)
                    << fmt::format("residual = {:.3g}\nroots_found = {}\n", s.residual, s.roots_found);
                if (s.lower_root) out << fmt::format("lower_root = {:.17g}\n", *s.lower_root);
            } else {
                const auto cells = capital_grid(omegas, javgs, wheel, cap_options);
                std::ostringstream csv;
                write_capital_csv(csv, cells);
                RunManifest m{"capital",
                              json{{"omega", cap_omega},
                                   {"j_avg", cap_javg},
                                   {"c_max", cap_options.capital_max},
                                   {"pockets", cap_pockets},
                                   {"payout", cap_payout}},
                              0,
                              {},
                              0.0};
                emit(out, cap_out, csv.str(), m, clock);
            }
        } else if (*session_replay) {
            std::ifstream in(replay_log_path);
            if (!in) throw DomainError("io_error", "cannot open " + replay_log_path);
            const SpinLog log = read_spin_log(in);
            SessionConfig config;
            if (replay_n) {
                config.strategy = StrategyConfig{*replay_n, WheelSpec{replay_pockets, replay_payout},
                                                 Money{replay_unit}};
                config.initial_bankroll = Money{replay_bankroll};
                config.validate();
            } else if (log.config) {
                config = *log.config;
            } else {
                throw std::invalid_argument("log has no #config line; pass --n and friends");
            }
            const SessionState state = replay_log(log, config);
            const DecisionReport report = decision_status(state);
            const auto& wheel = config.strategy.wheel;
            std::string bets;
            for (int b : state.next.bets) bets += (bets.empty() ? "" : " ") + wheel.label(b);
            out << fmt::format("spins = {}\n", state.spins.size())
                << fmt::format("settled_bets = {}\n", state.running.settled)
                << fmt::format("bankroll = {}\n", state.bankroll.minor)
                << fmt::format("staked = {}\n", state.running.staked.minor)
                << fmt::format("collected = {}\n", state.running.collected.minor)
                << fmt::format("phase = {}\n", to_string(state.phase))
                << fmt::format("omega = {:.17g}\n", report.omega)
                << fmt::format("std_error = {:.17g}\n", report.std_error)
                << fmt::format("verdict = {}\n", to_string(report.verdict))
                << fmt::format("next_bets = {}\n", bets)
                << fmt::format("next_stake = {}\n", state.next.total_stake().minor);
            if (!replay_state_out.empty()) {
                auto file = open_output(replay_state_out);
                file << to_json(state).dump(2) << '\n';
            }
        } else if (*serve_cmd) {
            if (serve_port < 0 || serve_port > 65535) throw std::invalid_argument("port out of range");
            serve_options.store = serve_store;
            return serve(serve_host, serve_port, serve_options);
        }
    } catch (const DomainError& e) {
        print_error(err, e.code(), e.what());
        return kExitDomainError;
    } catch (const std::invalid_argument& e) {
        print_error(err, "invalid_argument", e.what());
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        print_error(err, "invalid_argument", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        print_error(err, "error", e.what());
        return kExitDomainError;
    }
    return kExitOk;
}

}  // namespace bunching::cli
