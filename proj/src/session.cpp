#include "bunching/session.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace bunching {

std::string_view to_string(Phase p) noexcept {
    switch (p) {
        case Phase::Warmup: return "warmup";
        case Phase::Probing: return "probing";
        case Phase::Confident: return "confident";
        case Phase::Stopped: return "stopped";
    }
    return "unknown";
}

std::string_view to_string(Rationale r) noexcept {
    switch (r) {
        case Rationale::WarmupNoBet: return "warmup-no-bet";
        case Rationale::ProbingMinimum: return "probing-minimum";
        case Rationale::ConfidentScaleUp: return "confident-scale-up";
        case Rationale::StopLoss: return "stop-loss";
    }
    return "unknown";
}

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::AboveCritical: return "above-critical";
        case Verdict::BelowCritical: return "below-critical";
        case Verdict::Undecided: return "undecided";
    }
    return "unknown";
}

void SessionConfig::validate() const {
    strategy.validate();
    if (initial_bankroll.minor < 0) throw std::invalid_argument("bankroll must not be negative");
}

void RunningReturn::add(Money stake, Money won) noexcept {
    ++settled;
    staked += stake;
    collected += won;
    const auto s = static_cast<double>(stake.minor);
    const auto c = static_cast<double>(won.minor);
    sum_cc += c * c;
    sum_cs += c * s;
    sum_ss += s * s;
}

OmegaEstimate RunningReturn::estimate() const noexcept {
    OmegaEstimate e;
    e.estimator = Estimator::SlidingWindow;
    e.trials = settled;
    if (staked.minor == 0) return e;
    const auto total_stake = static_cast<double>(staked.minor);
    e.omega = static_cast<double>((collected - staked).minor) / total_stake;
    if (settled > 1) {
        // Linearized ratio estimator: d_i = c_i - R s_i with R = C / S.
        const double r = static_cast<double>(collected.minor) / total_stake;
        const double ss = std::max(0.0, sum_cc - 2.0 * r * sum_cs + r * r * sum_ss);
        const auto n = static_cast<double>(settled);
        e.std_error = std::sqrt(ss * n / (n - 1.0)) / total_stake;
    }
    return e;
}

SessionState start_session(const SessionConfig& config) {
    config.validate();
    SessionState s;
    s.config = config;
    s.bankroll = config.initial_bankroll;
    s.phase = Phase::Warmup;
    s.next = Recommendation{{}, Money{0}, Rationale::WarmupNoBet};
    return s;
}

std::vector<int> trailing_distinct(std::span<const SpinRecord> spins, int window) {
    const std::size_t n = std::min(spins.size(), static_cast<std::size_t>(window));
    std::vector<int> out;
    out.reserve(n);
    for (const auto& spin : spins.last(n)) out.push_back(spin.outcome);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

DecisionReport decision_status(const SessionState& state) noexcept {
    const OmegaEstimate e = state.running.estimate();
    DecisionReport r;
    r.omega = e.omega;
    r.std_error = e.std_error;
    r.spins_observed = state.spins.size();
    r.settled_bets = state.running.settled;
    if (r.settled_bets >= kMinSettledForVerdict) {
        if (e.omega - 2.0 * e.std_error > 0.0) {
            r.verdict = Verdict::AboveCritical;
        } else if (e.omega + 2.0 * e.std_error < 0.0) {
            r.verdict = Verdict::BelowCritical;
        }
    }
    return r;
}

namespace {

void advance_recommendation(SessionState& s) {
    const auto& strategy = s.config.strategy;
    if (s.spins.size() < static_cast<std::size_t>(strategy.window)) {
        s.phase = Phase::Warmup;
        s.next = Recommendation{{}, Money{0}, Rationale::WarmupNoBet};
        return;
    }
    Recommendation rec;
    rec.bets = trailing_distinct(s.spins, strategy.window);
    rec.stake_per_bet = strategy.bet_unit;
    if (s.bankroll < rec.total_stake()) {
        s.phase = Phase::Stopped;
        s.next = Recommendation{{}, Money{0}, Rationale::StopLoss};
        return;
    }
    if (decision_status(s).verdict == Verdict::AboveCritical) {
        s.phase = Phase::Confident;
        rec.rationale = Rationale::ConfidentScaleUp;
    } else {
        s.phase = Phase::Probing;
        rec.rationale = Rationale::ProbingMinimum;
    }
    s.next = std::move(rec);
}

}  // namespace

Recommendation record_spin(SessionState& state, int outcome, std::int64_t timestamp_ms) {
    const auto& wheel = state.config.strategy.wheel;
    if (!wheel.contains(outcome)) {
        throw std::invalid_argument(
            fmt::format("pocket {} is not on a {}-pocket wheel", outcome, wheel.pockets));
    }
    const auto index = static_cast<std::uint64_t>(state.spins.size());
    if (!state.next.bets.empty()) {
        const Money stake = state.next.total_stake();
        const bool hit = std::binary_search(state.next.bets.begin(), state.next.bets.end(), outcome);
        const Money collected = hit ? state.next.stake_per_bet * wheel.payout : Money{0};
        state.bankroll += collected - stake;
        state.running.add(stake, collected);
        state.ledger.push_back(LedgerEntry{index, state.next.bets, stake, collected});
    }
    state.spins.push_back(SpinRecord{outcome, timestamp_ms});
    advance_recommendation(state);
    return state.next;
}

SessionState replay(std::span<const SpinRecord> spins, const SessionConfig& config) {
    SessionState state = start_session(config);
    for (std::size_t i = 0; i < spins.size(); ++i) {
        if (!config.strategy.wheel.contains(spins[i].outcome)) {
            throw std::invalid_argument(fmt::format("spin {}: pocket {} is not on the wheel", i,
                                                    spins[i].outcome));
        }
        record_spin(state, spins[i].outcome, spins[i].timestamp_ms);
    }
    return state;
}

}  // namespace bunching
