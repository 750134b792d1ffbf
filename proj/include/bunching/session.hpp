#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bunching/strategy.hpp"

namespace bunching {

struct SessionConfig {
    StrategyConfig strategy;
    Money initial_bankroll{0};

    void validate() const;

    friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

struct SpinRecord {
    int outcome = 0;  ///< pocket index; 37 is "00" on an American wheel
    std::int64_t timestamp_ms = 0;

    friend bool operator==(const SpinRecord&, const SpinRecord&) = default;
};

struct LedgerEntry {
    std::uint64_t spin_index = 0;  ///< index of the spin that settled the bets
    std::vector<int> bets;
    Money stake;
    Money collected;

    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

enum class Phase { Warmup, Probing, Confident, Stopped };
enum class Rationale { WarmupNoBet, ProbingMinimum, ConfidentScaleUp, StopLoss };
enum class Verdict { AboveCritical, BelowCritical, Undecided };

std::string_view to_string(Phase p) noexcept;
std::string_view to_string(Rationale r) noexcept;
std::string_view to_string(Verdict v) noexcept;

struct Recommendation {
    std::vector<int> bets;  ///< ascending pocket indices
    Money stake_per_bet;
    Rationale rationale = Rationale::WarmupNoBet;

    Money total_stake() const noexcept { return stake_per_bet * static_cast<std::int64_t>(bets.size()); }

    friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Totals over settled bets. Money totals are exact; the squared sums feed the error estimate.
struct RunningReturn {
    std::uint64_t settled = 0;
    Money staked;
    Money collected;
    double sum_cc = 0.0;
    double sum_cs = 0.0;
    double sum_ss = 0.0;

    void add(Money stake, Money won) noexcept;

    /// (collected - staked) / staked with a ratio-estimator standard error.
    OmegaEstimate estimate() const noexcept;

    friend bool operator==(const RunningReturn&, const RunningReturn&) = default;
};

struct SessionState {
    SessionConfig config;
    std::vector<SpinRecord> spins;
    Money bankroll;
    std::vector<LedgerEntry> ledger;
    Phase phase = Phase::Warmup;
    RunningReturn running;
    Recommendation next;

    OmegaEstimate running_omega() const noexcept { return running.estimate(); }

    friend bool operator==(const SessionState&, const SessionState&) = default;
};

/// Settled bets required before decision_status leaves "undecided".
inline constexpr std::uint64_t kMinSettledForVerdict = 100;

SessionState start_session(const SessionConfig& config);

/**
 * Settles the active recommendation against `outcome`, appends the spin and
 * computes the next recommendation and phase. Throws std::invalid_argument
 * for a pocket outside the wheel, leaving the state untouched.
 */
Recommendation record_spin(SessionState& state, int outcome, std::int64_t timestamp_ms = 0);

/// Ascending distinct pockets among the last `window` spins.
std::vector<int> trailing_distinct(std::span<const SpinRecord> spins, int window);

struct DecisionReport {
    double omega = 0.0;
    double std_error = 0.0;
    std::uint64_t spins_observed = 0;
    std::uint64_t settled_bets = 0;
    Verdict verdict = Verdict::Undecided;
};

/// Above-critical when omega - 2 SE > 0, below when omega + 2 SE < 0, after 100 settled bets.
DecisionReport decision_status(const SessionState& state) noexcept;

/// Folds record_spin over `spins`. Throws std::invalid_argument naming the bad index.
SessionState replay(std::span<const SpinRecord> spins, const SessionConfig& config);

}  // namespace bunching
