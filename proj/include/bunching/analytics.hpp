#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <stop_token>
#include <vector>

#include "bunching/strategy.hpp"
#include "bunching/wheel.hpp"

namespace bunching {

struct ExactOptions {
    /// Upper bound on the number of enumerated W^N sequences.
    std::uint64_t budget = 100'000'000;
};

/// W^N, saturating; used to decide between enumeration and sampling.
std::uint64_t sequence_count(int pockets, int window) noexcept;

/**
 * Expected return of the last-N strategy by full enumeration of the W^N
 * ordered windows:
 *
 *   Xi_n  = prod_i P(k_i) * sum_{distinct k} P(k)
 *   Omega = payout * sum_n Xi_n / j_n - 1,   bunching = sum_n Xi_n
 *
 * Throws BudgetExceeded when W^N exceeds the budget.
 */
OmegaEstimate exact_omega(const BiasModel& model, int window, const ExactOptions& options = {});

struct McOptions {
    /// Worker threads; 0 means hardware concurrency. Results do not depend on it.
    unsigned workers = 0;
    /// Trials per independently seeded stream.
    std::uint64_t chunk_trials = 1u << 16;
    std::stop_token stop;
};

/**
 * Independent-trial Monte-Carlo estimate of Omega: each trial draws N
 * outcomes, bets one unit on each of the j distinct numbers, draws the next
 * outcome and scores r = payout * hit / j - 1.
 *
 * Trials are split into fixed-size chunks; chunk c uses stream c of `seed`
 * and partial statistics are merged in chunk order, so the result is
 * bit-identical for any worker count.
 */
OmegaEstimate mc_omega(const BiasModel& model, int window, std::uint64_t trials,
                       std::uint64_t seed, const McOptions& options = {});

/**
 * One long correlated spin stream: after the first N spins every spin bets
 * the distinct set of the trailing window. Omega is total return over total
 * stake; the error uses batch means of the ratio-estimator residuals.
 */
OmegaEstimate mc_omega_session(const BiasModel& model, int window, std::uint64_t spins,
                               std::uint64_t seed, std::stop_token stop = {});

struct GridCell {
    BiasKind family = BiasKind::Uniform;
    double parameter = 0.0;
    SpreadRatio xi;
    int window = 1;
    OmegaEstimate estimate;
};

/// Cross product params x windows, row-major in params. Every cell uses `seed`.
std::vector<GridCell> omega_grid(BiasKind family, std::span<const double> params,
                                 std::span<const int> windows, std::uint64_t trials,
                                 std::uint64_t seed, WheelSpec wheel = WheelSpec::european(),
                                 const McOptions& options = {});

/// `family,param,xi,N,omega,std_error,trials`
void write_grid_csv(std::ostream& out, std::span<const GridCell> cells);

struct CriticalOptions {
    WheelSpec wheel = WheelSpec::european();
    std::uint64_t trials_per_eval = 1'000'000;
    std::uint64_t seed = 1;
    /// Search interval is [0, parameter_max]; 0 selects 0.3 for delta, 0.99 for beta.
    double parameter_max = 0.0;
    /// Stop once the bracket is this narrow.
    double tolerance = 1e-6;
    /// Trial-count growth allowed when a midpoint's sign is not 2-sigma resolved.
    unsigned max_escalation = 8;
    /// Use the enumerator when W^N fits the exact budget.
    bool prefer_exact = true;
    ExactOptions exact;
    McOptions mc;
};

struct CriticalPoint {
    BiasKind family = BiasKind::GaussianTail;
    int window = 1;
    double parameter = 0.0;  ///< delta_c or beta_c
    double xi = 0.0;         ///< spread ratio at the critical parameter
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double omega_lo = 0.0;   ///< Omega at bracket_lo (< 0)
    double omega_hi = 0.0;   ///< Omega at bracket_hi (> 0)
    std::uint64_t trials_per_eval = 0;  ///< 0 when evaluated exactly
    Estimator estimator = Estimator::Exact;
    int evaluations = 0;

    double bracket_width() const noexcept { return bracket_hi - bracket_lo; }
};

/**
 * Bias parameter at which Omega crosses zero, by bisection on [0, max].
 * With sampled evaluations a midpoint whose |Omega| < 2 SE is re-evaluated
 * with doubled trials (up to max_escalation x); if still unresolved the
 * search stops and the last resolved bracket is reported.
 *
 * Throws NoCriticality when Omega does not change sign on the interval.
 */
CriticalPoint critical_spread(BiasKind family, int window, const CriticalOptions& options = {});

}  // namespace bunching
