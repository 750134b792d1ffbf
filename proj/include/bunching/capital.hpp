#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bunching/wheel.hpp"

namespace bunching {

/// Expected number of distinct pockets among N i.i.d. draws: sum_k 1 - (1 - P(k))^N.
double avg_distinct(const BiasModel& model, int window);

/// Per-spin loss probability (W - jbar (1 + omega)) / W. Throws DomainError outside (0, 1).
double losing_spin_probability(double j_avg, double omega, const WheelSpec& wheel);

/// Frequency of a streak of S losing spins: ((W - jbar (1 + omega)) / W)^S.
double fluctuation_frequency(double j_avg, double omega, double streak, const WheelSpec& wheel);

/**
 * Critical capital C (in bet units) with its linked quantities:
 * C = M jbar omega, C = S jbar, M = 1/f, f = base^S.
 */
struct CapitalSolution {
    double capital = 0.0;               ///< C
    double mean_spins = 0.0;            ///< M
    double losing_streak = 0.0;         ///< S
    double fluctuation_frequency = 0.0; ///< f
    double j_avg = 0.0;                 ///< average bets per spin
    double omega = 0.0;
    double residual = 0.0;  ///< |jbar omega / C - base^(C / jbar)|
    int roots_found = 0;
    /// The other root of the balance equation, when there are two.
    std::optional<double> lower_root;
};

struct CapitalOptions {
    double capital_max = 1e6;
};

/**
 * Solves jbar omega / C = base^(C / jbar) for C > 0.
 *
 * In log form g(C) = ln(jbar omega) - ln C - (C / jbar) ln(base) is convex with
 * its minimum at C* = jbar / |ln base|, so there are zero, one or two roots.
 * The solution returned is the root on the rising branch (C >= C*), which is
 * the one that decreases as omega and jbar grow; the lower root is reported
 * alongside.
 *
 * Throws NoCriticalCapital for omega <= 0 or when the equation has no root,
 * RootBeyondRange when the root exceeds capital_max.
 */
CapitalSolution solve_capital(double j_avg, double omega, const WheelSpec& wheel = WheelSpec::european(),
                              const CapitalOptions& options = {});

struct CapitalCell {
    double omega = 0.0;
    double j_avg = 0.0;
    std::optional<CapitalSolution> solution;
    std::string error_code;
    std::string error;
};

/// Cross product omegas x j_avgs (omega outer). Per-cell failures are recorded, not thrown.
std::vector<CapitalCell> capital_grid(std::span<const double> omegas, std::span<const double> j_avgs,
                                      const WheelSpec& wheel = WheelSpec::european(),
                                      const CapitalOptions& options = {});

/// `omega,j_avg,C,M,S,f,residual,roots_found`; failed cells leave the numeric columns empty.
void write_capital_csv(std::ostream& out, std::span<const CapitalCell> cells);

}  // namespace bunching
