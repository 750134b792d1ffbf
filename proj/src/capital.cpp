#include "bunching/capital.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "bunching/errors.hpp"
#include "bunching/strategy.hpp"

namespace bunching {

double avg_distinct(const BiasModel& model, int window) {
    validate_window(window);
    double total = 0.0;
    for (double p : model.probabilities()) {
        // 1 - (1 - p)^N without cancellation for small p.
        total += -std::expm1(window * std::log1p(-p));
    }
    return total;
}

double losing_spin_probability(double j_avg, double omega, const WheelSpec& wheel) {
    wheel.validate();
    const double w = wheel.pockets;
    const double covered = j_avg * (1.0 + omega);
    const double base = (w - covered) / w;
    if (!(covered > 0.0)) {
        throw DomainError("invalid_inputs",
                          fmt::format("jbar (1 + omega) = {} must be positive", covered));
    }
    if (!(base > 0.0 && base < 1.0)) {
        throw DomainError("cannot_lose",
                          fmt::format("jbar (1 + omega) = {} covers the whole wheel; "
                                      "the strategy cannot lose a spin",
                                      covered));
    }
    return base;
}

double fluctuation_frequency(double j_avg, double omega, double streak, const WheelSpec& wheel) {
    if (!(streak > 0.0)) {
        throw DomainError("invalid_inputs", fmt::format("losing streak S must be > 0, got {}", streak));
    }
    const double base = losing_spin_probability(j_avg, omega, wheel);
    return std::exp(streak * std::log(base));
}

namespace {

// Bisection to adjacent doubles; g(lo) and g(hi) have opposite signs.
template <class F>
double bisect(F&& g, double lo, double hi) {
    const bool rising = g(lo) < 0.0;
    for (int i = 0; i < 2000; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if ((g(mid) < 0.0) == rising) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double glo = std::abs(g(lo));
    const double ghi = std::abs(g(hi));
    return glo <= ghi ? lo : hi;
}

}  // namespace

CapitalSolution solve_capital(double j_avg, double omega, const WheelSpec& wheel,
                              const CapitalOptions& options) {
    if (!(omega > 0.0)) {
        throw NoCriticalCapital(fmt::format(
            "no critical capital exists for omega = {} <= 0: the capital is lost with certainty",
            omega));
    }
    if (!(j_avg > 0.0)) throw std::invalid_argument("average bets per spin must be positive");
    const double base = losing_spin_probability(j_avg, omega, wheel);
    const double log_base = std::log(base);  // < 0
    const double log_scale = std::log(j_avg * omega);

    auto g = [&](double c) { return log_scale - std::log(c) - (c / j_avg) * log_base; };

    const double turning = j_avg / -log_base;
    const double g_min = g(turning);
    if (g_min > 0.0) {
        throw NoCriticalCapital(fmt::format(
            "no critical capital exists for jbar = {}, omega = {}: the balance equation has no root",
            j_avg, omega));
    }

    CapitalSolution s;
    double upper = turning;
    if (g_min == 0.0) {
        s.roots_found = 1;
    } else {
        s.roots_found = 2;
        const double tiny = std::min(turning, j_avg * omega) * 1e-3;
        s.lower_root = bisect(g, tiny, turning);

        double hi = 2.0 * turning;
        while (g(hi) < 0.0) {
            if (hi >= options.capital_max) {
                throw RootBeyondRange(fmt::format(
                    "critical capital for jbar = {}, omega = {} exceeds {} bet units", j_avg, omega,
                    options.capital_max));
            }
            hi = std::min(2.0 * hi, options.capital_max);
        }
        upper = bisect(g, turning, hi);
    }
    if (upper > options.capital_max) {
        throw RootBeyondRange(fmt::format("critical capital {} exceeds {} bet units", upper,
                                          options.capital_max));
    }

    s.capital = upper;
    s.j_avg = j_avg;
    s.omega = omega;
    s.losing_streak = upper / j_avg;
    s.mean_spins = upper / (j_avg * omega);
    s.fluctuation_frequency = std::exp(s.losing_streak * log_base);
    s.residual = std::abs(j_avg * omega / upper - s.fluctuation_frequency);
    return s;
}

std::vector<CapitalCell> capital_grid(std::span<const double> omegas, std::span<const double> j_avgs,
                                      const WheelSpec& wheel, const CapitalOptions& options) {
    if (omegas.empty() || j_avgs.empty()) {
        throw std::invalid_argument("capital grid needs at least one omega and one jbar");
    }
    std::vector<CapitalCell> cells;
    cells.reserve(omegas.size() * j_avgs.size());
    for (double omega : omegas) {
        for (double j : j_avgs) {
            CapitalCell cell;
            cell.omega = omega;
            cell.j_avg = j;
            try {
                cell.solution = solve_capital(j, omega, wheel, options);
            } catch (const DomainError& e) {
                cell.error_code = e.code();
                cell.error = e.what();
            } catch (const std::invalid_argument& e) {
                cell.error_code = "invalid_argument";
                cell.error = e.what();
            }
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

void write_capital_csv(std::ostream& out, std::span<const CapitalCell> cells) {
    out << "omega,j_avg,C,M,S,f,residual,roots_found\n";
    for (const auto& c : cells) {
        if (c.solution) {
            const auto& s = *c.solution;
            out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n",
                               c.omega, c.j_avg, s.capital, s.mean_spins, s.losing_streak,
                               s.fluctuation_frequency, s.residual, s.roots_found);
        } else {
            out << fmt::format("{:.17g},{:.17g},,,,,,0\n", c.omega, c.j_avg);
        }
    }
}

}  // namespace bunching
