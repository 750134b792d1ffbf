#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string_view>

#include "bunching/wheel.hpp"

namespace bunching {

/// Currency in integer minor units. Arithmetic is exact.
struct Money {
    std::int64_t minor = 0;

    constexpr Money() = default;
    constexpr explicit Money(std::int64_t m) : minor(m) {}

    constexpr Money& operator+=(Money o) noexcept { minor += o.minor; return *this; }
    constexpr Money& operator-=(Money o) noexcept { minor -= o.minor; return *this; }
    friend constexpr Money operator+(Money a, Money b) noexcept { return a += b; }
    friend constexpr Money operator-(Money a, Money b) noexcept { return a -= b; }
    friend constexpr Money operator*(Money a, std::int64_t k) noexcept { return Money{a.minor * k}; }
    friend constexpr Money operator*(std::int64_t k, Money a) noexcept { return Money{a.minor * k}; }
    friend constexpr auto operator<=>(Money, Money) = default;
};

/// Play the last `window` outcomes with `bet_unit` on each distinct number.
struct StrategyConfig {
    static constexpr int kMaxWindow = 64;

    int window = 12;
    WheelSpec wheel = WheelSpec::european();
    Money bet_unit{1};

    void validate() const;

    friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

/// Throws std::invalid_argument unless 1 <= window <= 64.
void validate_window(int window);

enum class Estimator { Exact, IndependentTrials, SlidingWindow };

std::string_view to_string(Estimator e) noexcept;

/// Expected return per unit staked, with its Monte-Carlo error when sampled.
struct OmegaEstimate {
    double omega = 0.0;
    double std_error = 0.0;
    std::uint64_t trials = 0;
    Estimator estimator = Estimator::Exact;
    /// Probability that the next outcome repeats one of the last N.
    std::optional<double> bunching;
    /// Mean of payout * hit - j per spin: profit in bet units, not normalized by stake.
    std::optional<double> profit_per_spin;
};

}  // namespace bunching
