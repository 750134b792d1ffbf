#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bunching/random.hpp"

namespace bunching {

/// Number of pockets and the multiplier collected on a straight-up win.
struct WheelSpec {
    int pockets = 37;
    int payout = 36;

    static constexpr WheelSpec european() { return {37, 36}; }
    static constexpr WheelSpec american() { return {38, 36}; }

    /// Throws std::invalid_argument unless pockets >= 2 and payout >= 1.
    void validate() const;

    /// Axis of the mirrored bias laws, (W - 1) / 2. Fractional for even W.
    double center() const noexcept { return 0.5 * (pockets - 1); }

    bool contains(int pocket) const noexcept { return pocket >= 0 && pocket < pockets; }

    /// Table label of a pocket index: "00" for index 37 on an American wheel.
    std::string label(int pocket) const;

    /// Inverse of label(); accepts "00" on 38-pocket wheels.
    std::optional<int> parse_pocket(std::string_view text) const;

    friend bool operator==(const WheelSpec&, const WheelSpec&) = default;
};

enum class BiasKind { Uniform, GaussianTail, Linear };

std::string_view to_string(BiasKind kind) noexcept;
std::optional<BiasKind> parse_bias_kind(std::string_view name) noexcept;

/// Result of P(W-1)/P(0); an empty least-likely pocket is not an overflow.
struct SpreadRatio {
    enum class Kind { Finite, Infinite, Overflow };
    double value = 1.0;
    Kind kind = Kind::Finite;

    bool finite() const noexcept { return kind == Kind::Finite; }
};

/**
 * Probability law over the pockets of a wheel, indexed in order of
 * increasing probability.
 *
 * Both biased laws are built around the center c = (W - 1) / 2: the lower
 * half is given in closed form and the upper half is its mirror,
 * P(k) = 2/W - P(W - 1 - k), which makes the table normalized by construction.
 *
 *  - GaussianTail(delta): P(k) = exp(-delta^2 (k - c)^2 / 2) / W for k <= c.
 *  - Linear(beta):        P(k) = (1 + beta (k - c) / c) / W.
 *
 * Immutable after construction; safe to share between threads.
 */
class BiasModel {
public:
    static BiasModel uniform(WheelSpec wheel = WheelSpec::european());
    static BiasModel gaussian_tail(double delta, WheelSpec wheel = WheelSpec::european());
    static BiasModel linear(double beta, WheelSpec wheel = WheelSpec::european());

    /// Uniform ignores the parameter; throws std::invalid_argument on a bad one.
    static BiasModel make(BiasKind kind, double parameter,
                          WheelSpec wheel = WheelSpec::european());

    BiasKind kind() const noexcept { return kind_; }
    double parameter() const noexcept { return parameter_; }
    const WheelSpec& wheel() const noexcept { return wheel_; }

    /// P(k). Throws std::out_of_range for k outside [0, W).
    double probability(int k) const;

    std::span<const double> probabilities() const noexcept { return table_; }

    /// xi = P(W-1) / P(0).
    SpreadRatio spread_ratio() const noexcept;

private:
    BiasModel(BiasKind kind, double parameter, WheelSpec wheel);

    BiasKind kind_;
    double parameter_;
    WheelSpec wheel_;
    std::vector<double> table_;
};

/// Inverse-CDF sampler over a precomputed cumulative table (binary search).
class PocketSampler {
public:
    explicit PocketSampler(std::span<const double> probabilities);
    explicit PocketSampler(const BiasModel& model) : PocketSampler(model.probabilities()) {}

    /// Pocket whose cumulative interval contains u, for u in [0, 1).
    int pocket_for(double u) const noexcept;

    int operator()(RandomStream& rng) const noexcept { return pocket_for(rng.uniform()); }

    int size() const noexcept { return static_cast<int>(cdf_.size()); }

private:
    std::vector<double> cdf_;
};

/// Writes the `k,probability` table.
void write_distribution_csv(std::ostream& out, const BiasModel& model);

}  // namespace bunching
