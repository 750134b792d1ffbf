#include "bunching/wheel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace bunching {

void WheelSpec::validate() const {
    if (pockets < 2) {
        throw std::invalid_argument(fmt::format("wheel needs at least 2 pockets, got {}", pockets));
    }
    if (payout < 1) {
        throw std::invalid_argument(fmt::format("payout must be at least 1, got {}", payout));
    }
}

std::string WheelSpec::label(int pocket) const {
    if (pockets == 38 && pocket == 37) return "00";
    return std::to_string(pocket);
}

std::optional<int> WheelSpec::parse_pocket(std::string_view text) const {
    if (pockets == 38 && text == "00") return 37;
    int value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) return std::nullopt;
    // Only the canonical spelling: "00" and "07" are not pockets of a European table.
    if (text != std::to_string(value)) return std::nullopt;
    // 37 is spelled "00" on an American table.
    if (pockets == 38 && value == 37) return std::nullopt;
    if (!contains(value)) return std::nullopt;
    return value;
}

std::string_view to_string(BiasKind kind) noexcept {
    switch (kind) {
        case BiasKind::Uniform: return "uniform";
        case BiasKind::GaussianTail: return "gaussian";
        case BiasKind::Linear: return "linear";
    }
    return "unknown";
}

std::optional<BiasKind> parse_bias_kind(std::string_view name) noexcept {
    if (name == "uniform") return BiasKind::Uniform;
    if (name == "gaussian" || name == "gaussian-tail") return BiasKind::GaussianTail;
    if (name == "linear") return BiasKind::Linear;
    return std::nullopt;
}

namespace {

std::vector<double> build_table(BiasKind kind, double parameter, const WheelSpec& wheel) {
    const int w = wheel.pockets;
    const double inv_w = 1.0 / w;
    const double c = wheel.center();
    std::vector<double> p(static_cast<std::size_t>(w));

    // Lower half (k <= c) in closed form.
    for (int k = 0; k <= c; ++k) {
        const double offset = k - c;
        switch (kind) {
            case BiasKind::Uniform:
                p[k] = inv_w;
                break;
            case BiasKind::GaussianTail:
                p[k] = inv_w * std::exp(-parameter * parameter * offset * offset / 2.0);
                break;
            case BiasKind::Linear:
                p[k] = inv_w * (1.0 + parameter * offset / c);
                break;
        }
    }
    // Upper half mirrors the lower one so that P(c-m) + P(c+m) = 2/W.
    const double twice = 2.0 * inv_w;
    for (int k = w - 1; k > c; --k) {
        p[k] = twice - p[w - 1 - k];
    }
    return p;
}

}  // namespace

BiasModel::BiasModel(BiasKind kind, double parameter, WheelSpec wheel)
    : kind_(kind), parameter_(parameter), wheel_(wheel) {
    wheel_.validate();
    table_ = build_table(kind_, parameter_, wheel_);
}

BiasModel BiasModel::uniform(WheelSpec wheel) { return BiasModel(BiasKind::Uniform, 0.0, wheel); }

BiasModel BiasModel::gaussian_tail(double delta, WheelSpec wheel) {
    if (!std::isfinite(delta) || delta < 0.0) {
        throw std::invalid_argument(fmt::format("delta must be finite and >= 0, got {}", delta));
    }
    return BiasModel(BiasKind::GaussianTail, delta, wheel);
}

BiasModel BiasModel::linear(double beta, WheelSpec wheel) {
    if (!(beta >= 0.0 && beta < 1.0)) {
        throw std::invalid_argument(fmt::format("beta must lie in [0, 1), got {}", beta));
    }
    return BiasModel(BiasKind::Linear, beta, wheel);
}

BiasModel BiasModel::make(BiasKind kind, double parameter, WheelSpec wheel) {
    switch (kind) {
        case BiasKind::Uniform: return uniform(wheel);
        case BiasKind::GaussianTail: return gaussian_tail(parameter, wheel);
        case BiasKind::Linear: return linear(parameter, wheel);
    }
    throw std::invalid_argument("unknown bias kind");
}

double BiasModel::probability(int k) const {
    if (!wheel_.contains(k)) {
        throw std::out_of_range(
            fmt::format("pocket index {} outside [0, {})", k, wheel_.pockets));
    }
    return table_[static_cast<std::size_t>(k)];
}

SpreadRatio BiasModel::spread_ratio() const noexcept {
    const double lowest = table_.front();
    const double highest = table_.back();
    if (lowest == 0.0) {
        return {std::numeric_limits<double>::infinity(), SpreadRatio::Kind::Infinite};
    }
    const double ratio = highest / lowest;
    if (std::isinf(ratio)) return {ratio, SpreadRatio::Kind::Overflow};
    return {ratio, SpreadRatio::Kind::Finite};
}

PocketSampler::PocketSampler(std::span<const double> probabilities) {
    if (probabilities.empty()) throw std::invalid_argument("empty probability table");
    cdf_.reserve(probabilities.size());
    double running = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0)) throw std::invalid_argument("negative probability");
        running += p;
        cdf_.push_back(running);
    }
    // Absorb rounding so that every u in [0, 1) lands in the table. Trailing
    // zero-mass pockets keep their (now equal) cumulative value.
    const double total = cdf_.back();
    for (auto it = cdf_.rbegin(); it != cdf_.rend() && *it == total; ++it) *it = 1.0;
}

int PocketSampler::pocket_for(double u) const noexcept {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return size() - 1;
    return static_cast<int>(it - cdf_.begin());
}

void write_distribution_csv(std::ostream& out, const BiasModel& model) {
    out << "k,probability\n";
    const auto p = model.probabilities();
    for (std::size_t k = 0; k < p.size(); ++k) {
        out << fmt::format("{},{:.17g}\n", k, p[k]);
    }
}

}  // namespace bunching
