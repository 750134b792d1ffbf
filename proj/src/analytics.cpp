#include "bunching/analytics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "bunching/errors.hpp"
#include "bunching/random.hpp"

namespace bunching {

void validate_window(int window) {
    if (window < 1 || window > StrategyConfig::kMaxWindow) {
        throw std::invalid_argument(fmt::format("window N must lie in [1, {}], got {}",
                                                StrategyConfig::kMaxWindow, window));
    }
}

void StrategyConfig::validate() const {
    validate_window(window);
    wheel.validate();
    if (bet_unit.minor <= 0) throw std::invalid_argument("bet unit must be positive");
}

std::string_view to_string(Estimator e) noexcept {
    switch (e) {
        case Estimator::Exact: return "exact";
        case Estimator::IndependentTrials: return "independent";
        case Estimator::SlidingWindow: return "sliding";
    }
    return "unknown";
}

std::uint64_t sequence_count(int pockets, int window) noexcept {
    std::uint64_t count = 1;
    const auto w = static_cast<std::uint64_t>(pockets);
    for (int i = 0; i < window; ++i) {
        if (count > std::numeric_limits<std::uint64_t>::max() / w) {
            return std::numeric_limits<std::uint64_t>::max();
        }
        count *= w;
    }
    return count;
}

// ---------------------------------------------------------------------------
// Exact enumeration

namespace {

struct PartialSums {
    double bunching = 0.0;
    double weighted = 0.0;  // sum_n Xi_n / j_n

    PartialSums& operator+=(const PartialSums& o) noexcept {
        bunching += o.bunching;
        weighted += o.weighted;
        return *this;
    }
};

// Depth-first walk over windows in lexicographic order. Multiplicities make
// the distinct set O(1) to update and undo per digit. Each node returns the
// sum over its subtree, so accumulation is pairwise along the tree.
class Enumerator {
public:
    Enumerator(std::span<const double> p, int window)
        : p_(p), window_(window), multiplicity_(p.size(), 0), inv_j_(window + 2, 0.0) {
        for (int j = 1; j <= window + 1; ++j) inv_j_[j] = 1.0 / j;
    }

    PartialSums run() { return descend(0, 1.0, 0.0, 0); }

private:
    PartialSums descend(int depth, double prob, double distinct_sum, int distinct) {
        PartialSums acc;
        const int w = static_cast<int>(p_.size());
        if (depth == window_ - 1) {
            for (int k = 0; k < w; ++k) {
                const double pk = p_[k];
                if (pk == 0.0) continue;
                const bool fresh = multiplicity_[k] == 0;
                const double s = fresh ? distinct_sum + pk : distinct_sum;
                const int j = fresh ? distinct + 1 : distinct;
                const double xi_n = prob * pk * s;
                acc.bunching += xi_n;
                acc.weighted += xi_n * inv_j_[j];
            }
            return acc;
        }
        for (int k = 0; k < w; ++k) {
            const double pk = p_[k];
            if (pk == 0.0) continue;
            const bool fresh = multiplicity_[k]++ == 0;
            acc += descend(depth + 1, prob * pk, fresh ? distinct_sum + pk : distinct_sum,
                           fresh ? distinct + 1 : distinct);
            --multiplicity_[k];
        }
        return acc;
    }

    std::span<const double> p_;
    int window_;
    std::vector<int> multiplicity_;
    std::vector<double> inv_j_;
};

}  // namespace

OmegaEstimate exact_omega(const BiasModel& model, int window, const ExactOptions& options) {
    validate_window(window);
    const int w = model.wheel().pockets;
    const auto count = sequence_count(w, window);
    if (count > options.budget) {
        throw BudgetExceeded(fmt::format(
            "exact enumeration of {}^{} sequences exceeds the budget of {}; use Monte-Carlo", w,
            window, options.budget));
    }
    const PartialSums sums = Enumerator(model.probabilities(), window).run();
    OmegaEstimate out;
    out.omega = model.wheel().payout * sums.weighted - 1.0;
    out.std_error = 0.0;
    out.trials = count;
    out.estimator = Estimator::Exact;
    out.bunching = sums.bunching;
    return out;
}

// ---------------------------------------------------------------------------
// Independent-trial Monte-Carlo

namespace {

// Welford accumulator with Chan's pairwise merge.
struct TrialStats {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    std::uint64_t hits = 0;
    double profit = 0.0;

    void add(double r) noexcept {
        ++n;
        const double d = r - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (r - mean);
    }

    void merge(const TrialStats& o) noexcept {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n);
        const double nb = static_cast<double>(o.n);
        const double total = na + nb;
        const double d = o.mean - mean;
        mean += d * nb / total;
        m2 += o.m2 + d * d * na * nb / total;
        n += o.n;
        hits += o.hits;
        profit += o.profit;
    }
};

TrialStats run_chunk(const PocketSampler& sampler, int window, int payout, std::uint64_t seed,
                     std::uint64_t chunk, std::uint64_t trials) {
    RandomStream rng(seed, chunk);
    std::vector<std::uint64_t> seen(static_cast<std::size_t>(sampler.size()), 0);
    std::uint64_t stamp = 0;
    TrialStats stats;
    for (std::uint64_t t = 0; t < trials; ++t) {
        ++stamp;
        int distinct = 0;
        for (int i = 0; i < window; ++i) {
            const int k = sampler(rng);
            if (seen[k] != stamp) {
                seen[k] = stamp;
                ++distinct;
            }
        }
        const bool hit = seen[sampler(rng)] == stamp;
        const double collected = hit ? payout : 0.0;
        stats.add(collected / distinct - 1.0);
        stats.hits += hit ? 1 : 0;
        stats.profit += collected - distinct;
    }
    return stats;
}

unsigned resolve_workers(unsigned requested, std::uint64_t chunks) {
    unsigned workers = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (chunks < workers) workers = static_cast<unsigned>(std::max<std::uint64_t>(chunks, 1));
    return workers;
}

}  // namespace

OmegaEstimate mc_omega(const BiasModel& model, int window, std::uint64_t trials,
                       std::uint64_t seed, const McOptions& options) {
    validate_window(window);
    if (trials == 0) throw std::invalid_argument("trials must be at least 1");
    if (options.chunk_trials == 0) throw std::invalid_argument("chunk size must be at least 1");

    const PocketSampler sampler(model);
    const int payout = model.wheel().payout;
    const std::uint64_t chunk_size = options.chunk_trials;
    const std::uint64_t chunks = (trials + chunk_size - 1) / chunk_size;
    std::vector<TrialStats> partial(chunks);

    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> cancelled{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        try {
            for (std::uint64_t c = next++; c < chunks; c = next++) {
                if (cancelled.load(std::memory_order_relaxed)) return;
                if (options.stop.stop_requested()) {
                    cancelled = true;
                    return;
                }
                const std::uint64_t count = std::min(chunk_size, trials - c * chunk_size);
                partial[c] = run_chunk(sampler, window, payout, seed, c, count);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            cancelled = true;
        }
    };

    const unsigned workers = resolve_workers(options.workers, chunks);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    if (cancelled) throw Cancelled();

    TrialStats total;
    for (const auto& p : partial) total.merge(p);

    OmegaEstimate out;
    out.omega = total.mean;
    out.std_error = total.n > 1
                        ? std::sqrt(total.m2 / static_cast<double>(total.n - 1)) /
                              std::sqrt(static_cast<double>(total.n))
                        : 0.0;
    out.trials = total.n;
    out.estimator = Estimator::IndependentTrials;
    out.bunching = static_cast<double>(total.hits) / static_cast<double>(total.n);
    out.profit_per_spin = total.profit / static_cast<double>(total.n);
    return out;
}

// ---------------------------------------------------------------------------
// Sliding-window Monte-Carlo

OmegaEstimate mc_omega_session(const BiasModel& model, int window, std::uint64_t spins,
                               std::uint64_t seed, std::stop_token stop) {
    validate_window(window);
    if (spins <= static_cast<std::uint64_t>(window)) {
        throw std::invalid_argument(
            fmt::format("spins ({}) must exceed the window ({})", spins, window));
    }
    const PocketSampler sampler(model);
    const std::int64_t payout = model.wheel().payout;
    RandomStream rng(seed, 0);

    std::vector<int> ring(static_cast<std::size_t>(window));
    std::vector<int> counts(static_cast<std::size_t>(model.wheel().pockets), 0);
    int distinct = 0;
    for (int i = 0; i < window; ++i) {
        const int k = sampler(rng);
        ring[i] = k;
        if (counts[k]++ == 0) ++distinct;
    }

    const std::uint64_t settled = spins - window;
    const std::uint64_t batches = std::min<std::uint64_t>(64, settled);
    std::vector<std::int64_t> batch_staked(batches, 0);
    std::vector<std::int64_t> batch_collected(batches, 0);
    std::int64_t staked = 0;
    std::int64_t collected = 0;
    std::uint64_t hits = 0;

    std::size_t head = 0;  // oldest entry in the ring
    for (std::uint64_t i = 0; i < settled; ++i) {
        if ((i & 0xFFFFF) == 0 && stop.stop_requested()) throw Cancelled();
        const int k = sampler(rng);
        const bool hit = counts[k] > 0;
        const std::uint64_t b = i * batches / settled;
        batch_staked[b] += distinct;
        staked += distinct;
        if (hit) {
            batch_collected[b] += payout;
            collected += payout;
            ++hits;
        }
        const int oldest = ring[head];
        if (--counts[oldest] == 0) --distinct;
        ring[head] = k;
        if (counts[k]++ == 0) ++distinct;
        head = (head + 1) % ring.size();
    }

    const double ratio = static_cast<double>(collected) / static_cast<double>(staked);
    double se = 0.0;
    if (batches > 1) {
        double ss = 0.0;
        for (std::uint64_t b = 0; b < batches; ++b) {
            const double d = static_cast<double>(batch_collected[b]) -
                             ratio * static_cast<double>(batch_staked[b]);
            ss += d * d;
        }
        const double bf = static_cast<double>(batches);
        se = std::sqrt(ss * bf / (bf - 1.0)) / static_cast<double>(staked);
    }

    OmegaEstimate out;
    out.omega = static_cast<double>(collected - staked) / static_cast<double>(staked);
    out.std_error = se;
    out.trials = settled;
    out.estimator = Estimator::SlidingWindow;
    out.bunching = static_cast<double>(hits) / static_cast<double>(settled);
    out.profit_per_spin = static_cast<double>(collected - staked) / static_cast<double>(settled);
    return out;
}

// ---------------------------------------------------------------------------
// Grids

std::vector<GridCell> omega_grid(BiasKind family, std::span<const double> params,
                                 std::span<const int> windows, std::uint64_t trials,
                                 std::uint64_t seed, WheelSpec wheel, const McOptions& options) {
    if (params.empty() || windows.empty()) {
        throw std::invalid_argument("grid needs at least one parameter and one window");
    }
    std::vector<GridCell> cells;
    cells.reserve(params.size() * windows.size());
    for (double param : params) {
        const BiasModel model = BiasModel::make(family, param, wheel);
        for (int n : windows) {
            GridCell cell;
            cell.family = family;
            cell.parameter = family == BiasKind::Uniform ? 0.0 : param;
            cell.xi = model.spread_ratio();
            cell.window = n;
            cell.estimate = mc_omega(model, n, trials, seed, options);
            cells.push_back(cell);
        }
    }
    return cells;
}

namespace {

std::string format_ratio(const SpreadRatio& xi) {
    if (xi.finite()) return fmt::format("{:.17g}", xi.value);
    return "inf";
}

}  // namespace

void write_grid_csv(std::ostream& out, std::span<const GridCell> cells) {
    out << "family,param,xi,N,omega,std_error,trials\n";
    for (const auto& c : cells) {
        out << fmt::format("{},{:.17g},{},{},{:.17g},{:.17g},{}\n", to_string(c.family),
                           c.parameter, format_ratio(c.xi), c.window, c.estimate.omega,
                           c.estimate.std_error, c.estimate.trials);
    }
}

// ---------------------------------------------------------------------------
// Critical spread

namespace {

enum class Sign { Negative, Positive, Unresolved };

Sign resolved_sign(const OmegaEstimate& e) {
    if (e.omega - 2.0 * e.std_error > 0.0) return Sign::Positive;
    if (e.omega + 2.0 * e.std_error < 0.0) return Sign::Negative;
    return Sign::Unresolved;
}

}  // namespace

CriticalPoint critical_spread(BiasKind family, int window, const CriticalOptions& options) {
    validate_window(window);
    options.wheel.validate();
    if (family == BiasKind::Uniform) {
        throw NoCriticality("wheel cannot reach criticality in range: the uniform law has no spread");
    }
    if (options.trials_per_eval == 0) throw std::invalid_argument("trials per evaluation must be >= 1");
    double pmax = options.parameter_max;
    if (pmax <= 0.0) pmax = family == BiasKind::GaussianTail ? 0.3 : 0.99;

    const bool exact = options.prefer_exact &&
                       sequence_count(options.wheel.pockets, window) <= options.exact.budget;

    CriticalPoint cp;
    cp.family = family;
    cp.window = window;
    cp.estimator = exact ? Estimator::Exact : Estimator::IndependentTrials;
    cp.trials_per_eval = exact ? 0 : options.trials_per_eval;

    auto evaluate = [&](double param, std::uint64_t trials) {
        ++cp.evaluations;
        const BiasModel model = BiasModel::make(family, param, options.wheel);
        if (exact) return exact_omega(model, window, options.exact);
        return mc_omega(model, window, trials, options.seed, options.mc);
    };
    // Escalates the trial count until the sign is resolved or the cap is hit.
    auto evaluate_resolved = [&](double param) {
        std::uint64_t factor = 1;
        OmegaEstimate e = evaluate(param, options.trials_per_eval);
        while (!exact && resolved_sign(e) == Sign::Unresolved &&
               factor * 2 <= options.max_escalation) {
            factor *= 2;
            e = evaluate(param, options.trials_per_eval * factor);
        }
        return e;
    };

    double lo = 0.0;
    double hi = pmax;
    OmegaEstimate at_lo = evaluate_resolved(lo);
    OmegaEstimate at_hi = evaluate_resolved(hi);
    if (resolved_sign(at_lo) != Sign::Negative || resolved_sign(at_hi) != Sign::Positive) {
        throw NoCriticality(fmt::format(
            "wheel cannot reach criticality in range: Omega({}) = {:.6g}, Omega({}) = {:.6g}", lo,
            at_lo.omega, hi, at_hi.omega));
    }

    double estimate = std::numeric_limits<double>::quiet_NaN();
    while (hi - lo > options.tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const OmegaEstimate at_mid = evaluate_resolved(mid);
        const Sign sign = resolved_sign(at_mid);
        if (sign == Sign::Unresolved) {
            // Noise floor reached: place the root by the bracket's secant slope
            // through the unresolved midpoint.
            const double slope = (at_hi.omega - at_lo.omega) / (hi - lo);
            estimate = std::clamp(mid - at_mid.omega / slope, lo, hi);
            break;
        }
        if (sign == Sign::Negative) {
            lo = mid;
            at_lo = at_mid;
        } else {
            hi = mid;
            at_hi = at_mid;
        }
    }
    if (std::isnan(estimate)) {
        estimate = lo + (hi - lo) * (-at_lo.omega) / (at_hi.omega - at_lo.omega);
    }

    cp.parameter = estimate;
    cp.bracket_lo = lo;
    cp.bracket_hi = hi;
    cp.omega_lo = at_lo.omega;
    cp.omega_hi = at_hi.omega;
    cp.xi = BiasModel::make(family, estimate, options.wheel).spread_ratio().value;
    return cp;
}

}  // namespace bunching
