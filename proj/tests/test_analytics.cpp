#include <doctest.h>

#include <cmath>
#include <limits>
#include <stop_token>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bunching/analytics.hpp"
#include "bunching/capital.hpp"
#include "bunching/errors.hpp"

using namespace bunching;

namespace {

// Omega at N = 1: bet the last number only.
double single_number_omega(const BiasModel& model) {
    double sum_sq = 0.0;
    for (double p : model.probabilities()) sum_sq += p * p;
    return model.wheel().payout * sum_sq - 1.0;
}

bool within_sigmas(double value, double expected, double se, double sigmas = 4.0) {
    return std::abs(value - expected) <= sigmas * se;
}

}  // namespace

TEST_CASE("ideal wheel has return -1/37 for every window") {
    for (int n = 1; n <= 4; ++n) {
        const auto e = exact_omega(BiasModel::uniform(), n);
        CAPTURE(n);
        CHECK(std::abs(e.omega - (-1.0 / 37.0)) < 1e-12);
        CHECK(e.std_error == 0.0);
        CHECK(e.trials == sequence_count(37, n));
        CHECK(e.estimator == Estimator::Exact);
    }
    const auto us = exact_omega(BiasModel::uniform(WheelSpec::american()), 3);
    CHECK(std::abs(us.omega - (36.0 / 38.0 - 1.0)) < 1e-12);
}

TEST_CASE("single-number window and the two-number identity") {
    for (const auto& model : {BiasModel::gaussian_tail(0.1), BiasModel::gaussian_tail(0.3),
                              BiasModel::linear(0.4)}) {
        const double one = exact_omega(model, 1).omega;
        CHECK(one == doctest::Approx(single_number_omega(model)).epsilon(1e-13));
        // Pairs reduce to sum P^2 as well.
        CHECK(exact_omega(model, 2).omega == doctest::Approx(one).epsilon(1e-12));
    }
    CHECK(exact_omega(BiasModel::gaussian_tail(0.1), 1).omega ==
          doctest::Approx(0.1742).epsilon(1e-3));
    CHECK(exact_omega(BiasModel::gaussian_tail(0.1), 3).omega ==
          doctest::Approx(0.1721).epsilon(1e-3));
}

TEST_CASE("bunching probability equals the expected covered mass") {
    for (const auto& model : {BiasModel::uniform(), BiasModel::gaussian_tail(0.1),
                              BiasModel::linear(0.6)}) {
        for (int n : {1, 2, 3}) {
            double covered = 0.0;
            for (double p : model.probabilities()) covered += p * -std::expm1(n * std::log1p(-p));
            const auto e = exact_omega(model, n);
            REQUIRE(e.bunching.has_value());
            CHECK(*e.bunching == doctest::Approx(covered).epsilon(1e-12));
        }
    }
    CHECK(*exact_omega(BiasModel::uniform(), 3).bunching ==
          doctest::Approx(avg_distinct(BiasModel::uniform(), 3) / 37.0).epsilon(1e-12));
}

TEST_CASE("a strongly biased wheel always pays") {
    const auto e = exact_omega(BiasModel::gaussian_tail(3.0), 3);
    CHECK(e.omega > 0.0);
}

TEST_CASE("exact enumeration respects its budget") {
    CHECK_THROWS_AS(exact_omega(BiasModel::uniform(), 6), BudgetExceeded);
    CHECK_THROWS_AS(exact_omega(BiasModel::uniform(), 3, ExactOptions{1000}), BudgetExceeded);
    CHECK(sequence_count(37, 64) == std::numeric_limits<std::uint64_t>::max());
    CHECK_THROWS_AS(exact_omega(BiasModel::uniform(), 0), std::invalid_argument);
    CHECK_THROWS_AS(exact_omega(BiasModel::uniform(), 65), std::invalid_argument);
}

TEST_CASE("independent trials agree with enumeration") {
    for (double delta : {0.0, 0.1}) {
        const auto model = BiasModel::gaussian_tail(delta);
        const auto exact = exact_omega(model, 3);
        const auto mc = mc_omega(model, 3, 2'000'000, 7);
        CAPTURE(delta);
        CHECK(mc.trials == 2'000'000);
        CHECK(mc.estimator == Estimator::IndependentTrials);
        CHECK(within_sigmas(mc.omega, exact.omega, mc.std_error));
        CHECK(within_sigmas(*mc.bunching, *exact.bunching,
                            std::sqrt(*exact.bunching * (1 - *exact.bunching) / 2e6)));
    }
}

TEST_CASE("independent trials do not depend on the worker count") {
    const auto model = BiasModel::linear(0.3);
    McOptions opts;
    opts.chunk_trials = 5000;
    opts.workers = 1;
    const auto one = mc_omega(model, 7, 123'457, 99, opts);
    for (unsigned workers : {2u, 3u, 8u}) {
        opts.workers = workers;
        const auto many = mc_omega(model, 7, 123'457, 99, opts);
        CHECK(many.omega == one.omega);
        CHECK(many.std_error == one.std_error);
        CHECK(*many.bunching == *one.bunching);
    }
    CHECK(mc_omega(model, 7, 123'457, 100, opts).omega != one.omega);
}

TEST_CASE("independent trials reject bad requests") {
    CHECK_THROWS_AS(mc_omega(BiasModel::uniform(), 3, 0, 1), std::invalid_argument);
    std::stop_source source;
    source.request_stop();
    McOptions opts;
    opts.stop = source.get_token();
    CHECK_THROWS_AS(mc_omega(BiasModel::uniform(), 3, 1000, 1, opts), Cancelled);
}

TEST_CASE("sliding window estimates stake-weighted return") {
    SUBCASE("ideal wheel") {
        const auto e = mc_omega_session(BiasModel::uniform(), 12, 2'000'000, 3);
        CHECK(e.estimator == Estimator::SlidingWindow);
        CHECK(e.trials == 2'000'000 - 12);
        CHECK(within_sigmas(e.omega, -1.0 / 37.0, e.std_error));
    }
    SUBCASE("biased wheel") {
        // Ratio of expectations: payout E[hit] / E[j] - 1.
        const auto model = BiasModel::gaussian_tail(0.1);
        const auto exact = exact_omega(model, 3);
        const double expected = 36.0 * *exact.bunching / avg_distinct(model, 3) - 1.0;
        const auto e = mc_omega_session(model, 3, 2'000'000, 4);
        CHECK(within_sigmas(e.omega, expected, e.std_error));
    }
    SUBCASE("batch error matches the spread over seeds") {
        const auto model = BiasModel::gaussian_tail(0.05);
        const int runs = 30;
        double sum = 0.0;
        double sum_sq = 0.0;
        double se = 0.0;
        for (int s = 0; s < runs; ++s) {
            const auto e = mc_omega_session(model, 10, 200'000, 1000 + s);
            sum += e.omega;
            sum_sq += e.omega * e.omega;
            se += e.std_error / runs;
        }
        const double mean = sum / runs;
        const double sd = std::sqrt((sum_sq - runs * mean * mean) / (runs - 1));
        CHECK(sd / se > 0.6);
        CHECK(sd / se < 1.6);
    }
    CHECK_THROWS_AS(mc_omega_session(BiasModel::uniform(), 12, 12, 1), std::invalid_argument);
}

TEST_CASE("grid cells share the master seed and serialize deterministically") {
    const std::vector<double> deltas{0.0, 0.1};
    const std::vector<int> windows{2, 5};
    McOptions opts;
    opts.workers = 2;
    const auto cells = omega_grid(BiasKind::GaussianTail, deltas, windows, 20'000, 5,
                                  WheelSpec::european(), opts);
    REQUIRE(cells.size() == 4);
    CHECK(cells[1].parameter == 0.0);
    CHECK(cells[1].window == 5);
    CHECK(cells[2].parameter == 0.1);
    CHECK(cells[3].estimate.omega ==
          mc_omega(BiasModel::gaussian_tail(0.1), 5, 20'000, 5).omega);

    std::ostringstream a;
    std::ostringstream b;
    write_grid_csv(a, cells);
    opts.workers = 1;
    write_grid_csv(b, omega_grid(BiasKind::GaussianTail, deltas, windows, 20'000, 5,
                                 WheelSpec::european(), opts));
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("family,param,xi,N,omega,std_error,trials\ngaussian,0,1,2,", 0) == 0);

    std::ostringstream inf;
    const std::vector<double> huge{3.0};
    const std::vector<int> one{1};
    write_grid_csv(inf, omega_grid(BiasKind::GaussianTail, huge, one, 10, 1));
    CHECK(inf.str().find(",inf,") != std::string::npos);
}

TEST_CASE("critical spread by enumeration") {
    const auto gauss = critical_spread(BiasKind::GaussianTail, 3);
    CHECK(gauss.estimator == Estimator::Exact);
    CHECK(gauss.trials_per_eval == 0);
    CHECK(gauss.parameter >= 0.03);
    CHECK(gauss.parameter <= 0.07);
    CHECK(gauss.bracket_width() <= 1e-6);
    CHECK(gauss.omega_lo < 0.0);
    CHECK(gauss.omega_hi > 0.0);
    CHECK(gauss.xi == doctest::Approx(BiasModel::gaussian_tail(gauss.parameter).spread_ratio().value));
    const double at_root = exact_omega(BiasModel::gaussian_tail(gauss.parameter), 3).omega;
    CHECK(std::abs(at_root) < 1e-6);

    const auto lin = critical_spread(BiasKind::Linear, 3);
    CHECK(lin.xi >= 1.6);
    CHECK(lin.xi <= 2.3);
}

TEST_CASE("critical spread by sampling resolves or stops at the noise floor") {
    CriticalOptions opts;
    opts.prefer_exact = false;
    opts.trials_per_eval = 200'000;
    opts.max_escalation = 2;
    const auto cp = critical_spread(BiasKind::GaussianTail, 3, opts);
    CHECK(cp.estimator == Estimator::IndependentTrials);
    CHECK(cp.trials_per_eval == 200'000);
    CHECK(cp.parameter >= cp.bracket_lo);
    CHECK(cp.parameter <= cp.bracket_hi);
    CHECK(cp.parameter == doctest::Approx(0.05).epsilon(0.3));
}

TEST_CASE("no criticality") {
    CHECK_THROWS_AS(critical_spread(BiasKind::Uniform, 3), NoCriticality);
    CriticalOptions opts;
    opts.parameter_max = 0.01;
    CHECK_THROWS_AS(critical_spread(BiasKind::GaussianTail, 3, opts), NoCriticality);
    opts.parameter_max = 0.0;
    opts.trials_per_eval = 0;
    opts.prefer_exact = false;
    CHECK_THROWS_AS(critical_spread(BiasKind::GaussianTail, 3, opts), std::invalid_argument);
}
