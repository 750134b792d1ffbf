#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "bunching/capital.hpp"
#include "bunching/errors.hpp"
#include "oracles.hpp"

using namespace bunching;

TEST_CASE("average distinct count") {
    CHECK(avg_distinct(BiasModel::gaussian_tail(0.2), 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(avg_distinct(BiasModel::linear(0.7), 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(avg_distinct(BiasModel::uniform(), 10) ==
          doctest::Approx(8.867424629525676228683074).epsilon(1e-13));

    // Brute force over all ordered pairs.
    for (const auto& model : {BiasModel::uniform(), BiasModel::gaussian_tail(0.1)}) {
        const auto p = model.probabilities();
        double expected = 0.0;
        for (std::size_t a = 0; a < p.size(); ++a) {
            for (std::size_t b = 0; b < p.size(); ++b) expected += p[a] * p[b] * (a == b ? 1 : 2);
        }
        CHECK(avg_distinct(model, 2) == doctest::Approx(expected).epsilon(1e-13));
    }
    CHECK(avg_distinct(BiasModel::uniform(), 2) == doctest::Approx(2.0 - 1.0 / 37).epsilon(1e-14));
}

TEST_CASE("average distinct count against sampled windows") {
    const auto model = BiasModel::uniform();
    PocketSampler sampler(model);
    RandomStream rng(5, 0);
    const int windows = 1'000'000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int w = 0; w < windows; ++w) {
        std::uint64_t mask = 0;
        for (int i = 0; i < 10; ++i) mask |= std::uint64_t{1} << sampler(rng);
        const double j = __builtin_popcountll(mask);
        sum += j;
        sum_sq += j * j;
    }
    const double mean = sum / windows;
    const double se = std::sqrt((sum_sq / windows - mean * mean) / windows);
    CHECK(std::abs(mean - avg_distinct(model, 10)) < 4.0 * se);
}

TEST_CASE("fluctuation frequency") {
    const auto eu = WheelSpec::european();
    CHECK(fluctuation_frequency(10, 0.1, 14, eu) ==
          doctest::Approx(0.007158181972415745814427703).epsilon(1e-13));
    CHECK(fluctuation_frequency(10, 0.1, 14, eu) ==
          doctest::Approx(std::exp(14 * std::log(26.0 / 37))).epsilon(1e-15));
    // Covering the whole wheel drives the frequency to zero.
    double previous = 1.0;
    for (double j : {20.0, 30.0, 33.0, 33.6, 33.636}) {
        const double f = fluctuation_frequency(j, 0.1, 5, eu);
        CHECK(f < previous);
        previous = f;
    }
    CHECK(previous < 1e-20);
    CHECK(fluctuation_frequency(5, 0.0, 1, WheelSpec::american()) ==
          doctest::Approx(33.0 / 38).epsilon(1e-15));

    auto code_of = [](auto&& call) {
        try {
            call();
        } catch (const DomainError& e) {
            return e.code();
        }
        return std::string("none");
    };
    CHECK(code_of([&] { fluctuation_frequency(10, 0.1, 0, eu); }) == "invalid_inputs");
    CHECK(code_of([&] { fluctuation_frequency(0, 0.1, 3, eu); }) == "invalid_inputs");
    CHECK(code_of([&] { fluctuation_frequency(35, 0.1, 3, eu); }) == "cannot_lose");
}

TEST_CASE("capital for jbar = 10, omega = 0.1") {
    const auto s = solve_capital(10, 0.1);
    CHECK(s.residual < 1e-9);
    CHECK(s.roots_found == 2);
    const double lhs = 1.0 / s.capital;
    const double rhs = std::pow(26.0 / 37.0, s.capital / 10.0);
    CHECK(std::abs(lhs - rhs) < 1e-9);

    const auto roots = oracle::capital_roots(10, 0.1, 37);
    REQUIRE(roots.size() == 2);
    CHECK(s.capital == doctest::Approx(roots[1]).epsilon(1e-9));
    REQUIRE(s.lower_root.has_value());
    CHECK(*s.lower_root == doctest::Approx(roots[0]).epsilon(1e-9));

    CHECK(s.capital == doctest::Approx(s.mean_spins * s.j_avg * s.omega).epsilon(1e-12));
    CHECK(s.capital == doctest::Approx(s.losing_streak * s.j_avg).epsilon(1e-12));
    CHECK(s.mean_spins * s.fluctuation_frequency == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("capital solver errors") {
    CHECK_THROWS_AS(solve_capital(10, 0.0), NoCriticalCapital);
    CHECK_THROWS_AS(solve_capital(10, -0.02), NoCriticalCapital);
    // Omega |ln base| > 1/e: the balance curve never reaches the loss curve.
    CHECK_THROWS_AS(solve_capital(25, 0.3), NoCriticalCapital);
    CHECK(oracle::capital_roots(25, 0.3, 37).empty());
    CHECK_THROWS_AS(solve_capital(10, 0.1, WheelSpec::european(), CapitalOptions{50}),
                    RootBeyondRange);
    CHECK_THROWS_AS(solve_capital(36, 0.1), DomainError);
}

TEST_CASE("capital trends on a grid") {
    std::vector<double> omegas;
    std::vector<double> jbars;
    for (int i = 1; i <= 10; ++i) {
        omegas.push_back(0.03 * i);
        jbars.push_back(2.0 * i);
    }
    const auto cells = capital_grid(omegas, jbars);
    REQUIRE(cells.size() == 100);
    auto at = [&](std::size_t o, std::size_t j) -> const CapitalSolution& {
        return *cells[o * jbars.size() + j].solution;
    };
    for (const auto& c : cells) REQUIRE(c.solution.has_value());
    for (std::size_t j = 0; j < jbars.size(); ++j) {
        for (std::size_t o = 1; o < omegas.size(); ++o) {
            CHECK(at(o, j).capital < at(o - 1, j).capital);
            CHECK(at(o, j).mean_spins < at(o - 1, j).mean_spins);
            CHECK(at(o, j).losing_streak < at(o - 1, j).losing_streak);
        }
    }
    for (std::size_t o = 0; o < omegas.size(); ++o) {
        for (std::size_t j = 1; j < jbars.size(); ++j) {
            CHECK(at(o, j).capital < at(o, j - 1).capital);
        }
    }
}

TEST_CASE("capital csv records failed cells") {
    const std::vector<double> omegas{0.1, -0.1};
    const std::vector<double> jbars{10};
    const auto cells = capital_grid(omegas, jbars);
    REQUIRE(cells.size() == 2);
    CHECK(cells[1].error_code == "no_critical_capital");
    std::ostringstream out;
    write_capital_csv(out, cells);
    const std::string text = out.str();
    CHECK(text.rfind("omega,j_avg,C,M,S,f,residual,roots_found\n0.10000000000000001,10,", 0) == 0);
    CHECK(text.find("\n-0.10000000000000001,10,,,,,,0\n") != std::string::npos);
}
