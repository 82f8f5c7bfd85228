#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "autochord/metrics.hpp"

using namespace autochord;

namespace {

/// Literal partial sum of the retry series, the oracle for the closed form.
double elt_series(double t_lookup, double t_error, double p, long terms) {
    double sum = 0.0;
    double p_i = 1.0;
    for (long i = 1; i <= terms; ++i) {
        p_i *= p;
        if (p_i == 0.0) break;
        sum += static_cast<double>(i) * t_error * p_i;
    }
    return t_lookup + sum;
}

}  // namespace

TEST_CASE("expected lookup time: boundary values", "[metrics]") {
    CHECK(expected_lookup_time(0.1, 5.0, 0.0) == 0.1);
    CHECK(expected_lookup_time(0.1, 0.05, 0.5) == Catch::Approx(0.2));
    CHECK(std::isinf(expected_lookup_time(0.1, 0.05, 1.0)));
    CHECK_THROWS_AS(expected_lookup_time(0.1, 0.05, -0.01),
                    std::invalid_argument);
    CHECK_THROWS_AS(expected_lookup_time(0.1, 0.05, 1.01),
                    std::invalid_argument);
    CHECK_THROWS_AS(expected_lookup_time(-0.1, 0.05, 0.5),
                    std::invalid_argument);
}

TEST_CASE("closed form matches the literal series", "[metrics]") {
    for (double p : {0.0, 0.1, 0.5, 0.9}) {
        const double closed = expected_lookup_time(0.1, 0.05, p);
        const double series = elt_series(0.1, 0.05, p, 1000000);
        const double rel = std::abs(closed - series) /
                           std::max(1e-300, std::abs(series));
        CHECK(rel < 1e-9);
    }
}

TEST_CASE("expected lookup time is monotone in each argument", "[metrics]") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> time(0.0, 2.0);
    std::uniform_real_distribution<double> prob(0.0, 0.99);
    for (int i = 0; i < 5000; ++i) {
        const double tl = time(gen), te = time(gen), p = prob(gen);
        const double base = expected_lookup_time(tl, te, p);
        CHECK(expected_lookup_time(tl + 0.1, te, p) >= base);
        CHECK(expected_lookup_time(tl, te + 0.1, p) >= base);
        CHECK(expected_lookup_time(tl, te, std::min(0.999, p + 0.01)) >=
              base - 1e-12);
    }
}

TEST_CASE("window metrics on a tiny hand-built log", "[metrics]") {
    // 3 successes of 0.1 s and 1 failure of 0.05 s in window 0.
    std::vector<LookupObservation> lookups = {
        {10.0, 10.1, true}, {20.0, 20.1, true}, {30.0, 30.1, true},
        {40.0, 40.05, false},
        // Window 1: nothing.
        // Window 2: successes only.
        {650.0, 650.2, true},
    };
    std::vector<TrafficSample> traffic = {
        {NodeId{1}, 5.0, 100}, {NodeId{2}, 310.0, 50}, {NodeId{1}, 620.0, 40}};
    const auto w = window_metrics(lookups, traffic, 900.0, 2, 300.0);
    REQUIRE(w.size() == 3);

    REQUIRE(w[0].elt);
    CHECK(*w[0].elt ==
          Catch::Approx(0.1 + 0.05 * (0.25 / 0.5625)).epsilon(1e-9));
    CHECK(w[0].nu == Catch::Approx(100.0 / (300.0 * 2)));

    CHECK_FALSE(w[1].elt);  // no lookups at all
    CHECK(w[1].nu > 0.0);

    REQUIRE(w[2].elt);
    CHECK(*w[2].elt == Catch::Approx(0.2));  // p = 0: mean success duration
}

TEST_CASE("nu is additive across windows", "[metrics]") {
    std::mt19937_64 gen(5);
    std::vector<TrafficSample> traffic;
    double total = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double t = static_cast<double>(gen() % 9000) / 10.0;
        const std::uint32_t b = 20 + gen() % 200;
        traffic.push_back({NodeId{1}, t, b});
        total += b;
    }
    const auto w = window_metrics({}, traffic, 900.0, 4, 300.0);
    double sum = 0.0;
    for (const auto& x : w) sum += x.nu * 300.0 * 4;
    CHECK(sum == Catch::Approx(total));
}

TEST_CASE("single-value metrics agree with a single window", "[metrics]") {
    std::vector<LookupObservation> lookups = {{1.0, 1.2, true},
                                              {2.0, 2.1, false},
                                              {3.0, 3.4, true}};
    std::vector<TrafficSample> traffic = {{NodeId{1}, 0.5, 300},
                                          {NodeId{2}, 99.0, 300}};
    const auto w = window_metrics(lookups, traffic, 100.0, 4, 100.0);
    const auto s = single_value_metrics(lookups, traffic, 100.0, 4);
    REQUIRE(w.size() == 1);
    REQUIRE(w[0].elt);
    REQUIRE(s.elt);
    CHECK(*w[0].elt == Catch::Approx(*s.elt));
    CHECK(w[0].nu == Catch::Approx(s.nu));
}

TEST_CASE("single-value metrics are scale invariant under duplication",
          "[metrics]") {
    std::vector<LookupObservation> half = {{1.0, 1.2, true},
                                           {2.0, 2.15, false},
                                           {3.0, 3.4, true}};
    std::vector<TrafficSample> thalf = {{NodeId{1}, 0.5, 300}};
    auto both = half;
    auto tboth = thalf;
    for (const auto& l : half)
        both.push_back({l.start + 100.0, l.end + 100.0, l.success});
    for (const auto& t : thalf)
        tboth.push_back({t.sender, t.time + 100.0, t.bytes});

    const auto s1 = single_value_metrics(half, thalf, 100.0, 4);
    const auto s2 = single_value_metrics(both, tboth, 200.0, 4);
    REQUIRE(s1.elt);
    REQUIRE(s2.elt);
    CHECK(*s1.elt == Catch::Approx(*s2.elt));
    CHECK(s1.nu == Catch::Approx(s2.nu));
}

TEST_CASE("elt is absent without successes", "[metrics]") {
    std::vector<LookupObservation> lookups = {{1.0, 3.0, false}};
    const auto s = single_value_metrics(lookups, {}, 10.0, 4);
    CHECK_FALSE(s.elt);
    CHECK(s.nu == 0.0);
}

TEST_CASE("normalize", "[metrics]") {
    CHECK(*normalize(1.0, 1.0) == 1.0);
    CHECK(*normalize(0.7, 1.0) == Catch::Approx(0.7));
    CHECK_FALSE(normalize(std::nullopt, 1.0));
    CHECK_FALSE(normalize(1.0, std::nullopt));
    CHECK_FALSE(normalize(1.0, 0.0));
}

TEST_CASE("normalize_windows skips windows without both values", "[metrics]") {
    std::vector<WindowMetrics> managed = {
        {0, 2.0, 10.0}, {1, std::nullopt, 10.0}, {2, 3.0, 10.0}};
    std::vector<WindowMetrics> unmanaged = {
        {0, 4.0, 20.0}, {1, 5.0, 20.0}, {2, std::nullopt, 20.0}};
    const auto r = normalize_windows(managed, unmanaged, true);
    REQUIRE(r);
    CHECK(*r == Catch::Approx(0.5));  // only window 0 qualifies
    const auto rn = normalize_windows(managed, unmanaged, false);
    REQUIRE(rn);
    CHECK(*rn == Catch::Approx(0.5));  // nu defined everywhere
}

TEST_CASE("nsd oracle values", "[metrics]") {
    const double ones[] = {1.0, 1.0, 1.0};
    CHECK(*nsd(ones) == 0.0);
    const double spread[] = {2.0, 4.0, 6.0};
    CHECK(*nsd(spread) == Catch::Approx(0.408248290463863).epsilon(1e-12));
    const double near[] = {5.0, 5.0, 5.0001};
    CHECK(*nsd(near) == Catch::Approx(9.42802756228158e-06).epsilon(1e-6));
}

TEST_CASE("nsd is scale invariant and guards its inputs", "[metrics]") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> val(0.1, 100.0);
    for (int i = 0; i < 1000; ++i) {
        double v[3] = {val(gen), val(gen), val(gen)};
        double s[3] = {7.0 * v[0], 7.0 * v[1], 7.0 * v[2]};
        CHECK(*nsd(s) == Catch::Approx(*nsd(v)).epsilon(1e-9));
    }
    const double zero_mean[] = {-1.0, 0.0, 1.0};
    CHECK_FALSE(nsd(zero_mean));
    const double two[] = {1.0, 2.0};
    CHECK_THROWS_AS(nsd(std::span<const double>(two, 2)),
                    std::invalid_argument);
}
