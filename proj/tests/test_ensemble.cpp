#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "haelt/ensemble.hpp"
#include "haelt/rng.hpp"

using namespace haelt;
using ensemble::EnsembleState;

namespace {

EnsembleState three_member_state(int k = 24, double tau = 1.0) {
    return EnsembleState({"lstm-head", "transformer-head", "fused-head"}, k, tau);
}

}  // namespace

TEST_CASE("rolling loss is the mean of the recent window") {
    EnsembleState s({"a", "b"}, 3, 1.0);
    CHECK_THROWS_AS(s.rolling_loss(0), NumericError);  // no history yet

    s.record_step({0.7, 0.2});
    s.record_step({0.7, 0.4});
    s.record_step({0.7, 0.6});
    CHECK(s.rolling_loss(0) == doctest::Approx(0.7));
    CHECK(s.rolling_loss("b") == doctest::Approx(0.4));

    // window slides: oldest entry drops
    s.record_step({0.7, 0.8});
    CHECK(s.rolling_loss(1) == doctest::Approx((0.4 + 0.6 + 0.8) / 3.0));

    EnsembleState one({"a"}, 1, 1.0);
    one.record_step({0.9});
    one.record_step({0.3});
    CHECK(one.rolling_loss(0) == doctest::Approx(0.3));  // k=1 keeps the last loss only
}

TEST_CASE("equal losses give uniform weights at any temperature") {
    for (const double tau : {0.1, 1.0, 7.5}) {
        EnsembleState s = three_member_state(4, tau);
        s.record_step({0.5, 0.5, 0.5});
        s.record_step({0.9, 0.9, 0.9});
        const auto& w = s.update_weights();
        for (const double wi : w) CHECK(wi == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("two members with losses (0, ln 2) at tau 1 weigh 2/3 and 1/3") {
    EnsembleState s({"a", "b"}, 5, 1.0);
    s.record_step({0.0, std::log(2.0)});
    const auto& w = s.update_weights();
    CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("a huge temperature flattens unequal losses to uniform") {
    EnsembleState s = three_member_state(8, 1e6);
    s.record_step({0.1, 1.4, 0.9});
    const auto& w = s.update_weights();
    for (const double wi : w) CHECK(std::abs(wi - 1.0 / 3.0) < 1e-5);
}

TEST_CASE("temperature and window validation") {
    CHECK_THROWS_AS(EnsembleState({"a"}, 3, 0.0), UsageError);
    CHECK_THROWS_AS(EnsembleState({"a"}, 3, -1.0), UsageError);
    CHECK_THROWS_AS(EnsembleState({"a"}, 0, 1.0), UsageError);
    CHECK_THROWS_AS(EnsembleState({}, 3, 1.0), UsageError);
}

TEST_CASE("weights are uniform before any history") {
    EnsembleState s = three_member_state();
    const auto& w = s.update_weights();
    for (const double wi : w) CHECK(wi == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("combine is a convex combination") {
    CHECK(EnsembleState::combine({0.5, 0.3, 0.2}, {0.9, 0.5, 0.1}) == doctest::Approx(0.62));
    CHECK(EnsembleState::combine({1.0, 0.0, 0.0}, {0.7, 0.2, 0.4}) == doctest::Approx(0.7));
    // identical member probabilities pass through any weighting
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
        const double sum = a + b + c;
        a /= sum;
        b /= sum;
        c /= sum;
        const double p = rng.uniform();
        CHECK(EnsembleState::combine({a, b, c}, {p, p, p}) == doctest::Approx(p).epsilon(1e-12));
    }
    CHECK_THROWS_AS(EnsembleState::combine({0.5, 0.5}, {0.1}), NumericError);
    CHECK_THROWS_AS(EnsembleState::combine({0.5, 0.5}, {0.1, 1.5}), NumericError);
    CHECK_THROWS_AS(EnsembleState::combine({0.9, 0.9}, {0.1, 0.2}), NumericError);
}

TEST_CASE("softmax weighting properties over random states") {
    Rng rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        const int members = 2 + rng.uniform_int(4);
        const int k = 1 + rng.uniform_int(30);
        const double tau = rng.uniform(0.05, 5.0);
        std::vector<std::string> names;
        for (int m = 0; m < members; ++m) names.push_back("m" + std::to_string(m));
        EnsembleState s(names, k, tau);
        EnsembleState shifted(names, k, tau);

        const int steps = 1 + rng.uniform_int(2 * k);
        const double c = rng.uniform(-1.0, 1.0);
        std::vector<double> last(members);
        for (int t = 0; t < steps; ++t) {
            std::vector<double> losses(members), losses_shift(members);
            for (int m = 0; m < members; ++m) {
                losses[static_cast<size_t>(m)] = rng.uniform(0.0, 3.0);
                losses_shift[static_cast<size_t>(m)] = losses[static_cast<size_t>(m)] + c;
            }
            last = losses;
            s.record_step(losses);
            shifted.record_step(losses_shift);
        }

        const std::vector<double> w = s.update_weights();
        double sum = 0.0;
        for (const double wi : w) {
            CHECK(wi >= 0.0);
            sum += wi;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);

        // adding a constant to every loss leaves the weights unchanged
        const std::vector<double> ws = shifted.update_weights();
        for (int m = 0; m < members; ++m) {
            CHECK(ws[static_cast<size_t>(m)] ==
                  doctest::Approx(w[static_cast<size_t>(m)]).epsilon(1e-9));
        }

        // combined output stays inside the member probability envelope
        std::vector<double> probs(members);
        double lo = 1.0, hi = 0.0;
        for (int m = 0; m < members; ++m) {
            probs[static_cast<size_t>(m)] = rng.uniform();
            lo = std::min(lo, probs[static_cast<size_t>(m)]);
            hi = std::max(hi, probs[static_cast<size_t>(m)]);
        }
        const double out = EnsembleState::combine(w, probs);
        CHECK(out >= lo - 1e-12);
        CHECK(out <= hi + 1e-12);
    }
}

TEST_CASE("decreasing one member's rolling loss never decreases its weight") {
    Rng rng(321);
    for (int trial = 0; trial < 1000; ++trial) {
        const int members = 2 + rng.uniform_int(3);
        const double tau = rng.uniform(0.1, 3.0);
        std::vector<std::string> names;
        for (int m = 0; m < members; ++m) names.push_back("m" + std::to_string(m));

        std::vector<double> base(members), improved_losses(members);
        for (int m = 0; m < members; ++m) {
            base[static_cast<size_t>(m)] = rng.uniform(0.1, 3.0);
            improved_losses[static_cast<size_t>(m)] = base[static_cast<size_t>(m)];
        }
        improved_losses[0] = base[0] * rng.uniform(0.0, 1.0);

        EnsembleState a(names, 4, tau), b(names, 4, tau);
        a.record_step(base);
        b.record_step(improved_losses);
        const double wa = a.update_weights()[0];
        const double wb = b.update_weights()[0];
        CHECK(wb >= wa - 1e-12);
    }
}
