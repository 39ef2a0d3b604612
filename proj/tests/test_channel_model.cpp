#include "vmld/channel_model.hpp"
#include "vmld/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace vmld;

namespace
{
    ChannelState idle_state(std::uint64_t seed = 1)
    {
        ChannelState s;
        s.channel = ChannelId::make(Band::GHz2_4, 1);
        s.ack_loss_prob = 0.0;
        s.rng = Rng(seed);
        return s;
    }

    InterfererParams interferer(double busy, double lo, double hi)
    {
        InterfererParams p;
        p.id = "itf";
        p.affected_channels = {ChannelId::make(Band::GHz2_4, 1)};
        p.busy_prob = busy;
        p.busy_extra_us_min = lo;
        p.busy_extra_us_max = hi;
        return p;
    }
} // namespace

TEST_CASE("timing defaults")
{
    const TimingParams t;
    CHECK(t.t_sifs_us + t.t_ack_us == 60.0);
    CHECK(t.idle_path_us() == 98.0);
    CHECK_NOTHROW(t.validate());
    TimingParams bad = t;
    bad.t_pifs_us = 40.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("parameter validation")
{
    GilbertElliottParams ge{0.1, 0.2, 0.5, 0.1};
    CHECK_THROWS_AS(ge.validate(), ConfigError);
    ge = {1.2, 0.2, 0.0, 0.1};
    CHECK_THROWS_AS(ge.validate(), ConfigError);
    CHECK_THROWS_AS(interferer(0.5, 10, 5).validate(), ConfigError);
    CHECK_THROWS_AS(interferer(0.5, -1, 5).validate(), ConfigError);
    CHECK_THROWS_AS(interferer(1.5, 1, 5).validate(), ConfigError);
    AciCoupling same{ChannelId::make(Band::GHz2_4, 9), ChannelId::make(Band::GHz2_4, 9), 0.1};
    CHECK_THROWS_AS(same.validate(), ConfigError);
}

TEST_CASE("burst state transitions")
{
    SUBCASE("Good is absorbing without a transition probability")
    {
        auto s = idle_state();
        s.params = {0.0, 0.5, 0.0, 0.0};
        for (int i = 0; i < 1000; ++i)
            CHECK(step_burst_state(s) == BurstState::Good);
    }
    SUBCASE("Bad always recovers with p_bad_to_good = 1")
    {
        auto s = idle_state();
        s.params = {0.3, 1.0, 0.0, 0.0};
        for (int i = 0; i < 1000; ++i)
        {
            s.burst_state = BurstState::Bad;
            CHECK(step_burst_state(s) == BurstState::Good);
        }
    }
    SUBCASE("one draw per step")
    {
        auto s = idle_state(5);
        Rng shadow(5);
        s.params = {0.2, 0.3, 0.0, 0.0};
        for (int i = 0; i < 100; ++i)
        {
            step_burst_state(s);
            shadow.uniform01();
        }
        CHECK(s.rng.next_u64() == shadow.next_u64());
    }
    SUBCASE("stationary Bad fraction")
    {
        auto s = idle_state(11);
        s.params = {0.01, 0.09, 0.0, 0.0};
        std::size_t bad = 0;
        const std::size_t n = 1'000'000;
        for (std::size_t i = 0; i < n; ++i)
            bad += step_burst_state(s) == BurstState::Bad ? 1 : 0;
        // Stationary law of the two-state chain: p_gb / (p_gb + p_bg).
        CHECK(std::fabs(static_cast<double>(bad) / n - 0.01 / (0.01 + 0.09)) <= 0.01);
    }
}

TEST_CASE("idle loss-free channel gives the idle-path latency")
{
    auto s = idle_state();
    for (int i = 0; i < 100; ++i)
    {
        const auto r = sample_transmission(s, {}, {});
        CHECK(r.ack_received);
        CHECK(r.delivered_to_ap);
        CHECK_FALSE(r.failure_mode.has_value());
        CHECK(r.latency_us == s.timing.frame_airtime_us + 60.0);
    }
}

TEST_CASE("lossy Bad state corrupts every data frame")
{
    auto s = idle_state();
    s.params = {0.0, 0.0, 1.0, 1.0};
    s.burst_state = BurstState::Bad;
    for (int i = 0; i < 100; ++i)
    {
        const auto r = sample_transmission(s, {}, {});
        CHECK_FALSE(r.ack_received);
        CHECK_FALSE(r.delivered_to_ap);
        REQUIRE(r.failure_mode.has_value());
        CHECK(*r.failure_mode == FailureMode::DataCorrupted);
        CHECK(r.latency_us == s.timing.frame_airtime_us + s.timing.ack_timeout_us);
    }
}

TEST_CASE("fixed busy interferer adds exactly its delay")
{
    const std::vector<InterfererParams> quiet{interferer(0.0, 100, 100)};
    const std::vector<InterfererParams> busy{interferer(1.0, 100, 100)};
    auto a = idle_state(3);
    auto b = idle_state(3);
    for (int i = 0; i < 1000; ++i)
    {
        const auto ra = sample_transmission(a, quiet, {});
        const auto rb = sample_transmission(b, busy, {});
        CHECK(rb.latency_us - ra.latency_us == doctest::Approx(100.0).epsilon(1e-12));
    }
}

TEST_CASE("interferers only delay the channels they overlap")
{
    auto itf = interferer(1.0, 50, 50);
    itf.affected_channels = {ChannelId::make(Band::GHz2_4, 6)};
    auto s = idle_state();
    CHECK(sample_transmission(s, std::vector{itf}, {}).latency_us == 98.0);
}

TEST_CASE("beacon contention adds the fixed beacon delay")
{
    auto itf = interferer(1.0, 200, 200);
    itf.beacon_interval_us = 1000.0;
    itf.beacon_delay_us = 80.0;
    const std::vector<InterfererParams> itfs{itf};
    const std::vector<InterfererActivity> act{{true, 200.0}};
    const auto ch = ChannelId::make(Band::GHz2_4, 1);
    CHECK(contention_delay(itfs, act, ch, 900.0) == 280.0);  // TBTT at 1000 falls inside the busy period
    CHECK(contention_delay(itfs, act, ch, 1000.0) == 280.0); // due right now
    CHECK(contention_delay(itfs, act, ch, 100.0) == 200.0);  // next TBTT too far away
    const std::vector<InterfererActivity> idle{{false, 0.0}};
    CHECK(contention_delay(itfs, idle, ch, 900.0) == 0.0);
}

TEST_CASE("ACK corruption paths")
{
    auto s = idle_state(8);
    s.ack_loss_prob = 1.0;
    const auto r = sample_transmission(s, {}, {});
    CHECK(r.delivered_to_ap);
    CHECK_FALSE(r.ack_received);
    REQUIRE(r.failure_mode.has_value());
    CHECK(*r.failure_mode == FailureMode::AckCorrupted);
    const auto &t = s.timing;
    CHECK(r.latency_us >= t.frame_airtime_us + t.t_sifs_us + t.ack_timeout_us);
    CHECK(r.latency_us <= t.frame_airtime_us + t.t_sifs_us + t.t_ack_us + t.ack_timeout_us);

    auto s2 = idle_state(8);
    const std::vector<AciExposure> hit{{1.0}};
    const auto r2 = sample_transmission(s2, {}, hit);
    CHECK(r2.delivered_to_ap);
    CHECK_FALSE(r2.ack_received);
    CHECK(*r2.failure_mode == FailureMode::AckCorrupted);

    TxResult lost;
    lost.failure_mode = FailureMode::DataCorrupted;
    corrupt_ack(lost);
    CHECK(*lost.failure_mode == FailureMode::DataCorrupted);
}

TEST_CASE("results satisfy the TxResult invariants")
{
    auto s = idle_state(21);
    s.params = {0.05, 0.2, 0.05, 0.6};
    s.ack_loss_prob = 0.05;
    const std::vector<InterfererParams> itfs{interferer(0.3, 0, 900), interferer(0.1, 50, 60)};
    const std::vector<AciExposure> aci{{0.1}};
    for (int i = 0; i < 100000; ++i)
    {
        const auto r = sample_transmission(s, itfs, aci);
        if (r.ack_received)
        {
            CHECK(r.delivered_to_ap);
            CHECK(r.latency_us >= s.timing.frame_airtime_us + 60.0);
        }
        CHECK(r.ack_received == !r.failure_mode.has_value());
    }
}

TEST_CASE("identical state and seed reproduce the result sequence")
{
    const std::vector<InterfererParams> itfs{interferer(0.4, 0, 700)};
    auto a = idle_state(77);
    auto b = idle_state(77);
    a.params = b.params = {0.1, 0.3, 0.1, 0.7};
    for (int i = 0; i < 10000; ++i)
    {
        const auto ra = sample_transmission(a, itfs, {});
        const auto rb = sample_transmission(b, itfs, {});
        REQUIRE(ra.latency_us == rb.latency_us);
        REQUIRE(ra.ack_received == rb.ack_received);
    }
}

TEST_CASE("raising busy_prob never lowers latency")
{
    for (double lo : {0.0, 0.2, 0.5})
    {
        const double hi = lo + 0.3;
        auto a = idle_state(1234);
        auto b = idle_state(1234);
        a.params = b.params = {0.05, 0.2, 0.05, 0.5};
        const std::vector<InterfererParams> low{interferer(lo, 20, 600)};
        const std::vector<InterfererParams> high{interferer(hi, 20, 600)};
        double sum_low = 0, sum_high = 0;
        for (int i = 0; i < 20000; ++i)
        {
            const auto rl = sample_transmission(a, low, {});
            const auto rh = sample_transmission(b, high, {});
            REQUIRE(rh.latency_us >= rl.latency_us);
            sum_low += rl.latency_us;
            sum_high += rh.latency_us;
        }
        CHECK(sum_high > sum_low);
    }
}

TEST_CASE("apply_aci")
{
    const AciCoupling pair{ChannelId::make(Band::GHz2_4, 9), ChannelId::make(Band::GHz2_4, 13), 1.0};
    Rng rng(4);
    CHECK(apply_aci(pair, false, true, rng) == std::pair{false, false});
    CHECK(apply_aci(pair, true, false, rng) == std::pair{false, false});
    CHECK(apply_aci(pair, true, true, rng) == std::pair{true, true});

    AciCoupling half = pair;
    half.collision_prob = 0.5;
    std::size_t a = 0, b = 0;
    const std::size_t n = 1'000'000;
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto [ca, cb] = apply_aci(half, true, true, rng);
        a += ca;
        b += cb;
    }
    CHECK(std::fabs(static_cast<double>(a) / n - 0.5) <= 0.005);
    CHECK(std::fabs(static_cast<double>(b) / n - 0.5) <= 0.005);
}

TEST_CASE("calibrate_fdr closed form")
{
    CHECK(calibrate_fdr({0.2, 0.3, 0.0, 0.0}) == 1.0);
    CHECK(calibrate_fdr({0.5, 0.5, 0.0, 1.0}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(calibrate_fdr({0.0, 0.0, 0.1, 0.2}), PreconditionError);
    // pi_B = 0.1, so 0.9 * 0.98 + 0.1 * 0.5.
    CHECK(calibrate_fdr({0.01, 0.09, 0.02, 0.5}) == doctest::Approx(0.932).epsilon(1e-12));
}

TEST_CASE("simulated delivery agrees with calibrate_fdr; with ACK loss the acked fraction lands on 0.927")
{
    const GilbertElliottParams ge{0.01, 0.09, 0.02, 0.5};
    auto s = idle_state(2024);
    s.params = ge;
    s.ack_loss_prob = 0.005;
    s.burst_state = Rng(9).bernoulli(stationary_bad_fraction(ge)) ? BurstState::Bad : BurstState::Good;
    const std::size_t n = 1'000'000;
    std::size_t delivered = 0, acked = 0;
    for (std::size_t i = 0; i < n; ++i)
    {
        const auto r = sample_transmission(s, {}, {});
        delivered += r.delivered_to_ap;
        acked += r.ack_received;
    }
    CHECK(std::fabs(static_cast<double>(delivered) / n - calibrate_fdr(ge)) <= 0.003);
    CHECK(std::fabs(static_cast<double>(acked) / n - 0.927) <= 0.003);
}

TEST_CASE("uncoupled channels have uncorrelated outcomes and latencies")
{
    auto a = idle_state(100);
    auto b = idle_state(200);
    a.params = {0.02, 0.1, 0.05, 0.5};
    b.params = {0.01, 0.2, 0.02, 0.6};
    auto ia = interferer(0.2, 0, 800);
    auto ib = interferer(0.2, 0, 800);
    ib.affected_channels = {ChannelId::make(Band::GHz2_4, 1)};
    const std::vector<InterfererParams> ita{ia}, itb{ib};
    std::vector<double> oa, ob, la, lb;
    for (int i = 0; i < 1'000'000; ++i)
    {
        const auto ra = sample_transmission(a, ita, {});
        const auto rb = sample_transmission(b, itb, {});
        oa.push_back(ra.ack_received);
        ob.push_back(rb.ack_received);
        la.push_back(ra.latency_us);
        lb.push_back(rb.latency_us);
    }
    CHECK(std::fabs(oracle::pearson(oa, ob)) < 0.01);
    CHECK(std::fabs(oracle::pearson(la, lb)) < 0.01);
}
