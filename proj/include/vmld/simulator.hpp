#pragma once

#include "vmld/scenario.hpp"
#include "vmld/trace.hpp"

#include <cstdint>
#include <functional>
#include <memory>

namespace vmld
{
    /// Ties at equal time are broken in this order, then by channel, then by seq.
    enum class SimEventKind : std::uint8_t
    {
        AckReceived,
        AckTimeoutFired,
        TxStart,
        TxComplete,
        LoopbackArrival,
        BeaconArrival,
        PacketReady,
    };

    struct SimEvent
    {
        std::int64_t time_us = 0;
        SimEventKind kind = SimEventKind::PacketReady;
        /// L-MAC index in channel order, or -1 for events not bound to a channel.
        std::int32_t link = -1;
        std::int64_t seq = 0;
        std::uint64_t order = 0;
        std::uint64_t payload = 0;
    };

    /// Strict ordering of the event queue: (time, kind, link, seq, insertion order).
    bool event_before(const SimEvent &a, const SimEvent &b) noexcept;

    struct SimCounters
    {
        std::uint64_t packets = 0;
        std::uint64_t enqueued = 0;
        /// Copies that left a queue and went on air at least once.
        std::uint64_t transmissions = 0;
        std::uint64_t attempts = 0;
        /// Copies whose data frame reached the AP (counted once per copy).
        std::uint64_t delivered_to_ap = 0;
        std::uint64_t acked = 0;
        std::uint64_t not_acked = 0;
        std::uint64_t aci_corruptions = 0;
        std::uint64_t loopbacks = 0;
        std::uint64_t beacons = 0;
        std::uint64_t cancelled = 0;
        std::uint64_t dropped = 0;
        std::uint64_t events = 0;
    };

    /// Discrete-event engine: one run of one scenario.
    class Simulator
    {
    public:
        /// Validates the configuration; throws ConfigError before any event runs.
        explicit Simulator(ScenarioConfig config);
        ~Simulator();
        Simulator(Simulator &&) noexcept;
        Simulator &operator=(Simulator &&) noexcept;

        /// Called for every event, after it has been processed.
        void set_event_observer(std::function<void(const SimEvent &)> observer);

        TraceDataset run();

        const SimCounters &counters() const noexcept;

    private:
        struct Impl;
        std::unique_ptr<Impl> impl_;
    };

    TraceDataset run_scenario(const ScenarioConfig &config);

    /// Runs the scenario twice and compares the serialized traces byte for byte.
    bool replay_check(const ScenarioConfig &config);
} // namespace vmld
