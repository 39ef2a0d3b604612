#include "vmld/simulator.hpp"

#include "vmld/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <optional>
#include <queue>
#include <tuple>

namespace vmld
{
    bool event_before(const SimEvent &a, const SimEvent &b) noexcept
    {
        return std::tuple(a.time_us, static_cast<int>(a.kind), a.link, a.seq, a.order) <
               std::tuple(b.time_us, static_cast<int>(b.kind), b.link, b.seq, b.order);
    }

    namespace
    {
        // Stream tags; every stream is derived from the scenario seed.
        constexpr std::uint64_t kEnvironmentStream = 0xE0;
        constexpr std::uint64_t kPolicyStream = 0x1000;
        constexpr std::uint64_t kAciStream = 0x2000;

        std::uint64_t channel_stream(const ChannelId &ch)
        {
            return 0x10000 + 0x100 * static_cast<std::uint64_t>(ch.band) + static_cast<std::uint64_t>(ch.number);
        }

        std::int64_t clock_ceil(double t) { return static_cast<std::int64_t>(std::ceil(t - 1e-9)); }

        // Air spans older than this cannot overlap a new exchange.
        constexpr double kAirHistoryUs = 100'000.0;

        struct AirSpan
        {
            double start = 0.0;
            double end = 0.0;
        };

        struct InFlight
        {
            std::int64_t seq = 0;
            std::int64_t t_send = 0;
            std::shared_ptr<const std::vector<InterfererActivity>> activity;
            int attempts = 0;
            double attempt_start = 0.0;
            TxResult result;
            double air_end = 0.0;
            double ack_start = 0.0;
            double ack_end = 0.0;
            double done = 0.0;
            bool delivered_logged = false;
            bool awaiting_retry = false;
        };

        struct Lmac
        {
            std::size_t mld = 0;
            std::size_t local = 0;
            LmacConfig cfg;
            ChannelState chan;
            bool start_scheduled = false;
            std::optional<InFlight> current;
            double free_at = 0.0;
            std::deque<AirSpan> air;
        };

        struct AciLink
        {
            AciCoupling pair;
            std::size_t link_a = 0;
            std::size_t link_b = 0;
        };

        struct Mld
        {
            MldConfig cfg;
            std::vector<std::size_t> links; // global indices, local order
            LinkSelectorState selector;
            Rng policy_rng;
            Rng aci_rng;
            LinkQueues queues;
            std::vector<AciLink> aci;
        };

        struct Later
        {
            bool operator()(const SimEvent &a, const SimEvent &b) const noexcept { return event_before(b, a); }
        };
    } // namespace

    struct Simulator::Impl
    {
        ScenarioConfig cfg;
        std::vector<Lmac> lmacs; // channel order
        std::vector<Mld> mlds;
        Rng env_rng;
        std::priority_queue<SimEvent, std::vector<SimEvent>, Later> events;
        std::uint64_t next_order = 0;
        std::int64_t now = 0;
        SimCounters counters;
        std::vector<LinkRecord> records;
        std::vector<LinkRecord> staged;
        std::function<void(const SimEvent &)> observer;
        bool ran = false;

        explicit Impl(ScenarioConfig config) : cfg(std::move(config)), env_rng(derive_seed(cfg.seed, kEnvironmentStream))
        {
            cfg.validate();

            struct Slot
            {
                ChannelId channel;
                std::size_t mld;
                std::size_t local;
            };
            std::vector<Slot> slots;
            for (std::size_t m = 0; m < cfg.mlds.size(); ++m)
            {
                for (std::size_t l = 0; l < cfg.mlds[m].lmacs.size(); ++l)
                    slots.push_back({cfg.mlds[m].lmacs[l].channel, m, l});
            }
            std::sort(slots.begin(), slots.end(), [](const Slot &a, const Slot &b) { return a.channel < b.channel; });

            mlds.resize(cfg.mlds.size());
            for (std::size_t m = 0; m < cfg.mlds.size(); ++m)
            {
                auto &mld = mlds[m];
                mld.cfg = cfg.mlds[m];
                mld.links.resize(mld.cfg.lmacs.size());
                mld.selector = LinkSelectorState(mld.cfg.lmacs.size(), cfg.policy.initial_estimate);
                mld.policy_rng = Rng(derive_seed(cfg.seed, kPolicyStream + m));
                mld.aci_rng = Rng(derive_seed(cfg.seed, kAciStream + m));
                mld.queues.resize(mld.cfg.lmacs.size());
            }

            for (std::size_t g = 0; g < slots.size(); ++g)
            {
                const auto &slot = slots[g];
                Lmac lmac;
                lmac.mld = slot.mld;
                lmac.local = slot.local;
                lmac.cfg = cfg.mlds[slot.mld].lmacs[slot.local];
                lmac.chan.channel = lmac.cfg.channel;
                lmac.chan.params = lmac.cfg.burst;
                lmac.chan.timing = lmac.cfg.timing;
                lmac.chan.ack_loss_prob = lmac.cfg.ack_loss_prob;
                lmac.chan.rng = Rng(derive_seed(cfg.seed, channel_stream(lmac.cfg.channel)));
                // Start from the stationary distribution of the burst chain.
                const double u = lmac.chan.rng.uniform01();
                const auto &b = lmac.cfg.burst;
                const double total = b.p_good_to_bad + b.p_bad_to_good;
                const double bad = total > 0.0 ? b.p_good_to_bad / total : 0.0;
                lmac.chan.burst_state = u < bad ? BurstState::Bad : BurstState::Good;
                mlds[slot.mld].links[slot.local] = g;
                lmacs.push_back(std::move(lmac));
            }

            for (auto &mld : mlds)
            {
                for (const auto &pair : mld.cfg.colocated_aci)
                {
                    AciLink link{pair, 0, 0};
                    for (std::size_t l = 0; l < mld.links.size(); ++l)
                    {
                        const auto g = mld.links[l];
                        if (lmacs[g].cfg.channel == pair.channel_a)
                            link.link_a = g;
                        if (lmacs[g].cfg.channel == pair.channel_b)
                            link.link_b = g;
                    }
                    mld.aci.push_back(link);
                }
            }
        }

        void schedule(std::int64_t time, SimEventKind kind, std::int32_t link, std::int64_t seq, std::uint64_t payload = 0)
        {
            events.push(SimEvent{std::max(time, now), kind, link, seq, next_order++, payload});
        }

        double end_time() const { return static_cast<double>(cfg.sample_count) * static_cast<double>(cfg.period_us); }

        TraceDataset run()
        {
            if (ran)
                throw PreconditionError("a Simulator instance runs once");
            ran = true;

            if (cfg.sample_count > 0)
                schedule(0, SimEventKind::PacketReady, -1, 0);
            if (cfg.beacon_logging && cfg.sample_count > 0)
            {
                for (std::size_t i = 0; i < cfg.interferers.size(); ++i)
                {
                    const auto &itf = cfg.interferers[i];
                    if (!itf.beacon_interval_us)
                        continue;
                    const double k0 = std::max(0.0, std::ceil(-itf.beacon_phase_us / *itf.beacon_interval_us));
                    schedule_beacon(i, static_cast<std::int64_t>(k0));
                }
            }

            while (!events.empty())
            {
                const SimEvent ev = events.top();
                events.pop();
                now = ev.time_us;
                ++counters.events;
                dispatch(ev);
                if (observer)
                    observer(ev);
            }

            TraceDataset out;
            out.meta.period_us = cfg.period_us;
            out.meta.payload_bytes = cfg.payload_bytes;
            out.meta.bitrate_mbps = cfg.bitrate_mbps;
            out.meta.retransmission_enabled = cfg.retransmission_enabled;
            out.meta.backoff_fixed_zero = true;
            out.meta.channels = cfg.channels();
            out.meta.sample_count = cfg.sample_count;
            out.records = std::move(records);
            canonicalize(out);
            return out;
        }

        void dispatch(const SimEvent &ev)
        {
            switch (ev.kind)
            {
            case SimEventKind::PacketReady:
                on_packet_ready(ev.seq);
                break;
            case SimEventKind::TxStart:
                on_tx_start(static_cast<std::size_t>(ev.link));
                break;
            case SimEventKind::TxComplete:
                on_tx_complete(static_cast<std::size_t>(ev.link));
                break;
            case SimEventKind::AckReceived:
            case SimEventKind::AckTimeoutFired:
                on_outcome(static_cast<std::size_t>(ev.link), ev.kind == SimEventKind::AckReceived);
                break;
            case SimEventKind::LoopbackArrival:
                records.push_back(staged[ev.payload]);
                ++counters.loopbacks;
                break;
            case SimEventKind::BeaconArrival:
                on_beacon(static_cast<std::size_t>(ev.payload), ev.seq);
                break;
            }
        }

        void schedule_beacon(std::size_t interferer, std::int64_t k)
        {
            const auto &itf = cfg.interferers[interferer];
            const double tbtt = itf.beacon_phase_us + static_cast<double>(k) * *itf.beacon_interval_us;
            if (tbtt >= end_time())
                return;
            schedule(clock_ceil(tbtt), SimEventKind::BeaconArrival, -1, k, interferer);
        }

        void on_beacon(std::size_t interferer, std::int64_t k)
        {
            const auto &itf = cfg.interferers[interferer];
            for (const auto &lmac : lmacs)
            {
                if (!itf.affects(lmac.cfg.channel))
                    continue;
                LinkRecord r;
                r.seq = k;
                r.channel = lmac.cfg.channel;
                r.t_send_us = now;
                r.t_done_us = now;
                r.outcome = 1;
                r.latency_us = 0.0;
                r.event = EventKind::Beacon;
                records.push_back(r);
                ++counters.beacons;
            }
            schedule_beacon(interferer, k + 1);
        }

        void on_packet_ready(std::int64_t seq)
        {
            ++counters.packets;
            auto activity = std::make_shared<std::vector<InterfererActivity>>();
            activity->reserve(cfg.interferers.size());
            for (const auto &itf : cfg.interferers)
                activity->push_back(draw_activity(itf, env_rng));

            for (auto &mld : mlds)
            {
                const auto order = select_link_indices(cfg.policy, mld.selector, seq, mld.policy_rng);
                for (std::size_t k = 0; k < order.size(); ++k)
                {
                    const auto local = order[k];
                    auto &queue = mld.queues[local];
                    if (queue.size() >= cfg.queue_cap)
                    {
                        ++counters.dropped;
                        continue;
                    }
                    const auto t_send = now + std::llround(static_cast<double>(k) * mld.cfg.enqueue_gap_us);
                    queue.push_back(QueuedFrame{seq, t_send, activity});
                    ++counters.enqueued;
                    try_start(mld.links[local]);
                }
            }

            if (seq + 1 < cfg.sample_count)
                schedule((seq + 1) * cfg.period_us, SimEventKind::PacketReady, -1, seq + 1);
        }

        std::deque<QueuedFrame> &queue_of(const Lmac &lmac) { return mlds[lmac.mld].queues[lmac.local]; }

        double ready_at(const Lmac &lmac, const QueuedFrame &f) const
        {
            return std::max(static_cast<double>(f.t_send_us) + lmac.cfg.queue_delay_us, lmac.free_at);
        }

        void try_start(std::size_t g)
        {
            auto &lmac = lmacs[g];
            if (lmac.current || lmac.start_scheduled)
                return;
            const auto &queue = queue_of(lmac);
            if (queue.empty())
                return;
            const auto &front = queue.front();
            lmac.start_scheduled = true;
            schedule(clock_ceil(ready_at(lmac, front)), SimEventKind::TxStart, static_cast<std::int32_t>(g), front.seq);
        }

        void on_tx_start(std::size_t g)
        {
            auto &lmac = lmacs[g];
            lmac.start_scheduled = false;
            if (lmac.current)
            {
                if (lmac.current->awaiting_retry)
                {
                    lmac.current->awaiting_retry = false;
                    begin_attempt(g, lmac.current->done);
                }
                return;
            }
            auto &queue = queue_of(lmac);
            if (queue.empty())
                return;
            const double start = ready_at(lmac, queue.front());
            if (clock_ceil(start) > now)
            {
                // The head changed (a copy was cancelled); wait for the new one.
                try_start(g);
                return;
            }
            const QueuedFrame frame = queue.front();
            queue.pop_front();

            InFlight flight;
            flight.seq = frame.seq;
            flight.t_send = frame.t_send_us;
            flight.activity = frame.activity;
            lmac.current = std::move(flight);
            ++counters.transmissions;
            begin_attempt(g, start);
        }

        void begin_attempt(std::size_t g, double start)
        {
            auto &lmac = lmacs[g];
            auto &cur = *lmac.current;
            ++cur.attempts;
            ++counters.attempts;
            cur.attempt_start = start;

            double contention = 0.0;
            if (cur.attempts == 1)
            {
                contention = contention_delay(cfg.interferers, *cur.activity, lmac.cfg.channel, start);
            }
            else
            {
                // A retry happens later than the packet's shared snapshot; redraw locally.
                std::vector<InterfererActivity> fresh;
                fresh.reserve(cfg.interferers.size());
                for (const auto &itf : cfg.interferers)
                    fresh.push_back(draw_activity(itf, lmac.chan.rng));
                contention = contention_delay(cfg.interferers, fresh, lmac.cfg.channel, start);
            }

            cur.result = resolve_transmission(lmac.chan, contention, {});
            const auto &t = lmac.cfg.timing;
            const double air_start = start + contention;
            cur.air_end = air_start + t.frame_airtime_us;
            cur.ack_start = cur.air_end + t.t_sifs_us;
            cur.ack_end = cur.ack_start + t.t_ack_us;

            while (!lmac.air.empty() && lmac.air.front().end < start - kAirHistoryUs)
                lmac.air.pop_front();
            lmac.air.push_back({air_start, cur.air_end});

            schedule(clock_ceil(cur.ack_end), SimEventKind::TxComplete, static_cast<std::int32_t>(g), cur.seq);
        }

        bool overlaps_ack_window(std::size_t other, double ack_start, double ack_end) const
        {
            for (const auto &span : lmacs[other].air)
            {
                if (span.start < ack_end && span.end > ack_start)
                    return true;
            }
            return false;
        }

        void on_tx_complete(std::size_t g)
        {
            auto &lmac = lmacs[g];
            auto &mld = mlds[lmac.mld];
            auto &cur = *lmac.current;
            auto &r = cur.result;

            // A co-located radio transmitting while this one receives its ACK
            // may corrupt the ACK; the transmitting side is unaffected.
            if (r.ack_received)
            {
                for (const auto &aci : mld.aci)
                {
                    if (aci.link_a != g && aci.link_b != g)
                        continue;
                    const auto other = aci.link_a == g ? aci.link_b : aci.link_a;
                    if (!overlaps_ack_window(other, cur.ack_start, cur.ack_end))
                        continue;
                    const auto [hit_a, hit_b] = apply_aci(aci.pair, true, true, mld.aci_rng);
                    if (aci.link_a == g ? hit_a : hit_b)
                    {
                        corrupt_ack(r);
                        ++counters.aci_corruptions;
                        break;
                    }
                }
            }

            if (r.delivered_to_ap && !cur.delivered_logged)
            {
                cur.delivered_logged = true;
                ++counters.delivered_to_ap;
                if (cfg.loopback_logging)
                {
                    const double arrival = cur.air_end + mld.cfg.eth_delay_us;
                    staged.push_back(make_record(lmac, cur, arrival, EventKind::EthLoopback));
                    schedule(clock_ceil(arrival), SimEventKind::LoopbackArrival, static_cast<std::int32_t>(g), cur.seq,
                             staged.size() - 1);
                }
            }

            const double detected = cur.attempt_start + r.latency_us;
            if (!r.ack_received && cfg.retransmission_enabled && cur.attempts <= cfg.retry_limit)
            {
                cur.awaiting_retry = true;
                cur.done = detected;
                lmac.start_scheduled = true;
                schedule(clock_ceil(detected), SimEventKind::TxStart, static_cast<std::int32_t>(g), cur.seq);
                return;
            }
            cur.done = detected;
            schedule(clock_ceil(detected), r.ack_received ? SimEventKind::AckReceived : SimEventKind::AckTimeoutFired,
                     static_cast<std::int32_t>(g), cur.seq);
        }

        LinkRecord make_record(const Lmac &lmac, const InFlight &cur, double done, EventKind kind) const
        {
            LinkRecord rec;
            rec.seq = cur.seq;
            rec.channel = lmac.cfg.channel;
            rec.t_send_us = cur.t_send;
            rec.latency_us = quantize_latency(done - static_cast<double>(cur.t_send) + mlds[lmac.mld].cfg.platform_offset_us);
            rec.t_done_us = rec.t_send_us + std::llround(rec.latency_us);
            rec.outcome = kind == EventKind::AckTimeout ? 0 : 1;
            rec.retries = kind == EventKind::EthLoopback ? 0 : cur.attempts - 1;
            rec.event = kind;
            return rec;
        }

        void on_outcome(std::size_t g, bool acked)
        {
            auto &lmac = lmacs[g];
            auto &mld = mlds[lmac.mld];
            const auto &cur = *lmac.current;

            records.push_back(make_record(lmac, cur, cur.done, acked ? EventKind::Ack : EventKind::AckTimeout));
            if (acked)
                ++counters.acked;
            else
                ++counters.not_acked;

            lmac.free_at = cur.done;
            if (cfg.policy.kind == PolicyKind::BestLink)
            {
                auto &est = mld.selector.estimates[lmac.local];
                est = update_link_estimate(est, acked ? 1 : 0, cfg.policy.alpha);
            }
            if (cfg.policy.kind == PolicyKind::CancelOnAck && acked)
                counters.cancelled += resolve_cancel_on_ack(mld.queues, cur.seq, lmac.local);

            lmac.current.reset();
            try_start(g);
        }
    };

    Simulator::Simulator(ScenarioConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
    Simulator::~Simulator() = default;
    Simulator::Simulator(Simulator &&) noexcept = default;
    Simulator &Simulator::operator=(Simulator &&) noexcept = default;

    void Simulator::set_event_observer(std::function<void(const SimEvent &)> observer) { impl_->observer = std::move(observer); }

    TraceDataset Simulator::run() { return impl_->run(); }

    const SimCounters &Simulator::counters() const noexcept { return impl_->counters; }

    TraceDataset run_scenario(const ScenarioConfig &config) { return Simulator(config).run(); }

    bool replay_check(const ScenarioConfig &config)
    {
        const auto first = write_trace_string(run_scenario(config));
        const auto second = write_trace_string(run_scenario(config));
        return first == second;
    }
} // namespace vmld
