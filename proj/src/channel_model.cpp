#include "vmld/channel_model.hpp"

#include "vmld/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace vmld
{
    namespace
    {
        bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

        void require_probability(const std::string &field, double p)
        {
            if (!is_probability(p))
                throw ConfigError(field, fmt::format("must lie in [0, 1], got {}", p));
        }
    } // namespace

    void TimingParams::validate() const
    {
        if (!(t_sifs_us > 0.0 && t_ack_us > 0.0 && t_difs_us > 0.0 && t_pifs_us > 0.0))
            throw ConfigError("timing", "interframe spaces and ACK duration must be > 0");
        if (!(t_sifs_us < t_pifs_us && t_pifs_us < t_difs_us))
            throw ConfigError("timing", fmt::format("need SIFS < PIFS < DIFS, got {} / {} / {}", t_sifs_us, t_pifs_us, t_difs_us));
        if (!(frame_airtime_us > 0.0))
            throw ConfigError("timing.frame_airtime_us", "must be > 0");
        if (!(ack_timeout_us > 0.0))
            throw ConfigError("timing.ack_timeout_us", "must be > 0");
    }

    void GilbertElliottParams::validate() const
    {
        require_probability("burst.p_good_to_bad", p_good_to_bad);
        require_probability("burst.p_bad_to_good", p_bad_to_good);
        require_probability("burst.loss_good", loss_prob_good);
        require_probability("burst.loss_bad", loss_prob_bad);
        if (loss_prob_good > loss_prob_bad)
            throw ConfigError("burst.loss_good", "must not exceed loss_bad");
    }

    void InterfererParams::validate() const
    {
        require_probability("interferers." + id + ".busy_prob", busy_prob);
        if (!(busy_extra_us_min >= 0.0 && busy_extra_us_min <= busy_extra_us_max))
            throw ConfigError("interferers." + id + ".busy_extra_us", "need 0 <= min <= max");
        if (beacon_interval_us && !(*beacon_interval_us > 0.0))
            throw ConfigError("interferers." + id + ".beacon_interval_us", "must be > 0");
        if (beacon_delay_us && !(*beacon_delay_us >= 0.0))
            throw ConfigError("interferers." + id + ".beacon_delay_us", "must be >= 0");
    }

    bool InterfererParams::affects(const ChannelId &channel) const
    {
        return std::find(affected_channels.begin(), affected_channels.end(), channel) != affected_channels.end();
    }

    void AciCoupling::validate() const
    {
        if (channel_a == channel_b)
            throw ConfigError("aci", "an ACI pair needs two distinct channels, got " + channel_a.to_string() + " twice");
        require_probability("aci.collision_prob", collision_prob);
    }

    BurstState step_burst_state(ChannelState &state)
    {
        const double u = state.rng.uniform01();
        if (state.burst_state == BurstState::Good)
        {
            if (u < state.params.p_good_to_bad)
                state.burst_state = BurstState::Bad;
        }
        else if (u < state.params.p_bad_to_good)
        {
            state.burst_state = BurstState::Good;
        }
        return state.burst_state;
    }

    InterfererActivity draw_activity(const InterfererParams &interferer, Rng &rng)
    {
        const double u_busy = rng.uniform01();
        const double extra = rng.uniform(interferer.busy_extra_us_min, interferer.busy_extra_us_max);
        const bool busy = u_busy < interferer.busy_prob;
        return {busy, busy ? extra : 0.0};
    }

    double contention_delay(std::span<const InterfererParams> interferers,
                            std::span<const InterfererActivity> activity,
                            const ChannelId &channel,
                            double now_us)
    {
        double delay = 0.0;
        for (std::size_t i = 0; i < interferers.size() && i < activity.size(); ++i)
        {
            const auto &itf = interferers[i];
            const auto &act = activity[i];
            if (!act.busy || !itf.affects(channel))
                continue;
            delay += act.extra_us;
            if (itf.beacon_interval_us && itf.beacon_delay_us)
            {
                // Next target beacon transmission time at or after now.
                const double interval = *itf.beacon_interval_us;
                const double k = std::ceil((now_us - itf.beacon_phase_us) / interval);
                const double tbtt = itf.beacon_phase_us + k * interval;
                if (tbtt <= now_us + act.extra_us)
                    delay += *itf.beacon_delay_us;
            }
        }
        return delay;
    }

    TxResult resolve_transmission(ChannelState &state, double contention_us, std::span<const AciExposure> aci_events)
    {
        step_burst_state(state);
        const double u_loss = state.rng.uniform01();
        const double u_ack = state.rng.uniform01();
        const double u_jitter = state.rng.uniform01();
        bool aci_hit = false;
        for (const auto &exposure : aci_events)
        {
            if (state.rng.bernoulli(exposure.collision_prob))
                aci_hit = true;
        }

        const auto &t = state.timing;
        const double loss = state.burst_state == BurstState::Good ? state.params.loss_prob_good : state.params.loss_prob_bad;
        const double on_air_end = contention_us + t.frame_airtime_us;

        TxResult r;
        r.contention_us = contention_us;
        r.delivered_to_ap = !(u_loss < loss);
        r.ack_corrupt_latency_us = on_air_end + t.t_sifs_us + u_jitter * t.t_ack_us + t.ack_timeout_us;
        if (!r.delivered_to_ap)
        {
            r.failure_mode = FailureMode::DataCorrupted;
            r.latency_us = on_air_end + t.ack_timeout_us;
            return r;
        }
        r.ack_received = true;
        r.latency_us = on_air_end + t.t_sifs_us + t.t_ack_us;
        if (u_ack < state.ack_loss_prob || aci_hit)
            corrupt_ack(r);
        return r;
    }

    TxResult sample_transmission(ChannelState &state,
                                 std::span<const InterfererParams> interferers,
                                 std::span<const AciExposure> aci_events,
                                 double now_us)
    {
        std::vector<InterfererActivity> activity;
        activity.reserve(interferers.size());
        for (const auto &itf : interferers)
            activity.push_back(draw_activity(itf, state.rng));
        const double contention = contention_delay(interferers, activity, state.channel, now_us);
        return resolve_transmission(state, contention, aci_events);
    }

    void corrupt_ack(TxResult &result)
    {
        if (!result.ack_received)
            return;
        result.ack_received = false;
        result.failure_mode = FailureMode::AckCorrupted;
        result.latency_us = result.ack_corrupt_latency_us;
    }

    std::pair<bool, bool> apply_aci(const AciCoupling &pair, bool tx_a_active, bool tx_b_active, Rng &rng)
    {
        if (!tx_a_active || !tx_b_active)
            return {false, false};
        const bool a = rng.bernoulli(pair.collision_prob);
        const bool b = rng.bernoulli(pair.collision_prob);
        return {a, b};
    }

    double stationary_bad_fraction(const GilbertElliottParams &params)
    {
        const double total = params.p_good_to_bad + params.p_bad_to_good;
        if (!(total > 0.0))
            throw PreconditionError("degenerate burst chain: both transition probabilities are 0");
        return params.p_good_to_bad / total;
    }

    double calibrate_fdr(const GilbertElliottParams &params)
    {
        const double bad = stationary_bad_fraction(params);
        const double good = 1.0 - bad;
        return good * (1.0 - params.loss_prob_good) + bad * (1.0 - params.loss_prob_bad);
    }
} // namespace vmld
