#pragma once

#include "vmld/rng.hpp"
#include "vmld/trace.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vmld
{
    /// Interframe spacings and frame durations of one L-MAC, in microseconds.
    struct TimingParams
    {
        double t_sifs_us = 16.0;
        double t_ack_us = 44.0;
        double t_difs_us = 34.0;
        double t_pifs_us = 25.0;
        /// On-air duration of one 50 B data frame at 54 Mbps, preamble included.
        double frame_airtime_us = 38.0;
        /// Wait after the end of the data frame before an ACK is given up.
        double ack_timeout_us = 300.0;

        void validate() const;

        /// Latency of a frame that finds the medium idle and is acknowledged.
        double idle_path_us() const noexcept { return frame_airtime_us + t_sifs_us + t_ack_us; }
    };

    /// Two-state (Good/Bad) Markov loss process, stepped once per transmission.
    struct GilbertElliottParams
    {
        double p_good_to_bad = 0.0;
        double p_bad_to_good = 1.0;
        double loss_prob_good = 0.0;
        double loss_prob_bad = 0.0;

        void validate() const;
    };

    /// A population of foreign stations whose activity delays channel access
    /// on every channel it overlaps.
    struct InterfererParams
    {
        std::string id;
        std::vector<ChannelId> affected_channels;
        double busy_prob = 0.0;
        double busy_extra_us_min = 0.0;
        double busy_extra_us_max = 0.0;
        /// Set for interferers that model an AP: beacons are due every interval.
        std::optional<double> beacon_interval_us;
        /// Fixed extra wait when a beacon became pending while the medium was busy.
        std::optional<double> beacon_delay_us;
        double beacon_phase_us = 0.0;

        void validate() const;
        bool affects(const ChannelId &channel) const;
    };

    /// Co-located radios whose transmissions can corrupt each other's reception.
    struct AciCoupling
    {
        ChannelId channel_a;
        ChannelId channel_b;
        double collision_prob = 0.0;

        void validate() const;
    };

    enum class BurstState : std::uint8_t
    {
        Good,
        Bad,
    };

    struct ChannelState
    {
        ChannelId channel;
        GilbertElliottParams params;
        TimingParams timing;
        /// Probability that the ACK of a delivered frame is lost on the way back.
        double ack_loss_prob = 0.005;
        BurstState burst_state = BurstState::Good;
        Rng rng;
    };

    enum class FailureMode : std::uint8_t
    {
        DataCorrupted,
        AckCorrupted,
    };

    struct TxResult
    {
        bool delivered_to_ap = false;
        bool ack_received = false;
        /// From the start of channel access to the ACK (or ACK-timeout) notification.
        double latency_us = 0.0;
        std::optional<FailureMode> failure_mode;
        /// Channel-access wait caused by interferers and beacons.
        double contention_us = 0.0;
        /// Latency this transmission reports if its ACK turns out corrupted.
        double ack_corrupt_latency_us = 0.0;
    };

    /// Activity of one interferer as seen by one transmission attempt.
    struct InterfererActivity
    {
        bool busy = false;
        double extra_us = 0.0;
    };

    /// A co-located transmission overlapping the one being sampled.
    struct AciExposure
    {
        double collision_prob = 0.0;
    };

    /// Good->Bad with p_good_to_bad, Bad->Good with p_bad_to_good. One draw.
    BurstState step_burst_state(ChannelState &state);

    /// Two draws per interferer regardless of outcome, so streams stay aligned
    /// when only busy_prob changes.
    InterfererActivity draw_activity(const InterfererParams &interferer, Rng &rng);

    /// Access delay seen on `channel` at `now_us`: every busy interferer that
    /// overlaps the channel adds its extra wait, and an AP interferer adds its
    /// beacon delay when a beacon fell due during that busy period.
    double contention_delay(std::span<const InterfererParams> interferers,
                            std::span<const InterfererActivity> activity,
                            const ChannelId &channel,
                            double now_us);

    /// Resolves one transmission attempt given an already known contention delay.
    /// Draws: burst step, data loss, ACK loss, ACK detection jitter, then one per exposure.
    TxResult resolve_transmission(ChannelState &state, double contention_us, std::span<const AciExposure> aci_events);

    /// Draws interferer activity from the channel stream, then resolves the attempt.
    TxResult sample_transmission(ChannelState &state,
                                 std::span<const InterfererParams> interferers,
                                 std::span<const AciExposure> aci_events,
                                 double now_us = 0.0);

    /// Turns an acknowledged result into an ACK-corrupted failure.
    void corrupt_ack(TxResult &result);

    /// When both transmissions overlap, each is corrupted independently with
    /// collision_prob; otherwise neither is. Always two draws when both are active.
    std::pair<bool, bool> apply_aci(const AciCoupling &pair, bool tx_a_active, bool tx_b_active, Rng &rng);

    /// Stationary delivery probability of the burst model.
    double calibrate_fdr(const GilbertElliottParams &params);

    /// Stationary probability of the Bad state.
    double stationary_bad_fraction(const GilbertElliottParams &params);
} // namespace vmld
