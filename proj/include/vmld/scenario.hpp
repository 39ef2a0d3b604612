#pragma once

#include "vmld/channel_model.hpp"
#include "vmld/policy.hpp"
#include "vmld/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vmld
{
    /// One L-MAC: a radio tuned on one channel.
    struct LmacConfig
    {
        ChannelId channel;
        GilbertElliottParams burst;
        TimingParams timing;
        double ack_loss_prob = 0.005;
        /// Time a copy sits in this L-MAC's queue before its transmission begins.
        double queue_delay_us = 0.0;
    };

    /// A multi-link device: one U-MAC and its L-MACs.
    struct MldConfig
    {
        std::string name;
        std::vector<LmacConfig> lmacs;
        std::vector<AciCoupling> colocated_aci;
        /// Fixed processing latency added to every measured latency.
        double platform_offset_us = 0.0;
        /// Spacing between consecutive enqueues of the same packet (single sender thread).
        double enqueue_gap_us = 0.0;
        /// AP-to-station wired return path delay of loopback copies.
        double eth_delay_us = 150.0;
    };

    struct ScenarioConfig
    {
        std::vector<MldConfig> mlds;
        std::vector<InterfererParams> interferers;
        UmacPolicy policy;
        std::int64_t period_us = 500'000;
        std::int64_t payload_bytes = 50;
        double bitrate_mbps = 54.0;
        std::int64_t sample_count = 1;
        std::uint64_t seed = 1;
        bool beacon_logging = false;
        bool loopback_logging = false;
        bool retransmission_enabled = false;
        int retry_limit = 7;
        std::size_t queue_cap = 1024;

        /// Throws ConfigError naming the offending field.
        void validate() const;

        /// Every L-MAC channel, in MLD then L-MAC order.
        std::vector<ChannelId> channels() const;
    };

    /// Parses the YAML scenario schema documented in README.md.
    ScenarioConfig parse_scenario(std::string_view text);
    ScenarioConfig load_scenario(const std::filesystem::path &path);
} // namespace vmld
