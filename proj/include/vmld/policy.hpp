#pragma once

#include "vmld/rng.hpp"
#include "vmld/trace.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace vmld
{
    struct InterfererActivity;

    enum class PolicyKind : std::uint8_t
    {
        /// Every packet on every L-MAC, enqueue order shuffled per packet.
        DuplicateAll,
        /// One L-MAC per packet: argmax of an EWMA delivery estimate, epsilon-greedy.
        BestLink,
        RoundRobin,
        /// Like DuplicateAll, but queued copies are dropped once any copy is acknowledged.
        CancelOnAck,
    };

    std::string_view to_string(PolicyKind kind);
    PolicyKind parse_policy_kind(std::string_view text);

    /// U-MAC steering policy.
    struct UmacPolicy
    {
        PolicyKind kind = PolicyKind::DuplicateAll;
        double alpha = 0.1;
        double epsilon = 0.0;
        /// Starting EWMA for every link under BestLink.
        double initial_estimate = 1.0;

        void validate() const;
    };

    /// Per-MLD bookkeeping the policy needs between packets.
    struct LinkSelectorState
    {
        std::vector<double> estimates;
        std::size_t round_robin_next = 0;

        explicit LinkSelectorState(std::size_t links = 0, double initial = 1.0) : estimates(links, initial) {}
    };

    /// Picks the L-MACs for one packet, as indices into the MLD's link list, in enqueue order.
    std::vector<std::size_t> select_link_indices(const UmacPolicy &policy, LinkSelectorState &state, std::int64_t seq, Rng &rng);

    std::vector<ChannelId> select_links(const UmacPolicy &policy,
                                        LinkSelectorState &state,
                                        std::span<const ChannelId> links,
                                        std::int64_t seq,
                                        Rng &rng);

    /// (1 - alpha) * ewma + alpha * outcome.
    double update_link_estimate(double ewma, int outcome, double alpha);

    /// A copy waiting in an L-MAC queue; it leaves the queue when its transmission begins.
    struct QueuedFrame
    {
        std::int64_t seq = 0;
        std::int64_t t_send_us = 0;
        std::shared_ptr<const std::vector<InterfererActivity>> activity;
    };

    using LinkQueues = std::vector<std::deque<QueuedFrame>>;

    /// Drops `seq` from every queue except the acknowledging link's.
    /// Copies already in flight are not in a queue and stay untouched.
    /// Returns the number of copies removed.
    std::size_t resolve_cancel_on_ack(LinkQueues &queues, std::int64_t seq, std::size_t acked_link);
} // namespace vmld
