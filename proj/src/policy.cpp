#include "vmld/policy.hpp"

#include "vmld/channel_model.hpp"
#include "vmld/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

namespace vmld
{
    std::string_view to_string(PolicyKind kind)
    {
        switch (kind)
        {
        case PolicyKind::DuplicateAll:
            return "duplicate_all";
        case PolicyKind::BestLink:
            return "best_link";
        case PolicyKind::RoundRobin:
            return "round_robin";
        case PolicyKind::CancelOnAck:
            return "cancel_on_ack";
        }
        return "?";
    }

    PolicyKind parse_policy_kind(std::string_view text)
    {
        for (auto kind : {PolicyKind::DuplicateAll, PolicyKind::BestLink, PolicyKind::RoundRobin, PolicyKind::CancelOnAck})
        {
            if (text == to_string(kind))
                return kind;
        }
        throw ConfigError("policy.kind", "unknown policy '" + std::string(text) + "'");
    }

    void UmacPolicy::validate() const
    {
        if (kind != PolicyKind::BestLink)
            return;
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw ConfigError("policy.alpha", fmt::format("must lie in (0, 1], got {}", alpha));
        if (!(epsilon >= 0.0 && epsilon < 1.0))
            throw ConfigError("policy.epsilon", fmt::format("must lie in [0, 1), got {}", epsilon));
        if (!(initial_estimate >= 0.0 && initial_estimate <= 1.0))
            throw ConfigError("policy.initial_estimate", "must lie in [0, 1]");
    }

    std::vector<std::size_t> select_link_indices(const UmacPolicy &policy, LinkSelectorState &state, std::int64_t /*seq*/, Rng &rng)
    {
        const std::size_t n = state.estimates.size();
        if (n == 0)
            throw PreconditionError("select_links needs at least one link");

        switch (policy.kind)
        {
        case PolicyKind::DuplicateAll:
        case PolicyKind::CancelOnAck:
        {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            // Fisher-Yates.
            for (std::size_t i = n; i > 1; --i)
            {
                const auto j = static_cast<std::size_t>(rng.below(i));
                std::swap(order[i - 1], order[j]);
            }
            return order;
        }
        case PolicyKind::RoundRobin:
        {
            const std::size_t pick = state.round_robin_next % n;
            state.round_robin_next = (pick + 1) % n;
            return {pick};
        }
        case PolicyKind::BestLink:
        {
            const double u = rng.uniform01();
            if (u < policy.epsilon)
                return {static_cast<std::size_t>(rng.below(n))};
            const auto best = std::max_element(state.estimates.begin(), state.estimates.end());
            return {static_cast<std::size_t>(best - state.estimates.begin())};
        }
        }
        return {};
    }

    std::vector<ChannelId> select_links(const UmacPolicy &policy,
                                        LinkSelectorState &state,
                                        std::span<const ChannelId> links,
                                        std::int64_t seq,
                                        Rng &rng)
    {
        if (state.estimates.size() != links.size())
            throw PreconditionError("selector state does not match the link list");
        std::vector<ChannelId> out;
        for (auto idx : select_link_indices(policy, state, seq, rng))
            out.push_back(links[idx]);
        return out;
    }

    double update_link_estimate(double ewma, int outcome, double alpha)
    {
        return (1.0 - alpha) * ewma + alpha * static_cast<double>(outcome);
    }

    std::size_t resolve_cancel_on_ack(LinkQueues &queues, std::int64_t seq, std::size_t acked_link)
    {
        std::size_t removed = 0;
        for (std::size_t link = 0; link < queues.size(); ++link)
        {
            if (link == acked_link)
                continue;
            auto &q = queues[link];
            const auto before = q.size();
            std::erase_if(q, [seq](const QueuedFrame &f) { return f.seq == seq; });
            removed += before - q.size();
        }
        return removed;
    }
} // namespace vmld
