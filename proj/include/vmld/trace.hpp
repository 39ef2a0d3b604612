#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vmld
{
    enum class Band : std::uint8_t
    {
        GHz2_4,
        GHz5,
        GHz6,
    };

    /// A Wi-Fi channel: band plus channel index within the band.
    struct ChannelId
    {
        Band band = Band::GHz2_4;
        int number = 1;

        /// Validating constructor; throws ValidationError on a bad index.
        static ChannelId make(Band band, int number);

        /// Parses "<band>:<number>", e.g. "2.4:13" or "5:36".
        static ChannelId parse(std::string_view text);

        std::string to_string() const;

        friend auto operator<=>(const ChannelId &, const ChannelId &) = default;
    };

    enum class EventKind : std::uint8_t
    {
        Ack,
        AckTimeout,
        Beacon,
        EthLoopback,
    };

    std::string_view to_string(EventKind kind);
    EventKind parse_event_kind(std::string_view text);

    /// One observation of one packet on one channel.
    ///
    /// `t_done_us - t_send_us` is the latency rounded to the microsecond
    /// event clock; `latency_us` keeps sub-microsecond resolution
    /// (quantized to 1 ns, the resolution of the trace file).
    struct LinkRecord
    {
        std::int64_t seq = 0;
        ChannelId channel;
        std::int64_t t_send_us = 0;
        std::int64_t t_done_us = 0;
        int outcome = 1;
        double latency_us = 0.0;
        int retries = 0;
        EventKind event = EventKind::Ack;

        /// Ack/AckTimeout records; the only ones counted by FDR and latency statistics.
        bool is_data() const noexcept { return event == EventKind::Ack || event == EventKind::AckTimeout; }

        friend bool operator==(const LinkRecord &, const LinkRecord &) = default;
    };

    /// Rounds a latency to the 3-decimal resolution of the trace file.
    double quantize_latency(double latency_us) noexcept;

    struct AcquisitionMeta
    {
        std::int64_t period_us = 500'000;
        std::int64_t payload_bytes = 50;
        double bitrate_mbps = 54.0;
        bool retransmission_enabled = false;
        bool backoff_fixed_zero = true;
        double counter_freq_hz = 0.0;
        std::vector<ChannelId> channels;
        /// Packets generated per channel; no channel carries more data records.
        std::int64_t sample_count = 0;

        friend bool operator==(const AcquisitionMeta &, const AcquisitionMeta &) = default;
    };

    struct TraceDataset
    {
        AcquisitionMeta meta;
        /// Canonical order: (t_send_us, channel, event, seq).
        std::vector<LinkRecord> records;

        friend bool operator==(const TraceDataset &, const TraceDataset &) = default;
    };

    /// Checks one record against the record invariants; throws ValidationError naming the field.
    void validate_record(const LinkRecord &record, const AcquisitionMeta &meta);

    /// Checks every dataset invariant (records, channel membership, seq uniqueness).
    void validate_dataset(const TraceDataset &dataset);

    /// Sorts records into canonical order.
    void canonicalize(TraceDataset &dataset);

    /// Data records of one channel, ordered by seq.
    std::vector<LinkRecord> data_records(const TraceDataset &dataset, const ChannelId &channel);

    void write_trace(const TraceDataset &dataset, std::ostream &out);
    std::string write_trace_string(const TraceDataset &dataset);

    TraceDataset read_trace(std::istream &in);
    TraceDataset read_trace_string(std::string_view text);

    /// Restricts data (and loopback) records to the seqs present on every configured channel.
    TraceDataset align_channels(const TraceDataset &dataset);

    /// True when every configured channel carries the same set of data seqs.
    bool is_aligned(const TraceDataset &dataset);
} // namespace vmld
