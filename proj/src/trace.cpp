#include "vmld/trace.hpp"

#include "vmld/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace vmld
{
    namespace
    {
        constexpr std::string_view kMagic = "#vmld-trace v1";
        constexpr std::string_view kColumns = "seq,channel,t_send_us,t_done_us,outcome,latency_us,retries,event";

        std::string_view band_text(Band band)
        {
            switch (band)
            {
            case Band::GHz2_4:
                return "2.4";
            case Band::GHz5:
                return "5";
            case Band::GHz6:
                return "6";
            }
            return "?";
        }

        int event_rank(EventKind kind) { return static_cast<int>(kind); }

        std::vector<std::string_view> split(std::string_view text, char sep)
        {
            std::vector<std::string_view> parts;
            std::size_t start = 0;
            while (true)
            {
                const auto pos = text.find(sep, start);
                if (pos == std::string_view::npos)
                {
                    parts.push_back(text.substr(start));
                    return parts;
                }
                parts.push_back(text.substr(start, pos - start));
                start = pos + 1;
            }
        }

        template <typename T>
        bool parse_number(std::string_view text, T &value)
        {
            if (text.empty())
                return false;
            const char *first = text.data();
            const char *last = text.data() + text.size();
            auto [ptr, ec] = std::from_chars(first, last, value);
            return ec == std::errc{} && ptr == last;
        }

        // Latency column: optional '-', digits, '.', exactly three digits.
        bool well_formed_latency(std::string_view text)
        {
            if (!text.empty() && text.front() == '-')
                text.remove_prefix(1);
            const auto dot = text.find('.');
            if (dot == std::string_view::npos || dot == 0 || text.size() - dot - 1 != 3)
                return false;
            return std::all_of(text.begin(), text.end(), [](char c) { return c == '.' || (c >= '0' && c <= '9'); }) &&
                   text.find('.', dot + 1) == std::string_view::npos;
        }

        std::string header_line(const AcquisitionMeta &meta)
        {
            std::string channels;
            for (std::size_t i = 0; i < meta.channels.size(); ++i)
            {
                if (i > 0)
                    channels += ',';
                channels += meta.channels[i].to_string();
            }
            return fmt::format("{}; period_us={}; payload_bytes={}; bitrate_mbps={}; channels={}; sample_count={}; "
                               "retransmission_enabled={}; backoff_fixed_zero={}; counter_freq_hz={}",
                               kMagic, meta.period_us, meta.payload_bytes, meta.bitrate_mbps, channels, meta.sample_count,
                               meta.retransmission_enabled ? 1 : 0, meta.backoff_fixed_zero ? 1 : 0, meta.counter_freq_hz);
        }

        std::string record_line(const LinkRecord &r)
        {
            return fmt::format("{},{},{},{},{},{:.3f},{},{}", r.seq, r.channel.to_string(), r.t_send_us, r.t_done_us,
                               r.outcome, r.latency_us, r.retries, to_string(r.event));
        }

        bool parse_flag(std::string_view text, bool &flag)
        {
            if (text == "0" || text == "1")
            {
                flag = text == "1";
                return true;
            }
            return false;
        }

        AcquisitionMeta parse_header(std::string_view line, bool &has_sample_count)
        {
            auto fields = split(line, ';');
            if (fields.empty() || fields[0] != kMagic)
                throw ParseError(1, "missing '#vmld-trace v1' header");

            AcquisitionMeta meta;
            std::set<std::string_view> seen;
            has_sample_count = false;
            for (std::size_t i = 1; i < fields.size(); ++i)
            {
                auto field = fields[i];
                if (field.empty() || field.front() != ' ')
                    throw ParseError(1, "header fields must be separated by '; '");
                field.remove_prefix(1);
                const auto eq = field.find('=');
                if (eq == std::string_view::npos)
                    throw ParseError(1, "header field without '=': " + std::string(field));
                const auto key = field.substr(0, eq);
                const auto value = field.substr(eq + 1);
                if (!seen.insert(key).second)
                    throw ParseError(1, "duplicate header field " + std::string(key));

                bool ok = true;
                if (key == "period_us")
                    ok = parse_number(value, meta.period_us);
                else if (key == "payload_bytes")
                    ok = parse_number(value, meta.payload_bytes);
                else if (key == "bitrate_mbps")
                    ok = parse_number(value, meta.bitrate_mbps);
                else if (key == "channels")
                {
                    if (!value.empty())
                    {
                        for (auto ch : split(value, ','))
                        {
                            try
                            {
                                meta.channels.push_back(ChannelId::parse(ch));
                            }
                            catch (const Error &e)
                            {
                                throw ParseError(1, e.what());
                            }
                        }
                    }
                }
                else if (key == "sample_count")
                {
                    ok = parse_number(value, meta.sample_count);
                    has_sample_count = true;
                }
                else if (key == "retransmission_enabled")
                    ok = parse_flag(value, meta.retransmission_enabled);
                else if (key == "backoff_fixed_zero")
                    ok = parse_flag(value, meta.backoff_fixed_zero);
                else if (key == "counter_freq_hz")
                    ok = parse_number(value, meta.counter_freq_hz);
                else
                    throw ParseError(1, "unknown header field " + std::string(key));

                if (!ok)
                    throw ParseError(1, "bad value for " + std::string(key) + ": '" + std::string(value) + "'");
            }
            for (auto required : {"period_us", "payload_bytes", "bitrate_mbps", "channels"})
            {
                if (!seen.contains(required))
                    throw ParseError(1, std::string("missing header field ") + required);
            }
            if (meta.period_us <= 0)
                throw ValidationError("period_us", "must be > 0");
            if (meta.payload_bytes <= 0)
                throw ValidationError("payload_bytes", "must be > 0");
            return meta;
        }

        LinkRecord parse_row(std::string_view line, std::size_t line_no)
        {
            const auto cols = split(line, ',');
            if (cols.size() != 8)
                throw ParseError(line_no, fmt::format("expected 8 columns, got {}", cols.size()));

            LinkRecord r;
            if (!parse_number(cols[0], r.seq))
                throw ParseError(line_no, "bad seq");
            try
            {
                r.channel = ChannelId::parse(cols[1]);
            }
            catch (const Error &e)
            {
                throw ParseError(line_no, e.what());
            }
            if (!parse_number(cols[2], r.t_send_us))
                throw ParseError(line_no, "bad t_send_us");
            if (!parse_number(cols[3], r.t_done_us))
                throw ParseError(line_no, "bad t_done_us");
            if (!parse_number(cols[4], r.outcome))
                throw ParseError(line_no, "bad outcome");
            if (!well_formed_latency(cols[5]) || !parse_number(cols[5], r.latency_us))
                throw ParseError(line_no, "latency_us must carry exactly 3 decimals");
            if (!parse_number(cols[6], r.retries))
                throw ParseError(line_no, "bad retries");
            try
            {
                r.event = parse_event_kind(cols[7]);
            }
            catch (const Error &e)
            {
                throw ParseError(line_no, e.what());
            }
            return r;
        }
    } // namespace

    ChannelId ChannelId::make(Band band, int number)
    {
        if (number < 1)
            throw ValidationError("channel", fmt::format("channel number must be >= 1, got {}", number));
        if (band == Band::GHz2_4 && number > 14)
            throw ValidationError("channel", fmt::format("2.4 GHz channel number must be <= 14, got {}", number));
        return ChannelId{band, number};
    }

    ChannelId ChannelId::parse(std::string_view text)
    {
        const auto colon = text.find(':');
        if (colon == std::string_view::npos)
            throw ValidationError("channel", "expected '<band>:<number>', got '" + std::string(text) + "'");
        const auto band_part = text.substr(0, colon);
        Band band;
        if (band_part == "2.4")
            band = Band::GHz2_4;
        else if (band_part == "5")
            band = Band::GHz5;
        else if (band_part == "6")
            band = Band::GHz6;
        else
            throw ValidationError("channel", "unknown band '" + std::string(band_part) + "'");
        int number = 0;
        if (!parse_number(text.substr(colon + 1), number))
            throw ValidationError("channel", "bad channel number in '" + std::string(text) + "'");
        return make(band, number);
    }

    std::string ChannelId::to_string() const { return fmt::format("{}:{}", band_text(band), number); }

    std::string_view to_string(EventKind kind)
    {
        switch (kind)
        {
        case EventKind::Ack:
            return "ACK";
        case EventKind::AckTimeout:
            return "ACKTIMEOUT";
        case EventKind::Beacon:
            return "BEACON";
        case EventKind::EthLoopback:
            return "ETH";
        }
        return "?";
    }

    EventKind parse_event_kind(std::string_view text)
    {
        if (text == "ACK")
            return EventKind::Ack;
        if (text == "ACKTIMEOUT")
            return EventKind::AckTimeout;
        if (text == "BEACON")
            return EventKind::Beacon;
        if (text == "ETH")
            return EventKind::EthLoopback;
        throw ValidationError("event", "unknown event '" + std::string(text) + "'");
    }

    double quantize_latency(double latency_us) noexcept
    {
        return static_cast<double>(std::llround(latency_us * 1000.0)) / 1000.0;
    }

    void validate_record(const LinkRecord &r, const AcquisitionMeta &meta)
    {
        if (r.seq < 0)
            throw ValidationError("seq", "must be >= 0");
        if (std::find(meta.channels.begin(), meta.channels.end(), r.channel) == meta.channels.end())
            throw ValidationError("channel", r.channel.to_string() + " is not a configured channel");
        if (r.t_send_us < 0)
            throw ValidationError("t_send_us", "must be >= 0");
        if (!(r.latency_us >= 0.0))
            throw ValidationError("latency_us", fmt::format("must be >= 0, got {:.3f}", r.latency_us));
        if (r.t_done_us - r.t_send_us != std::llround(r.latency_us))
            throw ValidationError("t_done_us", fmt::format("t_done_us - t_send_us = {} disagrees with latency_us = {:.3f}",
                                                           r.t_done_us - r.t_send_us, r.latency_us));
        if (r.outcome != 0 && r.outcome != 1)
            throw ValidationError("outcome", "must be 0 or 1");
        const int expected = r.event == EventKind::AckTimeout ? 0 : 1;
        if (r.outcome != expected)
            throw ValidationError("outcome", fmt::format("outcome={} contradicts event {}", r.outcome, to_string(r.event)));
        if (r.retries < 0)
            throw ValidationError("retries", "must be >= 0");
        if (!meta.retransmission_enabled && r.retries != 0)
            throw ValidationError("retries", "must be 0 when retransmission is disabled");
    }

    void validate_dataset(const TraceDataset &dataset)
    {
        const auto &meta = dataset.meta;
        if (meta.period_us <= 0)
            throw ValidationError("period_us", "must be > 0");
        if (meta.payload_bytes <= 0)
            throw ValidationError("payload_bytes", "must be > 0");
        if (meta.sample_count < 0)
            throw ValidationError("sample_count", "must be >= 0");

        std::set<std::tuple<ChannelId, std::int64_t, bool>> seen;
        std::map<ChannelId, std::int64_t> data_count;
        for (const auto &r : dataset.records)
        {
            validate_record(r, meta);
            if (r.event == EventKind::Beacon)
                continue;
            if (!seen.emplace(r.channel, r.seq, r.is_data()).second)
                throw ValidationError("seq", fmt::format("duplicate {} record for seq {} on {}",
                                                         r.is_data() ? "data" : "loopback", r.seq, r.channel.to_string()));
            if (r.is_data())
                ++data_count[r.channel];
        }
        for (const auto &[channel, count] : data_count)
        {
            if (count > meta.sample_count)
                throw ValidationError("sample_count", fmt::format("{} carries {} data records but sample_count is {}",
                                                                  channel.to_string(), count, meta.sample_count));
        }
    }

    void canonicalize(TraceDataset &dataset)
    {
        std::stable_sort(dataset.records.begin(), dataset.records.end(), [](const LinkRecord &a, const LinkRecord &b) {
            return std::tuple(a.t_send_us, a.channel, event_rank(a.event), a.seq) <
                   std::tuple(b.t_send_us, b.channel, event_rank(b.event), b.seq);
        });
    }

    std::vector<LinkRecord> data_records(const TraceDataset &dataset, const ChannelId &channel)
    {
        std::vector<LinkRecord> out;
        for (const auto &r : dataset.records)
        {
            if (r.is_data() && r.channel == channel)
                out.push_back(r);
        }
        std::stable_sort(out.begin(), out.end(), [](const LinkRecord &a, const LinkRecord &b) { return a.seq < b.seq; });
        return out;
    }

    void write_trace(const TraceDataset &dataset, std::ostream &out)
    {
        validate_dataset(dataset);

        std::vector<const LinkRecord *> order;
        order.reserve(dataset.records.size());
        for (const auto &r : dataset.records)
            order.push_back(&r);
        std::stable_sort(order.begin(), order.end(), [](const LinkRecord *a, const LinkRecord *b) {
            return std::tuple(a->t_send_us, a->channel, event_rank(a->event), a->seq) <
                   std::tuple(b->t_send_us, b->channel, event_rank(b->event), b->seq);
        });

        std::uint64_t offset = 0;
        auto emit = [&](const std::string &line) {
            out.write(line.data(), static_cast<std::streamsize>(line.size()));
            out.put('\n');
            if (!out)
                throw IoError(offset, "trace write failed");
            offset += line.size() + 1;
        };

        emit(header_line(dataset.meta));
        emit(std::string(kColumns));
        for (const auto *r : order)
            emit(record_line(*r));
        out.flush();
        if (!out)
            throw IoError(offset, "trace flush failed");
    }

    std::string write_trace_string(const TraceDataset &dataset)
    {
        std::ostringstream out;
        write_trace(dataset, out);
        return out.str();
    }

    TraceDataset read_trace(std::istream &in)
    {
        std::string line;
        std::size_t line_no = 0;
        auto next_line = [&]() -> bool {
            if (!std::getline(in, line))
                return false;
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            return true;
        };

        if (!next_line())
            throw ParseError(1, "empty trace");
        bool has_sample_count = false;
        TraceDataset dataset;
        dataset.meta = parse_header(line, has_sample_count);

        if (!next_line() || line != kColumns)
            throw ParseError(2, "expected column header '" + std::string(kColumns) + "'");

        while (next_line())
        {
            auto record = parse_row(line, line_no);
            try
            {
                validate_record(record, dataset.meta);
            }
            catch (const ValidationError &e)
            {
                throw ValidationError(e.field(), fmt::format("line {}: {}", line_no, e.what()));
            }
            dataset.records.push_back(record);
        }

        if (!has_sample_count)
        {
            std::map<ChannelId, std::int64_t> counts;
            for (const auto &r : dataset.records)
            {
                if (r.is_data())
                    ++counts[r.channel];
            }
            for (const auto &[_, count] : counts)
                dataset.meta.sample_count = std::max(dataset.meta.sample_count, count);
        }

        validate_dataset(dataset);
        canonicalize(dataset);
        return dataset;
    }

    TraceDataset read_trace_string(std::string_view text)
    {
        std::istringstream in{std::string(text)};
        return read_trace(in);
    }

    namespace
    {
        std::map<ChannelId, std::set<std::int64_t>> seq_sets(const TraceDataset &dataset)
        {
            std::map<ChannelId, std::set<std::int64_t>> sets;
            for (const auto &ch : dataset.meta.channels)
                sets[ch];
            for (const auto &r : dataset.records)
            {
                if (r.is_data())
                    sets[r.channel].insert(r.seq);
            }
            return sets;
        }
    } // namespace

    TraceDataset align_channels(const TraceDataset &dataset)
    {
        if (dataset.meta.channels.empty())
            return dataset;

        const auto sets = seq_sets(dataset);
        std::set<std::int64_t> common = sets.begin()->second;
        for (const auto &[_, seqs] : sets)
        {
            std::set<std::int64_t> next;
            std::set_intersection(common.begin(), common.end(), seqs.begin(), seqs.end(), std::inserter(next, next.end()));
            common = std::move(next);
        }

        TraceDataset out;
        out.meta = dataset.meta;
        out.meta.sample_count = static_cast<std::int64_t>(common.size());
        for (const auto &r : dataset.records)
        {
            if (r.event == EventKind::Beacon || common.contains(r.seq))
                out.records.push_back(r);
        }
        return out;
    }

    bool is_aligned(const TraceDataset &dataset)
    {
        const auto sets = seq_sets(dataset);
        if (sets.empty())
            return true;
        const auto &first = sets.begin()->second;
        return std::all_of(sets.begin(), sets.end(), [&](const auto &kv) { return kv.second == first; });
    }
} // namespace vmld
