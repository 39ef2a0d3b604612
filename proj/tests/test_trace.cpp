#include "vmld/errors.hpp"
#include "vmld/rng.hpp"
#include "vmld/trace.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <streambuf>

using namespace vmld;

namespace
{
    const ChannelId kCh1 = ChannelId::make(Band::GHz2_4, 1);
    const ChannelId kCh5 = ChannelId::make(Band::GHz2_4, 5);

    LinkRecord ack(std::int64_t seq, ChannelId ch, std::int64_t t_send, double latency)
    {
        LinkRecord r;
        r.seq = seq;
        r.channel = ch;
        r.t_send_us = t_send;
        r.latency_us = quantize_latency(latency);
        r.t_done_us = t_send + std::llround(r.latency_us);
        return r;
    }

    TraceDataset make_dataset(std::vector<ChannelId> channels, std::vector<LinkRecord> records, std::int64_t samples)
    {
        TraceDataset ds;
        ds.meta.channels = std::move(channels);
        ds.meta.sample_count = samples;
        ds.records = std::move(records);
        canonicalize(ds);
        return ds;
    }

    TraceDataset random_dataset(std::size_t n, std::uint64_t seed)
    {
        Rng rng(seed);
        const std::vector<ChannelId> chans{kCh1, kCh5, ChannelId::make(Band::GHz5, 36), ChannelId::make(Band::GHz6, 37)};
        std::vector<LinkRecord> recs;
        std::int64_t seq = 0;
        while (recs.size() < n)
        {
            for (const auto &ch : chans)
            {
                if (recs.size() >= n)
                    break;
                auto r = ack(seq, ch, seq * 500000, rng.uniform(0.0, 90000.0));
                const auto kind = rng.below(4);
                if (kind == 1)
                {
                    r.event = EventKind::AckTimeout;
                    r.outcome = 0;
                }
                else if (kind == 2 && rng.bernoulli(0.3))
                {
                    r.event = EventKind::EthLoopback;
                }
                else if (kind == 3 && rng.bernoulli(0.1))
                {
                    r.event = EventKind::Beacon;
                    r.seq = static_cast<std::int64_t>(rng.below(1000));
                    r.latency_us = 0.0;
                    r.t_done_us = r.t_send_us;
                }
                recs.push_back(r);
            }
            ++seq;
        }
        return make_dataset(chans, recs, seq);
    }

    // Accepts `limit` bytes, then fails every write.
    class FailingBuf : public std::streambuf
    {
    public:
        explicit FailingBuf(std::size_t limit) : left_(limit) {}

    protected:
        int_type overflow(int_type ch) override
        {
            if (left_ == 0)
                return traits_type::eof();
            --left_;
            return ch;
        }

    private:
        std::size_t left_;
    };
} // namespace

TEST_CASE("channel ids parse, print and validate")
{
    CHECK(ChannelId::parse("2.4:13").to_string() == "2.4:13");
    CHECK(ChannelId::parse("5:36").band == Band::GHz5);
    CHECK(ChannelId::parse("6:1").band == Band::GHz6);
    CHECK_THROWS_AS(ChannelId::make(Band::GHz2_4, 0), ValidationError);
    CHECK_THROWS_AS(ChannelId::make(Band::GHz2_4, 15), ValidationError);
    CHECK_NOTHROW(ChannelId::make(Band::GHz2_4, 14));
    CHECK_NOTHROW(ChannelId::make(Band::GHz5, 165));
    CHECK_THROWS_AS(ChannelId::parse("7:1"), ValidationError);
    CHECK_THROWS_AS(ChannelId::parse("2.4"), ValidationError);
    CHECK_THROWS_AS(ChannelId::parse("2.4:x"), ValidationError);
    CHECK(kCh1 < kCh5);
}

TEST_CASE("single record serializes to one header block and one row")
{
    const auto ds = make_dataset({kCh1}, {ack(0, kCh1, 0, 108.0)}, 1);
    const auto text = write_trace_string(ds);
    std::istringstream in(text);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);)
        lines.push_back(l);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0].rfind("#vmld-trace v1; period_us=500000; payload_bytes=50; bitrate_mbps=54; channels=2.4:1", 0) == 0);
    CHECK(lines[1] == "seq,channel,t_send_us,t_done_us,outcome,latency_us,retries,event");
    CHECK(lines[2] == "0,2.4:1,0,108,1,108.000,0,ACK");
}

TEST_CASE("10000-record random dataset round-trips field by field")
{
    const auto ds = random_dataset(10000, 7);
    const auto text = write_trace_string(ds);
    const auto back = read_trace_string(text);
    CHECK(back.meta == ds.meta);
    REQUIRE(back.records.size() == ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i)
    {
        const auto &a = ds.records[i];
        const auto &b = back.records[i];
        CHECK(a.seq == b.seq);
        CHECK(a.channel == b.channel);
        CHECK(a.t_send_us == b.t_send_us);
        CHECK(a.t_done_us == b.t_done_us);
        CHECK(a.outcome == b.outcome);
        CHECK(a.latency_us == b.latency_us);
        CHECK(a.retries == b.retries);
        CHECK(a.event == b.event);
    }
    CHECK(write_trace_string(back) == text);
}

TEST_CASE("header with only the required fields is accepted")
{
    const std::string text = "#vmld-trace v1; period_us=1000; payload_bytes=50; bitrate_mbps=54; channels=2.4:1,2.4:5\n"
                             "seq,channel,t_send_us,t_done_us,outcome,latency_us,retries,event\n";
    const auto ds = read_trace_string(text);
    CHECK(ds.records.empty());
    CHECK(ds.meta.period_us == 1000);
    CHECK(ds.meta.channels == std::vector<ChannelId>{kCh1, kCh5});
}

TEST_CASE("invariant violations are reported with the field name")
{
    const std::string head = "#vmld-trace v1; period_us=1000; payload_bytes=50; bitrate_mbps=54; channels=2.4:1\n"
                             "seq,channel,t_send_us,t_done_us,outcome,latency_us,retries,event\n";
    auto field_of = [&](const std::string &row) {
        try
        {
            read_trace_string(head + row + "\n");
        }
        catch (const ValidationError &e)
        {
            return e.field();
        }
        return std::string("<none>");
    };
    CHECK(field_of("0,2.4:1,0,400,1,400.000,0,ACKTIMEOUT") == "outcome");
    CHECK(field_of("0,2.4:1,0,108,0,108.000,0,ACK") == "outcome");
    CHECK(field_of("0,2.4:1,10,5,1,-5.000,0,ACK") == "latency_us");
    CHECK(field_of("0,2.4:1,0,108,1,108.000,1,ACK") == "retries");
    CHECK(field_of("0,2.4:5,0,108,1,108.000,0,ACK") == "channel");
    CHECK(field_of("0,2.4:1,0,200,1,108.000,0,ACK") == "t_done_us");
    CHECK(field_of("0,2.4:1,0,108,1,108.000,0,ACK") == "<none>");
}

TEST_CASE("malformed rows raise a parse error with the line number")
{
    const std::string head = "#vmld-trace v1; period_us=1000; payload_bytes=50; bitrate_mbps=54; channels=2.4:1\n"
                             "seq,channel,t_send_us,t_done_us,outcome,latency_us,retries,event\n"
                             "0,2.4:1,0,108,1,108.000,0,ACK\n";
    for (const std::string bad : {"1,2.4:1,500,608,1,108.0,0,ACK", "1,2.4:1,500,608,1,108.000,0", "x,2.4:1,500,608,1,108.000,0,ACK",
                                  "1,2.4:1,500,608,1,108.000,0,NOPE"})
    {
        CAPTURE(bad);
        try
        {
            read_trace_string(head + bad + "\n");
            FAIL("expected an error");
        }
        catch (const ParseError &e)
        {
            CHECK(e.line() == 4);
        }
        catch (const ValidationError &e)
        {
            // Unknown event names are a value error rather than a grammar error.
            CHECK(std::string(e.what()).find("line 4") != std::string::npos);
        }
    }
    CHECK_THROWS_AS(read_trace_string(""), ParseError);
    CHECK_THROWS_AS(read_trace_string("#vmld-trace v1; period_us=1000\nseq\n"), ParseError);
}

TEST_CASE("duplicate data records for one seq are rejected")
{
    auto ds = make_dataset({kCh1}, {ack(0, kCh1, 0, 108.0), ack(0, kCh1, 10, 108.0)}, 2);
    CHECK_THROWS_AS(validate_dataset(ds), ValidationError);
    ds.records[1].event = EventKind::Beacon;
    ds.records[1].latency_us = 0;
    ds.records[1].t_done_us = ds.records[1].t_send_us;
    CHECK_NOTHROW(validate_dataset(ds));
}

TEST_CASE("write failures carry the byte offset")
{
    const auto ds = make_dataset({kCh1}, {ack(0, kCh1, 0, 108.0), ack(1, kCh1, 500000, 120.5)}, 2);
    const auto text = write_trace_string(ds);
    const auto first_line = text.find('\n') + 1;
    FailingBuf buf(first_line + 3);
    std::ostream out(&buf);
    try
    {
        write_trace(ds, out);
        FAIL("expected IoError");
    }
    catch (const IoError &e)
    {
        CHECK(e.byte_offset() == first_line);
    }
}

TEST_CASE("align_channels keeps the common seqs")
{
    SUBCASE("identical seq sets are unchanged")
    {
        const auto ds = make_dataset({kCh1, kCh5}, {ack(0, kCh1, 0, 100), ack(0, kCh5, 0, 100), ack(1, kCh1, 5, 100), ack(1, kCh5, 5, 100)}, 2);
        CHECK(align_channels(ds) == ds);
        CHECK(is_aligned(ds));
    }
    SUBCASE("partial overlap")
    {
        std::vector<LinkRecord> recs;
        for (int s : {0, 1, 2})
            recs.push_back(ack(s, kCh1, s * 10, 100));
        for (int s : {1, 2, 3})
            recs.push_back(ack(s, kCh5, s * 10, 100));
        const auto ds = make_dataset({kCh1, kCh5}, recs, 4);
        CHECK_FALSE(is_aligned(ds));
        const auto al = align_channels(ds);
        CHECK(is_aligned(al));
        for (const auto &ch : {kCh1, kCh5})
        {
            std::vector<std::int64_t> seqs;
            for (const auto &r : data_records(al, ch))
                seqs.push_back(r.seq);
            CHECK(seqs == std::vector<std::int64_t>{1, 2});
        }
    }
    SUBCASE("empty intersection gives an empty valid dataset")
    {
        const auto ds = make_dataset({kCh1, kCh5}, {ack(0, kCh1, 0, 100), ack(1, kCh5, 10, 100)}, 2);
        const auto al = align_channels(ds);
        CHECK(al.records.empty());
        CHECK_NOTHROW(validate_dataset(al));
    }
}

TEST_CASE("align_channels matches a set-intersection oracle on random drops")
{
    Rng rng(99);
    const std::vector<ChannelId> chans{kCh1, kCh5, ChannelId::make(Band::GHz2_4, 9)};
    std::vector<LinkRecord> recs;
    std::map<ChannelId, std::set<std::int64_t>> kept;
    for (std::int64_t s = 0; s < 1000; ++s)
    {
        for (const auto &ch : chans)
        {
            if (rng.bernoulli(0.05))
                continue;
            recs.push_back(ack(s, ch, s * 1000, 100 + rng.uniform(0, 50)));
            kept[ch].insert(s);
        }
    }
    const auto ds = make_dataset(chans, recs, 1000);

    std::set<std::int64_t> common = kept[chans[0]];
    for (const auto &ch : chans)
    {
        std::set<std::int64_t> next;
        std::set_intersection(common.begin(), common.end(), kept[ch].begin(), kept[ch].end(), std::inserter(next, next.end()));
        common = next;
    }

    const auto al = align_channels(ds);
    CHECK(al.records.size() == common.size() * chans.size());
    CHECK(al.meta.sample_count == static_cast<std::int64_t>(common.size()));
    for (const auto &ch : chans)
    {
        std::set<std::int64_t> got;
        for (const auto &r : data_records(al, ch))
            got.insert(r.seq);
        CHECK(got == common);
    }
    CHECK(align_channels(al) == al);
}
