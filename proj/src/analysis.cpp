#include "vmld/analysis.hpp"

#include "vmld/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vmld
{
    double fdr(std::span<const std::uint8_t> outcomes)
    {
        if (outcomes.empty())
            throw PreconditionError("fdr of an empty sequence");
        std::size_t delivered = 0;
        for (auto x : outcomes)
            delivered += x != 0 ? 1 : 0;
        return static_cast<double>(delivered) / static_cast<double>(outcomes.size());
    }

    std::vector<double> moving_fdr(std::span<const std::uint8_t> outcomes, std::size_t window)
    {
        if (window == 0)
            throw PreconditionError("moving_fdr window must be >= 1");
        if (window > outcomes.size())
            throw PreconditionError(fmt::format("moving_fdr window {} exceeds sequence length {}", window, outcomes.size()));

        // Integer running sum: every window mean is exact up to the final division.
        std::size_t sum = 0;
        for (std::size_t i = 0; i < window; ++i)
            sum += outcomes[i] != 0 ? 1 : 0;

        std::vector<double> out;
        out.reserve(outcomes.size() - window + 1);
        const double w = static_cast<double>(window);
        out.push_back(static_cast<double>(sum) / w);
        for (std::size_t k = window; k < outcomes.size(); ++k)
        {
            sum += outcomes[k] != 0 ? 1 : 0;
            sum -= outcomes[k - window] != 0 ? 1 : 0;
            out.push_back(static_cast<double>(sum) / w);
        }
        return out;
    }

    double pearson(std::span<const double> a, std::span<const double> b)
    {
        if (a.size() != b.size())
            throw LengthMismatchError(fmt::format("pearson needs equal lengths, got {} and {}", a.size(), b.size()));
        if (a.size() < 2)
            throw LengthMismatchError("pearson needs at least 2 samples");

        const double n = static_cast<double>(a.size());
        const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
        const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;

        double cov = 0.0;
        double var_a = 0.0;
        double var_b = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
        {
            const double da = a[i] - mean_a;
            const double db = b[i] - mean_b;
            cov += da * db;
            var_a += da * da;
            var_b += db * db;
        }
        if (var_a == 0.0 || var_b == 0.0)
            throw ZeroVarianceError("pearson is undefined for a constant series");
        const double rho = cov / (std::sqrt(var_a) * std::sqrt(var_b));
        return std::clamp(rho, -1.0, 1.0);
    }

    std::string_view to_string(Metric metric) { return metric == Metric::Outcome ? "outcome" : "latency"; }

    CorrelationMatrix correlation_matrix(const TraceDataset &dataset, Metric metric)
    {
        const auto &channels = dataset.meta.channels;
        if (channels.size() < 2)
            throw PreconditionError("correlation needs at least 2 channels");
        if (!is_aligned(dataset))
            throw PreconditionError("correlation needs a channel-aligned dataset (apply align_channels first)");

        std::vector<std::vector<double>> series;
        series.reserve(channels.size());
        for (const auto &ch : channels)
        {
            std::vector<double> values;
            for (const auto &r : data_records(dataset, ch))
                values.push_back(metric == Metric::Outcome ? static_cast<double>(r.outcome) : r.latency_us);
            series.push_back(std::move(values));
        }

        CorrelationMatrix m;
        m.channels = channels;
        const std::size_t n = channels.size();
        m.values.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
        {
            m.values[i * n + i] = 1.0;
            for (std::size_t j = i + 1; j < n; ++j)
            {
                double rho = 0.0;
                try
                {
                    rho = pearson(series[i], series[j]);
                }
                catch (const ZeroVarianceError &e)
                {
                    throw ZeroVarianceError(fmt::format("{} correlation of ({}, {}): {}", to_string(metric), channels[i].to_string(),
                                                        channels[j].to_string(), e.what()));
                }
                catch (const LengthMismatchError &e)
                {
                    throw LengthMismatchError(fmt::format("{} correlation of ({}, {}): {}", to_string(metric),
                                                          channels[i].to_string(), channels[j].to_string(), e.what()));
                }
                m.values[i * n + j] = rho;
                m.values[j * n + i] = rho;
            }
        }
        return m;
    }

    std::string_view to_string(Subset subset)
    {
        switch (subset)
        {
        case Subset::All:
            return "all";
        case Subset::Acked:
            return "acked";
        case Subset::NotAcked:
            return "not acked";
        }
        return "?";
    }

    double nearest_rank(std::span<const double> sorted, double p)
    {
        if (sorted.empty())
            throw PreconditionError("percentile of an empty sample");
        const double n = static_cast<double>(sorted.size());
        // The tolerance keeps exact products such as 0.95 * 20 from rounding up a rank.
        auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
        rank = std::clamp<std::size_t>(rank, 1, sorted.size());
        return sorted[rank - 1];
    }

    StatsSummary summarize_latencies(std::span<const double> latencies, std::size_t total, Subset subset)
    {
        if (latencies.empty())
            throw EmptySubsetError(fmt::format("subset '{}' is empty", to_string(subset)));

        std::vector<double> sorted(latencies.begin(), latencies.end());
        std::sort(sorted.begin(), sorted.end());

        const double n = static_cast<double>(sorted.size());
        const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : sorted)
            ss += (v - mean) * (v - mean);

        StatsSummary s;
        s.subset = subset;
        s.count = sorted.size();
        s.fraction_pct = total == 0 ? 0.0 : 100.0 * n / static_cast<double>(total);
        s.mean = mean;
        s.std_dev = std::sqrt(ss / n);
        s.min = sorted.front();
        s.max = sorted.back();
        s.p5 = nearest_rank(sorted, 0.05);
        s.p10 = nearest_rank(sorted, 0.10);
        s.p95 = nearest_rank(sorted, 0.95);
        s.p99 = nearest_rank(sorted, 0.99);
        s.p999 = nearest_rank(sorted, 0.999);
        return s;
    }

    std::vector<double> channel_latencies(const TraceDataset &dataset, const ChannelId &channel, Subset subset)
    {
        std::vector<double> out;
        for (const auto &r : data_records(dataset, channel))
        {
            if (subset == Subset::All || (subset == Subset::Acked) == (r.outcome == 1))
                out.push_back(r.latency_us);
        }
        return out;
    }

    std::vector<std::uint8_t> channel_outcomes(const TraceDataset &dataset, const ChannelId &channel)
    {
        std::vector<std::uint8_t> out;
        for (const auto &r : data_records(dataset, channel))
            out.push_back(static_cast<std::uint8_t>(r.outcome));
        return out;
    }

    StatsSummary latency_stats(const TraceDataset &dataset, const ChannelId &channel, Subset subset)
    {
        const auto all = channel_latencies(dataset, channel, Subset::All);
        if (subset == Subset::All)
            return summarize_latencies(all, all.size(), subset);
        return summarize_latencies(channel_latencies(dataset, channel, subset), all.size(), subset);
    }

    DistributionCurve pdf_histogram(std::span<const double> latencies,
                                    double bin_width_us,
                                    std::optional<std::pair<double, double>> range)
    {
        if (!(bin_width_us > 0.0))
            throw PreconditionError("bin width must be > 0");
        if (latencies.empty())
            throw PreconditionError("histogram of an empty sample");

        double lo = 0.0;
        std::size_t bins = 0;
        if (range)
        {
            if (!(range->second > range->first))
                throw PreconditionError("histogram range needs hi > lo");
            lo = range->first;
            bins = static_cast<std::size_t>(std::ceil((range->second - range->first) / bin_width_us));
        }
        else
        {
            const auto [mn, mx] = std::minmax_element(latencies.begin(), latencies.end());
            lo = std::floor(*mn / bin_width_us) * bin_width_us;
            bins = static_cast<std::size_t>(std::floor((*mx - lo) / bin_width_us)) + 1;
        }
        bins = std::max<std::size_t>(bins, 1);
        const double hi = range ? range->second : lo + static_cast<double>(bins) * bin_width_us;

        DistributionCurve curve;
        curve.kind = CurveKind::Pdf;
        curve.bin_width = bin_width_us;
        std::vector<std::size_t> counts(bins, 0);
        for (double v : latencies)
        {
            std::size_t idx = 0;
            if (v < lo)
            {
                ++curve.clipped_below;
                idx = 0;
            }
            else if (v >= hi)
            {
                if (range)
                    ++curve.clipped_above;
                idx = bins - 1;
            }
            else
            {
                idx = std::min(static_cast<std::size_t>(std::floor((v - lo) / bin_width_us)), bins - 1);
            }
            ++counts[idx];
        }

        const double norm = static_cast<double>(latencies.size()) * bin_width_us;
        curve.x.reserve(bins);
        curve.y.reserve(bins);
        for (std::size_t k = 0; k < bins; ++k)
        {
            curve.x.push_back(lo + static_cast<double>(k) * bin_width_us);
            curve.y.push_back(static_cast<double>(counts[k]) / norm);
        }
        return curve;
    }

    DistributionCurve ccdf(std::span<const double> latencies, std::span<const double> grid)
    {
        if (latencies.empty())
            throw PreconditionError("CCDF of an empty sample");
        for (std::size_t k = 1; k < grid.size(); ++k)
        {
            if (!(grid[k] > grid[k - 1]))
                throw PreconditionError("CCDF grid must be strictly increasing");
        }

        std::vector<double> sorted(latencies.begin(), latencies.end());
        std::sort(sorted.begin(), sorted.end());
        const double n = static_cast<double>(sorted.size());

        DistributionCurve curve;
        curve.kind = CurveKind::Ccdf;
        curve.x.assign(grid.begin(), grid.end());
        curve.y.reserve(grid.size());
        for (double x : grid)
        {
            const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), x);
            curve.y.push_back(static_cast<double>(above) / n);
        }
        return curve;
    }
} // namespace vmld
