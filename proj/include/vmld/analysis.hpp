#pragma once

#include "vmld/trace.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace vmld
{
    /// Fraction of delivered frames: sum(x) / N. Throws PreconditionError on an empty sequence.
    double fdr(std::span<const std::uint8_t> outcomes);

    /// Simple moving average over full windows only; N - window + 1 values.
    std::vector<double> moving_fdr(std::span<const std::uint8_t> outcomes, std::size_t window);

    /// Pearson correlation of two equally long series, clamped to [-1, 1].
    /// LengthMismatchError on unequal or too-short input, ZeroVarianceError when either is constant.
    double pearson(std::span<const double> a, std::span<const double> b);

    enum class Metric : std::uint8_t
    {
        Outcome,
        Latency,
    };

    std::string_view to_string(Metric metric);

    struct CorrelationMatrix
    {
        std::vector<ChannelId> channels;
        /// Row-major, channels.size() squared entries.
        std::vector<double> values;

        double at(std::size_t i, std::size_t j) const { return values[i * channels.size() + j]; }
    };

    /// Pairwise Pearson over the chosen metric. The dataset must be channel-aligned.
    CorrelationMatrix correlation_matrix(const TraceDataset &dataset, Metric metric);

    enum class Subset : std::uint8_t
    {
        All,
        Acked,
        NotAcked,
    };

    std::string_view to_string(Subset subset);

    struct StatsSummary
    {
        Subset subset = Subset::All;
        double fraction_pct = 0.0;
        std::size_t count = 0;
        double mean = 0.0;
        /// Population standard deviation (divides by N).
        double std_dev = 0.0;
        double min = 0.0;
        double p5 = 0.0;
        double p10 = 0.0;
        double p95 = 0.0;
        double p99 = 0.0;
        double p999 = 0.0;
        double max = 0.0;
    };

    /// Nearest-rank percentile: the ceil(p * N)-th order statistic, p in (0, 1].
    double nearest_rank(std::span<const double> sorted, double p);

    /// Summary of one latency sample; `total` is the size of the All set the fraction refers to.
    StatsSummary summarize_latencies(std::span<const double> latencies, std::size_t total, Subset subset);

    /// Latencies of one channel's data records restricted to a subset, in seq order.
    std::vector<double> channel_latencies(const TraceDataset &dataset, const ChannelId &channel, Subset subset);

    /// Outcomes of one channel's data records, in seq order.
    std::vector<std::uint8_t> channel_outcomes(const TraceDataset &dataset, const ChannelId &channel);

    /// EmptySubsetError when the subset has no records.
    StatsSummary latency_stats(const TraceDataset &dataset, const ChannelId &channel, Subset subset);

    enum class CurveKind : std::uint8_t
    {
        Pdf,
        Ccdf,
    };

    struct DistributionCurve
    {
        CurveKind kind = CurveKind::Pdf;
        /// PDF: left edge of each bin. CCDF: the evaluation grid.
        std::vector<double> x;
        std::vector<double> y;
        double bin_width = 0.0;
        /// Samples folded into the first / last bin because they fell outside the range.
        std::size_t clipped_below = 0;
        std::size_t clipped_above = 0;
    };

    /// Density histogram with sum(y) * bin_width == 1. Without a range the bins
    /// cover [min, max] on a grid aligned to multiples of bin_width.
    DistributionCurve pdf_histogram(std::span<const double> latencies,
                                    double bin_width_us,
                                    std::optional<std::pair<double, double>> range = std::nullopt);

    /// y_k = |{i : d_i > x_k}| / N over a strictly increasing grid.
    DistributionCurve ccdf(std::span<const double> latencies, std::span<const double> grid);
} // namespace vmld
