#pragma once

#include "vmld/analysis.hpp"
#include "vmld/errors.hpp"
#include "vmld/trace.hpp"

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace vmld
{
    /// Analyses accepted by `vmld analyze --analyses`.
    inline const std::vector<std::string> &known_analyses()
    {
        static const std::vector<std::string> names{"fdr", "corr-outcome", "corr-latency", "stats", "pdf", "ccdf"};
        return names;
    }

    struct AnalysisOptions
    {
        std::set<std::string> analyses;
        std::size_t window = 3600;
        double bin_width_us = 10.0;
        std::pair<double, double> pdf_range{0.0, 5000.0};
        /// CCDF grid runs from 0 to ccdf_max_us in bin_width_us steps.
        double ccdf_max_us = 5000.0;
    };

    struct AnalysisOutputs
    {
        std::vector<std::filesystem::path> written;
        std::vector<std::string> warnings;
    };

    /// Parses "fdr,stats,..." (or "all"); throws ConfigError on an unknown name.
    std::set<std::string> parse_analyses(const std::string &list);

    /// Runs the selected analyses and writes one file per analysis (plus
    /// stats.txt next to stats.csv). Empty subsets are skipped with a warning.
    AnalysisOutputs write_analyses(const TraceDataset &dataset, const AnalysisOptions &options, const std::filesystem::path &out_dir);

    /// Aligned text table with the columns Set, Fraction %, Average, Std. dev.,
    /// Min, P5, P10, P95, P99, P99.9, Max; one block per channel.
    std::string format_stats_table(const std::vector<std::pair<ChannelId, std::vector<StatsSummary>>> &blocks);

    void write_correlation_csv(std::ostream &out, const CorrelationMatrix &matrix, Metric metric);

    /// Raised by write_report when analysis outputs are absent.
    class MissingInputsError : public Error
    {
    public:
        explicit MissingInputsError(std::vector<std::string> missing);
        const std::vector<std::string> &missing() const noexcept { return missing_; }

    private:
        std::vector<std::string> missing_;
    };

    /// Files `write_report` needs in its input directory.
    const std::vector<std::string> &report_inputs();

    /// Gnuplot data and script stubs for the FDR, PDF and CCDF figures, plus
    /// text tables for outcome correlation, latency correlation and latency statistics.
    std::vector<std::filesystem::path> write_report(const std::filesystem::path &in_dir, const std::filesystem::path &out_dir);
} // namespace vmld
