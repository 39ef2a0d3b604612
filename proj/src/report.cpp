#include "vmld/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace vmld
{
    namespace
    {
        constexpr Subset kSubsets[] = {Subset::All, Subset::Acked, Subset::NotAcked};

        // CSV-safe subset token ("not acked" -> "not_acked").
        std::string subset_token(Subset s)
        {
            std::string t(to_string(s));
            std::replace(t.begin(), t.end(), ' ', '_');
            return t;
        }

        std::ofstream open_output(const fs::path &path)
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
                throw IoError(0, "cannot open " + path.string() + " for writing");
            return out;
        }

        void finish(std::ofstream &out, const fs::path &path)
        {
            out.flush();
            if (!out)
                throw IoError(static_cast<std::uint64_t>(out.tellp()), "write failed on " + path.string());
        }

        std::vector<std::string> split_csv(const std::string &line)
        {
            std::vector<std::string> out;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
                out.push_back(cell);
            if (!line.empty() && line.back() == ',')
                out.emplace_back();
            return out;
        }

        struct CsvTable
        {
            std::vector<std::string> header;
            std::vector<std::vector<std::string>> rows;
        };

        CsvTable read_csv(const fs::path &path, const std::string &expected_header)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw IoError(0, "cannot open " + path.string());
            CsvTable table;
            std::string line;
            if (!std::getline(in, line) || line != expected_header)
                throw ParseError(1, path.filename().string() + ": expected header '" + expected_header + "'");
            table.header = split_csv(line);
            std::size_t line_no = 1;
            while (std::getline(in, line))
            {
                ++line_no;
                auto cells = split_csv(line);
                if (cells.size() != table.header.size())
                    throw ParseError(line_no, path.filename().string() + ": wrong column count");
                table.rows.push_back(std::move(cells));
            }
            return table;
        }

        double to_double(const std::string &text)
        {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size())
                throw std::invalid_argument(text);
            return v;
        }

        // Groups consecutive rows by (channel, set) preserving first-appearance order.
        std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>>
        group_curves(const CsvTable &table)
        {
            std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> groups;
            std::map<std::string, std::size_t> index;
            for (const auto &row : table.rows)
            {
                const auto key = row[0] + " " + row[1];
                auto it = index.find(key);
                if (it == index.end())
                {
                    it = index.emplace(key, groups.size()).first;
                    groups.push_back({key, {}});
                }
                groups[it->second].second.emplace_back(row[2], row[3]);
            }
            return groups;
        }

        std::string render_matrix(const CsvTable &table, const std::string &title)
        {
            std::vector<std::string> channels;
            std::map<std::pair<std::string, std::string>, std::string> values;
            for (const auto &row : table.rows)
            {
                for (const auto *ch : {&row[0], &row[1]})
                {
                    if (std::find(channels.begin(), channels.end(), *ch) == channels.end())
                        channels.push_back(*ch);
                }
                values[{row[0], row[1]}] = fmt::format("{:.3f}", to_double(row[3]));
            }
            std::string out = title + "\n";
            out += fmt::format("{:>8}", "");
            for (const auto &ch : channels)
                out += fmt::format(" {:>8}", ch);
            out += "\n";
            for (const auto &a : channels)
            {
                out += fmt::format("{:>8}", a);
                for (const auto &b : channels)
                {
                    const auto it = values.find({a, b});
                    out += fmt::format(" {:>8}", it == values.end() ? "-" : it->second);
                }
                out += "\n";
            }
            return out;
        }

        void write_gnuplot(const fs::path &dat,
                           const fs::path &script,
                           const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> &groups,
                           const std::string &xlabel,
                           const std::string &ylabel,
                           const std::string &style,
                           bool log_y)
        {
            {
                auto out = open_output(dat);
                for (std::size_t i = 0; i < groups.size(); ++i)
                {
                    if (i > 0)
                        out << "\n\n";
                    out << "# " << groups[i].first << "\n";
                    for (const auto &[x, y] : groups[i].second)
                        out << x << ' ' << y << '\n';
                }
                finish(out, dat);
            }
            auto out = open_output(script);
            const auto stem = dat.stem().string();
            out << "set terminal pngcairo size 900,500\n";
            out << "set output '" << stem << ".png'\n";
            out << "set xlabel '" << xlabel << "'\n";
            out << "set ylabel '" << ylabel << "'\n";
            if (log_y)
                out << "set logscale y\n";
            out << "plot";
            for (std::size_t i = 0; i < groups.size(); ++i)
            {
                out << (i == 0 ? " " : ", \\\n     ");
                out << "'" << dat.filename().string() << "' index " << i << " with " << style << " title '" << groups[i].first << "'";
            }
            out << "\n";
            finish(out, script);
        }
    } // namespace

    std::set<std::string> parse_analyses(const std::string &list)
    {
        std::set<std::string> out;
        std::stringstream ss(list);
        std::string name;
        while (std::getline(ss, name, ','))
        {
            if (name.empty())
                continue;
            if (name == "all")
            {
                out.insert(known_analyses().begin(), known_analyses().end());
                continue;
            }
            if (std::find(known_analyses().begin(), known_analyses().end(), name) == known_analyses().end())
                throw ConfigError("--analyses", "unknown analysis '" + name + "'");
            out.insert(name);
        }
        if (out.empty())
            throw ConfigError("--analyses", "no analysis selected");
        return out;
    }

    std::string format_stats_table(const std::vector<std::pair<ChannelId, std::vector<StatsSummary>>> &blocks)
    {
        std::string out = fmt::format("{:<8} {:<10} {:>10} {:>9} {:>9} {:>8} {:>8} {:>8} {:>9} {:>9} {:>9} {:>9}\n", "Channel", "Set",
                                      "Fraction %", "Average", "Std. dev.", "Min", "P5", "P10", "P95", "P99", "P99.9", "Max");
        for (const auto &[channel, rows] : blocks)
        {
            bool first = true;
            for (const auto &s : rows)
            {
                out += fmt::format("{:<8} {:<10} {:>10.1f} {:>9.1f} {:>9.1f} {:>8.1f} {:>8.1f} {:>8.1f} {:>9.1f} {:>9.1f} {:>9.1f} {:>9.1f}\n",
                                   first ? channel.to_string() : "", to_string(s.subset), s.fraction_pct, s.mean, s.std_dev, s.min,
                                   s.p5, s.p10, s.p95, s.p99, s.p999, s.max);
                first = false;
            }
        }
        return out;
    }

    void write_correlation_csv(std::ostream &out, const CorrelationMatrix &matrix, Metric metric)
    {
        out << "channel_a,channel_b,metric,rho\n";
        const auto n = matrix.channels.size();
        for (std::size_t i = 0; i < n; ++i)
        {
            for (std::size_t j = 0; j < n; ++j)
                out << fmt::format("{},{},{},{:.6f}\n", matrix.channels[i].to_string(), matrix.channels[j].to_string(),
                                   to_string(metric), matrix.at(i, j));
        }
    }

    AnalysisOutputs write_analyses(const TraceDataset &dataset, const AnalysisOptions &options, const fs::path &out_dir)
    {
        AnalysisOutputs result;
        const auto &sel = options.analyses;
        const auto &channels = dataset.meta.channels;

        const bool wants_corr = sel.contains("corr-outcome") || sel.contains("corr-latency");
        if (wants_corr && channels.size() < 2)
            throw PreconditionError("correlation analyses need at least 2 channels, the trace has " + std::to_string(channels.size()));

        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec)
            throw IoError(0, "cannot create " + out_dir.string() + ": " + ec.message());

        if (sel.contains("fdr"))
        {
            const auto path = out_dir / "fdr.csv";
            auto out = open_output(path);
            out << "channel,window_start,fdr\n";
            for (const auto &ch : channels)
            {
                const auto recs = data_records(dataset, ch);
                if (recs.size() < options.window || recs.empty())
                {
                    result.warnings.push_back(fmt::format("fdr: {} has {} samples, fewer than the window {}; skipped", ch.to_string(),
                                                          recs.size(), options.window));
                    continue;
                }
                std::vector<std::uint8_t> outcomes;
                outcomes.reserve(recs.size());
                for (const auto &r : recs)
                    outcomes.push_back(static_cast<std::uint8_t>(r.outcome));
                const auto series = moving_fdr(outcomes, options.window);
                const auto name = ch.to_string();
                for (std::size_t k = 0; k < series.size(); ++k)
                    out << fmt::format("{},{},{:.6f}\n", name, recs[k].seq, series[k]);
            }
            finish(out, path);
            result.written.push_back(path);
        }

        if (wants_corr)
        {
            const auto aligned = align_channels(dataset);
            for (auto metric : {Metric::Outcome, Metric::Latency})
            {
                const std::string name = metric == Metric::Outcome ? "corr-outcome" : "corr-latency";
                if (!sel.contains(name))
                    continue;
                const auto matrix = correlation_matrix(aligned, metric);
                const auto path = out_dir / (metric == Metric::Outcome ? "corr_outcome.csv" : "corr_latency.csv");
                auto out = open_output(path);
                write_correlation_csv(out, matrix, metric);
                finish(out, path);
                result.written.push_back(path);
            }
        }

        if (sel.contains("stats"))
        {
            std::vector<std::pair<ChannelId, std::vector<StatsSummary>>> blocks;
            const auto path = out_dir / "stats.csv";
            auto out = open_output(path);
            out << "channel,set,fraction_pct,count,mean,std_dev,min,p5,p10,p95,p99,p999,max\n";
            for (const auto &ch : channels)
            {
                std::vector<StatsSummary> rows;
                for (auto subset : kSubsets)
                {
                    try
                    {
                        rows.push_back(latency_stats(dataset, ch, subset));
                    }
                    catch (const EmptySubsetError &)
                    {
                        result.warnings.push_back(fmt::format("stats: {} has no '{}' records; skipped", ch.to_string(), to_string(subset)));
                        continue;
                    }
                    const auto &s = rows.back();
                    out << fmt::format("{},{},{:.3f},{},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f}\n", ch.to_string(),
                                       subset_token(subset), s.fraction_pct, s.count, s.mean, s.std_dev, s.min, s.p5, s.p10, s.p95,
                                       s.p99, s.p999, s.max);
                }
                if (!rows.empty())
                    blocks.emplace_back(ch, std::move(rows));
            }
            finish(out, path);
            result.written.push_back(path);

            const auto table_path = out_dir / "stats.txt";
            auto table = open_output(table_path);
            table << format_stats_table(blocks);
            finish(table, table_path);
            result.written.push_back(table_path);
        }

        for (const std::string kind : {"pdf", "ccdf"})
        {
            if (!sel.contains(kind))
                continue;
            const auto path = out_dir / (kind + ".csv");
            auto out = open_output(path);
            out << "channel,set,x_us,y\n";
            std::vector<double> grid;
            if (kind == "ccdf")
            {
                for (double x = 0.0; x <= options.ccdf_max_us + 1e-9; x += options.bin_width_us)
                    grid.push_back(x);
            }
            for (const auto &ch : channels)
            {
                for (auto subset : kSubsets)
                {
                    const auto lat = channel_latencies(dataset, ch, subset);
                    if (lat.empty())
                    {
                        result.warnings.push_back(fmt::format("{}: {} has no '{}' records; skipped", kind, ch.to_string(), to_string(subset)));
                        continue;
                    }
                    const auto curve = kind == "pdf" ? pdf_histogram(lat, options.bin_width_us, options.pdf_range) : ccdf(lat, grid);
                    for (std::size_t k = 0; k < curve.x.size(); ++k)
                        out << fmt::format("{},{},{:.3f},{:.9g}\n", ch.to_string(), subset_token(subset), curve.x[k], curve.y[k]);
                }
            }
            finish(out, path);
            result.written.push_back(path);
        }

        return result;
    }

    MissingInputsError::MissingInputsError(std::vector<std::string> missing)
        : Error([&] {
              std::string msg = "missing analysis outputs:";
              for (const auto &m : missing)
                  msg += " " + m;
              return msg;
          }()),
          missing_(std::move(missing))
    {
    }

    const std::vector<std::string> &report_inputs()
    {
        static const std::vector<std::string> files{"fdr.csv", "corr_outcome.csv", "corr_latency.csv", "stats.csv", "pdf.csv", "ccdf.csv"};
        return files;
    }

    std::vector<fs::path> write_report(const fs::path &in_dir, const fs::path &out_dir)
    {
        std::vector<std::string> missing;
        for (const auto &name : report_inputs())
        {
            if (!fs::is_regular_file(in_dir / name))
                missing.push_back(name);
        }
        if (!missing.empty())
            throw MissingInputsError(std::move(missing));

        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec)
            throw IoError(0, "cannot create " + out_dir.string() + ": " + ec.message());

        std::vector<fs::path> written;

        {
            const auto fdr_table = read_csv(in_dir / "fdr.csv", "channel,window_start,fdr");
            std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> groups;
            std::map<std::string, std::size_t> index;
            for (const auto &row : fdr_table.rows)
            {
                auto it = index.find(row[0]);
                if (it == index.end())
                {
                    it = index.emplace(row[0], groups.size()).first;
                    groups.push_back({row[0], {}});
                }
                groups[it->second].second.emplace_back(row[1], row[2]);
            }
            write_gnuplot(out_dir / "fdr_timeseries.dat", out_dir / "fdr_timeseries.gp", groups, "window start (packet index)",
                          "FDR", "lines", false);
            written.push_back(out_dir / "fdr_timeseries.dat");
            written.push_back(out_dir / "fdr_timeseries.gp");
        }
        {
            const auto pdf = read_csv(in_dir / "pdf.csv", "channel,set,x_us,y");
            write_gnuplot(out_dir / "latency_pdf.dat", out_dir / "latency_pdf.gp", group_curves(pdf), "latency [us]", "density [1/us]",
                          "steps", false);
            written.push_back(out_dir / "latency_pdf.dat");
            written.push_back(out_dir / "latency_pdf.gp");
        }
        {
            const auto cc = read_csv(in_dir / "ccdf.csv", "channel,set,x_us,y");
            write_gnuplot(out_dir / "latency_ccdf.dat", out_dir / "latency_ccdf.gp", group_curves(cc), "latency [us]", "P(latency > x)",
                          "lines", true);
            written.push_back(out_dir / "latency_ccdf.dat");
            written.push_back(out_dir / "latency_ccdf.gp");
        }

        const std::string corr_header = "channel_a,channel_b,metric,rho";
        for (const auto &[input, output, title] :
             {std::tuple{"corr_outcome.csv", "table1_outcome_correlation.txt", "Correlation between TX outcomes"},
              std::tuple{"corr_latency.csv", "table2_latency_correlation.txt", "Correlation between TX latencies"}})
        {
            const auto table = read_csv(in_dir / input, corr_header);
            const auto path = out_dir / output;
            auto out = open_output(path);
            out << render_matrix(table, title);
            finish(out, path);
            written.push_back(path);
        }

        {
            const auto stats = read_csv(in_dir / "stats.csv", "channel,set,fraction_pct,count,mean,std_dev,min,p5,p10,p95,p99,p999,max");
            std::vector<std::pair<ChannelId, std::vector<StatsSummary>>> blocks;
            for (const auto &row : stats.rows)
            {
                const auto ch = ChannelId::parse(row[0]);
                if (blocks.empty() || blocks.back().first != ch)
                    blocks.emplace_back(ch, std::vector<StatsSummary>{});
                StatsSummary s;
                s.subset = row[1] == "all" ? Subset::All : row[1] == "acked" ? Subset::Acked : Subset::NotAcked;
                s.fraction_pct = to_double(row[2]);
                s.count = static_cast<std::size_t>(std::stoull(row[3]));
                s.mean = to_double(row[4]);
                s.std_dev = to_double(row[5]);
                s.min = to_double(row[6]);
                s.p5 = to_double(row[7]);
                s.p10 = to_double(row[8]);
                s.p95 = to_double(row[9]);
                s.p99 = to_double(row[10]);
                s.p999 = to_double(row[11]);
                s.max = to_double(row[12]);
                blocks.back().second.push_back(s);
            }
            const auto path = out_dir / "table3_latency_stats.txt";
            auto out = open_output(path);
            out << "Statistics about latency (us), nearest-rank percentiles\n" << format_stats_table(blocks);
            finish(out, path);
            written.push_back(path);
        }
        return written;
    }
} // namespace vmld
