#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vmld
{
    /// Process exit statuses.
    enum ExitCode : int
    {
        kExitOk = 0,
        kExitUser = 2,
        kExitIo = 3,
    };

    struct RunManifest
    {
        std::string command_line;
        /// sha256 of the scenario file bytes (or of the input trace for analyze).
        std::string config_digest;
        std::uint64_t seed = 0;
        std::string tool_version;
        std::vector<std::string> outputs;

        std::string to_json() const;
    };

    std::string sha256_hex(const std::string &bytes);
    std::string tool_version();

    struct SimulateArgs
    {
        std::filesystem::path config;
        /// Empty means the seed from the config file.
        std::vector<std::uint64_t> seeds;
        std::filesystem::path out;
        std::optional<std::int64_t> samples;
    };

    struct AnalyzeArgs
    {
        std::filesystem::path trace;
        std::string analyses;
        std::size_t window = 3600;
        double bin_width_us = 10.0;
        std::filesystem::path out_dir;
    };

    struct ReportArgs
    {
        std::filesystem::path in_dir;
        std::filesystem::path out_dir;
    };

    /// Output path for one seed of a multi-seed run: trace.csv -> trace.seed42.csv.
    std::filesystem::path seeded_path(const std::filesystem::path &out, std::uint64_t seed);

    int cmd_simulate(const SimulateArgs &args, const std::string &command_line, std::ostream &log);
    int cmd_analyze(const AnalyzeArgs &args, const std::string &command_line, std::ostream &log);
    int cmd_report(const ReportArgs &args, const std::string &command_line, std::ostream &log);

    /// Parses argv and dispatches to a subcommand; diagnostics go to `log`.
    int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &log);
} // namespace vmld
