#include "vmld/cli.hpp"

#include "vmld/errors.hpp"
#include "vmld/report.hpp"
#include "vmld/scenario.hpp"
#include "vmld/simulator.hpp"
#include "vmld/trace.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <fstream>
#include <functional>
#include <future>
#include <sstream>

namespace fs = std::filesystem;

namespace vmld
{
    namespace
    {
        std::string read_file(const fs::path &path, bool user_input)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                if (user_input)
                    throw ConfigError(path.string(), "cannot open file");
                throw IoError(0, "cannot open " + path.string());
            }
            std::ostringstream buf;
            buf << in.rdbuf();
            return buf.str();
        }

        void write_text(const fs::path &path, const std::string &text)
        {
            if (path.has_parent_path())
            {
                std::error_code ec;
                fs::create_directories(path.parent_path(), ec);
                if (ec)
                    throw IoError(0, "cannot create " + path.parent_path().string() + ": " + ec.message());
            }
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
                throw IoError(0, "cannot open " + path.string() + " for writing");
            out << text;
            out.flush();
            if (!out)
                throw IoError(static_cast<std::uint64_t>(out.tellp()), "write failed on " + path.string());
        }

        // Maps library exceptions onto the exit-code contract.
        int guarded(std::ostream &log, const std::function<int()> &body)
        {
            try
            {
                return body();
            }
            catch (const MissingInputsError &e)
            {
                log << "error: " << e.what() << "\n";
                return kExitUser;
            }
            catch (const IoError &e)
            {
                log << "I/O error: " << e.what() << "\n";
                return kExitIo;
            }
            catch (const ConfigError &e)
            {
                log << "config error: " << e.what() << "\n";
                return kExitUser;
            }
            catch (const ParseError &e)
            {
                log << "parse error: " << e.what() << "\n";
                return kExitUser;
            }
            catch (const ValidationError &e)
            {
                log << "invalid input: " << e.what() << "\n";
                return kExitUser;
            }
            catch (const PreconditionError &e)
            {
                log << "error: " << e.what() << "\n";
                return kExitUser;
            }
            catch (const fs::filesystem_error &e)
            {
                log << "I/O error: " << e.what() << "\n";
                return kExitIo;
            }
            catch (const std::exception &e)
            {
                log << "error: " << e.what() << "\n";
                return kExitIo;
            }
        }
    } // namespace

    std::string RunManifest::to_json() const
    {
        nlohmann::ordered_json j;
        j["command_line"] = command_line;
        j["config_digest"] = config_digest;
        j["seed"] = seed;
        j["tool_version"] = tool_version;
        j["outputs"] = outputs;
        return j.dump(2) + "\n";
    }

    std::string sha256_hex(const std::string &bytes)
    {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256 failed");
        std::string hex;
        for (unsigned int i = 0; i < len; ++i)
            hex += fmt::format("{:02x}", digest[i]);
        return "sha256:" + hex;
    }

    std::string tool_version() { return "vmld " VMLD_VERSION; }

    fs::path seeded_path(const fs::path &out, std::uint64_t seed)
    {
        auto p = out;
        p.replace_filename(fmt::format("{}.seed{}{}", out.stem().string(), seed, out.extension().string()));
        return p;
    }

    int cmd_simulate(const SimulateArgs &args, const std::string &command_line, std::ostream &log)
    {
        return guarded(log, [&] {
            const auto text = read_file(args.config, true);
            auto base = parse_scenario(text);
            if (args.samples)
                base.sample_count = *args.samples;
            base.validate();
            const auto digest = sha256_hex(text);

            auto run_one = [&](std::uint64_t seed, const fs::path &out) {
                auto cfg = base;
                cfg.seed = seed;
                const auto trace = write_trace_string(run_scenario(cfg));
                write_text(out, trace);
                RunManifest m{command_line, digest, seed, tool_version(), {out.string()}};
                write_text(fs::path(out.string() + ".manifest.json"), m.to_json());
            };

            if (args.seeds.size() <= 1)
            {
                run_one(args.seeds.empty() ? base.seed : args.seeds.front(), args.out);
                log << "wrote " << args.out.string() << "\n";
                return kExitOk;
            }

            // One isolated run per seed; every run owns its config copy and RNG streams.
            std::vector<std::future<void>> runs;
            for (auto seed : args.seeds)
                runs.push_back(std::async(std::launch::async, run_one, seed, seeded_path(args.out, seed)));
            for (auto &r : runs)
                r.get();
            for (auto seed : args.seeds)
                log << "wrote " << seeded_path(args.out, seed).string() << "\n";
            return kExitOk;
        });
    }

    int cmd_analyze(const AnalyzeArgs &args, const std::string &command_line, std::ostream &log)
    {
        return guarded(log, [&] {
            AnalysisOptions opts;
            opts.analyses = parse_analyses(args.analyses);
            if (args.window == 0)
                throw ConfigError("--window", "must be >= 1");
            if (!(args.bin_width_us > 0.0))
                throw ConfigError("--bin-width-us", "must be > 0");
            opts.window = args.window;
            opts.bin_width_us = args.bin_width_us;

            const auto text = read_file(args.trace, true);
            const auto dataset = read_trace_string(text);
            const auto result = write_analyses(dataset, opts, args.out_dir);
            for (const auto &w : result.warnings)
                log << "warning: " << w << "\n";

            RunManifest m{command_line, sha256_hex(text), 0, tool_version(), {}};
            for (const auto &p : result.written)
                m.outputs.push_back(p.string());
            write_text(args.out_dir / "manifest.json", m.to_json());
            return kExitOk;
        });
    }

    int cmd_report(const ReportArgs &args, const std::string &command_line, std::ostream &log)
    {
        return guarded(log, [&] {
            const auto written = write_report(args.in_dir, args.out_dir);
            std::string inputs;
            for (const auto &name : report_inputs())
                inputs += read_file(args.in_dir / name, false);
            RunManifest m{command_line, sha256_hex(inputs), 0, tool_version(), {}};
            for (const auto &p : written)
                m.outputs.push_back(p.string());
            write_text(args.out_dir / "manifest.json", m.to_json());
            log << "wrote " << written.size() << " files to " << args.out_dir.string() << "\n";
            return kExitOk;
        });
    }

    int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &log)
    {
        std::string command_line;
        for (int i = 0; i < argc; ++i)
            command_line += (i ? " " : "") + std::string(argv[i]);

        CLI::App app{"Virtual multi-link device simulator and trace analysis"};
        app.set_version_flag("--version", tool_version());
        app.require_subcommand(1);

        SimulateArgs sim;
        std::string seed_list;
        std::int64_t samples = -1;
        auto *simulate = app.add_subcommand("simulate", "Run a scenario and write a trace CSV");
        simulate->add_option("--config", sim.config, "Scenario file")->required();
        simulate->add_option("--seed", seed_list, "Seed override, or a comma-separated list of seeds");
        simulate->add_option("--out", sim.out, "Output trace path")->required();
        simulate->add_option("--samples", samples, "Override sample_count");

        AnalyzeArgs ana;
        auto *analyze = app.add_subcommand("analyze", "Run analyses on a trace");
        analyze->add_option("--trace", ana.trace, "Input trace")->required();
        analyze->add_option("--analyses", ana.analyses, "fdr,corr-outcome,corr-latency,stats,pdf,ccdf or all")->required();
        analyze->add_option("--window", ana.window, "Moving FDR window in samples")->capture_default_str();
        analyze->add_option("--bin-width-us", ana.bin_width_us, "PDF bin width and CCDF grid step")->capture_default_str();
        analyze->add_option("--out-dir", ana.out_dir, "Output directory")->required();

        ReportArgs rep;
        auto *report = app.add_subcommand("report", "Emit plot data, gnuplot stubs and text tables");
        report->add_option("--in-dir", rep.in_dir, "Directory written by analyze")->required();
        report->add_option("--out-dir", rep.out_dir, "Output directory")->required();

        try
        {
            app.parse(argc, argv);
        }
        catch (const CLI::ParseError &e)
        {
            const int rc = app.exit(e, out, log);
            return rc == 0 ? kExitOk : kExitUser;
        }

        if (simulate->parsed())
        {
            if (!seed_list.empty())
            {
                std::stringstream ss(seed_list);
                std::string item;
                while (std::getline(ss, item, ','))
                {
                    try
                    {
                        std::size_t used = 0;
                        if (item.empty() || item.front() == '-')
                            throw std::invalid_argument(item);
                        sim.seeds.push_back(std::stoull(item, &used, 0));
                        if (used != item.size())
                            throw std::invalid_argument(item);
                    }
                    catch (const std::exception &)
                    {
                        log << "config error: --seed: '" << item << "' is not an unsigned 64-bit integer\n";
                        return kExitUser;
                    }
                }
            }
            if (samples >= 0)
                sim.samples = samples;
            else if (simulate->count("--samples") > 0)
            {
                log << "config error: --samples: must be >= 0\n";
                return kExitUser;
            }
            return cmd_simulate(sim, command_line, log);
        }
        if (analyze->parsed())
            return cmd_analyze(ana, command_line, log);
        return cmd_report(rep, command_line, log);
    }
} // namespace vmld
