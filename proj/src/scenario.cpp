#include "vmld/scenario.hpp"

#include "vmld/errors.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace vmld
{
    void ScenarioConfig::validate() const
    {
        if (sample_count < 0)
            throw ConfigError("sample_count", "must be >= 0");
        if (period_us <= 0)
            throw ConfigError("period_us", "must be > 0");
        if (payload_bytes <= 0)
            throw ConfigError("payload_bytes", "must be > 0");
        if (!(bitrate_mbps > 0.0))
            throw ConfigError("bitrate_mbps", "must be > 0");
        if (retry_limit < 0)
            throw ConfigError("retry_limit", "must be >= 0");
        if (queue_cap == 0)
            throw ConfigError("queue_cap", "must be >= 1");
        if (mlds.empty())
            throw ConfigError("mlds", "at least one MLD is required");
        policy.validate();

        std::set<ChannelId> all;
        for (std::size_t m = 0; m < mlds.size(); ++m)
        {
            const auto &mld = mlds[m];
            const auto where = fmt::format("mlds[{}]", m);
            if (mld.lmacs.empty())
                throw ConfigError(where + ".lmacs", "an MLD needs at least one L-MAC");
            if (!(mld.platform_offset_us >= 0.0))
                throw ConfigError(where + ".platform_offset_us", "must be >= 0");
            if (!(mld.enqueue_gap_us >= 0.0))
                throw ConfigError(where + ".enqueue_gap_us", "must be >= 0");
            if (!(mld.eth_delay_us >= 0.0))
                throw ConfigError(where + ".eth_delay_us", "must be >= 0");

            std::set<ChannelId> own;
            for (std::size_t l = 0; l < mld.lmacs.size(); ++l)
            {
                const auto &lmac = mld.lmacs[l];
                const auto lwhere = fmt::format("{}.lmacs[{}]", where, l);
                try
                {
                    lmac.burst.validate();
                    lmac.timing.validate();
                }
                catch (const ConfigError &e)
                {
                    throw ConfigError(lwhere + "." + e.field(), e.what());
                }
                if (!(lmac.ack_loss_prob >= 0.0 && lmac.ack_loss_prob <= 1.0))
                    throw ConfigError(lwhere + ".ack_loss_prob", "must lie in [0, 1]");
                if (!(lmac.queue_delay_us >= 0.0))
                    throw ConfigError(lwhere + ".queue_delay_us", "must be >= 0");
                if (!all.insert(lmac.channel).second)
                    throw ConfigError(lwhere + ".channel", "channel " + lmac.channel.to_string() + " is used twice in the scenario");
                own.insert(lmac.channel);
            }
            for (std::size_t a = 0; a < mld.colocated_aci.size(); ++a)
            {
                const auto &pair = mld.colocated_aci[a];
                const auto awhere = fmt::format("{}.aci[{}]", where, a);
                try
                {
                    pair.validate();
                }
                catch (const ConfigError &e)
                {
                    throw ConfigError(awhere, e.what());
                }
                if (!own.contains(pair.channel_a) || !own.contains(pair.channel_b))
                    throw ConfigError(awhere, "ACI pairs must reference channels of the same MLD");
            }
        }
        for (const auto &itf : interferers)
            itf.validate();
    }

    std::vector<ChannelId> ScenarioConfig::channels() const
    {
        std::vector<ChannelId> out;
        for (const auto &mld : mlds)
        {
            for (const auto &lmac : mld.lmacs)
                out.push_back(lmac.channel);
        }
        return out;
    }

    namespace
    {
        void check_keys(const YAML::Node &node, const std::string &path, std::initializer_list<std::string_view> allowed)
        {
            if (!node.IsMap())
                throw ConfigError(path.empty() ? "<root>" : path, "expected a mapping");
            for (const auto &kv : node)
            {
                const auto key = kv.first.as<std::string>();
                bool known = false;
                for (auto a : allowed)
                    known = known || key == a;
                if (!known)
                    throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
            }
        }

        std::string join(const std::string &path, std::string_view key)
        {
            return path.empty() ? std::string(key) : path + "." + std::string(key);
        }

        template <typename T>
        void read(const YAML::Node &node, const std::string &path, std::string_view key, T &out)
        {
            const auto child = node[std::string(key)];
            if (!child)
                return;
            try
            {
                out = child.as<T>();
            }
            catch (const YAML::Exception &)
            {
                throw ConfigError(join(path, key), "has the wrong type");
            }
        }

        ChannelId read_channel(const YAML::Node &node, const std::string &path)
        {
            try
            {
                return ChannelId::parse(node.as<std::string>());
            }
            catch (const YAML::Exception &)
            {
                throw ConfigError(path, "expected a channel string such as \"2.4:1\"");
            }
            catch (const ValidationError &e)
            {
                throw ConfigError(path, e.what());
            }
        }

        void read_timing(const YAML::Node &node, const std::string &path, TimingParams &t)
        {
            check_keys(node, path, {"t_sifs_us", "t_ack_us", "t_difs_us", "t_pifs_us", "frame_airtime_us", "ack_timeout_us"});
            read(node, path, "t_sifs_us", t.t_sifs_us);
            read(node, path, "t_ack_us", t.t_ack_us);
            read(node, path, "t_difs_us", t.t_difs_us);
            read(node, path, "t_pifs_us", t.t_pifs_us);
            read(node, path, "frame_airtime_us", t.frame_airtime_us);
            read(node, path, "ack_timeout_us", t.ack_timeout_us);
        }

        void read_burst(const YAML::Node &node, const std::string &path, GilbertElliottParams &b)
        {
            check_keys(node, path, {"p_good_to_bad", "p_bad_to_good", "loss_good", "loss_bad"});
            read(node, path, "p_good_to_bad", b.p_good_to_bad);
            read(node, path, "p_bad_to_good", b.p_bad_to_good);
            read(node, path, "loss_good", b.loss_prob_good);
            read(node, path, "loss_bad", b.loss_prob_bad);
        }

        LmacConfig read_lmac(const YAML::Node &node, const std::string &path, const LmacConfig &defaults)
        {
            check_keys(node, path, {"channel", "burst", "timing", "ack_loss_prob", "queue_delay_us"});
            LmacConfig lmac = defaults;
            if (!node["channel"])
                throw ConfigError(join(path, "channel"), "is required");
            lmac.channel = read_channel(node["channel"], join(path, "channel"));
            if (node["burst"])
                read_burst(node["burst"], join(path, "burst"), lmac.burst);
            if (node["timing"])
                read_timing(node["timing"], join(path, "timing"), lmac.timing);
            read(node, path, "ack_loss_prob", lmac.ack_loss_prob);
            read(node, path, "queue_delay_us", lmac.queue_delay_us);
            return lmac;
        }

        AciCoupling read_aci(const YAML::Node &node, const std::string &path)
        {
            check_keys(node, path, {"a", "b", "collision_prob"});
            if (!node["a"] || !node["b"])
                throw ConfigError(path, "needs both 'a' and 'b'");
            AciCoupling pair;
            pair.channel_a = read_channel(node["a"], join(path, "a"));
            pair.channel_b = read_channel(node["b"], join(path, "b"));
            read(node, path, "collision_prob", pair.collision_prob);
            return pair;
        }

        MldConfig read_mld(const YAML::Node &node, const std::string &path, const LmacConfig &defaults)
        {
            check_keys(node, path, {"name", "lmacs", "aci", "platform_offset_us", "enqueue_gap_us", "eth_delay_us"});
            MldConfig mld;
            read(node, path, "name", mld.name);
            read(node, path, "platform_offset_us", mld.platform_offset_us);
            read(node, path, "enqueue_gap_us", mld.enqueue_gap_us);
            read(node, path, "eth_delay_us", mld.eth_delay_us);
            const auto lmacs = node["lmacs"];
            if (!lmacs || !lmacs.IsSequence())
                throw ConfigError(join(path, "lmacs"), "expected a list of L-MACs");
            for (std::size_t i = 0; i < lmacs.size(); ++i)
                mld.lmacs.push_back(read_lmac(lmacs[i], fmt::format("{}.lmacs[{}]", path, i), defaults));
            if (const auto aci = node["aci"])
            {
                if (!aci.IsSequence())
                    throw ConfigError(join(path, "aci"), "expected a list");
                for (std::size_t i = 0; i < aci.size(); ++i)
                    mld.colocated_aci.push_back(read_aci(aci[i], fmt::format("{}.aci[{}]", path, i)));
            }
            return mld;
        }

        InterfererParams read_interferer(const YAML::Node &node, const std::string &path)
        {
            check_keys(node, path, {"id", "channels", "busy_prob", "busy_extra_us", "beacon_interval_us", "beacon_delay_us", "beacon_phase_us"});
            InterfererParams itf;
            read(node, path, "id", itf.id);
            const auto channels = node["channels"];
            if (!channels || !channels.IsSequence())
                throw ConfigError(join(path, "channels"), "expected a list of channels");
            for (std::size_t i = 0; i < channels.size(); ++i)
                itf.affected_channels.push_back(read_channel(channels[i], fmt::format("{}.channels[{}]", path, i)));
            read(node, path, "busy_prob", itf.busy_prob);
            if (const auto extra = node["busy_extra_us"])
            {
                if (!extra.IsSequence() || extra.size() != 2)
                    throw ConfigError(join(path, "busy_extra_us"), "expected [min, max]");
                try
                {
                    itf.busy_extra_us_min = extra[0].as<double>();
                    itf.busy_extra_us_max = extra[1].as<double>();
                }
                catch (const YAML::Exception &)
                {
                    throw ConfigError(join(path, "busy_extra_us"), "expected two numbers");
                }
            }
            if (node["beacon_interval_us"])
            {
                double v = 0;
                read(node, path, "beacon_interval_us", v);
                itf.beacon_interval_us = v;
            }
            if (node["beacon_delay_us"])
            {
                double v = 0;
                read(node, path, "beacon_delay_us", v);
                itf.beacon_delay_us = v;
            }
            read(node, path, "beacon_phase_us", itf.beacon_phase_us);
            return itf;
        }
    } // namespace

    ScenarioConfig parse_scenario(std::string_view text)
    {
        YAML::Node root;
        try
        {
            root = YAML::Load(std::string(text));
        }
        catch (const YAML::ParserException &e)
        {
            throw ConfigError("<syntax>", e.what());
        }
        if (!root || root.IsNull())
            throw ConfigError("<root>", "empty configuration");

        check_keys(root, "", {"seed", "sample_count", "period_us", "payload_bytes", "bitrate_mbps", "beacon_logging",
                              "loopback_logging", "retransmission_enabled", "retry_limit", "queue_cap", "policy",
                              "lmac_defaults", "mlds", "interferers"});

        ScenarioConfig cfg;
        read(root, "", "seed", cfg.seed);
        read(root, "", "sample_count", cfg.sample_count);
        read(root, "", "period_us", cfg.period_us);
        read(root, "", "payload_bytes", cfg.payload_bytes);
        read(root, "", "bitrate_mbps", cfg.bitrate_mbps);
        read(root, "", "beacon_logging", cfg.beacon_logging);
        read(root, "", "loopback_logging", cfg.loopback_logging);
        read(root, "", "retransmission_enabled", cfg.retransmission_enabled);
        read(root, "", "retry_limit", cfg.retry_limit);
        read(root, "", "queue_cap", cfg.queue_cap);

        if (const auto policy = root["policy"])
        {
            check_keys(policy, "policy", {"kind", "alpha", "epsilon", "initial_estimate"});
            std::string kind = std::string(to_string(cfg.policy.kind));
            read(policy, "policy", "kind", kind);
            cfg.policy.kind = parse_policy_kind(kind);
            read(policy, "policy", "alpha", cfg.policy.alpha);
            read(policy, "policy", "epsilon", cfg.policy.epsilon);
            read(policy, "policy", "initial_estimate", cfg.policy.initial_estimate);
        }

        LmacConfig defaults;
        if (const auto d = root["lmac_defaults"])
        {
            check_keys(d, "lmac_defaults", {"burst", "timing", "ack_loss_prob", "queue_delay_us"});
            if (d["burst"])
                read_burst(d["burst"], "lmac_defaults.burst", defaults.burst);
            if (d["timing"])
                read_timing(d["timing"], "lmac_defaults.timing", defaults.timing);
            read(d, "lmac_defaults", "ack_loss_prob", defaults.ack_loss_prob);
            read(d, "lmac_defaults", "queue_delay_us", defaults.queue_delay_us);
        }

        const auto mlds = root["mlds"];
        if (!mlds || !mlds.IsSequence())
            throw ConfigError("mlds", "expected a list of MLDs");
        for (std::size_t i = 0; i < mlds.size(); ++i)
            cfg.mlds.push_back(read_mld(mlds[i], fmt::format("mlds[{}]", i), defaults));

        if (const auto itfs = root["interferers"])
        {
            if (!itfs.IsSequence())
                throw ConfigError("interferers", "expected a list");
            for (std::size_t i = 0; i < itfs.size(); ++i)
                cfg.interferers.push_back(read_interferer(itfs[i], fmt::format("interferers[{}]", i)));
        }

        cfg.validate();
        return cfg;
    }

    ScenarioConfig load_scenario(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw ConfigError("<file>", "cannot open scenario file " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_scenario(buf.str());
    }
} // namespace vmld
