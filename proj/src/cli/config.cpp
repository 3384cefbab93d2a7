#include "config.hpp"

#include <initializer_list>
#include <set>

#include <yaml-cpp/yaml.h>

namespace sagin::cli {

namespace {

std::string where(const YAML::Node& n) {
    const auto m = n.Mark();
    if (m.line < 0) return "";
    return "line " + std::to_string(m.line + 1) + ": ";
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg) { throw ConfigError(where(n) + msg); }

void expect_map(const YAML::Node& n, const std::string& path) {
    if (!n.IsMap()) fail(n, "'" + path + "' must be a mapping");
}

void allow_keys(const YAML::Node& n, const std::string& path, std::initializer_list<const char*> keys) {
    expect_map(n, path);
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in '" + path + "'");
    }
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& path) {
    if (!n.IsScalar()) fail(n, "'" + path + "' must be a scalar");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        fail(n, "'" + path + "' has an invalid value '" + n.Scalar() + "'");
    }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, const std::string& path, T& out) {
    if (const auto n = parent[key]) out = scalar<T>(n, path + "." + key);
}

std::size_t read_count(const YAML::Node& n, const std::string& path) {
    const auto v = scalar<long long>(n, path);
    if (v < 0) fail(n, "'" + path + "' must be >= 0");
    return static_cast<std::size_t>(v);
}

void read_size(const YAML::Node& parent, const char* key, const std::string& path, std::size_t& out) {
    if (const auto n = parent[key]) out = read_count(n, path + "." + key);
}

std::pair<double, double> range(const YAML::Node& n, const std::string& path) {
    if (n.IsScalar()) {
        const auto v = scalar<double>(n, path);
        return {v, v};
    }
    if (!n.IsSequence() || n.size() != 2) fail(n, "'" + path + "' must be a number or a [min, max] pair");
    return {scalar<double>(n[0], path), scalar<double>(n[1], path)};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void parse_devices(const YAML::Node& n, trico::Scenario& s) {
    if (!n.IsSequence() || n.size() == 0) fail(n, "'devices' must be a nonempty list");
    s.devices.clear();
    for (std::size_t i = 0; i < n.size(); ++i) {
        const auto d = n[i];
        const std::string path = "devices[" + std::to_string(i) + "]";
        allow_keys(d, path, {"id", "kind", "peak_flops", "compute_power_w", "tx_power_w", "battery_j"});
        if (!d["kind"]) fail(d, "'" + path + ".kind' is required");
        const auto kind_s = scalar<std::string>(d["kind"], path + ".kind");
        net::DeviceKind kind;
        if (kind_s == "uav") kind = net::DeviceKind::uav;
        else if (kind_s == "vehicle") kind = net::DeviceKind::vehicle;
        else fail(d["kind"], "'" + path + ".kind' must be 'uav' or 'vehicle'");
        std::string id = kind_s + std::to_string(i);
        read(d, "id", path, id);
        auto dev = net::default_device(kind, id);
        read(d, "peak_flops", path, dev.peak_flops);
        read(d, "compute_power_w", path, dev.compute_power_w);
        read(d, "tx_power_w", path, dev.tx_power_w);
        if (d["battery_j"]) dev.battery_j = scalar<double>(d["battery_j"], path + ".battery_j");
        try {
            dev.validate();
        } catch (const InvalidArgument& e) {
            fail(d, e.what());
        }
        for (const auto& other : s.devices)
            if (other.id == dev.id) fail(d, "duplicate device id '" + dev.id + "'");
        s.devices.push_back(std::move(dev));
    }
}

trico::ChannelSpec parse_channel(const YAML::Node& c, const std::string& path) {
    allow_keys(c, path, {"bandwidth_hz", "snr_db", "snr_linear"});
    if (!c["bandwidth_hz"]) fail(c, "'" + path + ".bandwidth_hz' is required");
    const bool has_db = static_cast<bool>(c["snr_db"]), has_lin = static_cast<bool>(c["snr_linear"]);
    if (has_db == has_lin) fail(c, "'" + path + "' needs exactly one of snr_db or snr_linear");
    const bool is_range = c["bandwidth_hz"].IsSequence() || (has_db && c["snr_db"].IsSequence());
    trico::ChannelSpec spec;
    if (is_range) {
        if (has_lin) fail(c, "'" + path + "': a channel distribution takes snr_db ranges");
        net::ChannelDistribution d{range(c["bandwidth_hz"], path + ".bandwidth_hz"), range(c["snr_db"], path + ".snr_db")};
        try {
            d.validate();
        } catch (const InvalidArgument& e) {
            fail(c, e.what());
        }
        spec = d;
    } else {
        net::ChannelState ch{scalar<double>(c["bandwidth_hz"], path + ".bandwidth_hz"),
                             has_lin ? scalar<double>(c["snr_linear"], path + ".snr_linear")
                                     : net::db_to_linear(scalar<double>(c["snr_db"], path + ".snr_db"))};
        try {
            ch.validate();
        } catch (const InvalidArgument& e) {
            fail(c, e.what());
        }
        spec = ch;
    }
    return spec;
}

void parse_channels(const YAML::Node& n, trico::Scenario& s) {
    expect_map(n, "channels");
    std::vector<std::optional<trico::ChannelSpec>> specs(s.devices.size());
    for (const auto& kv : n) {
        const auto id = kv.first.as<std::string>();
        std::size_t d = 0;
        while (d < s.devices.size() && s.devices[d].id != id) ++d;
        if (d == s.devices.size()) fail(kv.first, "channel for unknown device '" + id + "'");
        specs[d] = parse_channel(kv.second, "channels." + id);
    }
    s.channels.clear();
    for (std::size_t d = 0; d < specs.size(); ++d) {
        if (!specs[d]) fail(n, "no channel given for device '" + s.devices[d].id + "'");
        s.channels.push_back(*specs[d]);
    }
}

void parse_model(const YAML::Node& n, const std::filesystem::path& base, trico::Scenario& s) {
    allow_keys(n, "model", {"builtin", "input", "usam_fraction", "profile"});
    if (n["profile"]) {
        if (n["builtin"] || n["input"] || n["usam_fraction"])
            fail(n, "'model' takes either 'profile' or builtin settings, not both");
        s.profile = nn::load_profile_csv(resolve(base, scalar<std::string>(n["profile"], "model.profile")).string());
        return;
    }
    std::string builtin = "resnet50_usam";
    read(n, "builtin", "model", builtin);
    if (builtin != "resnet50_usam") fail(n["builtin"], "unknown builtin model '" + builtin + "'");
    std::uint64_t h = 224, w = 224;
    if (const auto in = n["input"]) {
        if (in.IsScalar()) {
            h = w = read_count(in, "model.input");
        } else if (in.IsSequence() && in.size() == 2) {
            h = read_count(in[0], "model.input");
            w = read_count(in[1], "model.input");
        } else {
            fail(in, "'model.input' must be a size or an [h, w] pair");
        }
    }
    double fraction = 0.01;
    read(n, "usam_fraction", "model", fraction);
    try {
        s.profile = nn::build_resnet50_usam_profile(h, w, fraction);
    } catch (const InvalidArgument& e) {
        fail(n, e.what());
    }
}

struct PendingConf {
    std::optional<trico::ConfidentialityTable> table;
    std::optional<std::filesystem::path> corpus;
    YAML::Node node;
};

PendingConf parse_confidentiality(const YAML::Node& n, const std::filesystem::path& base) {
    allow_keys(n, "confidentiality", {"table", "file", "corpus"});
    const int given = int(bool(n["table"])) + int(bool(n["file"])) + int(bool(n["corpus"]));
    if (given != 1) fail(n, "'confidentiality' needs exactly one of table, file or corpus");
    PendingConf out;
    out.node = n;
    if (const auto t = n["table"]) {
        if (!t.IsSequence()) fail(t, "'confidentiality.table' must be a list");
        trico::ConfidentialityTable table;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const std::string path = "confidentiality.table[" + std::to_string(i) + "]";
            allow_keys(t[i], path, {"cut", "kl_open", "kl_closed", "ssim_open", "ssim_closed"});
            trico::ConfEntry e;
            e.cut = "cut" + std::to_string(i);
            read(t[i], "cut", path, e.cut);
            if (!t[i]["kl_open"] || !t[i]["kl_closed"]) fail(t[i], "'" + path + "' needs kl_open and kl_closed");
            read(t[i], "kl_open", path, e.kl_open);
            read(t[i], "kl_closed", path, e.kl_closed);
            if (t[i]["ssim_open"]) e.ssim_open = scalar<double>(t[i]["ssim_open"], path + ".ssim_open");
            if (t[i]["ssim_closed"]) e.ssim_closed = scalar<double>(t[i]["ssim_closed"], path + ".ssim_closed");
            table.entries.push_back(std::move(e));
        }
        out.table = std::move(table);
    } else if (const auto f = n["file"]) {
        out.table = trico::parse_conf_csv(
            privacy::read_file(resolve(base, scalar<std::string>(f, "confidentiality.file"))));
    } else {
        out.corpus = resolve(base, scalar<std::string>(n["corpus"], "confidentiality.corpus"));
    }
    return out;
}

void parse_weights(const YAML::Node& n, trico::TriCoWeights& w) {
    allow_keys(n, "weights", {"w_comm", "w_comp", "w_conf", "alpha_open", "lambda_latency"});
    read(n, "w_comm", "weights", w.w_comm);
    read(n, "w_comp", "weights", w.w_comp);
    read(n, "w_conf", "weights", w.w_conf);
    read(n, "alpha_open", "weights", w.alpha_open);
    read(n, "lambda_latency", "weights", w.lambda_latency);
    try {
        w.validate();
    } catch (const InvalidArgument& e) {
        fail(n, e.what());
    }
}

void parse_hyper(const YAML::Node& n, rl::Hyper& h) {
    const std::string p = "optimizer.hyper";
    allow_keys(n, p,
               {"lr", "actor_lr", "net_lr", "gamma", "eps_start", "eps_end", "eps_decay_fraction", "replay_capacity",
                "batch_size", "target_sync", "clip", "ppo_epochs", "rollout", "entropy_coef", "normalize_advantage",
                "hidden", "ensemble", "init_noise", "ac_replay"});
    read(n, "lr", p, h.lr);
    read(n, "actor_lr", p, h.actor_lr);
    read(n, "net_lr", p, h.net_lr);
    read(n, "gamma", p, h.gamma);
    read(n, "eps_start", p, h.eps_start);
    read(n, "eps_end", p, h.eps_end);
    read(n, "eps_decay_fraction", p, h.eps_decay_fraction);
    read_size(n, "replay_capacity", p, h.replay_capacity);
    read_size(n, "batch_size", p, h.batch_size);
    read_size(n, "target_sync", p, h.target_sync);
    read(n, "clip", p, h.clip);
    read_size(n, "ppo_epochs", p, h.ppo_epochs);
    read_size(n, "rollout", p, h.rollout);
    read(n, "entropy_coef", p, h.entropy_coef);
    read(n, "normalize_advantage", p, h.normalize_advantage);
    read_size(n, "hidden", p, h.hidden);
    read_size(n, "ensemble", p, h.ensemble);
    read(n, "init_noise", p, h.init_noise);
    read(n, "ac_replay", p, h.ac_replay);
}

void parse_optimizer(const YAML::Node& n, OptimizerConfig& o) {
    allow_keys(n, "optimizer", {"agent", "steps", "seed", "window", "horizon", "grid", "battery_bins", "hyper"});
    read(n, "agent", "optimizer", o.agent);
    const auto& names = rl::agent_names();
    if (std::find(names.begin(), names.end(), o.agent) == names.end())
        fail(n["agent"], "unknown agent '" + o.agent + "'");
    read_size(n, "steps", "optimizer", o.steps);
    if (n["seed"]) o.seed = read_count(n["seed"], "optimizer.seed");
    read_size(n, "window", "optimizer", o.hyper.window);
    read_size(n, "horizon", "optimizer", o.env.horizon);
    read_size(n, "battery_bins", "optimizer", o.env.battery_bins);
    if (const auto g = n["grid"]) {
        allow_keys(g, "optimizer.grid", {"bandwidth_bins", "snr_bins"});
        read_size(g, "bandwidth_bins", "optimizer.grid", o.env.grid.bandwidth_bins);
        read_size(g, "snr_bins", "optimizer.grid", o.env.grid.snr_bins);
    }
    if (const auto h = n["hyper"]) parse_hyper(h, o.hyper);
    try {
        o.hyper.validate();
        o.env.validate();
    } catch (const InvalidArgument& e) {
        fail(n, e.what());
    }
}

void parse_retrieval(const YAML::Node& n, RetrievalConfig& r) {
    allow_keys(n, "retrieval", {"locations", "dim", "noise", "seeds", "seed", "satellite_images", "fusion"});
    read_size(n, "locations", "retrieval", r.synth.locations);
    read_size(n, "dim", "retrieval", r.synth.dim);
    read_size(n, "seeds", "retrieval", r.seeds);
    if (n["seed"]) r.seed = read_count(n["seed"], "retrieval.seed");
    read_size(n, "satellite_images", "retrieval", r.synth.satellite_images);
    if (const auto nz = n["noise"]) {
        if (nz.IsScalar()) {
            const auto v = scalar<double>(nz, "retrieval.noise");
            r.synth.noise = {v, v, v};
        } else {
            allow_keys(nz, "retrieval.noise", {"satellite", "uav", "ground"});
            read(nz, "satellite", "retrieval.noise", r.synth.noise.satellite);
            read(nz, "uav", "retrieval.noise", r.synth.noise.uav);
            read(nz, "ground", "retrieval.noise", r.synth.noise.ground);
        }
    }
    if (const auto f = n["fusion"]) {
        const auto s = scalar<std::string>(f, "retrieval.fusion");
        if (s == "mean") r.fusion = retrieval::Fusion::mean;
        else if (s == "max_score") r.fusion = retrieval::Fusion::max_score;
        else fail(f, "'retrieval.fusion' must be 'mean' or 'max_score'");
    }
    if (r.seeds == 0) fail(n, "'retrieval.seeds' must be >= 1");
    try {
        r.synth.validate();
    } catch (const InvalidArgument& e) {
        fail(n, e.what());
    }
}

void parse_privacy(const YAML::Node& n, const std::filesystem::path& base, PrivacyConfig& p) {
    allow_keys(n, "privacy", {"corpus", "epsilon", "ssim_window", "ssim_mode"});
    if (n["corpus"]) p.corpus = resolve(base, scalar<std::string>(n["corpus"], "privacy.corpus"));
    read(n, "epsilon", "privacy", p.options.epsilon);
    read_size(n, "ssim_window", "privacy", p.options.ssim.window);
    if (const auto m = n["ssim_mode"]) {
        const auto s = scalar<std::string>(m, "privacy.ssim_mode");
        if (s == "block") p.options.ssim.mode = privacy::SsimWindow::block;
        else if (s == "gaussian") p.options.ssim.mode = privacy::SsimWindow::gaussian;
        else fail(m, "'privacy.ssim_mode' must be 'block' or 'gaussian'");
    }
    if (!(p.options.epsilon >= 0.0)) fail(n, "'privacy.epsilon' must be >= 0");
}

} // namespace

Config default_config() {
    Config c;
    c.scenario = trico::default_scenario();
    return c;
}

Config parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    Config c = default_config();
    if (root.IsNull()) return c;
    allow_keys(root, "config",
               {"devices", "channels", "model", "confidentiality", "weights", "optimizer", "retrieval", "privacy"});

    auto& s = c.scenario;
    if (const auto m = root["model"]) parse_model(m, base_dir, s);
    if (const auto d = root["devices"]) {
        parse_devices(d, s);
        if (!root["channels"]) fail(d, "'channels' is required when 'devices' is given");
    }
    if (const auto ch = root["channels"]) parse_channels(ch, s);
    if (const auto w = root["weights"]) parse_weights(w, s.weights);
    if (const auto o = root["optimizer"]) parse_optimizer(o, c.optimizer);
    if (const auto r = root["retrieval"]) parse_retrieval(r, c.retrieval);
    if (const auto p = root["privacy"]) parse_privacy(p, base_dir, c.privacy);

    s.conf_table = trico::default_conf_table(s.profile);
    if (const auto cf = root["confidentiality"]) {
        auto pending = parse_confidentiality(cf, base_dir);
        if (pending.corpus)
            s.conf_table = privacy::build_conf_table(privacy::load_corpus(*pending.corpus), c.privacy.options);
        else
            s.conf_table = std::move(*pending.table);
    }
    try {
        s.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = privacy::read_file(path);
    } catch (const InvalidArgument&) {
        throw ConfigError("cannot read config file '" + path.string() + "'");
    }
    return parse_config(text, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

} // namespace sagin::cli
