#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sagin/csv.hpp"
#include "sagin/error.hpp"
#include "sagin/netmodel.hpp"
#include "sagin/nnprofile.hpp"

namespace sagin::trico {

using net::ChannelDistribution;
using net::ChannelState;
using net::DeviceProfile;
using nn::ModelProfile;
using nn::PartitionPoint;

struct ConfEntry {
    std::string cut;
    double kl_open = 0.0;   // nats, KL(original || open-box reconstruction)
    double kl_closed = 0.0; // nats, KL(original || closed-box reconstruction)
    std::optional<double> ssim_open;
    std::optional<double> ssim_closed;

    friend bool operator==(const ConfEntry&, const ConfEntry&) = default;
};

/// Per-candidate attack outcomes; larger KL means less leakage.
struct ConfidentialityTable {
    std::vector<ConfEntry> entries; // one per partition candidate, in candidate order

    double kl_max() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max({m, e.kl_open, e.kl_closed});
        return m;
    }

    void validate() const {
        if (entries.empty()) throw InvalidArgument("confidentiality table is empty");
        for (const auto& e : entries) {
            if (!(e.kl_open >= 0.0) || !(e.kl_closed >= 0.0) || !std::isfinite(e.kl_open) ||
                !std::isfinite(e.kl_closed))
                throw InvalidArgument("confidentiality table '" + e.cut + "': KL values must be finite and >= 0");
            for (const auto& s : {e.ssim_open, e.ssim_closed})
                if (s && !(*s >= 0.0 && *s <= 1.0))
                    throw InvalidArgument("confidentiality table '" + e.cut + "': SSIM must be in [0,1]");
        }
        if (!(kl_max() > 0.0)) throw InvalidArgument("confidentiality table: maximum KL must be > 0");
    }

    friend bool operator==(const ConfidentialityTable&, const ConfidentialityTable&) = default;
};

/// Illustrative table with KL doubling at every deeper cut.
inline ConfidentialityTable default_conf_table(const ModelProfile& profile) {
    ConfidentialityTable t;
    double kl = 0.5;
    for (std::size_t i = 0; i < profile.candidate_count(); ++i, kl *= 2.0)
        t.entries.push_back({profile.candidate_name({i}), kl, kl, std::nullopt, std::nullopt});
    return t;
}

struct TriCoWeights {
    double w_comm = 1.0 / 3.0;
    double w_comp = 1.0 / 3.0;
    double w_conf = 1.0 / 3.0;
    double alpha_open = 0.5;     // weight of the open-box KL ratio
    double lambda_latency = 0.5; // latency vs energy inside the communication term

    void validate() const {
        for (double w : {w_comm, w_comp, w_conf})
            if (!(w >= 0.0)) throw InvalidArgument("cost weights must be >= 0");
        if (std::abs(w_comm + w_comp + w_conf - 1.0) > 1e-9)
            throw InvalidArgument("cost weights must sum to 1");
        if (!(alpha_open >= 0.0 && alpha_open <= 1.0)) throw InvalidArgument("alpha_open must be in [0,1]");
        if (!(lambda_latency >= 0.0 && lambda_latency <= 1.0))
            throw InvalidArgument("lambda_latency must be in [0,1]");
    }
};

struct CommCost {
    double latency_s = 0.0;
    double energy_j = 0.0;
};

struct NormalizedTerms {
    double n_comm = 0.0;
    double n_comp = 0.0;
    double n_conf = 0.0;
};

/// Raw and normalized cost of one device at one cut under one channel.
struct TriCoBreakdown {
    double comm_latency_s = 0.0;
    double comm_energy_j = 0.0;
    double comp_energy_j = 0.0;
    double conf_cost = 0.0;
    NormalizedTerms normalized;
    double effect = 0.0;
    bool feasible = true;
};

inline CommCost comm_cost(const DeviceProfile& dev, const ChannelState& ch, const ModelProfile& profile,
                          PartitionPoint cut) {
    const double latency =
        net::tx_latency(static_cast<double>(nn::intermediate_bytes(profile, cut)), net::shannon_rate(ch));
    return {latency, net::tx_energy(dev.tx_power_w, latency)};
}

inline double comp_cost(const DeviceProfile& dev, const ModelProfile& profile, PartitionPoint cut) {
    return static_cast<double>(nn::device_flops(profile, cut)) / dev.peak_flops * dev.compute_power_w;
}

/// 1 - (alpha * KL_open + (1 - alpha) * KL_closed) / KL_max, clamped to [0,1].
inline double conf_cost(const ConfidentialityTable& table, PartitionPoint cut, double alpha_open) {
    if (cut.candidate_index >= table.entries.size())
        throw MissingEntry("confidentiality table has no entry for candidate " +
                           std::to_string(cut.candidate_index));
    const double kl_max = table.kl_max();
    if (!(kl_max > 0.0)) throw InvalidArgument("confidentiality table: maximum KL must be > 0");
    const auto& e = table.entries[cut.candidate_index];
    const double ratio = (alpha_open * e.kl_open + (1.0 - alpha_open) * e.kl_closed) / kl_max;
    return std::clamp(1.0 - ratio, 0.0, 1.0);
}

/// Min-max ranges of the raw terms over a candidate set.
struct CostBounds {
    double latency_min = std::numeric_limits<double>::infinity();
    double latency_max = -std::numeric_limits<double>::infinity();
    double energy_min = std::numeric_limits<double>::infinity();
    double energy_max = -std::numeric_limits<double>::infinity();
    double comp_min = std::numeric_limits<double>::infinity();
    double comp_max = -std::numeric_limits<double>::infinity();

    void include(const TriCoBreakdown& row) {
        latency_min = std::min(latency_min, row.comm_latency_s);
        latency_max = std::max(latency_max, row.comm_latency_s);
        energy_min = std::min(energy_min, row.comm_energy_j);
        energy_max = std::max(energy_max, row.comm_energy_j);
        comp_min = std::min(comp_min, row.comp_energy_j);
        comp_max = std::max(comp_max, row.comp_energy_j);
    }
};

namespace detail {
// A degenerate range (max == min) maps to 0.
inline double min_max(double v, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}
} // namespace detail

inline NormalizedTerms normalize(const TriCoBreakdown& raw, const CostBounds& b, double lambda_latency) {
    const double nl = detail::min_max(raw.comm_latency_s, b.latency_min, b.latency_max);
    const double ne = detail::min_max(raw.comm_energy_j, b.energy_min, b.energy_max);
    return {lambda_latency * nl + (1.0 - lambda_latency) * ne,
            detail::min_max(raw.comp_energy_j, b.comp_min, b.comp_max), std::clamp(raw.conf_cost, 0.0, 1.0)};
}

/// Min-max normalization over one candidate set; conf_cost passes through.
inline std::vector<NormalizedTerms> normalize_costs(std::span<const TriCoBreakdown> rows, double lambda_latency) {
    CostBounds b;
    for (const auto& r : rows) b.include(r);
    std::vector<NormalizedTerms> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(normalize(r, b, lambda_latency));
    return out;
}

inline double effect(const TriCoWeights& w, const NormalizedTerms& t) {
    return w.w_comm * t.n_comm + w.w_comp * t.n_comp + w.w_conf * t.n_conf;
}

using ChannelSpec = std::variant<ChannelState, ChannelDistribution>;

inline ChannelState reference_channel(const ChannelSpec& spec) {
    if (const auto* fixed = std::get_if<ChannelState>(&spec)) return *fixed;
    return std::get<ChannelDistribution>(spec).mean();
}

struct Scenario {
    std::vector<DeviceProfile> devices;
    ModelProfile profile;
    std::vector<ChannelSpec> channels; // one per device
    ConfidentialityTable conf_table;
    TriCoWeights weights;

    void validate() const {
        if (devices.empty()) throw InvalidArgument("scenario needs at least one device");
        if (channels.size() != devices.size())
            throw InvalidArgument("scenario needs exactly one channel per device");
        for (const auto& d : devices) d.validate();
        for (const auto& c : channels) std::visit([](const auto& x) { x.validate(); }, c);
        profile.validate();
        conf_table.validate();
        if (conf_table.entries.size() < profile.candidate_count())
            throw MissingEntry("confidentiality table covers " + std::to_string(conf_table.entries.size()) +
                               " of " + std::to_string(profile.candidate_count()) + " partition candidates");
        weights.validate();
    }

    std::vector<ChannelState> reference_channels() const {
        std::vector<ChannelState> out;
        for (const auto& c : channels) out.push_back(reference_channel(c));
        return out;
    }

    std::size_t decision_count() const {
        std::size_t n = 1;
        for (std::size_t i = 0; i < devices.size(); ++i) n *= profile.candidate_count();
        return n;
    }
};

struct PartitionDecision {
    std::vector<PartitionPoint> cuts; // one per device

    friend bool operator==(const PartitionDecision&, const PartitionDecision&) = default;
};

/// Decision id with device 0 as the most significant digit, so id order is
/// lexicographic order over (cut of device 0, cut of device 1, ...).
inline PartitionDecision decode_decision(std::size_t id, std::size_t candidates, std::size_t devices) {
    PartitionDecision d;
    d.cuts.resize(devices);
    for (std::size_t i = devices; i-- > 0;) {
        d.cuts[i] = {id % candidates};
        id /= candidates;
    }
    return d;
}

inline std::size_t encode_decision(const PartitionDecision& d, std::size_t candidates) {
    std::size_t id = 0;
    for (const auto& c : d.cuts) id = id * candidates + c.candidate_index;
    return id;
}

/// Evaluates the effect function for a scenario.
///
/// Normalization bounds are fixed per device for the whole scenario: the
/// communication range spans every candidate at both the slowest and fastest
/// corner of the device's channel support (a fixed channel spans only itself).
/// Any concrete channel inside that support therefore yields terms in [0,1],
/// and at a fixed channel this reduces to min-max over the candidate set.
class CostModel {
public:
    explicit CostModel(Scenario scenario) : scenario_(std::move(scenario)) {
        scenario_.validate();
        const auto& p = scenario_.profile;
        for (std::size_t c = 0; c < p.candidate_count(); ++c) {
            bytes_.push_back(static_cast<double>(nn::intermediate_bytes(p, {c})));
            flops_.push_back(static_cast<double>(nn::device_flops(p, {c})));
            conf_.push_back(conf_cost(scenario_.conf_table, {c}, scenario_.weights.alpha_open));
        }
        for (std::size_t d = 0; d < scenario_.devices.size(); ++d) {
            CostBounds b;
            feasible_.push_back(true);
            std::vector<ChannelState> span_channels;
            if (const auto* fixed = std::get_if<ChannelState>(&scenario_.channels[d]))
                span_channels = {*fixed};
            else
                span_channels = {std::get<ChannelDistribution>(scenario_.channels[d]).worst(),
                                 std::get<ChannelDistribution>(scenario_.channels[d]).best()};
            for (const auto& ch : span_channels) {
                if (!(net::shannon_rate(ch) > 0.0)) {
                    feasible_[d] = false;
                    continue;
                }
                for (std::size_t c = 0; c < p.candidate_count(); ++c) b.include(raw(d, c, ch));
            }
            bounds_.push_back(b);
        }
    }

    const Scenario& scenario() const { return scenario_; }
    std::size_t devices() const { return scenario_.devices.size(); }
    std::size_t candidates() const { return scenario_.profile.candidate_count(); }
    std::size_t decisions() const { return scenario_.decision_count(); }
    const CostBounds& bounds(std::size_t device) const { return bounds_.at(device); }

    /// Raw terms; throws ZeroRate for an unusable link.
    TriCoBreakdown raw(std::size_t device, std::size_t cut, const ChannelState& ch) const {
        const auto& dev = scenario_.devices[device];
        TriCoBreakdown r;
        r.comm_latency_s = net::tx_latency(bytes_[cut], net::shannon_rate(ch));
        r.comm_energy_j = net::tx_energy(dev.tx_power_w, r.comm_latency_s);
        r.comp_energy_j = flops_[cut] / dev.peak_flops * dev.compute_power_w;
        r.conf_cost = conf_[cut];
        return r;
    }

    /// Full breakdown. An unusable link marks the row infeasible with effect 1.
    TriCoBreakdown breakdown(std::size_t device, std::size_t cut, const ChannelState& ch) const {
        if (!feasible_[device] || !(net::shannon_rate(ch) > 0.0)) {
            TriCoBreakdown r;
            r.comm_latency_s = std::numeric_limits<double>::infinity();
            r.comm_energy_j = std::numeric_limits<double>::infinity();
            r.comp_energy_j = flops_[cut] / scenario_.devices[device].peak_flops *
                              scenario_.devices[device].compute_power_w;
            r.conf_cost = conf_[cut];
            r.normalized = {1.0, 1.0, 1.0};
            r.effect = 1.0;
            r.feasible = false;
            return r;
        }
        auto r = raw(device, cut, ch);
        r.normalized = normalize(r, bounds_[device], scenario_.weights.lambda_latency);
        r.effect = trico::effect(scenario_.weights, r.normalized);
        return r;
    }

    double device_effect(std::size_t device, std::size_t cut, const ChannelState& ch) const {
        return breakdown(device, cut, ch).effect;
    }

    /// Mean of per-device effects.
    double effect(const PartitionDecision& decision, std::span<const ChannelState> channels) const {
        if (decision.cuts.size() != devices() || channels.size() != devices())
            throw InvalidArgument("decision and channels must cover every device");
        double sum = 0.0;
        for (std::size_t d = 0; d < devices(); ++d) {
            scenario_.profile.check(decision.cuts[d]);
            sum += device_effect(d, decision.cuts[d].candidate_index, channels[d]);
        }
        return sum / static_cast<double>(devices());
    }

    bool any_infeasible(std::span<const ChannelState> channels) const {
        for (std::size_t d = 0; d < devices(); ++d)
            if (!feasible_[d] || !(net::shannon_rate(channels[d]) > 0.0)) return true;
        return false;
    }

private:
    Scenario scenario_;
    std::vector<double> bytes_, flops_, conf_;
    std::vector<CostBounds> bounds_;
    std::vector<bool> feasible_;
};

struct OracleResult {
    PartitionDecision decision;
    double effect = 0.0;
    std::size_t evaluated = 0;
};

/// Exhaustive search over every joint decision at fixed channels.
///
/// Ties go to the lexicographically largest decision, i.e. the deeper cut for
/// the first device, then for the next, and so on.
inline OracleResult brute_force_optimal(const CostModel& model, std::span<const ChannelState> channels) {
    const auto n = model.decisions();
    OracleResult best;
    best.effect = std::numeric_limits<double>::infinity();
    std::size_t best_id = 0;
    for (std::size_t id = 0; id < n; ++id) {
        const auto d = decode_decision(id, model.candidates(), model.devices());
        const double e = model.effect(d, channels);
        if (e < best.effect || (e == best.effect && id > best_id)) {
            best.effect = e;
            best_id = id;
        }
    }
    best.decision = decode_decision(best_id, model.candidates(), model.devices());
    best.evaluated = n;
    return best;
}

/// Oracle at each device's reference channel (fixed value or distribution mean).
inline OracleResult brute_force_optimal(const CostModel& model) {
    const auto ch = model.scenario().reference_channels();
    return brute_force_optimal(model, ch);
}

// Cost table export.
inline constexpr const char* cost_csv_header =
    "device,cut_name,comm_latency_s,comm_energy_j,comp_energy_j,conf_cost,n_comm,n_comp,n_conf,effect";

inline std::string cost_csv_row(const std::string& device, const std::string& cut, const TriCoBreakdown& b) {
    using csv::format;
    return device + "," + cut + "," + format(b.comm_latency_s) + "," + format(b.comm_energy_j) + "," +
           format(b.comp_energy_j) + "," + format(b.conf_cost) + "," + format(b.normalized.n_comm) + "," +
           format(b.normalized.n_comp) + "," + format(b.normalized.n_conf) + "," + format(b.effect);
}

// Confidentiality table file: cut,kl_open,kl_closed,ssim_open,ssim_closed (SSIM cells may be empty).
inline constexpr const char* conf_csv_header = "cut,kl_open,kl_closed,ssim_open,ssim_closed";

inline std::string write_conf_csv(const ConfidentialityTable& t) {
    std::string out = std::string(conf_csv_header) + "\n";
    for (const auto& e : t.entries) {
        out += e.cut + "," + csv::format(e.kl_open) + "," + csv::format(e.kl_closed) + "," +
               (e.ssim_open ? csv::format(*e.ssim_open) : "") + "," +
               (e.ssim_closed ? csv::format(*e.ssim_closed) : "") + "\n";
    }
    return out;
}

inline ConfidentialityTable parse_conf_csv(std::string_view text) {
    const auto rows = csv::lines(text);
    if (rows.empty() || csv::trim(rows[0]) != conf_csv_header)
        throw InvalidArgument(std::string("confidentiality table: expected header '") + conf_csv_header + "'");
    ConfidentialityTable t;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto f = csv::split(rows[r]);
        if (f.size() != 5)
            throw InvalidArgument("confidentiality table line " + std::to_string(r + 1) + ": expected 5 fields");
        ConfEntry e;
        e.cut = std::string(csv::trim(f[0]));
        e.kl_open = csv::parse_double(f[1]);
        e.kl_closed = csv::parse_double(f[2]);
        if (!csv::trim(f[3]).empty()) e.ssim_open = csv::parse_double(f[3]);
        if (!csv::trim(f[4]).empty()) e.ssim_closed = csv::parse_double(f[4]);
        t.entries.push_back(std::move(e));
    }
    t.validate();
    return t;
}

/// Two devices (UAV and vehicle) on the built ResNet-50 profile at 224x224.
inline Scenario default_scenario() {
    Scenario s;
    s.profile = nn::build_resnet50_usam_profile(224, 224);
    s.devices = {net::uav_device("uav0"), net::vehicle_device("vehicle0")};
    s.channels = {ChannelDistribution{{5e6, 15e6}, {5.0, 15.0}}, ChannelDistribution{{10e6, 30e6}, {10.0, 20.0}}};
    s.conf_table = default_conf_table(s.profile);
    return s;
}

} // namespace sagin::trico
