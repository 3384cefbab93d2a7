#pragma once

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "sagin/error.hpp"
#include "sagin/random.hpp"
#include "sagin/trico.hpp"

namespace sagin::rl {

/// Discretization of each device's channel support into (bandwidth x SNR-dB) bins.
struct ChannelGrid {
    std::size_t bandwidth_bins = 1;
    std::size_t snr_bins = 3;
};

struct EnvConfig {
    ChannelGrid grid;
    std::size_t battery_bins = 1;
    double battery_reference_j = 1e5; // battery level mapped to the top bin
    std::size_t horizon = 1;          // steps per episode

    void validate() const {
        if (grid.bandwidth_bins == 0 || grid.snr_bins == 0) throw InvalidArgument("channel grid bins must be > 0");
        if (battery_bins == 0) throw InvalidArgument("battery_bins must be > 0");
        if (!(battery_reference_j > 0.0)) throw InvalidArgument("battery_reference_j must be > 0");
        if (horizon == 0) throw InvalidArgument("horizon must be > 0");
    }
};

struct EnvState {
    std::vector<std::size_t> channel_bin; // per device, bandwidth_bin * snr_bins + snr_bin
    std::vector<std::size_t> battery_bin; // per device
    std::size_t step = 0;

    friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct Transition {
    EnvState state;
    std::size_t action = 0;
    double reward = 0.0; // -effect
    EnvState next_state;
    bool done = true;
    double effect = 0.0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Partition selection as a sequential decision problem.
///
/// An action is a joint cut assignment (decision id, see trico::decode_decision).
/// The state holds each device's channel bin; a step draws a concrete channel
/// inside that bin, scores the action with the effect function, and draws the
/// next state from the channel distributions.
class Environment {
public:
    static constexpr std::size_t max_actions = 125;

    Environment(trico::CostModel model, EnvConfig config = {}) : model_(std::move(model)), config_(config) {
        config_.validate();
        if (model_.decisions() > max_actions)
            throw InvalidArgument("joint action space has " + std::to_string(model_.decisions()) +
                                  " actions; at most " + std::to_string(max_actions) + " are supported");
        const auto& s = model_.scenario();
        for (std::size_t d = 0; d < s.devices.size(); ++d) {
            const bool fixed = std::holds_alternative<net::ChannelState>(s.channels[d]);
            bw_bins_.push_back(fixed ? 1 : config_.grid.bandwidth_bins);
            snr_bins_.push_back(fixed ? 1 : config_.grid.snr_bins);
            std::size_t battery = 0;
            if (s.devices[d].battery_j) {
                const double frac = *s.devices[d].battery_j / config_.battery_reference_j;
                battery = std::min(config_.battery_bins - 1,
                                   static_cast<std::size_t>(std::max(0.0, std::floor(frac * config_.battery_bins))));
            }
            battery_.push_back(battery);
        }
        reference_channels_ = s.reference_channels();
    }

    const trico::CostModel& model() const { return model_; }
    const EnvConfig& config() const { return config_; }
    std::size_t devices() const { return model_.devices(); }
    std::size_t action_count() const { return model_.decisions(); }

    std::size_t state_count() const {
        std::size_t n = 1;
        for (std::size_t d = 0; d < devices(); ++d) n *= channel_bins(d) * config_.battery_bins;
        return n;
    }

    std::size_t channel_bins(std::size_t device) const { return bw_bins_[device] * snr_bins_[device]; }

    /// Length of the one-hot feature encoding.
    std::size_t feature_size() const {
        std::size_t n = 0;
        for (std::size_t d = 0; d < devices(); ++d) n += channel_bins(d) + config_.battery_bins;
        return n;
    }

    std::size_t state_id(const EnvState& s) const {
        std::size_t id = 0;
        for (std::size_t d = 0; d < devices(); ++d) {
            id = id * channel_bins(d) + s.channel_bin[d];
            id = id * config_.battery_bins + s.battery_bin[d];
        }
        return id;
    }

    EnvState state_from_id(std::size_t id) const {
        EnvState s;
        s.channel_bin.resize(devices());
        s.battery_bin.resize(devices());
        for (std::size_t d = devices(); d-- > 0;) {
            s.battery_bin[d] = id % config_.battery_bins;
            id /= config_.battery_bins;
            s.channel_bin[d] = id % channel_bins(d);
            id /= channel_bins(d);
        }
        return s;
    }

    std::vector<double> features(const EnvState& s) const {
        std::vector<double> x(feature_size(), 0.0);
        std::size_t off = 0;
        for (std::size_t d = 0; d < devices(); ++d) {
            x[off + s.channel_bin[d]] = 1.0;
            off += channel_bins(d);
            x[off + s.battery_bin[d]] = 1.0;
            off += config_.battery_bins;
        }
        return x;
    }

    /// Bin that holds `ch` for `device`.
    std::size_t bin_of(std::size_t device, const net::ChannelState& ch) const {
        const auto& spec = model_.scenario().channels[device];
        const auto* dist = std::get_if<net::ChannelDistribution>(&spec);
        if (!dist) return 0;
        const auto bw = bin_index(ch.bandwidth_hz, dist->bandwidth_range, bw_bins_[device]);
        const double db = ch.snr_linear > 0.0 ? 10.0 * std::log10(ch.snr_linear) : -1e300;
        const auto snr = bin_index(db, dist->snr_range_db, snr_bins_[device]);
        return bw * snr_bins_[device] + snr;
    }

    EnvState state_for(std::span<const net::ChannelState> channels, std::size_t step = 0) const {
        EnvState s;
        for (std::size_t d = 0; d < devices(); ++d) s.channel_bin.push_back(bin_of(d, channels[d]));
        s.battery_bin = battery_;
        s.step = step;
        return s;
    }

    /// State containing every device's reference channel.
    EnvState reference_state() const { return state_for(reference_channels_); }
    const std::vector<net::ChannelState>& reference_channels() const { return reference_channels_; }

    EnvState reset(Rng& rng) const {
        std::vector<net::ChannelState> ch;
        for (std::size_t d = 0; d < devices(); ++d) ch.push_back(sample_full(d, rng));
        return state_for(ch, 0);
    }

    /// Concrete channel drawn uniformly inside the state's bin.
    net::ChannelState sample_in_bin(std::size_t device, std::size_t bin, Rng& rng) const {
        const auto& spec = model_.scenario().channels[device];
        if (const auto* fixed = std::get_if<net::ChannelState>(&spec)) return *fixed;
        const auto& dist = std::get<net::ChannelDistribution>(spec);
        const auto bw_bin = bin / snr_bins_[device];
        const auto snr_bin = bin % snr_bins_[device];
        const auto [bw_lo, bw_hi] = slice(dist.bandwidth_range, bw_bin, bw_bins_[device]);
        const auto [db_lo, db_hi] = slice(dist.snr_range_db, snr_bin, snr_bins_[device]);
        const double bw = rng.uniform(bw_lo, bw_hi);
        const double db = rng.uniform(db_lo, db_hi);
        return {bw, net::db_to_linear(db)};
    }

    Transition step(const EnvState& state, std::size_t action, Rng& rng) const {
        if (action >= action_count()) throw InvalidArgument("action id out of range");
        Transition t;
        t.state = state;
        t.action = action;
        std::vector<net::ChannelState> ch;
        for (std::size_t d = 0; d < devices(); ++d) ch.push_back(sample_in_bin(d, state.channel_bin[d], rng));
        const auto decision = trico::decode_decision(action, model_.candidates(), devices());
        // An unusable link scores the worst effect so learning continues.
        t.effect = model_.any_infeasible(ch) ? 1.0 : model_.effect(decision, ch);
        t.reward = -t.effect;
        t.done = state.step + 1 >= config_.horizon;
        std::vector<net::ChannelState> next;
        for (std::size_t d = 0; d < devices(); ++d) next.push_back(sample_full(d, rng));
        t.next_state = state_for(next, t.done ? 0 : state.step + 1);
        return t;
    }

    /// Effect of `action` at the reference channels.
    double reference_effect(std::size_t action) const {
        if (model_.any_infeasible(reference_channels_)) return 1.0;
        return model_.effect(trico::decode_decision(action, model_.candidates(), devices()), reference_channels_);
    }

private:
    static std::size_t bin_index(double v, std::pair<double, double> range, std::size_t bins) {
        if (bins <= 1 || !(range.second > range.first)) return 0;
        const double f = (v - range.first) / (range.second - range.first);
        const auto i = static_cast<long long>(std::floor(f * static_cast<double>(bins)));
        return static_cast<std::size_t>(std::clamp<long long>(i, 0, static_cast<long long>(bins) - 1));
    }

    static std::pair<double, double> slice(std::pair<double, double> range, std::size_t i, std::size_t n) {
        const double w = (range.second - range.first) / static_cast<double>(n);
        const double lo = range.first + w * static_cast<double>(i);
        const double hi = i + 1 == n ? range.second : range.first + w * static_cast<double>(i + 1);
        return {lo, hi};
    }

    net::ChannelState sample_full(std::size_t device, Rng& rng) const {
        const auto& spec = model_.scenario().channels[device];
        if (const auto* fixed = std::get_if<net::ChannelState>(&spec)) return *fixed;
        return net::sample_channel(std::get<net::ChannelDistribution>(spec), rng);
    }

    trico::CostModel model_;
    EnvConfig config_;
    std::vector<std::size_t> bw_bins_, snr_bins_, battery_;
    std::vector<net::ChannelState> reference_channels_;
};

} // namespace sagin::rl
