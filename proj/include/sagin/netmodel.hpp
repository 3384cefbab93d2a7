#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "sagin/error.hpp"
#include "sagin/random.hpp"

namespace sagin::net {

enum class DeviceKind { uav, vehicle };

inline const char* to_string(DeviceKind k) { return k == DeviceKind::uav ? "uav" : "vehicle"; }

/// An edge terminal: compute throughput, compute/transmit power, optional battery.
struct DeviceProfile {
    std::string id;
    DeviceKind kind = DeviceKind::uav;
    double peak_flops = 0.0;      // FLOP/s
    double compute_power_w = 0.0; // W at full compute load
    double tx_power_w = 0.0;      // W while transmitting
    std::optional<double> battery_j;

    void validate() const {
        if (!(peak_flops > 0.0) || !std::isfinite(peak_flops))
            throw InvalidArgument("device '" + id + "': peak_flops must be > 0");
        if (!(compute_power_w > 0.0) || !std::isfinite(compute_power_w))
            throw InvalidArgument("device '" + id + "': compute_power_w must be > 0");
        if (!(tx_power_w > 0.0) || !std::isfinite(tx_power_w))
            throw InvalidArgument("device '" + id + "': tx_power_w must be > 0");
        if (battery_j && !(*battery_j >= 0.0))
            throw InvalidArgument("device '" + id + "': battery_j must be >= 0");
    }
};

// Quadro P400: 0.641 TFLOPS FP32 at 30 W. Transmit power is an assumption.
inline DeviceProfile uav_device(std::string id = "uav0") {
    return DeviceProfile{std::move(id), DeviceKind::uav, 0.641e12, 30.0, 1.0, std::nullopt};
}

// DRIVE AGX Xavier GPU: 1.3 TFLOPS FP32. Wattage and transmit power are assumptions.
inline DeviceProfile vehicle_device(std::string id = "vehicle0") {
    return DeviceProfile{std::move(id), DeviceKind::vehicle, 1.3e12, 30.0, 2.0, std::nullopt};
}

inline DeviceProfile default_device(DeviceKind kind, std::string id) {
    return kind == DeviceKind::uav ? uav_device(std::move(id)) : vehicle_device(std::move(id));
}

struct ChannelState {
    double bandwidth_hz = 1.0;
    double snr_linear = 0.0;

    void validate() const {
        if (!(bandwidth_hz > 0.0) || !std::isfinite(bandwidth_hz))
            throw InvalidArgument("channel bandwidth_hz must be > 0");
        if (!(snr_linear >= 0.0) || !std::isfinite(snr_linear))
            throw InvalidArgument("channel snr_linear must be >= 0");
    }

    friend bool operator==(const ChannelState&, const ChannelState&) = default;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Uniform bandwidth in Hz, uniform SNR in dB.
struct ChannelDistribution {
    std::pair<double, double> bandwidth_range{1e6, 1e6};
    std::pair<double, double> snr_range_db{0.0, 0.0};

    void validate() const {
        if (!(bandwidth_range.first > 0.0) || !(bandwidth_range.first <= bandwidth_range.second) ||
            !std::isfinite(bandwidth_range.second))
            throw InvalidArgument("channel bandwidth range must satisfy 0 < min <= max");
        if (!(snr_range_db.first <= snr_range_db.second) || !std::isfinite(snr_range_db.first) ||
            !std::isfinite(snr_range_db.second))
            throw InvalidArgument("channel snr range must satisfy min <= max");
    }

    /// Midpoint bandwidth and midpoint SNR (in dB, then converted).
    ChannelState mean() const {
        return {0.5 * (bandwidth_range.first + bandwidth_range.second),
                db_to_linear(0.5 * (snr_range_db.first + snr_range_db.second))};
    }

    /// Slowest corner of the support.
    ChannelState worst() const { return {bandwidth_range.first, db_to_linear(snr_range_db.first)}; }
    /// Fastest corner of the support.
    ChannelState best() const { return {bandwidth_range.second, db_to_linear(snr_range_db.second)}; }
};

/// Shannon capacity B * log2(1 + SNR), in bit/s.
inline double shannon_rate(const ChannelState& ch) {
    return ch.bandwidth_hz * std::log2(1.0 + ch.snr_linear);
}

/// Seconds to push `payload_bytes` through a link of `rate_bps`.
inline double tx_latency(double payload_bytes, double rate_bps) {
    if (!(rate_bps > 0.0)) throw ZeroRate();
    return payload_bytes * 8.0 / rate_bps;
}

inline double tx_energy(double tx_power_w, double latency_s) { return tx_power_w * latency_s; }

inline ChannelState sample_channel(const ChannelDistribution& dist, Rng& rng) {
    const double bw = rng.uniform(dist.bandwidth_range.first, dist.bandwidth_range.second);
    const double db = rng.uniform(dist.snr_range_db.first, dist.snr_range_db.second);
    return {bw, db_to_linear(db)};
}

} // namespace sagin::net
