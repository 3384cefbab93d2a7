#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sagin/csv.hpp"
#include "sagin/error.hpp"

namespace sagin::nn {

/// One row of a layered model: forward-pass FLOPs and output tensor size.
///
/// FLOPs count 2 per multiply-accumulate. Normalization, activation, pooling
/// and residual additions count 1 per output element.
struct LayerProfile {
    std::string name;
    std::uint64_t flops = 0;
    std::uint64_t out_elements = 1;
    std::uint32_t bytes_per_element = 4;

    std::uint64_t out_bytes() const { return out_elements * bytes_per_element; }

    friend bool operator==(const LayerProfile&, const LayerProfile&) = default;
};

/// A cut selected among a profile's partition candidates.
struct PartitionPoint {
    std::size_t candidate_index = 0;

    friend auto operator<=>(const PartitionPoint&, const PartitionPoint&) = default;
};

struct ModelProfile {
    std::vector<LayerProfile> layers;
    std::vector<std::size_t> partition_candidates; // indices into layers, strictly increasing
    std::uint64_t input_bytes = 0;

    std::size_t candidate_count() const { return partition_candidates.size(); }

    void validate() const {
        if (layers.empty()) throw InvalidArgument("model profile has no layers");
        for (const auto& l : layers) {
            if (l.out_elements == 0)
                throw InvalidArgument("layer '" + l.name + "': out_elements must be > 0");
            if (l.bytes_per_element != 1 && l.bytes_per_element != 2 && l.bytes_per_element != 4)
                throw InvalidArgument("layer '" + l.name + "': bytes_per_element must be 1, 2 or 4");
        }
        if (partition_candidates.empty())
            throw InvalidArgument("model profile has no partition candidates");
        for (std::size_t i = 0; i < partition_candidates.size(); ++i) {
            if (partition_candidates[i] >= layers.size())
                throw InvalidArgument("partition candidate index out of range");
            if (i > 0 && partition_candidates[i] <= partition_candidates[i - 1])
                throw InvalidArgument("partition candidates must be strictly increasing");
        }
    }

    void check(PartitionPoint cut) const {
        if (cut.candidate_index >= partition_candidates.size())
            throw InvalidArgument("partition point " + std::to_string(cut.candidate_index) +
                                  " out of range (" + std::to_string(partition_candidates.size()) +
                                  " candidates)");
    }

    const LayerProfile& cut_layer(PartitionPoint cut) const {
        check(cut);
        return layers[partition_candidates[cut.candidate_index]];
    }

    const std::string& candidate_name(PartitionPoint cut) const { return cut_layer(cut).name; }

    std::uint64_t total_flops() const {
        std::uint64_t sum = 0;
        for (const auto& l : layers) sum += l.flops;
        return sum;
    }

    friend bool operator==(const ModelProfile&, const ModelProfile&) = default;
};

/// FLOPs executed on the device when the model is cut after `cut`.
inline std::uint64_t device_flops(const ModelProfile& profile, PartitionPoint cut) {
    profile.check(cut);
    const auto last = profile.partition_candidates[cut.candidate_index];
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i <= last; ++i) sum += profile.layers[i].flops;
    return sum;
}

/// FLOPs left for the ground server.
inline std::uint64_t server_flops(const ModelProfile& profile, PartitionPoint cut) {
    return profile.total_flops() - device_flops(profile, cut);
}

/// Bytes of the intermediate tensor sent over the link.
inline std::uint64_t intermediate_bytes(const ModelProfile& profile, PartitionPoint cut) {
    return profile.cut_layer(cut).out_bytes();
}

namespace detail {

struct Shape {
    std::uint64_t c, h, w;
    std::uint64_t elements() const { return c * h * w; }
};

// 2 * MACs for a k x k convolution producing `out`.
inline std::uint64_t conv_flops(std::uint64_t k, std::uint64_t in_c, const Shape& out) {
    return 2 * k * k * in_c * out.c * out.h * out.w;
}

struct ResNetBuilder {
    ModelProfile profile;
    Shape shape;

    void push(std::string name, std::uint64_t flops, const Shape& out, bool candidate = false) {
        profile.layers.push_back({std::move(name), flops, out.elements(), 4});
        if (candidate) profile.partition_candidates.push_back(profile.layers.size() - 1);
        shape = out;
    }

    // torchvision-style bottleneck: stride sits on the 3x3 convolution.
    std::uint64_t bottleneck(const std::string& name, std::uint64_t mid, std::uint64_t stride,
                             bool candidate) {
        const Shape in = shape;
        const std::uint64_t out_c = mid * 4;
        const Shape a{mid, in.h, in.w};
        const Shape b{mid, in.h / stride, in.w / stride};
        const Shape c{out_c, b.h, b.w};
        std::uint64_t flops = 0;
        flops += conv_flops(1, in.c, a) + 2 * a.elements();  // 1x1 reduce + bn + relu
        flops += conv_flops(3, mid, b) + 2 * b.elements();   // 3x3 + bn + relu
        flops += conv_flops(1, mid, c) + c.elements();       // 1x1 expand + bn
        if (in.c != out_c || stride != 1)
            flops += conv_flops(1, in.c, c) + c.elements();  // projection shortcut + bn
        flops += 2 * c.elements();                           // residual add + relu
        push(name, flops, c, candidate);
        return flops;
    }

    std::uint64_t stage(int index, std::uint64_t mid, int blocks, std::uint64_t stride, bool candidate) {
        std::uint64_t flops = 0;
        for (int b = 0; b < blocks; ++b) {
            const bool last = b + 1 == blocks;
            flops += bottleneck("stage" + std::to_string(index) + ".block" + std::to_string(b + 1), mid,
                                b == 0 ? stride : 1, candidate && last);
        }
        return flops;
    }

    void attention(const std::string& name, std::uint64_t preceding_flops, double fraction, bool candidate) {
        const auto flops = static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(preceding_flops)));
        push(name, flops, shape, candidate);
    }
};

} // namespace detail

/// ResNet-50 backbone (no pooling head or classifier) with two shape-preserving
/// attention modules: one after the stem convolution and one after stage 1.
///
/// Partition candidates, in order: stem convolution, first attention module,
/// stage 2, stage 3, stage 4. Attention FLOPs are `usam_fraction` of the
/// preceding block's FLOPs.
inline ModelProfile build_resnet50_usam_profile(std::uint64_t input_h, std::uint64_t input_w,
                                                double usam_fraction = 0.01) {
    if (input_h < 32 || input_w < 32 || input_h % 32 != 0 || input_w % 32 != 0)
        throw DimensionError("input dimensions must be >= 32 and divisible by 32, got " +
                             std::to_string(input_h) + "x" + std::to_string(input_w));
    if (!(usam_fraction >= 0.0) || !std::isfinite(usam_fraction))
        throw InvalidArgument("usam_fraction must be >= 0");

    detail::ResNetBuilder b;
    b.profile.input_bytes = 3 * input_h * input_w;
    b.shape = {3, input_h, input_w};

    const detail::Shape stem{64, input_h / 2, input_w / 2};
    const auto stem_flops = detail::conv_flops(7, 3, stem) + 2 * stem.elements();
    b.push("stem.conv", stem_flops, stem, true);
    b.attention("usam1", stem_flops, usam_fraction, true);
    const detail::Shape pooled{64, stem.h / 2, stem.w / 2};
    b.push("stem.maxpool", pooled.elements(), pooled);

    const auto stage1 = b.stage(1, 64, 3, 1, false);
    b.attention("usam2", stage1, usam_fraction, false);
    b.stage(2, 128, 4, 2, true);
    b.stage(3, 256, 6, 2, true);
    b.stage(4, 512, 3, 2, true);
    return b.profile;
}

// Profile file: one-line header, then one row per layer.
inline constexpr const char* profile_csv_header = "name,flops,out_elements,bytes_per_element,is_candidate";

inline std::string write_profile_csv(const ModelProfile& profile) {
    profile.validate();
    std::string out = std::string(profile_csv_header) + "\n";
    std::size_t next = 0;
    for (std::size_t i = 0; i < profile.layers.size(); ++i) {
        const auto& l = profile.layers[i];
        if (l.name.find_first_of(",\n\r") != std::string::npos)
            throw InvalidArgument("layer name may not contain commas or newlines: '" + l.name + "'");
        const bool candidate = next < profile.partition_candidates.size() && profile.partition_candidates[next] == i;
        if (candidate) ++next;
        out += l.name + "," + std::to_string(l.flops) + "," + std::to_string(l.out_elements) + "," +
               std::to_string(l.bytes_per_element) + "," + (candidate ? "1" : "0") + "\n";
    }
    return out;
}

inline ModelProfile parse_profile_csv(std::string_view text) {
    const auto rows = csv::lines(text);
    if (rows.empty() || csv::trim(rows[0]) != profile_csv_header)
        throw InvalidArgument(std::string("profile: expected header '") + profile_csv_header + "'");
    ModelProfile p;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto f = csv::split(rows[r]);
        if (f.size() != 5)
            throw InvalidArgument("profile line " + std::to_string(r + 1) + ": expected 5 fields");
        try {
            LayerProfile l;
            l.name = std::string(csv::trim(f[0]));
            l.flops = csv::parse_u64(f[1]);
            l.out_elements = csv::parse_u64(f[2]);
            l.bytes_per_element = static_cast<std::uint32_t>(csv::parse_u64(f[3]));
            const auto cand = csv::trim(f[4]);
            if (cand != "0" && cand != "1") throw InvalidArgument("is_candidate must be 0 or 1");
            if (cand == "1") p.partition_candidates.push_back(p.layers.size());
            p.layers.push_back(std::move(l));
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("profile line " + std::to_string(r + 1) + ": " + e.what());
        }
    }
    p.validate();
    return p;
}

inline ModelProfile load_profile_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open profile file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_profile_csv(ss.str());
}

} // namespace sagin::nn
