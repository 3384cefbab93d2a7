#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "sagin/privmetrics.hpp"
#include "sagin/random.hpp"

namespace fixture {

using sagin::privacy::Image;

/// Structured grayscale scene: smooth gradient, a few shapes, fine texture.
inline Image scene(std::size_t size, std::uint64_t seed) {
    sagin::Rng rng(seed);
    Image img(size, size, 1);
    const double gx = rng.uniform(-1, 1), gy = rng.uniform(-1, 1);
    const double fx = rng.uniform(0.2, 0.6), fy = rng.uniform(0.2, 0.6);
    struct Disc { double x, y, r, v; };
    std::vector<Disc> discs;
    for (int i = 0; i < 5; ++i)
        discs.push_back({rng.uniform(0, double(size)), rng.uniform(0, double(size)),
                         rng.uniform(4, double(size) / 4), rng.uniform(-70, 70)});
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            double v = 128 + 40 * gx * (double(x) / double(size) - 0.5) * 2 + 40 * gy * (double(y) / double(size) - 0.5) * 2;
            v += 30 * std::sin(fx * double(x)) * std::cos(fy * double(y));
            for (const auto& d : discs)
                if ((double(x) - d.x) * (double(x) - d.x) + (double(y) - d.y) * (double(y) - d.y) < d.r * d.r) v += d.v;
            img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    return img;
}

/// Blend toward uniform noise with weight `mix`, plus Gaussian noise of `sigma`.
inline Image degrade(const Image& src, double mix, double sigma, std::uint64_t seed) {
    sagin::Rng rng(seed);
    Image out = src;
    for (auto& p : out.pixels) {
        const double u = rng.uniform(0.0, 256.0);
        const double v = (1.0 - mix) * p + mix * u + sigma * rng.normal();
        p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return out;
}

struct CutLevel {
    const char* name;
    double open_mix, closed_mix, sigma;
};

// Shallow cuts leak nearly everything; stage 4 returns pure noise.
inline const std::array<CutLevel, 5>& cut_levels() {
    static const std::array<CutLevel, 5> levels{{
        {"stem.conv", 0.02, 0.04, 3.0},
        {"usam1", 0.06, 0.10, 4.0},
        {"stage2.block4", 0.30, 0.40, 6.0},
        {"stage3.block6", 0.6, 0.7, 8.0},
        {"stage4.block3", 1.0, 1.0, 0.0},
    }};
    return levels;
}

inline std::vector<sagin::privacy::CutCorpus> corpus(std::size_t images = 4, std::size_t size = 64,
                                                     std::uint64_t seed = 11) {
    std::vector<sagin::privacy::CutCorpus> out;
    std::uint64_t s = seed * 1000;
    for (const auto& lvl : cut_levels()) {
        sagin::privacy::CutCorpus cut{lvl.name, {}};
        for (std::size_t i = 0; i < images; ++i) {
            auto orig = scene(size, seed * 100 + i);
            auto open = degrade(orig, lvl.open_mix, lvl.sigma, ++s);
            auto closed = degrade(orig, lvl.closed_mix, lvl.sigma, ++s);
            cut.triples.push_back({std::move(orig), std::move(open), std::move(closed)});
        }
        out.push_back(std::move(cut));
    }
    return out;
}

/// Writes the corpus as <dir>/<NN>_<cut>/img<k>_{orig,open,closed}.pgm.
inline void write_corpus(const std::filesystem::path& dir, const std::vector<sagin::privacy::CutCorpus>& corpus) {
    std::filesystem::create_directories(dir);
    for (std::size_t c = 0; c < corpus.size(); ++c) {
        const auto sub = dir / ((c < 10 ? "0" : "") + std::to_string(c) + "_" + corpus[c].cut);
        std::filesystem::create_directories(sub);
        for (std::size_t i = 0; i < corpus[c].triples.size(); ++i) {
            const auto stem = "img" + std::to_string(i);
            sagin::privacy::save_pnm(sub / (stem + "_orig.pgm"), corpus[c].triples[i].original);
            sagin::privacy::save_pnm(sub / (stem + "_open.pgm"), corpus[c].triples[i].open_box);
            sagin::privacy::save_pnm(sub / (stem + "_closed.pgm"), corpus[c].triples[i].closed_box);
        }
    }
}

} // namespace fixture
