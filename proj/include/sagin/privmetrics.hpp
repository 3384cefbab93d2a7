#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sagin/csv.hpp"
#include "sagin/error.hpp"
#include "sagin/trico.hpp"

namespace sagin::privacy {

/// 8-bit image, row-major, channels interleaved.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

    static constexpr double dynamic_range = 255.0;

    void validate() const {
        if (channels != 1 && channels != 3) throw InvalidArgument("image must have 1 or 3 channels");
        if (width == 0 || height == 0) throw InvalidArgument("image must be nonempty");
        if (pixels.size() != width * height * channels) throw InvalidArgument("pixel count does not match shape");
    }

    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
        return pixels[(y * width + x) * channels + c];
    }
    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }

    friend bool operator==(const Image&, const Image&) = default;
};

// ---------------------------------------------------------------------------
// SSIM

enum class SsimWindow { block, gaussian };

struct SsimOptions {
    std::size_t window = 8;           // block edge; gaussian mode uses 11 x 11, sigma 1.5
    SsimWindow mode = SsimWindow::block;
    double k1 = 0.01;
    double k2 = 0.03;
};

namespace detail {

struct WindowStats {
    double mu_a = 0, mu_b = 0, var_a = 0, var_b = 0, cov = 0;
};

inline double ssim_index(const WindowStats& s, double c1, double c2) {
    return ((2.0 * s.mu_a * s.mu_b + c1) * (2.0 * s.cov + c2)) /
           ((s.mu_a * s.mu_a + s.mu_b * s.mu_b + c1) * (s.var_a + s.var_b + c2));
}

inline std::vector<double> gaussian_kernel(std::size_t n, double sigma) {
    std::vector<double> k(n * n);
    const double c = (static_cast<double>(n) - 1.0) / 2.0;
    double sum = 0.0;
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double dx = static_cast<double>(x) - c, dy = static_cast<double>(y) - c;
            sum += (k[y * n + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
        }
    for (auto& v : k) v /= sum;
    return k;
}

} // namespace detail

/// Mean SSIM over windows and channels, clamped to [0,1].
///
/// Block mode tiles the image with non-overlapping window x window blocks
/// (partial blocks at the right/bottom edge are skipped) and uses population
/// statistics per block. C1 = (k1 L)^2, C2 = (k2 L)^2 with L = 255.
inline double ssim(const Image& a, const Image& b, const SsimOptions& opt = {}) {
    a.validate();
    b.validate();
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw DimensionMismatch("ssim: images differ in shape");
    const std::size_t win = opt.mode == SsimWindow::gaussian ? 11 : opt.window;
    if (win == 0 || win > std::min(a.width, a.height))
        throw WindowTooLarge("ssim: window " + std::to_string(win) + " exceeds image size");
    const double c1 = std::pow(opt.k1 * Image::dynamic_range, 2);
    const double c2 = std::pow(opt.k2 * Image::dynamic_range, 2);

    const auto kernel = opt.mode == SsimWindow::gaussian ? detail::gaussian_kernel(win, 1.5)
                                                         : std::vector<double>(win * win, 1.0 / double(win * win));
    const std::size_t stride = opt.mode == SsimWindow::gaussian ? 1 : win;

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < a.channels; ++c) {
        for (std::size_t y0 = 0; y0 + win <= a.height; y0 += stride) {
            for (std::size_t x0 = 0; x0 + win <= a.width; x0 += stride) {
                detail::WindowStats s;
                for (std::size_t y = 0; y < win; ++y)
                    for (std::size_t x = 0; x < win; ++x) {
                        const double w = kernel[y * win + x];
                        s.mu_a += w * a.at(x0 + x, y0 + y, c);
                        s.mu_b += w * b.at(x0 + x, y0 + y, c);
                    }
                for (std::size_t y = 0; y < win; ++y)
                    for (std::size_t x = 0; x < win; ++x) {
                        const double w = kernel[y * win + x];
                        const double da = a.at(x0 + x, y0 + y, c) - s.mu_a;
                        const double db = b.at(x0 + x, y0 + y, c) - s.mu_b;
                        s.var_a += w * da * da;
                        s.var_b += w * db * db;
                        s.cov += w * da * db;
                    }
                total += detail::ssim_index(s, c1, c2);
                ++count;
            }
        }
    }
    return std::clamp(total / static_cast<double>(count), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Histograms and KL divergence

/// Per-channel normalized intensity distribution.
struct Histogram {
    std::vector<std::vector<double>> channels; // each sums to 1

    std::size_t bins() const { return channels.empty() ? 0 : channels.front().size(); }
};

/// Normalizes raw counts with additive smoothing on the frequencies:
/// p_i = (count_i / total + eps) / (1 + bins * eps).
inline Histogram smooth_counts(const std::vector<std::vector<double>>& counts, double epsilon = 1e-6) {
    if (counts.empty()) throw InvalidArgument("histogram needs at least one channel");
    if (!(epsilon >= 0.0)) throw InvalidArgument("smoothing epsilon must be >= 0");
    Histogram h;
    for (const auto& ch : counts) {
        double total = 0.0;
        for (double c : ch) {
            if (!(c >= 0.0)) throw InvalidArgument("histogram counts must be >= 0");
            total += c;
        }
        if (!(total > 0.0)) throw InvalidArgument("histogram channel has no positive count");
        const double denom = 1.0 + static_cast<double>(ch.size()) * epsilon;
        std::vector<double> p;
        p.reserve(ch.size());
        for (double c : ch) p.push_back((c / total + epsilon) / denom);
        h.channels.push_back(std::move(p));
    }
    return h;
}

/// 256-bin intensity histogram per channel.
inline Histogram histogram(const Image& img, double epsilon = 1e-6) {
    img.validate();
    std::vector<std::vector<double>> counts(img.channels, std::vector<double>(256, 0.0));
    for (std::size_t i = 0; i < img.pixels.size(); ++i) counts[i % img.channels][img.pixels[i]] += 1.0;
    return smooth_counts(counts, epsilon);
}

/// KL(p || q) in nats, averaged over channels.
inline double kl_divergence(const Histogram& p, const Histogram& q) {
    if (p.channels.size() != q.channels.size() || p.bins() != q.bins())
        throw DimensionMismatch("kl_divergence: histograms differ in shape");
    auto check = [](const Histogram& h) {
        for (const auto& ch : h.channels) {
            double s = 0.0;
            for (double v : ch) {
                if (!(v >= 0.0)) throw NotNormalized("histogram has a negative entry");
                s += v;
            }
            if (std::abs(s - 1.0) > 1e-9) throw NotNormalized("histogram channel does not sum to 1");
        }
    };
    check(p);
    check(q);
    double total = 0.0;
    for (std::size_t c = 0; c < p.channels.size(); ++c) {
        double kl = 0.0;
        for (std::size_t i = 0; i < p.bins(); ++i) {
            const double pi = p.channels[c][i], qi = q.channels[c][i];
            if (pi == 0.0) continue;
            if (qi == 0.0) return std::numeric_limits<double>::infinity();
            kl += pi * std::log(pi / qi);
        }
        total += std::max(0.0, kl);
    }
    return total / static_cast<double>(p.channels.size());
}

// ---------------------------------------------------------------------------
// Confidentiality tables from reconstruction corpora

struct ReconstructionTriple {
    Image original;
    Image open_box;
    Image closed_box;
};

struct CutCorpus {
    std::string cut;
    std::vector<ReconstructionTriple> triples;
};

struct PrivacyOptions {
    double epsilon = 1e-6;
    SsimOptions ssim;
};

/// Per cut: mean KL(original || reconstruction) and mean SSIM for both attacks.
inline trico::ConfidentialityTable build_conf_table(const std::vector<CutCorpus>& corpus,
                                                    const PrivacyOptions& opt = {}) {
    if (corpus.empty()) throw EmptyCut("privacy corpus has no cuts");
    trico::ConfidentialityTable t;
    for (const auto& cut : corpus) {
        if (cut.triples.empty()) throw EmptyCut("cut '" + cut.cut + "' has no reconstruction triples");
        double kl_open = 0, kl_closed = 0, ssim_open = 0, ssim_closed = 0;
        for (const auto& tr : cut.triples) {
            const auto h = histogram(tr.original, opt.epsilon);
            kl_open += kl_divergence(h, histogram(tr.open_box, opt.epsilon));
            kl_closed += kl_divergence(h, histogram(tr.closed_box, opt.epsilon));
            ssim_open += ssim(tr.original, tr.open_box, opt.ssim);
            ssim_closed += ssim(tr.original, tr.closed_box, opt.ssim);
        }
        const double n = static_cast<double>(cut.triples.size());
        t.entries.push_back({cut.cut, kl_open / n, kl_closed / n, ssim_open / n, ssim_closed / n});
    }
    return t;
}

// ---------------------------------------------------------------------------
// Image I/O: binary PGM (P5) / PPM (P6) with maxval 255, and comma-separated grayscale matrices.

inline Image decode_pnm(std::string_view data) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto token = [&] {
        skip_space();
        const auto start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos])) && data[pos] != '#') ++pos;
        return data.substr(start, pos - start);
    };
    const auto magic = token();
    std::size_t channels = 0;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else throw InvalidArgument("not a binary PGM/PPM file (expected P5 or P6)");
    const auto w = csv::parse_u64(token());
    const auto h = csv::parse_u64(token());
    const auto maxval = csv::parse_u64(token());
    if (maxval != 255) throw InvalidArgument("only maxval 255 is supported");
    if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
        throw InvalidArgument("malformed PNM header");
    ++pos; // single whitespace before raster
    Image img(w, h, channels);
    if (data.size() - pos < img.pixels.size()) throw InvalidArgument("PNM raster is truncated");
    std::copy_n(data.begin() + static_cast<long>(pos), img.pixels.size(), img.pixels.begin());
    img.validate();
    return img;
}

inline std::string encode_pnm(const Image& img) {
    img.validate();
    std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                      std::to_string(img.height) + "\n255\n";
    out.append(img.pixels.begin(), img.pixels.end());
    return out;
}

/// Rows of comma-separated grayscale intensities (0..255).
inline Image decode_matrix_csv(std::string_view text) {
    const auto rows = csv::lines(text);
    if (rows.empty()) throw InvalidArgument("matrix image is empty");
    Image img;
    img.channels = 1;
    for (const auto& row : rows) {
        const auto f = csv::split(row);
        if (img.width == 0) img.width = f.size();
        if (f.size() != img.width) throw InvalidArgument("matrix image rows differ in length");
        for (auto v : f) {
            const auto x = csv::parse_u64(v);
            if (x > 255) throw InvalidArgument("matrix image value exceeds 255");
            img.pixels.push_back(static_cast<std::uint8_t>(x));
        }
        ++img.height;
    }
    img.validate();
    return img;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Image load_image(const std::filesystem::path& p) {
    const auto data = read_file(p);
    if (p.extension() == ".csv") return decode_matrix_csv(data);
    return decode_pnm(data);
}

inline void save_pnm(const std::filesystem::path& p, const Image& img) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write '" + p.string() + "'");
    const auto data = encode_pnm(img);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

/// Corpus layout: one subdirectory per cut, visited in name order. A leading
/// "<digits>_" on the directory name orders cuts and is dropped from the cut
/// name. Each triple is <stem>_orig.<ext>, <stem>_open.<ext>, <stem>_closed.<ext>
/// with ext one of pgm, ppm, csv.
inline std::vector<CutCorpus> load_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw InvalidArgument("corpus directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> cut_dirs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) cut_dirs.push_back(e.path());
    std::sort(cut_dirs.begin(), cut_dirs.end());
    if (cut_dirs.empty()) throw EmptyCut("corpus '" + dir.string() + "' has no cut directories");

    std::vector<CutCorpus> corpus;
    for (const auto& cd : cut_dirs) {
        std::string name = cd.filename().string();
        const auto us = name.find('_');
        if (us != std::string::npos && us > 0 &&
            std::all_of(name.begin(), name.begin() + static_cast<long>(us), [](char c) { return c >= '0' && c <= '9'; }))
            name = name.substr(us + 1);
        std::map<std::string, std::map<std::string, fs::path>> stems; // stem -> role -> file
        for (const auto& e : fs::directory_iterator(cd)) {
            if (!e.is_regular_file()) continue;
            const auto ext = e.path().extension().string();
            if (ext != ".pgm" && ext != ".ppm" && ext != ".csv") continue;
            const auto base = e.path().stem().string();
            const auto sep = base.rfind('_');
            if (sep == std::string::npos) continue;
            const auto role = base.substr(sep + 1);
            if (role != "orig" && role != "open" && role != "closed") continue;
            stems[base.substr(0, sep)][role] = e.path();
        }
        CutCorpus cut{name, {}};
        for (const auto& [stem, roles] : stems) {
            if (roles.size() != 3)
                throw InvalidArgument("cut '" + name + "': triple '" + stem + "' needs orig, open and closed images");
            cut.triples.push_back({load_image(roles.at("orig")), load_image(roles.at("open")), load_image(roles.at("closed"))});
        }
        if (cut.triples.empty()) throw EmptyCut("cut '" + name + "' has no reconstruction triples");
        corpus.push_back(std::move(cut));
    }
    return corpus;
}

} // namespace sagin::privacy
