#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sagin/csv.hpp"
#include "sagin/error.hpp"
#include "sagin/random.hpp"

namespace sagin::retrieval {

/// Unit-norm feature vector. Normalized at construction.
class Embedding {
public:
    Embedding() = default;

    explicit Embedding(std::vector<double> v) : v_(std::move(v)) {
        if (v_.empty()) throw DimensionMismatch("embedding must have at least one component");
        double n2 = 0.0;
        for (double x : v_) n2 += x * x;
        const double n = std::sqrt(n2);
        if (!(n >= 1e-12) || !std::isfinite(n)) throw ZeroVector("embedding has (near) zero norm");
        if (std::abs(n - 1.0) > 4 * std::numeric_limits<double>::epsilon())
            for (auto& x : v_) x /= n;
    }

    std::size_t dim() const { return v_.size(); }
    std::span<const double> values() const { return v_; }
    double operator[](std::size_t i) const { return v_[i]; }

    Embedding operator-() const {
        Embedding e;
        e.v_ = v_;
        for (auto& x : e.v_) x = -x;
        return e;
    }

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    std::vector<double> v_;
};

enum class View { satellite, uav, ground };

inline const char* to_string(View v) {
    switch (v) {
    case View::satellite: return "satellite";
    case View::uav: return "uav";
    case View::ground: return "ground";
    }
    return "?";
}

inline View parse_view(std::string_view s) {
    if (s == "satellite") return View::satellite;
    if (s == "uav") return View::uav;
    if (s == "ground") return View::ground;
    throw InvalidArgument("unknown view '" + std::string(s) + "'");
}

struct GeoTag {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoTag&, const GeoTag&) = default;
};

struct GalleryRecord {
    std::string location_id;
    View view = View::satellite;
    GeoTag geo;
    Embedding embedding;

    void validate() const {
        if (!(geo.lat >= -90.0 && geo.lat <= 90.0)) throw InvalidArgument("latitude out of range");
        if (!(geo.lon >= -180.0 && geo.lon <= 180.0)) throw InvalidArgument("longitude out of range");
    }
};

using Gallery = std::vector<GalleryRecord>;

struct QuerySet {
    std::string true_location_id;
    std::vector<Embedding> embeddings;
};

struct RankedEntry {
    std::string location_id;
    double score = 0.0;
    std::size_t record = 0; // index into the ranked gallery
};

/// Descending by score; equal scores by ascending location_id, then gallery order.
struct RankedResult {
    std::vector<RankedEntry> entries;
};

inline double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim())
        throw DimensionMismatch("embedding dimensions differ: " + std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

/// Mean of the query embeddings, renormalized.
inline Embedding fuse_queries(const QuerySet& qs) {
    if (qs.embeddings.empty()) throw InvalidArgument("query set is empty");
    const auto dim = qs.embeddings.front().dim();
    std::vector<double> mean(dim, 0.0);
    for (const auto& e : qs.embeddings) {
        if (e.dim() != dim) throw DimensionMismatch("query embeddings differ in dimension");
        for (std::size_t i = 0; i < dim; ++i) mean[i] += e[i];
    }
    for (auto& x : mean) x /= static_cast<double>(qs.embeddings.size());
    return Embedding(std::move(mean));
}

inline RankedResult rank_scores(const Gallery& gallery, std::vector<double> scores) {
    RankedResult r;
    r.entries.reserve(gallery.size());
    for (std::size_t i = 0; i < gallery.size(); ++i) r.entries.push_back({gallery[i].location_id, scores[i], i});
    std::stable_sort(r.entries.begin(), r.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.location_id < b.location_id;
    });
    return r;
}

inline RankedResult rank_gallery(const Embedding& query, const Gallery& gallery) {
    if (gallery.empty()) throw InvalidArgument("gallery is empty");
    std::vector<double> scores;
    scores.reserve(gallery.size());
    for (const auto& rec : gallery) scores.push_back(cosine_similarity(query, rec.embedding));
    return rank_scores(gallery, std::move(scores));
}

enum class Fusion { mean, max_score };

/// Ranks a multi-image query. `mean` fuses the embeddings first; `max_score`
/// scores each record by its best similarity to any query image.
inline RankedResult rank_query(const QuerySet& qs, const Gallery& gallery, Fusion fusion = Fusion::mean) {
    if (fusion == Fusion::mean) return rank_gallery(fuse_queries(qs), gallery);
    if (qs.embeddings.empty()) throw InvalidArgument("query set is empty");
    if (gallery.empty()) throw InvalidArgument("gallery is empty");
    std::vector<double> scores(gallery.size(), -2.0);
    for (const auto& q : qs.embeddings)
        for (std::size_t i = 0; i < gallery.size(); ++i)
            scores[i] = std::max(scores[i], cosine_similarity(q, gallery[i].embedding));
    return rank_scores(gallery, std::move(scores));
}

/// Top location if its score is strictly above `tau`.
inline std::optional<std::string> match_with_threshold(const RankedResult& ranked, double tau) {
    if (ranked.entries.empty() || !(ranked.entries.front().score > tau)) return std::nullopt;
    return ranked.entries.front().location_id;
}

/// Geo tag of the first gallery record with `location_id`.
inline GeoTag localize(const std::string& location_id, const Gallery& gallery) {
    for (const auto& rec : gallery)
        if (rec.location_id == location_id) return rec.geo;
    throw UnknownLocation("unknown location '" + location_id + "'");
}

/// Geo tag of the highest-ranked record with `location_id`.
inline GeoTag localize(const std::string& location_id, const RankedResult& ranked, const Gallery& gallery) {
    for (const auto& e : ranked.entries)
        if (e.location_id == location_id) return gallery.at(e.record).geo;
    throw UnknownLocation("unknown location '" + location_id + "'");
}

/// 1 if any of the top-k entries belongs to `true_id`.
inline int recall_at_k(const RankedResult& ranked, const std::string& true_id, std::size_t k) {
    if (k == 0) throw InvalidArgument("k must be >= 1");
    const auto n = std::min(k, ranked.entries.size());
    for (std::size_t i = 0; i < n; ++i)
        if (ranked.entries[i].location_id == true_id) return 1;
    return 0;
}

/// Mean of precision@r over the ranks r of all entries whose id is a true id.
inline double average_precision(const RankedResult& ranked, const std::set<std::string>& true_ids) {
    if (true_ids.empty()) throw InvalidArgument("true_ids must be nonempty");
    std::set<std::string> seen;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
        const auto& id = ranked.entries[i].location_id;
        if (!true_ids.count(id)) continue;
        seen.insert(id);
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    for (const auto& id : true_ids)
        if (!seen.count(id)) throw MissingTruth("true id '" + id + "' is absent from the ranking");
    return sum / static_cast<double>(hits);
}

inline double average_precision(const RankedResult& ranked, const std::string& true_id) {
    return average_precision(ranked, std::set<std::string>{true_id});
}

// ---------------------------------------------------------------------------
// Synthetic cross-view data

struct ViewNoise {
    double satellite = 0.0;
    double uav = 0.0;
    double ground = 0.0;

    double of(View v) const { return v == View::satellite ? satellite : v == View::uav ? uav : ground; }
};

struct SynthConfig {
    std::size_t locations = 200;
    std::size_t dim = 64;
    ViewNoise noise;                     // noise norm relative to the unit prototype
    std::size_t satellite_images = 1;    // gallery records per location
    std::size_t uav_images = 4;          // query images per location
    std::size_t ground_images = 4;

    void validate() const {
        if (locations < 2) throw InvalidArgument("synthetic gallery needs at least 2 locations");
        if (dim < 2) throw InvalidArgument("synthetic embeddings need dim >= 2");
        if (!(noise.satellite >= 0.0 && noise.uav >= 0.0 && noise.ground >= 0.0))
            throw InvalidArgument("view noise must be >= 0");
        if (satellite_images == 0) throw InvalidArgument("satellite_images must be >= 1");
    }
};

struct SynthLocation {
    std::string location_id;
    Embedding prototype;
    std::vector<Embedding> uav;
    std::vector<Embedding> ground;
};

struct SynthData {
    Gallery gallery; // satellite references
    std::vector<SynthLocation> locations;
};

inline std::string location_name(std::size_t i) {
    std::string s = std::to_string(i);
    return "loc" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

/// Locations share no structure: each gets a random unit prototype; every
/// image is prototype + noise, renormalized. Noise is N(0, noise^2 / dim) per
/// component, so `noise` is the expected noise norm relative to the unit prototype.
inline SynthData synth_gallery(const SynthConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    SynthData out;
    const double per_component = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    auto draw = [&](const Embedding& proto, double noise) {
        std::vector<double> v(cfg.dim);
        for (std::size_t i = 0; i < cfg.dim; ++i) v[i] = proto[i] + noise * per_component * rng.normal();
        return Embedding(std::move(v));
    };
    for (std::size_t l = 0; l < cfg.locations; ++l) {
        std::vector<double> p(cfg.dim);
        for (auto& x : p) x = rng.normal();
        SynthLocation loc{location_name(l), Embedding(std::move(p)), {}, {}};
        // Deterministic pseudo-coordinates on a grid.
        const GeoTag geo{-60.0 + 120.0 * static_cast<double>(l % 97) / 96.0,
                         -170.0 + 340.0 * static_cast<double>(l / 97 % 89) / 88.0};
        for (std::size_t k = 0; k < cfg.satellite_images; ++k)
            out.gallery.push_back({loc.location_id, View::satellite, geo, draw(loc.prototype, cfg.noise.satellite)});
        for (std::size_t k = 0; k < cfg.uav_images; ++k) loc.uav.push_back(draw(loc.prototype, cfg.noise.uav));
        for (std::size_t k = 0; k < cfg.ground_images; ++k) loc.ground.push_back(draw(loc.prototype, cfg.noise.ground));
        out.locations.push_back(std::move(loc));
    }
    return out;
}

struct RetrievalMetrics {
    double recall1 = 0.0, recall5 = 0.0, recall10 = 0.0, recall_top1pct = 0.0, ap = 0.0;
};

/// Mean metrics over all locations for queries of `uav_count` UAV + `ground_count` ground images.
inline RetrievalMetrics evaluate_queries(const SynthData& data, std::size_t uav_count, std::size_t ground_count,
                                         Fusion fusion = Fusion::mean) {
    if (uav_count + ground_count == 0) throw InvalidArgument("query needs at least one image");
    RetrievalMetrics m;
    const std::size_t top1pct =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(data.gallery.size()))));
    for (const auto& loc : data.locations) {
        if (uav_count > loc.uav.size() || ground_count > loc.ground.size())
            throw InvalidArgument("query asks for more images than were synthesized");
        QuerySet q{loc.location_id, {}};
        q.embeddings.insert(q.embeddings.end(), loc.uav.begin(), loc.uav.begin() + static_cast<long>(uav_count));
        q.embeddings.insert(q.embeddings.end(), loc.ground.begin(), loc.ground.begin() + static_cast<long>(ground_count));
        const auto ranked = rank_query(q, data.gallery, fusion);
        m.recall1 += recall_at_k(ranked, loc.location_id, 1);
        m.recall5 += recall_at_k(ranked, loc.location_id, 5);
        m.recall10 += recall_at_k(ranked, loc.location_id, 10);
        m.recall_top1pct += recall_at_k(ranked, loc.location_id, top1pct);
        m.ap += average_precision(ranked, loc.location_id);
    }
    const double n = static_cast<double>(data.locations.size());
    m.recall1 /= n;
    m.recall5 /= n;
    m.recall10 /= n;
    m.recall_top1pct /= n;
    m.ap /= n;
    return m;
}

// ---------------------------------------------------------------------------
// Gallery file: "dim,<D>" header, then location_id,view,lat,lon,v1..vD per line.

inline std::string write_gallery_csv(const Gallery& g) {
    if (g.empty()) throw InvalidArgument("gallery is empty");
    const auto dim = g.front().embedding.dim();
    std::string out = "dim," + std::to_string(dim) + "\n";
    for (const auto& r : g) {
        if (r.embedding.dim() != dim) throw DimensionMismatch("gallery embeddings differ in dimension");
        out += r.location_id + "," + to_string(r.view) + "," + csv::format(r.geo.lat) + "," + csv::format(r.geo.lon);
        for (double x : r.embedding.values()) out += "," + csv::format(x);
        out += "\n";
    }
    return out;
}

inline Gallery parse_gallery_csv(std::string_view text) {
    const auto rows = csv::lines(text);
    if (rows.empty()) throw InvalidArgument("gallery file is empty");
    const auto head = csv::split(rows[0]);
    if (head.size() != 2 || csv::trim(head[0]) != "dim") throw InvalidArgument("gallery: expected header 'dim,<D>'");
    const auto dim = csv::parse_u64(head[1]);
    if (dim == 0) throw InvalidArgument("gallery: dim must be > 0");
    Gallery g;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto f = csv::split(rows[r]);
        if (f.size() != 4 + dim)
            throw DimensionMismatch("gallery line " + std::to_string(r + 1) + ": expected " +
                                    std::to_string(4 + dim) + " fields");
        std::vector<double> v;
        for (std::size_t i = 0; i < dim; ++i) v.push_back(csv::parse_double(f[4 + i]));
        GalleryRecord rec{std::string(csv::trim(f[0])), parse_view(csv::trim(f[1])),
                          {csv::parse_double(f[2]), csv::parse_double(f[3])}, Embedding(std::move(v))};
        rec.validate();
        g.push_back(std::move(rec));
    }
    return g;
}

} // namespace sagin::retrieval
