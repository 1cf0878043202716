#pragma once
/**
 * @file dataio.hpp
 * @brief On-disk formats: binary feature files, the dataset manifest and the
 * glance annotation file.
 *
 * Feature file ("GVF1"):
 *   bytes 0..3   magic "GVF1"
 *   bytes 4..11  T  (uint64, little-endian)
 *   bytes 12..19 D  (uint64, little-endian)
 *   then T*D float32 little-endian values, row-major
 *
 * Manifest and glance files are JSON documents carrying a schema_version.
 * Every write goes to a temporary sibling and is renamed into place.
 */

#include "glancevad/core_types.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace glancevad {

namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

using FeatureMatrix32 = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Byte helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace detail

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

/// Write to "<path>.tmp" then rename over path.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// FNV-1a 64-bit, hex encoded; used as a config fingerprint.
inline std::string fnv1a_hex(std::string_view bytes) {
    const std::uint64_t h = fnv1a64(bytes);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Feature files
// ---------------------------------------------------------------------------

inline std::string encode_features(const FeatureMatrix32& m) {
    if (m.rows() < 1 || m.cols() < 1) throw InvariantError("feature file: T and D must be >= 1");
    std::string out;
    out.reserve(20 + static_cast<std::size_t>(m.size()) * 4);
    out.append("GVF1", 4);
    detail::put_u64_le(out, static_cast<std::uint64_t>(m.rows()));
    detail::put_u64_le(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) detail::put_u32_le(out, std::bit_cast<std::uint32_t>(m.data()[i]));
    return out;
}

inline FeatureMatrix32 decode_features(std::string_view bytes, std::string_view origin = "<memory>") {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 4 || std::memcmp(p, "GVF1", 4) != 0) {
        throw FormatError("feature file '" + std::string(origin) + "': bad magic");
    }
    if (bytes.size() < 20) throw FormatError("feature file '" + std::string(origin) + "': truncated header");
    const std::uint64_t t = detail::get_u64_le(p + 4);
    const std::uint64_t d = detail::get_u64_le(p + 12);
    if (t == 0 || d == 0) throw FormatError("feature file '" + std::string(origin) + "': T and D must be >= 1");
    if (t > (1ULL << 32) || d > (1ULL << 32) || (bytes.size() - 20) / 4 / d < t) {
        throw FormatError("feature file '" + std::string(origin) + "': truncated payload");
    }
    if (bytes.size() != 20 + t * d * 4) {
        throw FormatError("feature file '" + std::string(origin) + "': trailing bytes after payload");
    }
    FeatureMatrix32 m(static_cast<Index>(t), static_cast<Index>(d));
    for (Index i = 0; i < m.size(); ++i) {
        m.data()[i] = std::bit_cast<float>(detail::get_u32_le(p + 20 + 4 * static_cast<std::size_t>(i)));
    }
    return m;
}

inline void store_features(const fs::path& path, const FeatureMatrix32& m) { write_file_atomic(path, encode_features(m)); }

inline FeatureMatrix32 load_features(const fs::path& path) { return decode_features(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Number of ground-truth reads so far; tests assert training never moves it.
inline std::atomic<std::uint64_t>& ground_truth_reads() {
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}

struct FrameInterval {
    Index start = 0;  ///< first anomalous frame
    Index end = 0;    ///< one past the last anomalous frame
    friend bool operator==(const FrameInterval&, const FrameInterval&) = default;
};

enum class Split { Train, Test };

class VideoEntry {
public:
    std::string video_id;
    std::string feature_path;  ///< relative to the manifest directory
    VideoLabel label = VideoLabel::Normal;
    Index total_frames = 0;
    Index frames_per_snippet = kDefaultFramesPerSnippet;
    Split split = Split::Train;
    double fps = 30.0;

    [[nodiscard]] Index num_snippets() const { return (total_frames + frames_per_snippet - 1) / frames_per_snippet; }

    /// Audited access; training paths must never call this.
    [[nodiscard]] const std::vector<FrameInterval>& ground_truth() const {
        ground_truth_reads().fetch_add(1, std::memory_order_relaxed);
        return intervals_;
    }
    [[nodiscard]] bool has_ground_truth() const noexcept { return !intervals_.empty(); }

    void set_ground_truth(std::vector<FrameInterval> intervals) {
        for (std::size_t i = 0; i < intervals.size(); ++i) {
            const auto& iv = intervals[i];
            if (iv.start < 0 || iv.end > total_frames || iv.start >= iv.end) {
                throw ValidationError("video '" + video_id + "': interval [" + std::to_string(iv.start) + ", " +
                                      std::to_string(iv.end) + ") outside [0, " + std::to_string(total_frames) + ")");
            }
            if (i > 0 && iv.start < intervals[i - 1].end) {
                throw ValidationError("video '" + video_id + "': ground-truth intervals overlap or are unsorted");
            }
        }
        if (!intervals.empty() && label != VideoLabel::Abnormal) {
            throw ValidationError("video '" + video_id + "': ground-truth intervals on a normal video");
        }
        intervals_ = std::move(intervals);
    }

    /// Per-frame 0/1 labels expanded from the ground-truth intervals.
    [[nodiscard]] std::vector<std::uint8_t> frame_labels() const {
        std::vector<std::uint8_t> labels(static_cast<std::size_t>(total_frames), 0);
        for (const auto& iv : ground_truth()) {
            for (Index f = iv.start; f < iv.end; ++f) labels[static_cast<std::size_t>(f)] = 1;
        }
        return labels;
    }

private:
    std::vector<FrameInterval> intervals_;
};

struct DatasetManifest {
    std::vector<VideoEntry> videos;

    [[nodiscard]] const VideoEntry* find(std::string_view id) const {
        for (const auto& v : videos) {
            if (v.video_id == id) return &v;
        }
        return nullptr;
    }
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json videos = nlohmann::json::array();
    for (const auto& v : m.videos) {
        nlohmann::json intervals = nlohmann::json::array();
        for (const auto& iv : v.ground_truth()) intervals.push_back({iv.start, iv.end});
        videos.push_back({{"video_id", v.video_id},
                          {"feature_path", v.feature_path},
                          {"label", label_value(v.label)},
                          {"total_frames", v.total_frames},
                          {"frames_per_snippet", v.frames_per_snippet},
                          {"fps", v.fps},
                          {"split", v.split == Split::Train ? "train" : "test"},
                          {"ground_truth_intervals", intervals}});
    }
    return {{"schema_version", kSchemaVersion}, {"videos", videos}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    try {
        if (j.value("schema_version", 0) != kSchemaVersion) throw ValidationError("manifest: unsupported schema_version");
        DatasetManifest m;
        for (const auto& jv : j.at("videos")) {
            VideoEntry v;
            v.video_id = jv.at("video_id").get<std::string>();
            v.feature_path = jv.value("feature_path", std::string{});
            v.label = label_from_int(jv.at("label").get<long long>());
            v.total_frames = jv.at("total_frames").get<Index>();
            v.frames_per_snippet = jv.value("frames_per_snippet", kDefaultFramesPerSnippet);
            v.fps = jv.value("fps", 30.0);
            const auto split = jv.value("split", std::string("train"));
            if (split != "train" && split != "test") throw ValidationError("manifest: split must be train|test");
            v.split = split == "train" ? Split::Train : Split::Test;
            if (v.total_frames < 1 || v.frames_per_snippet < 1 || !(v.fps > 0.0)) {
                throw ValidationError("manifest: video '" + v.video_id + "' has invalid frame counts or fps");
            }
            std::vector<FrameInterval> intervals;
            if (jv.contains("ground_truth_intervals")) {
                for (const auto& iv : jv.at("ground_truth_intervals")) {
                    intervals.push_back({iv.at(0).get<Index>(), iv.at(1).get<Index>()});
                }
            }
            v.set_ground_truth(std::move(intervals));
            if (m.find(v.video_id)) throw ValidationError("manifest: duplicate video_id '" + v.video_id + "'");
            m.videos.push_back(std::move(v));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
}

inline void store_manifest(const fs::path& path, const DatasetManifest& m) {
    write_file_atomic(path, manifest_to_json(m).dump(2) + "\n");
}

inline DatasetManifest load_manifest(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("manifest '" + path.string() + "': " + e.what());
    }
    return manifest_from_json(j);
}

/// Loads the feature file of one entry into a validated FeatureSequence.
inline FeatureSequence load_sequence(const fs::path& manifest_dir, const VideoEntry& v) {
    const auto m = load_features(manifest_dir / v.feature_path);
    return FeatureSequence(v.video_id, m.cast<double>(), v.frames_per_snippet, v.total_frames);
}

// ---------------------------------------------------------------------------
// Glance file
// ---------------------------------------------------------------------------

struct GlanceRecord {
    Index frame = 0;
    std::optional<std::string> wall_clock_annotated_at;
    std::string annotator;
    friend bool operator==(const GlanceRecord&, const GlanceRecord&) = default;
};

struct VideoGlances {
    std::string video_id;
    std::vector<GlanceRecord> glances;  ///< sorted by frame, unique frames
    friend bool operator==(const VideoGlances&, const VideoGlances&) = default;

    [[nodiscard]] std::vector<Index> frames() const {
        std::vector<Index> f;
        f.reserve(glances.size());
        for (const auto& g : glances) f.push_back(g.frame);
        return f;
    }
};

struct GlanceFile {
    std::vector<VideoGlances> videos;
    friend bool operator==(const GlanceFile&, const GlanceFile&) = default;

    [[nodiscard]] const VideoGlances* find(std::string_view id) const {
        for (const auto& v : videos) {
            if (v.video_id == id) return &v;
        }
        return nullptr;
    }
    VideoGlances& get_or_add(const std::string& id) {
        for (auto& v : videos) {
            if (v.video_id == id) return v;
        }
        videos.push_back({id, {}});
        return videos.back();
    }
};

inline nlohmann::json video_glances_to_json(const VideoGlances& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& g : v.glances) {
        arr.push_back({{"frame", g.frame},
                       {"wall_clock_annotated_at",
                        g.wall_clock_annotated_at ? nlohmann::json(*g.wall_clock_annotated_at) : nlohmann::json()},
                       {"annotator", g.annotator}});
    }
    return {{"video_id", v.video_id}, {"glances", arr}, {"schema_version", kSchemaVersion}};
}

inline VideoGlances video_glances_from_json(const nlohmann::json& j) {
    VideoGlances v;
    v.video_id = j.at("video_id").get<std::string>();
    for (const auto& g : j.at("glances")) {
        GlanceRecord r;
        r.frame = g.at("frame").get<Index>();
        if (g.contains("wall_clock_annotated_at") && !g.at("wall_clock_annotated_at").is_null()) {
            r.wall_clock_annotated_at = g.at("wall_clock_annotated_at").get<std::string>();
        }
        r.annotator = g.value("annotator", std::string{});
        if (r.frame < 0) {
            throw ValidationError("glance file: video '" + v.video_id + "' has negative frame " +
                                  std::to_string(r.frame));
        }
        v.glances.push_back(std::move(r));
    }
    std::sort(v.glances.begin(), v.glances.end(),
              [](const GlanceRecord& a, const GlanceRecord& b) { return a.frame < b.frame; });
    for (std::size_t i = 1; i < v.glances.size(); ++i) {
        if (v.glances[i].frame == v.glances[i - 1].frame) {
            throw ValidationError("glance file: video '" + v.video_id + "' repeats frame " +
                                  std::to_string(v.glances[i].frame));
        }
    }
    return v;
}

inline nlohmann::json glance_file_to_json(const GlanceFile& f) {
    nlohmann::json videos = nlohmann::json::array();
    for (const auto& v : f.videos) videos.push_back(video_glances_to_json(v));
    return {{"schema_version", kSchemaVersion}, {"videos", videos}};
}

inline GlanceFile glance_file_from_json(const nlohmann::json& j) {
    try {
        if (j.value("schema_version", 0) != kSchemaVersion) {
            throw ValidationError("glance file: unsupported schema_version");
        }
        GlanceFile f;
        for (const auto& jv : j.at("videos")) {
            auto v = video_glances_from_json(jv);
            if (f.find(v.video_id)) throw ValidationError("glance file: duplicate video '" + v.video_id + "'");
            f.videos.push_back(std::move(v));
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("glance file: ") + e.what());
    }
}

/// Range-checks every glance against the manifest's frame counts.
inline void validate_glances(const GlanceFile& f, const DatasetManifest& m) {
    for (const auto& v : f.videos) {
        const auto* entry = m.find(v.video_id);
        if (!entry) throw ValidationError("glance file: video '" + v.video_id + "' not in manifest");
        for (const auto& g : v.glances) {
            if (g.frame < 0 || g.frame >= entry->total_frames) {
                throw ValidationError("glance file: video '" + v.video_id + "' frame " + std::to_string(g.frame) +
                                      " outside [0, " + std::to_string(entry->total_frames) + ")");
            }
        }
    }
}

inline void store_glances(const fs::path& path, const GlanceFile& f) {
    write_file_atomic(path, glance_file_to_json(f).dump(2) + "\n");
}

inline GlanceFile load_glances(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("glance file '" + path.string() + "': " + e.what());
    }
    return glance_file_from_json(j);
}

inline GlanceFile load_glances(const fs::path& path, const DatasetManifest& m) {
    auto f = load_glances(path);
    validate_glances(f, m);
    return f;
}

/// GlanceSet of one manifest video; empty when the file has no entry for it.
inline GlanceSet glance_set_for(const GlanceFile& f, const VideoEntry& v) {
    const auto* g = f.find(v.video_id);
    return GlanceSet(v.video_id, g ? g->frames() : std::vector<Index>{}, v.frames_per_snippet, v.total_frames);
}

}  // namespace glancevad
