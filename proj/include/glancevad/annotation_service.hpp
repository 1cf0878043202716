#pragma once
/**
 * @file annotation_service.hpp
 * @brief Local HTTP backend for single-frame glance annotation.
 *
 *   GET    /api/videos                      video list with annotation counts
 *   GET    /api/videos/{id}/stream          raw video bytes, Range requests honoured
 *   GET    /api/videos/{id}/glances         glance record of one video
 *   POST   /api/videos/{id}/glances         body {"frame": n}; 201 with the updated record
 *   DELETE /api/videos/{id}/glances/{frame} 204, or 404 when the frame is not marked
 *   GET    /api/export                      the whole glance file
 *
 * Errors are JSON {"error", "detail"}. Every mutation rewrites the glance file
 * before it is acknowledged; mutations are serialized, reads use snapshots.
 */

#include "glancevad/dataio.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace glancevad {

/// Current UTC time as 2026-01-31T12:00:00Z.
inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct AnnotationOptions {
    fs::path videos_dir;
    fs::path glances_path;
    std::string annotator = "annotator";
    std::optional<fs::path> ui_dir;
    std::function<std::string()> clock = utc_timestamp;
};

class AnnotationService {
public:
    AnnotationService(DatasetManifest manifest, AnnotationOptions options)
        : manifest_(std::move(manifest)), options_(std::move(options)) {
        GlanceFile initial;
        if (fs::exists(options_.glances_path)) initial = load_glances(options_.glances_path, manifest_);
        state_ = std::make_shared<const GlanceFile>(std::move(initial));
    }

    [[nodiscard]] std::shared_ptr<const GlanceFile> snapshot() const { return std::atomic_load(&state_); }

    /// Registers the API routes (and the UI directory, if any) on `server`.
    void mount(httplib::Server& server) {
        server.Get("/api/videos", [this](const httplib::Request&, httplib::Response& res) { list_videos(res); });
        server.Get(R"(/api/videos/([^/]+)/stream)",
                   [this](const httplib::Request& req, httplib::Response& res) { stream(req.matches[1], res); });
        server.Get(R"(/api/videos/([^/]+)/glances)",
                   [this](const httplib::Request& req, httplib::Response& res) { get_glances(req.matches[1], res); });
        server.Post(R"(/api/videos/([^/]+)/glances)", [this](const httplib::Request& req, httplib::Response& res) {
            add_glance(req.matches[1], req.body, res);
        });
        server.Delete(R"(/api/videos/([^/]+)/glances/([^/]+))",
                      [this](const httplib::Request& req, httplib::Response& res) {
                          delete_glance(req.matches[1], req.matches[2], res);
                      });
        server.Get("/api/export", [this](const httplib::Request&, httplib::Response& res) {
            res.set_header("Content-Disposition", "attachment; filename=\"glances.json\"");
            res.set_content(glance_file_to_json(*snapshot()).dump(2), "application/json");
        });
        if (options_.ui_dir) server.set_mount_point("/", options_.ui_dir->string());
        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (res.body.empty()) {
                fail(res, res.status, res.status == 404 ? "not_found" : "http_error",
                     "no route for " + req.method + " " + req.path);
            }
        });
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string what = "unknown error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                what = e.what();
            } catch (...) {
            }
            fail(res, 500, "internal_error", what);
        });
    }

private:
    static void fail(httplib::Response& res, int status, const std::string& error, const std::string& detail) {
        res.status = status;
        res.set_content(nlohmann::json{{"error", error}, {"detail", detail}}.dump(), "application/json");
    }

    const VideoEntry* entry_or_404(const std::string& id, httplib::Response& res) const {
        const auto* v = manifest_.find(id);
        if (!v) fail(res, 404, "unknown_video", "video '" + id + "' is not in the manifest");
        return v;
    }

    void list_videos(httplib::Response& res) const {
        const auto state = snapshot();
        nlohmann::json out = nlohmann::json::array();
        for (const auto& v : manifest_.videos) {
            const auto* g = state->find(v.video_id);
            out.push_back({{"video_id", v.video_id},
                           {"duration_s", static_cast<double>(v.total_frames) / v.fps},
                           {"total_frames", v.total_frames},
                           {"fps", v.fps},
                           {"annotated_count", g ? g->glances.size() : 0}});
        }
        res.set_content(out.dump(), "application/json");
    }

    [[nodiscard]] std::optional<fs::path> video_file(const std::string& id) const {
        static constexpr std::array<const char*, 6> kExtensions{".mp4", ".webm", ".ogv", ".mov", ".mkv", ".avi"};
        for (const char* ext : kExtensions) {
            fs::path p = options_.videos_dir / (id + ext);
            if (fs::is_regular_file(p)) return p;
        }
        return std::nullopt;
    }

    void stream(const std::string& id, httplib::Response& res) const {
        if (!entry_or_404(id, res)) return;
        const auto path = video_file(id);
        if (!path) {
            fail(res, 404, "no_video_file", "no video file for '" + id + "' in " + options_.videos_dir.string());
            return;
        }
        const auto ext = path->extension().string();
        const std::string mime = ext == ".webm" ? "video/webm" : ext == ".ogv" ? "video/ogg" : "video/mp4";
        const auto size = static_cast<std::size_t>(fs::file_size(*path));
        auto file = std::make_shared<std::ifstream>(*path, std::ios::binary);
        res.set_content_provider(size, mime, [file](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
            std::array<char, 64 * 1024> buf{};
            file->clear();
            file->seekg(static_cast<std::streamoff>(offset));
            const auto n = static_cast<std::streamsize>(std::min(length, buf.size()));
            file->read(buf.data(), n);
            const auto got = file->gcount();
            if (got <= 0) return false;
            return sink.write(buf.data(), static_cast<std::size_t>(got));
        });
    }

    void get_glances(const std::string& id, httplib::Response& res) const {
        if (!entry_or_404(id, res)) return;
        const auto state = snapshot();
        const auto* g = state->find(id);
        res.set_content(video_glances_to_json(g ? *g : VideoGlances{id, {}}).dump(), "application/json");
    }

    void add_glance(const std::string& id, const std::string& body, httplib::Response& res) {
        const auto* v = entry_or_404(id, res);
        if (!v) return;
        Index frame = 0;
        try {
            const auto j = nlohmann::json::parse(body);
            if (!j.is_object() || !j.contains("frame") || !j.at("frame").is_number_integer()) {
                fail(res, 400, "bad_request", "body must be {\"frame\": <integer>}");
                return;
            }
            frame = j.at("frame").get<Index>();
        } catch (const nlohmann::json::exception& e) {
            fail(res, 400, "bad_request", std::string("invalid JSON: ") + e.what());
            return;
        }
        if (frame < 0 || frame >= v->total_frames) {
            fail(res, 422, "frame_out_of_range",
                 "frame " + std::to_string(frame) + " outside [0, " + std::to_string(v->total_frames) + ")");
            return;
        }

        std::lock_guard lock(write_mutex_);
        auto next = std::make_shared<GlanceFile>(*snapshot());
        auto& rec = next->get_or_add(id);
        for (const auto& g : rec.glances) {
            if (g.frame == frame) {
                fail(res, 422, "duplicate_frame", "frame " + std::to_string(frame) + " is already marked");
                return;
            }
        }
        rec.glances.push_back({frame, options_.clock(), options_.annotator});
        std::sort(rec.glances.begin(), rec.glances.end(),
                  [](const GlanceRecord& a, const GlanceRecord& b) { return a.frame < b.frame; });
        commit(std::move(next));
        res.status = 201;
        res.set_content(video_glances_to_json(*snapshot()->find(id)).dump(), "application/json");
    }

    void delete_glance(const std::string& id, const std::string& frame_text, httplib::Response& res) {
        if (!entry_or_404(id, res)) return;
        Index frame = 0;
        try {
            std::size_t used = 0;
            frame = std::stoll(frame_text, &used);
            if (used != frame_text.size()) throw std::invalid_argument(frame_text);
        } catch (const std::exception&) {
            fail(res, 400, "bad_request", "frame '" + frame_text + "' is not an integer");
            return;
        }

        std::lock_guard lock(write_mutex_);
        auto next = std::make_shared<GlanceFile>(*snapshot());
        auto& rec = next->get_or_add(id);
        const auto it = std::find_if(rec.glances.begin(), rec.glances.end(),
                                     [&](const GlanceRecord& g) { return g.frame == frame; });
        if (it == rec.glances.end()) {
            fail(res, 404, "glance_not_found", "frame " + std::to_string(frame) + " is not marked on '" + id + "'");
            return;
        }
        rec.glances.erase(it);
        commit(std::move(next));
        res.status = 204;
    }

    // Persist first so an acknowledged edit is always on disk.
    void commit(std::shared_ptr<GlanceFile> next) {
        store_glances(options_.glances_path, *next);
        std::atomic_store(&state_, std::shared_ptr<const GlanceFile>(std::move(next)));
        spdlog::debug("glances saved to {}", options_.glances_path.string());
    }

    DatasetManifest manifest_;
    AnnotationOptions options_;
    std::mutex write_mutex_;
    std::shared_ptr<const GlanceFile> state_;
};

}  // namespace glancevad
