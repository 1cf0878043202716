#pragma once
/**
 * @file checkpoint.hpp
 * @brief Model checkpoint: JSON header followed by a float64 parameter block.
 *
 *   bytes 0..3   magic "GVM1"
 *   bytes 4..11  header length H (uint64, little-endian)
 *   next H bytes compact JSON header (shapes, seed, config, config_hash)
 *   then parameter_count IEEE-754 float64 little-endian values
 *
 * No timestamps are written, so identical training runs produce identical files.
 */

#include "glancevad/dataio.hpp"
#include "glancevad/scorer.hpp"
#include "glancevad/trainer.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <string>

namespace glancevad {

inline std::string config_hash(const TrainConfig& config) { return fnv1a_hex(nlohmann::json(config).dump()); }

inline std::string encode_checkpoint(const ScorerModel& model, const TrainConfig& config) {
    const auto& c = model.config();
    const auto layout = model.layout();
    nlohmann::json shapes = {
        {"w1", {c.temporal_width * c.input_dim, c.hidden1}}, {"b1", {c.hidden1}},
        {"w2", {c.temporal_width * c.hidden1, c.hidden2}},   {"b2", {c.hidden2}},
        {"w3", {c.hidden2}},                                 {"b3", {1}},
    };
    nlohmann::json header = {{"format", "glancevad-checkpoint"},
                             {"version", 1},
                             {"model", c},
                             {"shapes", shapes},
                             {"parameter_count", layout.size},
                             {"seed", config.seed.value},
                             {"train_config", config},
                             {"config_hash", config_hash(config)}};
    const std::string h = header.dump();
    std::string out;
    out.reserve(12 + h.size() + static_cast<std::size_t>(layout.size) * 8);
    out.append("GVM1", 4);
    detail::put_u64_le(out, h.size());
    out += h;
    for (Index i = 0; i < layout.size; ++i) detail::put_u64_le(out, std::bit_cast<std::uint64_t>(model.params()[i]));
    return out;
}

struct Checkpoint {
    ScorerModel model;
    TrainConfig config;
    std::string config_hash;
};

inline Checkpoint decode_checkpoint(std::string_view bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 12 || std::memcmp(p, "GVM1", 4) != 0) throw FormatError("checkpoint: bad magic");
    const std::uint64_t hlen = detail::get_u64_le(p + 4);
    if (hlen > bytes.size() - 12) throw FormatError("checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(12, hlen));
        if (header.at("format") != "glancevad-checkpoint") throw FormatError("checkpoint: unknown format");
        Checkpoint ck{ScorerModel(header.at("model").get<ScorerConfig>()), header.at("train_config").get<TrainConfig>(),
                      header.at("config_hash").get<std::string>()};
        const auto n = static_cast<std::uint64_t>(ck.model.parameter_count());
        if (header.at("parameter_count").get<std::uint64_t>() != n) {
            throw FormatError("checkpoint: parameter_count does not match model shapes");
        }
        if (bytes.size() != 12 + hlen + n * 8) throw FormatError("checkpoint: parameter block has wrong size");
        const unsigned char* body = p + 12 + hlen;
        for (std::uint64_t i = 0; i < n; ++i) {
            ck.model.params()[static_cast<Index>(i)] = std::bit_cast<double>(detail::get_u64_le(body + 8 * i));
        }
        if (!ck.model.params().allFinite()) throw NumericError("checkpoint: non-finite parameter");
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
}

inline void store_checkpoint(const fs::path& path, const ScorerModel& model, const TrainConfig& config) {
    write_file_atomic(path, encode_checkpoint(model, config));
}

inline Checkpoint load_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace glancevad
