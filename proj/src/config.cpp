#include "talkhead/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace talkhead {

using nlohmann::json;

void PipelineConfig::validate() const {
    audio.validate();
    if (k_neighbors < 1) throw ConfigError("k_neighbors must be >= 1");
    if (delay_frames < 0) throw ConfigError("delay_frames must be >= 0");
    if (fps != 60) throw ConfigError("fps must be 60");
    if (rig_path.empty()) throw ConfigError("rig_path is required");
    camera.validate();
    if (!(billboard_alpha >= 0.0 && billboard_alpha <= 1.0)) throw ConfigError("billboard_alpha must be in [0, 1]");
    if (pose.residual_channels < 1) throw ConfigError("pose_model.residual_channels must be >= 1");
    if (pose.skip_channels < 1) throw ConfigError("pose_model.skip_channels must be >= 1");
    if (pose.cond_channels < 1) throw ConfigError("pose_model.cond_channels must be >= 1");
}

namespace {

constexpr int kMaxNesting = 64;

std::string position_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void check_nesting(const std::string& text) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (char c : text) {
        if (in_string) {
            if (escaped) escaped = false;
            else if (c == '\\') escaped = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[' || c == '{') {
            if (++depth > kMaxNesting) throw ConfigError("config nesting deeper than " + std::to_string(kMaxNesting));
        } else if (c == ']' || c == '}') --depth;
    }
}

class Fields {
public:
    Fields(const json& obj, std::string scope, std::set<std::string> allowed) : obj_(obj), scope_(std::move(scope)) {
        if (!obj_.is_object()) throw ConfigError(label("") + " must be a JSON object");
        for (const auto& [key, value] : obj_.items())
            if (!allowed.count(key)) throw ConfigError("unknown field \"" + label(key) + "\"");
    }

    const json* find(const std::string& key) const {
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void get_int(const std::string& key, int& out) const {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(label(key) + " must be an integer");
            const auto x = v->get<long long>();
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
                throw ConfigError(label(key) + " is out of range");
            out = static_cast<int>(x);
        }
    }

    void get_u64(const std::string& key, std::uint64_t& out) const {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(label(key) + " must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void get_double(const std::string& key, double& out) const {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(label(key) + " must be a number");
            out = v->get<double>();
        }
    }

    void get_bool(const std::string& key, bool& out) const {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(label(key) + " must be true or false");
            out = v->get<bool>();
        }
    }

    std::optional<std::filesystem::path> get_path(const std::string& key, const std::filesystem::path& base) const {
        const json* v = find(key);
        if (!v || v->is_null()) return std::nullopt;
        if (!v->is_string()) throw ConfigError(label(key) + " must be a string path");
        std::filesystem::path p = v->get<std::string>();
        if (p.empty()) throw ConfigError(label(key) + " must not be empty");
        if (p.is_relative() && !base.empty()) p = base / p;
        return p;
    }

    std::string label(const std::string& key) const {
        if (scope_.empty()) return key.empty() ? "config" : key;
        return key.empty() ? scope_ : scope_ + "." + key;
    }

private:
    const json& obj_;
    std::string scope_;
};

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    check_nesting(text);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error at " + position_of(text, e.byte == 0 ? 0 : e.byte - 1) + ": " +
                          e.what());
    }

    PipelineConfig cfg;
    try {
        const Fields top(doc, "",
                         {"audio", "k_neighbors", "delay_frames", "fps", "seed", "weights_path", "manifold_db_path",
                          "rig_path", "pose_override_path", "camera", "billboard_alpha", "pose_model",
                          "write_feature_maps", "$schema"});
        top.get_int("k_neighbors", cfg.k_neighbors);
        top.get_int("delay_frames", cfg.delay_frames);
        top.get_int("fps", cfg.fps);
        top.get_u64("seed", cfg.seed);
        cfg.weights_path = top.get_path("weights_path", base_dir);
        cfg.manifold_db_path = top.get_path("manifold_db_path", base_dir);
        cfg.pose_override_path = top.get_path("pose_override_path", base_dir);
        if (auto rig = top.get_path("rig_path", base_dir)) cfg.rig_path = *rig;
        top.get_double("billboard_alpha", cfg.billboard_alpha);
        top.get_bool("write_feature_maps", cfg.write_feature_maps);

        if (const json* a = top.find("audio")) {
            const Fields audio(*a, "audio",
                               {"sample_rate_hz", "frame_len_samples", "hop_len_samples", "fft_size", "n_mels",
                                "mel_fmin_hz", "mel_fmax_hz", "log_floor"});
            audio.get_int("sample_rate_hz", cfg.audio.sample_rate);
            audio.get_int("frame_len_samples", cfg.audio.frame_len);
            audio.get_int("hop_len_samples", cfg.audio.hop_len);
            audio.get_int("fft_size", cfg.audio.fft_size);
            audio.get_int("n_mels", cfg.audio.n_mels);
            audio.get_double("mel_fmin_hz", cfg.audio.mel_fmin);
            audio.get_double("mel_fmax_hz", cfg.audio.mel_fmax);
            audio.get_double("log_floor", cfg.audio.log_floor);
        }
        if (const json* c = top.find("camera")) {
            const Fields cam(*c, "camera", {"focal_px", "cx_px", "cy_px"});
            cam.get_double("focal_px", cfg.camera.focal_px);
            cam.get_double("cx_px", cfg.camera.cx);
            cam.get_double("cy_px", cfg.camera.cy);
        }
        if (const json* p = top.find("pose_model")) {
            const Fields pose(*p, "pose_model", {"residual_channels", "skip_channels", "cond_channels"});
            pose.get_int("residual_channels", cfg.pose.residual_channels);
            pose.get_int("skip_channels", cfg.pose.skip_channels);
            pose.get_int("cond_channels", cfg.pose.cond_channels);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

const std::string& config_schema() {
    static const std::string schema = R"({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "talkhead pipeline config",
  "type": "object",
  "additionalProperties": false,
  "required": ["rig_path"],
  "properties": {
    "$schema": {"type": "string"},
    "rig_path": {"type": "string", "description": "Face rig JSON, relative to this file"},
    "weights_path": {"type": ["string", "null"], "description": "Weight file with apc.*, mouth.*, pose.* tensors; seeded random weights when absent"},
    "manifold_db_path": {"type": ["string", "null"], "description": "Speech feature bank (weight file tensor manifold.db, or raw f32 with a .json sidecar); projection is skipped when absent"},
    "pose_override_path": {"type": ["string", "null"], "description": "JSONL pose track replacing sampled poses"},
    "k_neighbors": {"type": "integer", "minimum": 1, "default": 10},
    "delay_frames": {"type": "integer", "minimum": 0, "default": 18},
    "fps": {"type": "integer", "enum": [60], "default": 60},
    "seed": {"type": "integer", "minimum": 0, "default": 0},
    "billboard_alpha": {"type": "number", "minimum": 0, "maximum": 1, "default": 0.5},
    "write_feature_maps": {"type": "boolean", "default": true},
    "camera": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "focal_px": {"type": "number", "exclusiveMinimum": 0, "default": 800},
        "cx_px": {"type": "number", "default": 256},
        "cy_px": {"type": "number", "default": 256}
      }
    },
    "pose_model": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "residual_channels": {"type": "integer", "minimum": 1, "default": 64},
        "skip_channels": {"type": "integer", "minimum": 1, "default": 128},
        "cond_channels": {"type": "integer", "minimum": 1, "default": 64}
      }
    },
    "audio": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "sample_rate_hz": {"type": "integer", "enum": [16000], "default": 16000},
        "frame_len_samples": {"type": "integer", "minimum": 1, "default": 267},
        "hop_len_samples": {"type": "integer", "minimum": 1, "default": 133},
        "fft_size": {"type": "integer", "minimum": 2, "default": 512},
        "n_mels": {"type": "integer", "minimum": 1, "default": 80},
        "mel_fmin_hz": {"type": "number", "minimum": 0, "default": 0},
        "mel_fmax_hz": {"type": "number", "default": 8000},
        "log_floor": {"type": "number", "exclusiveMinimum": 0, "default": 1e-10}
      }
    }
  }
}
)";
    return schema;
}

}  // namespace talkhead
