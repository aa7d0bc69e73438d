#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "talkhead/config.hpp"
#include "talkhead/evalkit.hpp"
#include "talkhead/image.hpp"
#include "talkhead/manifold.hpp"
#include "talkhead/pipeline.hpp"
#include "talkhead/scene.hpp"

using namespace talkhead;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

PipelineConfig config_with_seed(const std::string& path, const std::optional<std::uint64_t>& seed) {
    PipelineConfig cfg = load_config(path);
    if (seed) cfg.seed = *seed;
    return cfg;
}

// A representation vector: a JSON array, or whitespace-separated numbers.
VectorXf read_vector(const std::string& path) {
    const std::string text = read_text(path);
    std::vector<float> values;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        try {
            values = json::parse(text).get<std::vector<float>>();
        } catch (const json::exception& e) {
            throw FormatError(path + ": " + e.what());
        }
    } else {
        std::istringstream in(text);
        float v;
        while (in >> v) values.push_back(v);
        if (!in.eof()) throw FormatError(path + ": expected whitespace-separated numbers");
    }
    if (values.empty()) throw InputError(path + ": empty vector");
    return Eigen::Map<const VectorXf>(values.data(), static_cast<Eigen::Index>(values.size()));
}

int cmd_project(const std::string& repr_path, const std::string& db_path, int k) {
    if (k < 1) throw ConfigError("-k must be >= 1");
    const ReprDatabase db = ReprDatabase::load(db_path);
    const VectorXf query = read_vector(repr_path);
    const ProjectionResult res = lle_project(db, query, k);
    json j;
    j["neighbors"] = res.neighbor_indices;
    j["weights"] = std::vector<double>(res.weights.data(), res.weights.data() + res.weights.size());
    j["weight_sum"] = res.weights.sum();
    j["residual"] = res.residual;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

// Either [[u, v], ...] drawn as one polyline, or {"points": ..., "topology": [[i, j, ...], ...]}.
int cmd_rasterize(const std::string& points_path, const std::string& out_path, int width, int height) {
    const json j = parse_json_file(points_path);
    const json& pts = j.is_object() ? j.at("points") : j;
    if (!pts.is_array()) throw FormatError(points_path + ": points must be an array of [u, v]");
    Points2 p(static_cast<Eigen::Index>(pts.size()), 2);
    try {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!pts[i].is_array() || pts[i].size() != 2) throw FormatError(points_path + ": points must be [u, v]");
            p(static_cast<Eigen::Index>(i), 0) = pts[i][0].get<double>();
            p(static_cast<Eigen::Index>(i), 1) = pts[i][1].get<double>();
        }
    } catch (const json::exception& e) {
        throw FormatError(points_path + ": " + e.what());
    }
    std::vector<Polyline> topo;
    if (j.is_object() && j.contains("topology")) {
        topo = j.at("topology").get<std::vector<Polyline>>();
    } else {
        Polyline line(static_cast<std::size_t>(p.rows()));
        for (std::size_t i = 0; i < line.size(); ++i) line[i] = static_cast<int>(i);
        topo.push_back(std::move(line));
    }
    write_pnm(out_path, rasterize(p, topo, width, height));
    return kExitOk;
}

int cmd_eval_pose(const std::string& pred, const std::string& gt, const std::string& rig_path) {
    const FaceRig rig = FaceRig::from_json_file(rig_path);
    const PoseMetrics m = pose_metrics(read_pose_track(pred), read_pose_track(gt), rig);
    const json j = {{"D_L", m.landmark_distance}, {"D_V", m.velocity_distance}, {"D_Rot", m.rotation_deg},
                    {"D_Pos", m.position}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_eval_image(const std::string& a, const std::string& b) {
    const ImageMetrics m = image_metrics(read_pnm(a), read_pnm(b));
    const json j = {{"L1", m.l1}, {"MSE", m.mse}, {"PSNR", m.psnr}, {"SSIM", m.ssim}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audio-driven talking-head feature pipeline"};
    app.require_subcommand(0, 1);

    bool print_schema = false;
    std::optional<std::uint64_t> seed;
    app.add_flag("--print-schema", print_schema, "Print the config JSON schema and exit");
    app.add_option("--seed", seed, "Override the config sampling seed");
    app.fallthrough();

    std::string wav, config_path, out_dir = ".";
    auto* infer = app.add_subcommand("infer", "Offline inference over a WAV file");
    infer->add_option("--wav", wav, "16 kHz mono 16-bit WAV")->required();
    infer->add_option("--config", config_path, "Pipeline config JSON")->required();
    infer->add_option("--out", out_dir, "Output directory")->required();

    auto* stream = app.add_subcommand("stream", "Live inference over raw s16le PCM on stdin");
    stream->add_option("--config", config_path, "Pipeline config JSON")->required();
    stream->add_option("--out", out_dir, "Output directory");

    std::string repr_path, db_path;
    int k = kDefaultNeighbors;
    auto* project = app.add_subcommand("project", "Project one representation onto a feature bank");
    project->add_option("--repr", repr_path, "Representation vector (JSON array or text)")->required();
    project->add_option("--db", db_path, "Feature bank")->required();
    project->add_option("-k", k, "Neighbour count");

    std::string points_path, image_out = "rasterized.pgm";
    int width = kFeatureMapSize, height = kFeatureMapSize;
    auto* raster = app.add_subcommand("rasterize", "Draw 2D points as polylines into a PGM");
    raster->add_option("--points", points_path, "JSON points file")->required();
    raster->add_option("--out", image_out, "Output PGM");
    raster->add_option("--width", width, "Image width");
    raster->add_option("--height", height, "Image height");

    std::string pred, gt, rig_path;
    auto* eval_pose = app.add_subcommand("eval-pose", "Pose-track metrics");
    eval_pose->add_option("--pred", pred, "Predicted poses (JSONL)")->required();
    eval_pose->add_option("--gt", gt, "Reference poses (JSONL)")->required();
    eval_pose->add_option("--rig", rig_path, "Face rig JSON")->required();

    std::string img_a, img_b;
    auto* eval_image = app.add_subcommand("eval-image", "Image metrics");
    eval_image->add_option("--a", img_a, "First PGM/PPM")->required();
    eval_image->add_option("--b", img_b, "Second PGM/PPM")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (print_schema) {
            std::cout << config_schema();
            return kExitOk;
        }
        if (*infer) {
            const RunReport r = run_offline(wav, config_with_seed(config_path, seed), out_dir);
            std::cout << r.to_json() << "\n";
        } else if (*stream) {
            std::ios::sync_with_stdio(false);
            const RunReport r = run_stream(std::cin, config_with_seed(config_path, seed), out_dir);
            std::cerr << r.to_json() << "\n";
        } else if (*project) {
            return cmd_project(repr_path, db_path, k);
        } else if (*raster) {
            if (width < 1 || height < 1) throw ConfigError("--width and --height must be positive");
            return cmd_rasterize(points_path, image_out, width, height);
        } else if (*eval_pose) {
            return cmd_eval_pose(pred, gt, rig_path);
        } else if (*eval_image) {
            return cmd_eval_image(img_a, img_b);
        } else {
            std::cout << app.help();
            return kExitConfig;
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
