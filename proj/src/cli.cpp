#include "attnpipe/cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "attnpipe/distribution.hpp"
#include "attnpipe/error.hpp"
#include "attnpipe/frameio.hpp"
#include "attnpipe/metrics.hpp"
#include "attnpipe/simulator.hpp"
#include "attnpipe/synthetic.hpp"
#include "attnpipe/worker.hpp"

namespace attnpipe {

using nlohmann::json;

namespace {

std::atomic<WorkerServer*> g_server{nullptr};

extern "C" void on_terminate_signal(int) {
    if (auto* s = g_server.load()) {
        s->request_stop();
    }
}

std::vector<double> parse_thresholds(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double t = std::stod(item, &used);
            if (!(t > 0.0 && t <= 1.0)) {
                throw std::invalid_argument(item);
            }
            out.push_back(t);
        } catch (const std::exception&) {
            throw ConfigError("bad IoU threshold '" + item + "'");
        }
    }
    if (out.empty()) {
        throw ConfigError("no IoU thresholds given");
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad ") + what + " value '" + item + "'");
        }
    }
    return out;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

/// Builds a detector from "oracle:GT_PATH" or "stochastic:GT_PATH:MISS_RATE:SEED".
std::unique_ptr<Detector> make_detector(const std::string& spec, const OracleOptions& options) {
    const auto colon = spec.find(':');
    const auto kind = spec.substr(0, colon);
    if (colon == std::string::npos) {
        throw ConfigError("detector must be oracle:GT_PATH or stochastic:GT_PATH:MISS:SEED");
    }
    auto rest = spec.substr(colon + 1);
    if (kind == "oracle") {
        return std::make_unique<OracleDetector>(index_by_frame(read_ground_truth(rest)), options);
    }
    if (kind == "stochastic") {
        const auto seed_at = rest.rfind(':');
        const auto miss_at = seed_at == std::string::npos ? std::string::npos : rest.rfind(':', seed_at - 1);
        if (miss_at == std::string::npos) {
            throw ConfigError("stochastic detector needs GT_PATH:MISS_RATE:SEED");
        }
        const double miss = std::stod(rest.substr(miss_at + 1, seed_at - miss_at - 1));
        const auto seed = std::stoull(rest.substr(seed_at + 1));
        return std::make_unique<StochasticOracleDetector>(index_by_frame(read_ground_truth(rest.substr(0, miss_at))),
                                                          miss, seed, options);
    }
    throw ConfigError("unknown detector kind '" + kind + "'");
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::lround(p * static_cast<double>(v.size() - 1)));
    return v[idx];
}

void print_summary(std::ostream& out, const RunConfig& config, const std::vector<FrameResult>& results,
                   double wall_ms) {
    long active = 0;
    long total = 0;
    std::vector<double> fps;
    for (const auto& r : results) {
        active += r.active_count;
        total += r.total_count;
        const auto& t = r.timing;
        const double frame_ms =
            t.io_ms + t.attention_wait_ms + t.client_processing_ms + t.final_eval_ms + t.postprocess_ms;
        if (frame_ms > 0.0) {
            fps.push_back(1000.0 / frame_ms);
        }
    }
    const double n = static_cast<double>(results.size());
    out << std::fixed << std::setprecision(2);
    out << "mode " << to_string(config.mode) << ", settings \"" << config.settings.name() << "\"\n";
    out << "frames " << results.size() << ", wall " << wall_ms << " ms, mean fps "
        << (wall_ms > 0.0 ? n * 1000.0 / wall_ms : 0.0) << '\n';
    out << "per-frame fps min " << percentile(fps, 0.0) << ", median " << percentile(fps, 0.5) << ", p90 "
        << percentile(fps, 0.9) << ", max " << percentile(fps, 1.0) << '\n';
    out << "crops evaluated " << active << " of " << total;
    if (total > 0) {
        out << " (" << 100.0 * static_cast<double>(active) / static_cast<double>(total) << "%)";
    }
    out << '\n';
}

struct RunArgs {
    std::string config;
    std::string mode;
    std::string preset;
    std::string frames;
    std::string gt;
    std::string results;
    std::string timing;
    std::string detector;
    std::string attention_workers;
    std::string final_workers;
    int timeout_ms = -1;
    int margin = -1;
    int window = -1;
    double min_confidence = -1.0;
    bool embed_timing = false;
    std::vector<std::string> set;
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = load_run_config(a.config);
        const auto apply = [&](const std::string& key, const std::string& value) {
            if (!value.empty()) {
                apply_setting(config, key, value);
            }
        };
        apply("preset", a.preset);
        for (const auto& kv : a.set) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            }
            apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
        }
        apply("mode", a.mode);
        apply("frames", a.frames);
        apply("gt", a.gt);
        apply("results", a.results);
        apply("timing", a.timing);
        apply("detector", a.detector);
        apply("attention_workers", a.attention_workers);
        apply("final_workers", a.final_workers);
        if (a.timeout_ms >= 0) {
            apply("timeout_ms", std::to_string(a.timeout_ms));
        }
        if (a.margin >= 0) {
            apply("attention_margin", std::to_string(a.margin));
        }
        if (a.window >= 0) {
            apply("temporal_window", std::to_string(a.window));
        }
        if (a.min_confidence >= 0.0) {
            std::ostringstream v;
            v << a.min_confidence;
            apply("min_confidence", v.str());
        }
        if (a.embed_timing) {
            config.embed_timing = true;
        }
        validate(config.settings);
        check_paths(config);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        const FrameSource source(config.frames);
        const FrameLoader loader = [&](std::size_t i) {
            return StreamFrame{source.frame_id(i), source.load_frame(i)};
        };

        std::unique_ptr<Detector> detector;
        std::unique_ptr<CropEvaluator> attention;
        std::unique_ptr<CropEvaluator> final_stage;
        if (config.detector == DetectorKind::oracle) {
            detector = std::make_unique<OracleDetector>(index_by_frame(read_ground_truth(config.ground_truth)),
                                                        config.oracle);
            attention = std::make_unique<LocalEvaluator>(*detector);
            final_stage = std::make_unique<LocalEvaluator>(*detector);
        } else {
            auto fin = std::make_unique<RemoteEvaluator>(config.cluster.final_workers, config.cluster.request_timeout);
            fin->check_health();
            final_stage = std::move(fin);
            if (!config.cluster.attention_workers.empty()) {
                auto att = std::make_unique<RemoteEvaluator>(config.cluster.attention_workers,
                                                             config.cluster.request_timeout);
                att->check_health();
                attention = std::move(att);
            }
        }

        Stopwatch wall;
        std::vector<FrameResult> results;
        if (config.mode == RunMode::pipeline) {
            CropEvaluator& att = attention ? *attention : *final_stage;
            results = run_stream(source.size(), loader, config.settings, att, *final_stage,
                                 StreamOptions{attention != nullptr, 0});
        } else {
            for (std::size_t i = 0; i < source.size(); ++i) {
                Stopwatch io;
                const auto frame = loader(i);
                const double io_ms = io.elapsed_ms();
                auto r = config.mode == RunMode::allcrops
                             ? run_allcrops_baseline(frame.pixels, frame.frame_id, config.settings, *final_stage)
                             : run_downscale_baseline(frame.pixels, frame.frame_id, config.settings, *final_stage);
                r.timing.io_ms = io_ms;
                results.push_back(std::move(r));
            }
        }
        const double wall_ms = wall.elapsed_ms();

        write_results(config.results, results, config.embed_timing);
        write_timing_csv(config.timing, results);
        print_summary(out, config, results, wall_ms);
        return kExitOk;
    } catch (const StreamError& e) {
        err << "run failed: " << e.what() << " (resume at frame index " << e.cursor() << ")\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "run failed: " << e.what() << '\n';
        return kExitFailure;
    }
}

struct ServeArgs {
    std::string listen = "127.0.0.1:7000";
    std::string detector;
    double visibility = 0.3;
    double min_tile_px = 8.0;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
    std::unique_ptr<Detector> detector;
    Endpoint endpoint;
    try {
        endpoint = Endpoint::parse(a.listen);
        OracleOptions options;
        options.visibility_threshold = a.visibility;
        options.min_tile_px = a.min_tile_px;
        detector = make_detector(a.detector, options);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    }
    try {
        WorkerServer server(endpoint, *detector);
        out << "listening " << server.endpoint().str() << std::endl;
        g_server = &server;
        std::signal(SIGINT, on_terminate_signal);
        std::signal(SIGTERM, on_terminate_signal);
        server.run();
        g_server = nullptr;
        server.stop();
        return kExitOk;
    } catch (const std::exception& e) {
        g_server = nullptr;
        err << "serve failed: " << e.what() << '\n';
        return kExitFailure;
    }
}

struct EvalArgs {
    std::string detections;
    std::string gt;
    std::string thresholds = "0.25,0.5,0.75";
    std::string out;
    std::string counts;
    bool eleven_point = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<double> thresholds;
    try {
        thresholds = parse_thresholds(a.thresholds);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    }
    try {
        const auto results = read_results(a.detections);
        const auto dets = detections_by_frame(results);
        const auto gts = index_by_frame(read_ground_truth(a.gt));
        for (const auto& [frame, objects] : gts) {
            if (!dets.contains(frame)) {
                err << "eval failed: ground-truth frame " << frame << " has no entry in " << a.detections << '\n';
                return kExitFailure;
            }
        }
        const auto report =
            ap_report(dets, gts, thresholds, a.eleven_point ? ApMethod::eleven_point : ApMethod::continuous);
        const auto doc = to_json(report);
        out << doc.dump(2) << '\n';
        if (!a.out.empty()) {
            std::ofstream f(a.out);
            if (!f) {
                throw IoError("cannot write " + a.out);
            }
            f << doc.dump(2) << '\n';
        }
        if (!a.counts.empty()) {
            write_count_csv(fs::path(a.counts), count_report(dets, gts));
        }
        return kExitOk;
    } catch (const std::exception& e) {
        err << "eval failed: " << e.what() << '\n';
        return kExitFailure;
    }
}

SimScenario scenario_from_json(const json& j) {
    SimScenario s;
    try {
        for (const auto& f : j.at("frames")) {
            s.frames.push_back(SimFrame{f.at(0).get<int>(), f.at(1).get<int>()});
        }
        s.per_crop_cost_ms = j.at("per_crop_cost_ms").get<double>();
        s.transfer_cost_per_crop_ms = j.value("transfer_cost_per_crop_ms", 0.0);
        if (j.contains("n_a")) {
            s.n_attention = j.at("n_a").get<std::vector<int>>();
        }
        if (j.contains("n_f")) {
            s.n_final = j.at("n_f").get<std::vector<int>>();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return s;
}

struct SimulateArgs {
    std::string scenario;
    std::string na;
    std::string nf;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
    SimScenario s;
    try {
        s = scenario_from_json(read_json_file(a.scenario));
        if (!a.na.empty()) {
            s.n_attention = parse_int_list(a.na, "--na");
        }
        if (!a.nf.empty()) {
            s.n_final = parse_int_list(a.nf, "--nf");
        }
        validate(s);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    }
    const auto rows = simulate_scaling(s);
    if (a.out.empty()) {
        write_sim_csv(out, rows);
        return kExitOk;
    }
    std::ofstream f(a.out);
    if (!f) {
        err << "simulate failed: cannot write " << a.out << '\n';
        return kExitFailure;
    }
    write_sim_csv(f, rows);
    return kExitOk;
}

int cmd_gen_synthetic(const std::string& spec_path, const std::string& out_dir, std::ostream& out,
                      std::ostream& err) {
    SceneSpec spec;
    try {
        spec = scene_spec_from_json(read_json_file(spec_path));
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    }
    try {
        write_scene(spec, out_dir);
        out << "wrote " << spec.frames << " frames of " << spec.width << "x" << spec.height << " to " << out_dir
            << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        err << "gen-synthetic failed: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-stage attention pipeline for object detection on high-resolution frames", "attnpipe"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Evaluate a frame directory");
    run_cmd->add_option("config", run.config, "Run config file (key = value)")->required();
    run_cmd->add_option("--mode", run.mode, "pipeline | downscale | allcrops");
    run_cmd->add_option("--preset", run.preset, "Settings preset, e.g. \"1 att, 2 fin, 20 over\"");
    run_cmd->add_option("--frames", run.frames, "Frame directory");
    run_cmd->add_option("--gt", run.gt, "Ground truth JSON-lines (oracle detector)");
    run_cmd->add_option("--results", run.results, "Results JSON-lines output");
    run_cmd->add_option("--timing", run.timing, "Timing CSV output");
    run_cmd->add_option("--detector", run.detector, "oracle | remote");
    run_cmd->add_option("--attention-workers", run.attention_workers, "host:port list");
    run_cmd->add_option("--final-workers", run.final_workers, "host:port list");
    run_cmd->add_option("--timeout-ms", run.timeout_ms, "Per-request timeout");
    run_cmd->add_option("--margin", run.margin, "Attention margin in pixels");
    run_cmd->add_option("--window", run.window, "Temporal attention window");
    run_cmd->add_option("--min-confidence", run.min_confidence, "Confidence cut-off");
    run_cmd->add_flag("--embed-timing", run.embed_timing, "Include timing in the results file");
    run_cmd->add_option("--set", run.set, "Any config key as key=value");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run a detector worker");
    serve_cmd->add_option("--listen", serve.listen, "host:port to bind (port 0 picks one)");
    serve_cmd->add_option("--detector", serve.detector, "oracle:GT_PATH or stochastic:GT_PATH:MISS:SEED")
        ->required();
    serve_cmd->add_option("--visibility", serve.visibility, "Oracle visibility threshold");
    serve_cmd->add_option("--min-tile-px", serve.min_tile_px, "Oracle minimum on-tile size");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Average precision and counts");
    eval_cmd->add_option("--detections", eval.detections, "Results JSON-lines")->required();
    eval_cmd->add_option("--gt", eval.gt, "Ground truth JSON-lines")->required();
    eval_cmd->add_option("--thresholds", eval.thresholds, "Comma-separated IoU thresholds");
    eval_cmd->add_option("--out", eval.out, "Also write the report here");
    eval_cmd->add_option("--counts", eval.counts, "Per-frame count CSV");
    eval_cmd->add_flag("--eleven-point", eval.eleven_point, "11-point interpolated AP");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Worker scaling simulation");
    sim_cmd->add_option("--scenario", sim.scenario, "Scenario JSON")->required();
    sim_cmd->add_option("--na", sim.na, "Comma-separated N_A values");
    sim_cmd->add_option("--nf", sim.nf, "Comma-separated N_F values");
    sim_cmd->add_option("--out", sim.out, "CSV output (default stdout)");

    std::string spec_path;
    std::string out_dir;
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic frame sequence with ground truth");
    gen_cmd->add_option("--spec", spec_path, "Scene spec JSON")->required();
    gen_cmd->add_option("--out", out_dir, "Output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kExitUsage;
    }

    if (*run_cmd) {
        return cmd_run(run, out, err);
    }
    if (*serve_cmd) {
        return cmd_serve(serve, out, err);
    }
    if (*eval_cmd) {
        return cmd_eval(eval, out, err);
    }
    if (*sim_cmd) {
        return cmd_simulate(sim, out, err);
    }
    return cmd_gen_synthetic(spec_path, out_dir, out, err);
}

}  // namespace attnpipe
