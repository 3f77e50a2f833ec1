// cvlm: command-line front end.
//
//   cvlm gen      synthetic scenario -> raw video (CSRV)
//   cvlm encode   CSRV -> bitstream (CSBS)
//   cvlm inspect  dump bitstream frame types and motion metadata
//   cvlm cdf      similar-patch-ratio CDF over one or more videos
//   cvlm run      run the pipeline and write a key=value report
//   cvlm compare  savings of one report relative to another

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cvlm/codec.hpp"
#include "cvlm/config.hpp"
#include "cvlm/error.hpp"
#include "cvlm/metrics.hpp"
#include "cvlm/pipeline.hpp"
#include "cvlm/scenario.hpp"

namespace {

using namespace cvlm;

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

/// Loads a CSBS file, or encodes a CSRV file with `params`.
Bitstream load_stream(const std::string& path, const CodecParams& params) {
    const auto bytes = read_file(path);
    if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "CSRV")) {
        return encode(parse_raw_video(bytes), params);
    }
    return parse_bitstream(bytes);
}

/// Splices `key=value` lines from --config ahead of the user's own flags, so flags win.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::vector<std::string> out;
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            out.push_back(args[i]);
        }
    }
    if (config_path.empty() || out.empty()) return out;
    std::vector<std::string> injected;
    for (auto [key, value] : parse_key_value_config(read_text(config_path))) {
        std::replace(key.begin(), key.end(), '_', '-');
        injected.push_back("--" + key + "=" + value);
    }
    // after the subcommand name
    out.insert(out.begin() + 1, injected.begin(), injected.end());
    return out;
}

struct RunOptions {
    std::string input;
    std::string mode = "full_opt";
    std::string refresh_mode;
    double stride_pct = 0.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool no_drift = false;
    bool dense_residuals = false;
    bool timings = false;
    std::string report = "-";
    std::string csv;
    std::string dump_masks;
    std::string dump_hidden;
};

void print_inspect(const Bitstream& bs, std::size_t bytes, bool mvs) {
    std::printf("stream width=%d height=%d fps=%d frames=%zu gop=%d block=%d radius=%d bytes=%zu\n", bs.width,
                bs.height, bs.fps, bs.frames.size(), bs.params.gop_size, bs.params.block_size,
                bs.params.search_radius, bytes);
    for (std::size_t i = 0; i < bs.frames.size(); ++i) {
        const auto& f = bs.frames[i];
        if (f.type == FrameType::I) {
            std::printf("frame=%zu type=I\n", i);
            continue;
        }
        std::size_t nonzero = 0;
        double sum = 0.0, mx = 0.0;
        std::uint64_t sad = 0;
        for (std::size_t b = 0; b < f.motion.block_count(); ++b) {
            const double m = motion_magnitude(f.motion.vectors[b]);
            nonzero += m > 0 ? 1 : 0;
            sum += m;
            mx = std::max(mx, m);
            sad += f.motion.sad[b];
        }
        std::printf("frame=%zu type=P blocks=%zu nonzero_mv=%zu mean_mv=%.4f max_mv=%.4f sad=%llu\n", i,
                    f.motion.block_count(), nonzero, sum / static_cast<double>(f.motion.block_count()), mx,
                    static_cast<unsigned long long>(sad));
        if (!mvs) continue;
        for (int by = 0; by < f.motion.blocks_h; ++by)
            for (int bx = 0; bx < f.motion.blocks_w; ++bx) {
                const auto mv = f.motion.at(bx, by);
                std::printf("  mv by=%d bx=%d dx=%d dy=%d sad=%u\n", by, bx, mv.dx, mv.dy,
                            f.motion.sad[static_cast<std::size_t>(by) * f.motion.blocks_w + bx]);
            }
    }
}

std::vector<double> parse_thresholds(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "inf") out.push_back(INFINITY);
        else out.push_back(std::stod(item));
    }
    if (out.empty()) throw InvalidArgument("no thresholds given");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Codec-guided token pruning and KV-cache reuse for streaming video (toy scale)"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    // gen
    ScenarioSpec scen;
    std::string kind = "translating_object", gen_out;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic scenario as a raw video file");
    gen->add_option("--kind", kind, "static|translating_object|multi_object|noise|scene_cut")->capture_default_str();
    gen->add_option("--width", scen.width)->capture_default_str();
    gen->add_option("--height", scen.height)->capture_default_str();
    gen->add_option("--frames", scen.frames)->capture_default_str();
    gen->add_option("--fps", scen.fps)->capture_default_str();
    gen->add_option("--vx", scen.vx, "object velocity, px/frame")->capture_default_str();
    gen->add_option("--vy", scen.vy)->capture_default_str();
    gen->add_option("--object-size", scen.object_size)->capture_default_str();
    gen->add_option("--objects", scen.objects)->capture_default_str();
    gen->add_option("--cut-frame", scen.cut_frame)->capture_default_str();
    gen->add_option("--seed", scen.seed)->capture_default_str();
    gen->add_option("-o,--output", gen_out)->required();

    // encode
    CodecParams codec;
    std::string enc_in, enc_out;
    bool dense = false;
    auto* enc = app.add_subcommand("encode", "Encode a raw video into a bitstream");
    enc->add_option("input", enc_in)->required();
    enc->add_option("-o,--output", enc_out)->required();
    enc->add_option("--gop", codec.gop_size)->capture_default_str();
    enc->add_option("--block-size", codec.block_size)->capture_default_str();
    enc->add_option("--search-radius", codec.search_radius)->capture_default_str();
    enc->add_flag("--dense-residuals", dense, "write every residual sample (frame_type 1)");

    // inspect
    std::string insp_in;
    bool insp_mvs = false;
    auto* insp = app.add_subcommand("inspect", "Dump bitstream frame types and motion metadata");
    insp->add_option("input", insp_in)->required();
    insp->add_flag("--mvs", insp_mvs, "print every block's motion vector");

    // cdf
    std::vector<std::string> cdf_in;
    std::string cdf_thresholds = "0.25,0.5,1,2", cdf_out = "-";
    CdfParams cdf_params;
    auto* cdf = app.add_subcommand("cdf", "CDF of the per-frame similar-patch ratio");
    cdf->add_option("inputs", cdf_in)->required();
    cdf->add_option("--thresholds", cdf_thresholds, "comma-separated tau values")->capture_default_str();
    cdf->add_option("--patch-size", cdf_params.patch_size)->capture_default_str();
    cdf->add_option("--group-size", cdf_params.group_size)->capture_default_str();
    cdf->add_option("--alpha", cdf_params.alpha)->capture_default_str();
    cdf->add_option("--gop", codec.gop_size, "used when encoding raw inputs")->capture_default_str();
    cdf->add_option("--block-size", codec.block_size)->capture_default_str();
    cdf->add_option("--search-radius", codec.search_radius)->capture_default_str();
    cdf->add_option("-o,--output", cdf_out)->capture_default_str();

    // run
    PipelineConfig pc;
    RunOptions ro;
    auto* run = app.add_subcommand("run", "Run the pipeline and write a report");
    run->add_option("input", ro.input, "CSRV or CSBS file")->required();
    run->add_option("--mode", ro.mode, "full|prune_only|kvc_only|full_opt")->capture_default_str();
    run->add_option("--refresh-mode", ro.refresh_mode, "full|naive_reuse|selective (overrides the mode's default)");
    run->add_option("--tau", pc.tau)->capture_default_str();
    run->add_option("--alpha", pc.alpha)->capture_default_str();
    run->add_option("--gop", pc.codec.gop_size)->capture_default_str();
    run->add_option("--block-size", pc.codec.block_size)->capture_default_str();
    run->add_option("--search-radius", pc.codec.search_radius)->capture_default_str();
    run->add_flag("--dense-residuals", ro.dense_residuals);
    run->add_option("--window-frames", pc.window.window_frames)->capture_default_str();
    auto* stride = run->add_option("--stride-frames", pc.window.stride_frames)->capture_default_str();
    run->add_option("--stride-pct", ro.stride_pct, "stride as a percentage of the window")->excludes(stride);
    run->add_option("--target-fps", pc.target_fps, "0 keeps every frame")->capture_default_str();
    run->add_option("--patch-size", pc.patch_size)->capture_default_str();
    run->add_option("--group-size", pc.group_size)->capture_default_str();
    run->add_option("--embed-dim", pc.encoder.embed_dim)->capture_default_str();
    run->add_option("--token-dim", pc.encoder.token_dim)->capture_default_str();
    run->add_option("--encoder-seed", pc.encoder.seed)->capture_default_str();
    run->add_flag("--cross-attention", pc.encoder.cross_attention);
    run->add_option("--layers", pc.llm.layers)->capture_default_str();
    run->add_option("--heads", pc.llm.heads)->capture_default_str();
    run->add_option("--model-dim", pc.llm.model_dim)->capture_default_str();
    run->add_option("--rope-base", pc.llm.rope_base)->capture_default_str();
    run->add_option("--llm-seed", pc.llm.seed)->capture_default_str();
    run->add_option("--prompt-tokens", pc.llm.prompt_tokens)->capture_default_str();
    run->add_option("--seed", ro.seed, "sets both encoder and llm seeds")->each([&](const std::string&) { ro.seed_set = true; });
    run->add_flag("--no-drift", ro.no_drift, "skip the full-recompute oracle");
    run->add_flag("--partial-tail", pc.allow_partial_tail, "emit a truncated final window");
    run->add_flag("--timings", ro.timings, "include wall-clock ms_* lines in the report");
    run->add_option("--report", ro.report, "report path, '-' for stdout")->capture_default_str();
    run->add_option("--csv", ro.csv, "per-window CSV path");
    run->add_option("--dump-masks", ro.dump_masks, "per-frame mask dump path");
    run->add_option("--dump-hidden", ro.dump_hidden, "final hidden states per window");

    // compare
    std::string cmp_full, cmp_opt;
    auto* cmp = app.add_subcommand("compare", "Savings of an optimized report relative to a baseline");
    cmp->add_option("baseline", cmp_full)->required();
    cmp->add_option("optimized", cmp_opt)->required();

    app.footer("Any subcommand accepts --config FILE with key=value lines; command-line flags take precedence.");

    try {
        auto args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*gen) {
            scen.kind = parse_scenario_kind(kind);
            const Scenario s = generate_scenario(scen);
            write_file(gen_out, serialize_raw_video(s.video));
        } else if (*enc) {
            codec.coding = dense ? ResidualCoding::dense : ResidualCoding::skip_zero;
            const RawVideo v = parse_raw_video(read_file(enc_in));
            const auto bytes = serialize_bitstream(encode(v, codec));
            write_file(enc_out, bytes);
            std::printf("frames=%zu raw_bytes=%zu bitstream_bytes=%zu\n", v.frames.size(),
                        v.frames.size() * static_cast<std::size_t>(v.width) * v.height, bytes.size());
        } else if (*insp) {
            const auto bytes = read_file(insp_in);
            print_inspect(parse_bitstream(bytes), bytes.size(), insp_mvs);
        } else if (*cdf) {
            std::vector<Bitstream> streams;
            for (const auto& p : cdf_in) streams.push_back(load_stream(p, codec));
            write_text(cdf_out, format_cdf(similar_patch_cdf(streams, parse_thresholds(cdf_thresholds), cdf_params)));
        } else if (*run) {
            pc.mode = parse_pipeline_mode(ro.mode);
            if (!ro.refresh_mode.empty()) pc.refresh_override = parse_refresh_mode(ro.refresh_mode);
            if (ro.stride_pct > 0) {
                pc.window.stride_frames =
                    std::max(1, static_cast<int>(std::lround(pc.window.window_frames * ro.stride_pct / 100.0)));
            }
            if (ro.seed_set) pc.encoder.seed = pc.llm.seed = ro.seed;
            pc.llm.token_dim = pc.encoder.token_dim;
            pc.measure_drift = !ro.no_drift;
            pc.keep_masks = !ro.dump_masks.empty();
            pc.keep_hidden = !ro.dump_hidden.empty();
            pc.codec.coding = ro.dense_residuals ? ResidualCoding::dense : ResidualCoding::skip_zero;
            const Bitstream bs = load_stream(ro.input, pc.codec);
            pc.window.fps = pc.target_fps > 0 ? pc.target_fps : bs.fps;
            const PipelineResult res = run_pipeline(bs, pc);
            write_text(ro.report, format_report(res.report, ro.timings));
            if (!ro.csv.empty()) write_text(ro.csv, format_window_csv(res.report));
            if (!ro.dump_masks.empty()) {
                std::string text;
                for (const auto& l : res.mask_lines) text += l + '\n';
                write_text(ro.dump_masks, text);
            }
            if (!ro.dump_hidden.empty()) {
                std::ostringstream os;
                os.precision(17);
                for (std::size_t w = 0; w < res.hidden.size(); ++w) {
                    const Matrix& h = res.hidden[w];
                    for (int r = 0; r < h.rows; ++r) {
                        os << w << ' ' << r;
                        for (double v : h.row(r)) os << ' ' << v;
                        os << '\n';
                    }
                }
                write_text(ro.dump_hidden, os.str());
            }
        } else if (*cmp) {
            const RunReport a = parse_report(read_text(cmp_full));
            const RunReport b = parse_report(read_text(cmp_opt));
            std::cout << format_savings(savings_summary(a, b));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
