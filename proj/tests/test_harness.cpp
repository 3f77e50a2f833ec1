#include <random>

#include "doctest.h"
#include "cvlm/config.hpp"
#include "cvlm/error.hpp"
#include "cvlm/pipeline.hpp"
#include "cvlm/scenario.hpp"
#include "oracles.hpp"

using namespace cvlm;

namespace {

ScenarioSpec scenario(ScenarioKind kind, int frames, int vx = 1, std::uint64_t seed = 1) {
    ScenarioSpec s;
    s.kind = kind;
    s.frames = frames;
    s.vx = vx;
    s.seed = seed;
    return s;
}

PipelineConfig small_config(PipelineMode mode) {
    PipelineConfig c;
    c.window = {8, 4, 2};
    c.codec = {4, 8, 4};
    c.mode = mode;
    c.keep_hidden = true;
    return c;
}

bool box_hits_rect(const Box& b, int x0, int y0, int x1, int y1) {
    return std::max(b.x, x0) < std::min(b.x + b.w, x1) && std::max(b.y, y0) < std::min(b.y + b.h, y1);
}

double max_rel(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, measure_drift(a[k], b[k]).max_rel_l2);
    return worst;
}

}  // namespace

TEST_CASE("scenario basics") {
    const auto st = generate_scenario(scenario(ScenarioKind::static_scene, 6));
    for (const auto& f : st.video.frames) CHECK(f == st.video.frames[0]);

    const auto a = generate_scenario(scenario(ScenarioKind::multi_object, 10));
    const auto b = generate_scenario(scenario(ScenarioKind::multi_object, 10));
    CHECK(a.video == b.video);
    CHECK(a.truth == b.truth);
    CHECK(a.truth[0].size() == 3);

    const auto tr = generate_scenario(scenario(ScenarioKind::translating_object, 5, 2));
    for (std::size_t t = 1; t < 5; ++t) CHECK(tr.truth[t][0].x - tr.truth[t - 1][0].x == 2);

    ScenarioSpec big = scenario(ScenarioKind::translating_object, 4);
    big.object_size = 65;
    CHECK_THROWS_AS(generate_scenario(big), InvalidArgument);
    CHECK(parse_scenario_kind(to_string(ScenarioKind::scene_cut)) == ScenarioKind::scene_cut);
    CHECK_THROWS_AS(parse_scenario_kind("fireworks"), InvalidArgument);
}

TEST_CASE("dynamic patches follow the moving object") {
    const auto sc = generate_scenario(scenario(ScenarioKind::translating_object, 12, 2));
    const Bitstream bs = encode(sc.video, {16, 8, 4});
    const auto spec = PatchGridSpec::for_frame(64, 64, 8, 2);
    MotionAnalyzer an(spec, {0.25, 0.0});
    Decoder dec(bs);
    while (auto f = dec.next()) {
        const auto res = an.analyze(*f);
        if (f->type == FrameType::I) continue;
        const std::size_t t = static_cast<std::size_t>(f->index);
        const Box cur = sc.truth[t][0], prev = sc.truth[t - 1][0];
        for (int r = 0; r < spec.grid_h; ++r)
            for (int c = 0; c < spec.grid_w; ++c) {
                const int x0 = c * 8, y0 = r * 8;
                // one-patch halo around current and previous footprint
                const bool near = box_hits_rect(cur, x0 - 8, y0 - 8, x0 + 16, y0 + 16) ||
                                  box_hits_rect(prev, x0 - 8, y0 - 8, x0 + 16, y0 + 16);
                if (res.dynamic.at(r, c)) CHECK(near);
                const bool inside = x0 >= cur.x && x0 + 8 <= cur.x + cur.w && y0 >= cur.y && y0 + 8 <= cur.y + cur.h;
                if (inside) CHECK(res.dynamic.at(r, c));
            }
    }
}

TEST_CASE("scene cut shows up as a residual energy jump") {
    ScenarioSpec s = scenario(ScenarioKind::scene_cut, 12);
    s.cut_frame = 6;
    const Bitstream bs = encode(generate_scenario(s).video, {64, 8, 2});
    auto energy = [&](int i) {
        std::uint64_t e = 0;
        for (auto v : bs.frames[static_cast<std::size_t>(i)].motion.sad) e += v;
        return e;
    };
    CHECK(bs.frames[6].type == FrameType::P);
    CHECK(energy(5) == 0);
    CHECK(energy(6) > 64u * 64u * 40u);  // noise vs noise: mean |diff| ~85, at least ~40 per pixel
    std::size_t busy = 0;
    for (auto v : bs.frames[6].motion.sad) busy += v > 0 ? 1 : 0;
    CHECK(busy * 10 >= bs.frames[6].motion.sad.size() * 9);
    CHECK(energy(7) == 0);
}

TEST_CASE("pipeline is deterministic") {
    const auto v = generate_scenario(scenario(ScenarioKind::multi_object, 24)).video;
    const auto a = run_pipeline(v, small_config(PipelineMode::full_opt));
    const auto b = run_pipeline(v, small_config(PipelineMode::full_opt));
    CHECK(format_report(a.report) == format_report(b.report));
    CHECK(a.hidden == b.hidden);
    const auto c = run_pipeline(v, small_config(PipelineMode::full));
    const auto d = run_pipeline(v, small_config(PipelineMode::full));
    CHECK(format_report(c.report) == format_report(d.report));
}

TEST_CASE("mode lattice") {
    const auto v = generate_scenario(scenario(ScenarioKind::multi_object, 32)).video;
    std::map<PipelineMode, WindowReport> t;
    for (auto m : {PipelineMode::full, PipelineMode::prune_only, PipelineMode::kvc_only, PipelineMode::full_opt})
        t[m] = run_pipeline(v, small_config(m)).report.totals();
    CHECK(t[PipelineMode::full].tokens_retained >= t[PipelineMode::prune_only].tokens_retained);
    CHECK(t[PipelineMode::prune_only].tokens_retained == t[PipelineMode::full_opt].tokens_retained);
    CHECK(t[PipelineMode::full].tokens_retained == t[PipelineMode::kvc_only].tokens_retained);
    CHECK(t[PipelineMode::full].recomputed_positions >= t[PipelineMode::kvc_only].recomputed_positions);
    CHECK(t[PipelineMode::kvc_only].recomputed_positions >= t[PipelineMode::full_opt].recomputed_positions);
    CHECK(t[PipelineMode::kvc_only].recomputed_positions < t[PipelineMode::kvc_only].positions);
    CHECK(t[PipelineMode::full].drift.mean_rel_l2 == 0.0);
    for (auto& [m, w] : t) {
        CHECK(w.tokens_retained <= w.tokens_full);
        CHECK(w.patches_retained == 4 * w.tokens_retained);
        CHECK(w.positions == w.recomputed_positions + w.reused_positions);
    }
}

TEST_CASE("tau = 0 with full refresh reproduces mode full exactly") {
    const auto v = generate_scenario(scenario(ScenarioKind::translating_object, 20, 3)).video;
    PipelineConfig opt = small_config(PipelineMode::full_opt);
    opt.tau = 0.0;
    opt.refresh_override = RefreshMode::full;
    const auto a = run_pipeline(v, opt);
    const auto b = run_pipeline(v, small_config(PipelineMode::full));
    REQUIRE(a.hidden.size() == b.hidden.size());
    CHECK(a.hidden == b.hidden);
}

TEST_CASE("static video: only I-frame tokens survive and reuse is exact") {
    const auto v = generate_scenario(scenario(ScenarioKind::static_scene, 24)).video;
    PipelineConfig opt = small_config(PipelineMode::full_opt);
    opt.tau = INFINITY;
    const auto a = run_pipeline(v, opt);
    PipelineConfig pr = small_config(PipelineMode::prune_only);
    pr.tau = INFINITY;
    const auto b = run_pipeline(v, pr);
    CHECK(max_rel(a.hidden, b.hidden) <= 1e-5);
    // w=8 with GOP 4: two I-frames per window
    for (const auto& w : a.report.windows) {
        CHECK(w.tokens_full == 8u * 16u);
        CHECK(w.tokens_retained == 2u * 16u);
    }
    PipelineConfig full = small_config(PipelineMode::full);
    const auto f = run_pipeline(v, full);
    const Savings s = savings_summary(f.report, a.report);
    CHECK(s.token_reduction == doctest::Approx((8.0 - 2.0) / 8.0));

    // at the default tau the static background is equally pruned
    PipelineConfig def = small_config(PipelineMode::full_opt);
    CHECK(run_pipeline(v, def).report.totals().tokens_retained == a.report.totals().tokens_retained);
}

TEST_CASE("default configuration runs end to end on 160 frames") {
    const auto v = generate_scenario(scenario(ScenarioKind::translating_object, 160, 1)).video;
    PipelineConfig c;  // w=80, s=16, tau=0.25, gop=16
    c.measure_drift = false;
    const auto r = run_pipeline(v, c).report;
    CHECK(r.windows.size() == 6);
    CHECK(r.frames == 160);
    CHECK(r.decoded_frames == 160);
    CHECK(r.gop_size == 16);
    CHECK(r.totals().tokens_retained < r.totals().tokens_full);
    CHECK(r.transmitted_bytes == r.bitstream_bytes);
    CHECK(r.bitstream_bytes < r.raw_bytes);
}

TEST_CASE("decimation and transmitted bytes") {
    ScenarioSpec s = scenario(ScenarioKind::translating_object, 30);
    s.fps = 6;
    const auto v = generate_scenario(s).video;
    PipelineConfig c = small_config(PipelineMode::full);
    c.target_fps = 2;
    const auto r = run_pipeline(v, c).report;
    CHECK(r.decoded_frames == 30);
    CHECK(r.frames == 10);
    CHECK(r.windows.size() == 1);
    CHECK(r.transmitted_bytes == r.raw_bytes);
}

TEST_CASE("stage-tagged errors") {
    const auto v = generate_scenario(scenario(ScenarioKind::static_scene, 8)).video;
    PipelineConfig bad = small_config(PipelineMode::full);
    bad.patch_size = 7;
    try {
        run_pipeline(v, bad);
        FAIL("expected an error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "config");
    }
    PipelineConfig dims = small_config(PipelineMode::full);
    dims.llm.token_dim = 16;
    CHECK_THROWS_AS(run_pipeline(v, dims), StageError);
    PipelineConfig codec = small_config(PipelineMode::full);
    codec.codec.block_size = 0;
    try {
        run_pipeline(v, codec);
        FAIL("expected an error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "codec");
    }
}

TEST_CASE("mask dump lines") {
    const auto v = generate_scenario(scenario(ScenarioKind::static_scene, 8)).video;
    PipelineConfig c = small_config(PipelineMode::full_opt);
    c.keep_masks = true;
    const auto r = run_pipeline(v, c);
    REQUIRE(r.mask_lines.size() == 8);
    CHECK(r.mask_lines[0] == "0 0 11111111/11111111/11111111/11111111/11111111/11111111/11111111/11111111");
    CHECK(r.mask_lines[1] == "1 0 00000000/00000000/00000000/00000000/00000000/00000000/00000000/00000000");
    CHECK(r.mask_lines[4].rfind("4 1 1111", 0) == 0);
}

TEST_CASE("key=value config parsing") {
    const auto kv = parse_key_value_config("# comment\n tau = 0.5 \n\nmode=full_opt\n");
    REQUIRE(kv.size() == 2);
    CHECK(kv[0] == std::pair<std::string, std::string>{"tau", "0.5"});
    CHECK(kv[1].second == "full_opt");
    try {
        parse_key_value_config("a=1\nbroken line\n");
        FAIL("expected an error");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK(parse_pipeline_mode("kvc_only") == PipelineMode::kvc_only);
    CHECK_THROWS_AS(parse_pipeline_mode("turbo"), InvalidArgument);
}
