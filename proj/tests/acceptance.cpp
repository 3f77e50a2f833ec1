// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cvlm/codec.hpp"
#include "cvlm/kvc.hpp"
#include "cvlm/motion_analyzer.hpp"
#include "cvlm/pipeline.hpp"
#include "cvlm/scenario.hpp"
#include "cvlm/vision_encoder.hpp"
#include "cvlm/windower.hpp"
#include "oracles.hpp"

using namespace cvlm;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void criterion(int n, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%s %2d %-28s %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), s);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Outcome codec_round_trip() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> dim(16, 128), len(1, 64), gop(1, 16), radius(1, 3);
    int ok = 0;
    const int n = 100;
    for (int i = 0; i < n; ++i) {
        const RawVideo v = oracle::random_video(dim(rng), dim(rng), len(rng), rng);
        const CodecParams p{gop(rng), 8, radius(rng), i % 2 ? ResidualCoding::dense : ResidualCoding::skip_zero};
        const auto bytes = serialize_bitstream(encode(v, p));
        if (decode_all(parse_bitstream(bytes)) == v) ++ok;
    }
    const double s = elapsed(t0);
    return {ok == n && s < 30.0, fmt("%d/%d videos bit-identical, %.1fs (limit 30s)", ok, n, s)};
}

Outcome motion_optimality() {
    std::mt19937_64 rng(1002);
    std::uniform_int_distribution<int> r(1, 4), small(0, 7);
    long blocks = 0, bad = 0;
    for (int i = 0; i < 60; ++i) {
        const int radius = r(rng);
        Frame ref = oracle::random_frame(32, 32, rng), cur = oracle::random_frame(32, 32, rng);
        if (i % 2) {  // low-entropy frames produce SAD ties
            for (auto& p : ref.plane) p = static_cast<std::uint8_t>(small(rng));
            for (auto& p : cur.plane) p = static_cast<std::uint8_t>(small(rng));
        }
        const MotionField f = estimate_motion(cur, ref, 8, radius);
        for (int by = 0; by < f.blocks_h; ++by)
            for (int bx = 0; bx < f.blocks_w; ++bx) {
                const auto m = oracle::best_match(cur, ref, bx, by, 8, radius);
                ++blocks;
                if (!(f.at(bx, by) == MotionVector{m.dx, m.dy}) ||
                    f.sad[static_cast<std::size_t>(by) * f.blocks_w + bx] != m.sad)
                    ++bad;
            }
    }
    return {bad == 0, fmt("60 frames, %ld blocks, %ld mismatches", blocks, bad)};
}

Outcome window_math() {
    const WindowConfig a{80, 16, 2}, b{12, 4, 2};
    const double rf = redundancy_factor(a);
    const int ov = overlap_split(0, window_bounds(0, a), 1, window_bounds(1, a)).overlap.size();
    const int ov_b = overlap_split(0, window_bounds(0, b), 1, window_bounds(1, b)).overlap.size();
    const double waste = static_cast<double>(ov_b) / b.window_frames;
    const bool pass = rf == 5.0 && ov == 64 && std::abs(waste - (1.0 - 4.0 / 12.0)) <= 1e-12 && std::lround(waste * 100) == 67;
    return {pass, fmt("w=80,s=16: redundancy %.1f, overlap %d; w=12,s=4: waste %.4f", rf, ov, waste)};
}

Outcome mask_policy() {
    std::mt19937_64 rng(1004);
    const PatchGridSpec spec{8, 6, 8, 2};
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::uniform_int_distribution<int> len(2, 20), gop(0, 7);
    long violations = 0, frames = 0;
    const int sequences = 1000;
    for (int s = 0; s < sequences; ++s) {
        std::uniform_real_distribution<double> tdist(0.0, 3.0);
        double t1 = tdist(rng), t2 = tdist(rng);
        if (t1 > t2) std::swap(t1, t2);
        DynamicPatchMask lo, hi;
        const int n = len(rng);
        for (int t = 0; t < n; ++t) {
            ++frames;
            const FrameType type = (t == 0 || gop(rng) == 0) ? FrameType::I : FrameType::P;
            MotionMask m{spec.grid_h, spec.grid_w, {}};
            for (int i = 0; i < spec.patch_count(); ++i) m.score.push_back(u(rng) * (i % 3 == 0 ? 0.1 : 1.0));
            const PatchMask d1 = threshold_mask(m, t1), d2 = threshold_mask(m, t2);
            if (!d2.subset_of(d1)) ++violations;  // tau monotonicity per frame
            const DynamicPatchMask prev = lo;
            lo = accumulate_gop(lo, d1, type, spec);
            hi = accumulate_gop(hi, d2, type, spec);
            if (!hi.active.subset_of(lo.active)) ++violations;  // tau monotonicity after accumulation
            if (type == FrameType::I) {
                if (lo.epoch != prev.epoch + 1 || lo.active.count() != static_cast<std::size_t>(spec.patch_count()))
                    ++violations;
            } else {
                if (lo.epoch != prev.epoch || !d1.subset_of(lo.active)) ++violations;
                if (!prev.intra && !prev.active.subset_of(lo.active)) ++violations;  // monotone within the GOP
            }
            const auto sel = expand_group_complete(lo.active, spec);
            if (!is_group_complete(sel.retained, spec) || !lo.active.subset_of(sel.retained)) ++violations;
            for (int g = 0; g < sel.groups_h * sel.groups_w; ++g) {
                const int gr = g / sel.groups_w, gc = g % sel.groups_w;
                bool any = false;
                for (int r = gr * 2; r < gr * 2 + 2; ++r)
                    for (int c = gc * 2; c < gc * 2 + 2; ++c) any = any || lo.active.at(r, c);
                if (any != (sel.retain[static_cast<std::size_t>(g)] != 0)) ++violations;
            }
        }
    }
    return {violations == 0, fmt("%d sequences, %ld frames, %ld violations", sequences, frames, violations)};
}

Outcome pruning_soundness() {
    std::mt19937_64 rng(1005);
    const VisionEncoder enc(EncoderConfig{});
    const auto spec = PatchGridSpec::for_frame(64, 64, 8, 2);
    std::bernoulli_distribution coin(0.35);
    double worst = 0.0;
    long tokens = 0;
    for (int i = 0; i < 50; ++i) {
        const Frame f = oracle::random_frame(64, 64, rng);
        const Patches p = patchify(f, spec);
        PatchMask active(spec.grid_h, spec.grid_w);
        for (auto& b : active.bits) b = coin(rng) ? 1 : 0;
        const auto sel = expand_group_complete(active, spec);
        const auto all = expand_group_complete(PatchMask(spec.grid_h, spec.grid_w, true), spec);
        const auto pruned = enc.project_downsample(enc.encode_selected(p, sel.retained, spec), sel, spec, i, 0);
        const auto full = enc.project_downsample(enc.encode_selected(p, all.retained, spec), all, spec, i, 0);
        for (const auto& t : pruned) {
            worst = std::max(worst, oracle::rel_l2(t.vector, full[static_cast<std::size_t>(t.group)].vector));
            ++tokens;
        }
        if (pruned.size() != sel.retained_groups()) worst = INFINITY;  // every retained group yields a token
    }
    return {worst <= 1e-6, fmt("50 frames, %ld tokens, max rel err %.3g (tol 1e-6)", tokens, worst)};
}

Outcome rope_algebra() {
    const LlmConfig cfg;
    const PrefillModel model(cfg);
    std::mt19937_64 rng(1006);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> pos(0, 400), dp(-200, 200);
    double id = 0, comp = 0, norm = 0, layer1 = 0;
    for (int i = 0; i < 200; ++i) {
        std::vector<double> k(static_cast<std::size_t>(cfg.model_dim));
        for (auto& x : k) x = g(rng);
        const int a = dp(rng), b = dp(rng);
        id = std::max(id, oracle::rel_l2(rope_rotate(k, 0, cfg), k));
        comp = std::max(comp, oracle::rel_l2(rope_rotate(rope_rotate(k, a, cfg), b, cfg), rope_rotate(k, a + b, cfg)));
        norm = std::max(norm, std::abs(l2_norm(rope_rotate(k, a, cfg)) - l2_norm(k)) / l2_norm(k));
        std::vector<double> e(static_cast<std::size_t>(cfg.token_dim));
        for (auto& x : e) x = g(rng);
        const int p0 = pos(rng), p1 = pos(rng);
        layer1 = std::max(layer1, oracle::rel_l2(rope_rotate(model.first_layer_key(e, p0), p1 - p0, cfg),
                                                 model.first_layer_key(e, p1)));
    }
    const bool pass = id == 0.0 && comp <= 1e-6 && norm <= 1e-6 && layer1 <= 1e-6;
    return {pass, fmt("identity %.1g, composition %.2g, norm %.2g, layer-1 %.2g (tol 1e-6)", id, comp, norm, layer1)};
}

Outcome degenerate_equivalences() {
    const PrefillModel model(LlmConfig{});
    const WindowConfig wc{12, 4, 2};
    auto make = [&](FrameRange fr) {
        PrefillInput in;
        in.frames = fr;
        for (int f = fr.begin; f < fr.end; ++f)
            for (int grp = 0; grp < 3; ++grp) in.origins.push_back(TokenOrigin::visual(f, grp));
        for (int i = 0; i < model.config().prompt_tokens; ++i) in.origins.push_back(TokenOrigin::prompt_token(i));
        in.embeddings = Matrix(static_cast<int>(in.origins.size()), model.config().token_dim);
        for (int p = 0; p < in.embeddings.rows; ++p) {
            const auto& o = in.origins[static_cast<std::size_t>(p)];
            std::mt19937_64 r(o.prompt ? 99999 + static_cast<std::uint64_t>(o.group) : static_cast<std::uint64_t>(o.frame * 7 + o.group));
            for (auto& x : in.embeddings.row(p)) x = std::uniform_real_distribution<double>(-1, 1)(r);
        }
        return in;
    };
    auto types = [](int f) { return f % 4 == 0 ? FrameType::I : FrameType::P; };
    const auto prev = model.full_prefill(make(window_bounds(0, wc)), 0).segment;
    const PrefillInput cur = make(window_bounds(1, wc));
    const auto split = overlap_split(0, window_bounds(0, wc), 1, window_bounds(1, wc));
    const auto recompute = model.selective_prefill(plan_refresh(prev, cur.origins, types, split, RefreshMode::full), prev, cur, 1);
    const bool a = recompute.segment == model.full_prefill(cur, 1).segment;

    const PrefillInput same = make(window_bounds(0, wc));
    PrefillPlan replay;
    for (int p = 0; p < prev.size(); ++p) {
        const auto& o = prev.origins[static_cast<std::size_t>(p)];
        replay.entries.push_back({o, Disposition::reuse, p, p});
    }
    const auto r = model.selective_prefill(replay, prev, same, 0);
    const bool b = r.segment.keys == prev.keys && r.segment.values == prev.values && r.segment.hidden == prev.hidden &&
                   r.segment.embeddings == prev.embeddings && r.recomputed == 0;
    return {a && b, fmt("all-recompute == full_prefill: %s; zero-shift all-reuse == previous: %s", a ? "yes" : "no",
                        b ? "yes" : "no")};
}

Outcome drift_ordering() {
    const auto t0 = Clock::now();
    double sum[3] = {0, 0, 0};
    int pairs = 0;
    const RefreshMode modes[3] = {RefreshMode::full, RefreshMode::naive_reuse, RefreshMode::selective};
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        ScenarioSpec s;
        s.kind = ScenarioKind::translating_object;
        s.frames = 40;
        s.vx = static_cast<int>(seed % 3) + 1;
        s.vy = static_cast<int>(seed % 2);
        s.seed = seed;
        const RawVideo v = generate_scenario(s).video;
        for (int m = 0; m < 3; ++m) {
            PipelineConfig c;
            c.window = {12, 4, 2};
            c.codec = {4, 8, 4};
            c.mode = PipelineMode::kvc_only;
            c.refresh_override = modes[m];
            const auto rep = run_pipeline(v, c).report;
            for (const auto& w : rep.windows) {
                if (w.window == 0 || !w.has_drift) continue;  // no previous cache to reuse
                sum[m] += w.drift.mean_rel_l2;
                if (m == 0) ++pairs;
            }
        }
    }
    const double full = sum[0] / pairs, naive = sum[1] / pairs, sel = sum[2] / pairs;
    const double s = elapsed(t0);
    const bool pass = pairs >= 20 && full == 0.0 && sel <= naive && s < 60.0;
    return {pass, fmt("%d window pairs: drift full %.3g, naive %.4g, selective %.4g, %.1fs", pairs, full, naive, sel, s)};
}

Outcome motion_trend() {
    double ratio[3];
    const int velocity[3] = {0, 1, 4};
    for (int i = 0; i < 3; ++i) {
        ScenarioSpec s;
        s.kind = ScenarioKind::translating_object;
        s.frames = 64;
        s.vx = velocity[i];
        const RawVideo v = generate_scenario(s).video;
        PipelineConfig c;
        c.window = {16, 4, 2};
        c.tau = 0.25;
        c.measure_drift = false;
        const auto t = run_pipeline(v, c).report.totals();
        ratio[i] = 1.0 - static_cast<double>(t.tokens_retained) / static_cast<double>(t.tokens_full);
    }
    const bool pass = ratio[0] > ratio[1] && ratio[1] > ratio[2];
    return {pass, fmt("pruned token fraction at v=0,1,4 px/frame: %.3f, %.3f, %.3f", ratio[0], ratio[1], ratio[2])};
}

Outcome tau_zero_switch() {
    ScenarioSpec s;
    s.kind = ScenarioKind::multi_object;
    s.frames = 24;
    s.vx = 2;
    const RawVideo v = generate_scenario(s).video;
    PipelineConfig opt;
    opt.window = {8, 4, 2};
    opt.codec = {4, 8, 4};
    opt.tau = 0.0;
    opt.refresh_override = RefreshMode::full;
    opt.keep_hidden = true;
    PipelineConfig full = opt;
    full.mode = PipelineMode::full;
    full.refresh_override.reset();
    const auto a = run_pipeline(v, opt), b = run_pipeline(v, full);
    const bool same = !a.hidden.empty() && a.hidden == b.hidden;
    return {same, fmt("%zu windows, hidden states %s", a.hidden.size(), same ? "bit-identical" : "differ")};
}

Outcome token_formula() {
    const VisionEncoder enc(EncoderConfig{14, 8, 8, 2, 1, false});
    const auto spec = PatchGridSpec::for_frame(448, 448, 14, 2);
    const auto all = expand_group_complete(PatchMask(spec.grid_h, spec.grid_w, true), spec);
    const auto toks = enc.project_downsample(enc.encode_selected(patchify(Frame(448, 448, 77), spec), all.retained, spec),
                                             all, spec, 0, 0);
    const std::size_t per_window = toks.size() * 80;
    const bool pass = toks.size() == (448 / 14) * (448 / 14) / 4 && toks.size() == 256 && per_window == 20480;
    return {pass, fmt("%zu tokens per 448x448 frame, %zu per 80-frame window", toks.size(), per_window)};
}

}  // namespace

int main() {
    criterion(1, "codec round trip", codec_round_trip);
    criterion(2, "motion optimality", motion_optimality);
    criterion(3, "window math", window_math);
    criterion(4, "mask policy", mask_policy);
    criterion(5, "pruning soundness", pruning_soundness);
    criterion(6, "rope algebra, layer-1 keys", rope_algebra);
    criterion(7, "degenerate equivalences", degenerate_equivalences);
    criterion(8, "drift ordering", drift_ordering);
    criterion(9, "motion-level trend", motion_trend);
    criterion(10, "tau=0 full-compute switch", tau_zero_switch);
    criterion(11, "token formula", token_formula);
    std::printf("%s: %d of 11 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
