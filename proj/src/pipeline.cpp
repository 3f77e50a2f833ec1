#include "cvlm/pipeline.hpp"

#include <chrono>

#include "cvlm/error.hpp"

namespace cvlm {

const char* to_string(PipelineMode m) {
    switch (m) {
        case PipelineMode::full: return "full";
        case PipelineMode::prune_only: return "prune_only";
        case PipelineMode::kvc_only: return "kvc_only";
        case PipelineMode::full_opt: return "full_opt";
    }
    return "?";
}

PipelineMode parse_pipeline_mode(const std::string& s) {
    if (s == "full") return PipelineMode::full;
    if (s == "prune_only") return PipelineMode::prune_only;
    if (s == "kvc_only") return PipelineMode::kvc_only;
    if (s == "full_opt") return PipelineMode::full_opt;
    throw InvalidArgument("unknown pipeline mode: " + s);
}

RefreshMode PipelineConfig::refresh() const {
    if (refresh_override) return *refresh_override;
    return mode == PipelineMode::kvc_only || mode == PipelineMode::full_opt ? RefreshMode::selective : RefreshMode::full;
}

void PipelineConfig::validate(int width, int height) const {
    window.validate();
    if (target_fps < 0) throw InvalidArgument("target_fps must be >= 0");
    if (!(tau >= 0) || alpha < 0) throw InvalidArgument("tau and alpha must be >= 0");
    PatchGridSpec::for_frame(width, height, patch_size, group_size);
    encoder.validate();
    llm.validate();
    if (encoder.token_dim != llm.token_dim) {
        throw InvalidArgument("encoder token_dim (" + std::to_string(encoder.token_dim) + ") differs from llm token_dim (" +
                              std::to_string(llm.token_dim) + ")");
    }
    if (llm.prompt_tokens < 1) throw InvalidArgument("pipeline needs at least one prompt token");
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct FramePayload {
    FrameAnalysis analysis;
};

using View = WindowView<FramePayload>;

template <class F>
auto staged(const char* stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

class StreamRunner {
public:
    StreamRunner(const Bitstream& bs, const PipelineConfig& cfg)
        : cfg_(cfg),
          spec_(PatchGridSpec::for_frame(bs.width, bs.height, cfg.patch_size, cfg.group_size)),
          analyzer_(spec_, {cfg.effective_tau(), cfg.alpha}),
          vit_(encoder_config(cfg)),
          model_(cfg.llm) {}

    void process(const View& view, PipelineResult& out) {
        const bool cache_tokens = cfg_.refresh() != RefreshMode::full;
        WindowReport w;
        w.window = view.index;
        w.frame_begin = view.range.begin;
        w.frame_end = view.range.end;

        PrefillInput input;
        input.frames = view.range;
        std::vector<const VisualToken*> tokens;
        std::vector<std::vector<VisualToken>> fresh;  // tokens encoded for this window only
        fresh.reserve(static_cast<std::size_t>(view.range.size()));

        auto t0 = Clock::now();
        staged("vision_encoder", [&] {
            for (int f = view.range.begin; f < view.range.end; ++f) {
                const auto& entry = view.at(f);
                const GroupSelection& sel = entry.payload.analysis.selection;
                w.tokens_full += static_cast<std::uint64_t>(spec_.group_count());
                w.patches_full += static_cast<std::uint64_t>(spec_.patch_count());
                w.patches_retained += sel.retained.count();

                const std::vector<VisualToken>* toks = nullptr;
                if (cache_tokens) {
                    if (auto it = token_cache_.find(f); it != token_cache_.end()) toks = &it->second;
                }
                if (!toks) {
                    const Patches patches = patchify(entry.decoded.frame, spec_);
                    const PatchEmbeddings emb = vit_.encode_selected(patches, sel.retained, spec_);
                    w.patches_encoded += emb.encoded;
                    w.flops_vit += flops_vit(emb.encoded, vit_.config()) +
                                   flops_vit_cross_attention(emb.encoded, vit_.config());
                    auto projected =
                        vit_.project_downsample(emb, sel, spec_, f, entry.payload.analysis.accumulated.epoch);
                    if (cache_tokens) {
                        toks = &(token_cache_[f] = std::move(projected));
                    } else {
                        fresh.push_back(std::move(projected));
                        toks = &fresh.back();
                    }
                }
                for (const auto& t : *toks) tokens.push_back(&t);
            }
        });
        out.report.ms_vit += ms_since(t0);

        const int d_t = cfg_.llm.token_dim;
        const int n_prompt = cfg_.llm.prompt_tokens;
        input.embeddings = Matrix(static_cast<int>(tokens.size()) + n_prompt, d_t);
        int row = 0;
        for (const VisualToken* t : tokens) {
            input.origins.push_back(TokenOrigin::visual(t->frame, t->group));
            std::copy(t->vector.begin(), t->vector.end(), input.embeddings.row(row++).begin());
        }
        for (int i = 0; i < n_prompt; ++i) {
            input.origins.push_back(TokenOrigin::prompt_token(i));
            const auto src = model_.prompt().row(i);
            std::copy(src.begin(), src.end(), input.embeddings.row(row++).begin());
        }
        w.tokens_retained = tokens.size();
        w.positions = input.origins.size();

        t0 = Clock::now();
        PrefillResult res = staged("kvc_manager", [&] {
            const RefreshMode refresh = cfg_.refresh();
            if (refresh == RefreshMode::full || !prev_) {
                auto r = model_.full_prefill(input, view.index);
                if (cfg_.measure_drift) {
                    w.has_drift = true;
                    w.drift = DriftStats{};
                }
                return r;
            }
            const OverlapSplit split = overlap_split(prev_->window, prev_->frames, view.index, view.range);
            const PrefillPlan plan = plan_refresh(
                *prev_, input.origins, [&view](int f) { return view.frame_type(f); }, split, refresh);
            w.anchor_positions = plan.count(Disposition::recompute_anchor);
            w.reused_positions = plan.count(Disposition::reuse);
            auto r = model_.selective_prefill(plan, *prev_, input, view.index);
            if (cfg_.measure_drift) {
                const auto oracle = model_.full_prefill(input, view.index);
                w.has_drift = true;
                w.drift = measure_drift(r.segment.hidden, oracle.segment.hidden);
            }
            return r;
        });
        out.report.ms_prefill += ms_since(t0);

        w.recomputed_positions = res.recomputed;
        w.flops_prefill = flops_prefill(w.positions, w.recomputed_positions, cfg_.llm);
        w.flops_rope = flops_rope_correction(w.reused_positions, cfg_.llm);
        if (cfg_.keep_hidden) out.hidden.push_back(res.segment.hidden);
        out.report.windows.push_back(w);
        prev_ = std::move(res.segment);

        // Frames before the next window's start are never needed again.
        const int next_begin = window_bounds(view.index + 1, cfg_.window).begin;
        token_cache_.erase(token_cache_.begin(), token_cache_.lower_bound(next_begin));
    }

    FrameAnalysis analyze(const DecodedFrame& f) { return analyzer_.analyze(f); }

private:
    static EncoderConfig encoder_config(const PipelineConfig& cfg) {
        EncoderConfig e = cfg.encoder;
        e.patch_size = cfg.patch_size;
        e.group_size = cfg.group_size;
        return e;
    }

    const PipelineConfig& cfg_;
    PatchGridSpec spec_;
    MotionAnalyzer analyzer_;
    VisionEncoder vit_;
    PrefillModel model_;
    std::map<int, std::vector<VisualToken>> token_cache_;
    std::optional<CacheSegment> prev_;
};

}  // namespace

PipelineResult run_pipeline(const Bitstream& bitstream, const PipelineConfig& cfg) {
    staged("config", [&] { cfg.validate(bitstream.width, bitstream.height); });

    PipelineResult out;
    RunReport& rep = out.report;
    rep.mode = to_string(cfg.mode);
    rep.refresh_mode = to_string(cfg.refresh());
    rep.window_frames = cfg.window.window_frames;
    rep.stride_frames = cfg.window.stride_frames;
    rep.gop_size = bitstream.params.gop_size;
    rep.tau = cfg.effective_tau();
    rep.alpha = cfg.alpha;
    rep.width = bitstream.width;
    rep.height = bitstream.height;
    rep.raw_bytes = static_cast<std::uint64_t>(bitstream.frames.size()) * bitstream.width * bitstream.height;
    rep.bitstream_bytes = serialize_bitstream(bitstream).size();
    rep.transmitted_bytes = cfg.mode == PipelineMode::full ? rep.raw_bytes : rep.bitstream_bytes;

    StreamRunner runner(bitstream, cfg);
    FrameRing<FramePayload> ring(cfg.window, cfg.allow_partial_tail);
    const Decimator decimator(bitstream.fps, cfg.target_fps > 0 ? cfg.target_fps : bitstream.fps);
    Decoder decoder(bitstream);
    int sampled = 0;

    for (;;) {
        auto t0 = Clock::now();
        std::optional<DecodedFrame> f = staged("codec", [&] { return decoder.next(); });
        rep.ms_decode += ms_since(t0);
        if (!f) break;
        ++rep.decoded_frames;
        if (!decimator.keep(f->index)) continue;

        t0 = Clock::now();
        RingEntry<FramePayload> entry;
        entry.index = sampled++;
        entry.payload.analysis = staged("motion_analyzer", [&] { return runner.analyze(*f); });
        if (cfg.keep_masks) out.mask_lines.push_back(format_mask_line(entry.index, entry.payload.analysis.accumulated));
        entry.decoded = std::move(*f);
        rep.ms_analyze += ms_since(t0);

        auto windows = staged("windower", [&] { return ring.push(std::move(entry)); });
        for (const auto& v : windows) runner.process(v, out);
    }
    for (const auto& v : ring.finish()) runner.process(v, out);
    rep.frames = static_cast<std::uint64_t>(ring.ingested());
    return out;
}

PipelineResult run_pipeline(const RawVideo& video, const PipelineConfig& cfg) {
    const Bitstream bs = staged("codec", [&] { return encode(video, cfg.codec); });
    return run_pipeline(bs, cfg);
}

}  // namespace cvlm
