#include "cvlm/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cvlm/error.hpp"

namespace cvlm {

std::uint64_t flops_vit(std::uint64_t retained_patches, const EncoderConfig& cfg) {
    const std::uint64_t p2 = static_cast<std::uint64_t>(cfg.patch_size) * cfg.patch_size;
    const std::uint64_t dv = static_cast<std::uint64_t>(cfg.embed_dim);
    const std::uint64_t g2 = static_cast<std::uint64_t>(cfg.group_size) * cfg.group_size;
    const std::uint64_t groups = retained_patches / g2;
    return retained_patches * 2 * (p2 * dv + dv * dv) + groups * 2 * g2 * dv * static_cast<std::uint64_t>(cfg.token_dim);
}

std::uint64_t flops_vit_cross_attention(std::uint64_t patches_in_frame, const EncoderConfig& cfg) {
    if (!cfg.cross_attention) return 0;
    const std::uint64_t dv = static_cast<std::uint64_t>(cfg.embed_dim);
    return patches_in_frame * 2 * 3 * dv * dv + patches_in_frame * patches_in_frame * 4 * dv;
}

std::uint64_t flops_prefill(std::uint64_t n_total, std::uint64_t n_recomputed, const LlmConfig& cfg) {
    if (n_recomputed > n_total) throw InvalidArgument("flops_prefill: recomputed positions exceed total");
    const std::uint64_t d = static_cast<std::uint64_t>(cfg.model_dim);
    const std::uint64_t per_layer = n_recomputed * (24 * d * d + 4 * d * n_total);
    return static_cast<std::uint64_t>(cfg.layers) * per_layer + 2 * n_recomputed * d * static_cast<std::uint64_t>(cfg.token_dim);
}

std::uint64_t flops_rope_correction(std::uint64_t n_reused, const LlmConfig& cfg) {
    return static_cast<std::uint64_t>(cfg.layers) * n_reused * 3 * static_cast<std::uint64_t>(cfg.model_dim);
}

WindowReport RunReport::totals() const {
    WindowReport t;
    t.window = static_cast<int>(windows.size());
    double drift_sum = 0.0, agree_sum = 0.0;
    int drift_n = 0;
    for (const auto& w : windows) {
        t.tokens_full += w.tokens_full;
        t.tokens_retained += w.tokens_retained;
        t.patches_full += w.patches_full;
        t.patches_retained += w.patches_retained;
        t.patches_encoded += w.patches_encoded;
        t.positions += w.positions;
        t.recomputed_positions += w.recomputed_positions;
        t.anchor_positions += w.anchor_positions;
        t.reused_positions += w.reused_positions;
        t.flops_vit += w.flops_vit;
        t.flops_prefill += w.flops_prefill;
        t.flops_rope += w.flops_rope;
        if (w.has_drift) {
            drift_sum += w.drift.mean_rel_l2;
            agree_sum += w.drift.readout_agreement;
            t.drift.max_rel_l2 = std::max(t.drift.max_rel_l2, w.drift.max_rel_l2);
            ++drift_n;
        }
    }
    if (!windows.empty()) {
        t.frame_begin = windows.front().frame_begin;
        t.frame_end = windows.back().frame_end;
    }
    t.has_drift = drift_n > 0;
    if (drift_n > 0) {
        t.drift.mean_rel_l2 = drift_sum / drift_n;
        t.drift.readout_agreement = agree_sum / drift_n;
    }
    return t;
}

void RunReport::merge(const RunReport& other) {
    frames += other.frames;
    decoded_frames += other.decoded_frames;
    raw_bytes += other.raw_bytes;
    bitstream_bytes += other.bitstream_bytes;
    transmitted_bytes += other.transmitted_bytes;
    windows.insert(windows.end(), other.windows.begin(), other.windows.end());
    ms_decode += other.ms_decode;
    ms_analyze += other.ms_analyze;
    ms_vit += other.ms_vit;
    ms_prefill += other.ms_prefill;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void put_window(std::ostringstream& os, const std::string& prefix, const WindowReport& w) {
    os << prefix << "frame_begin=" << w.frame_begin << '\n'
       << prefix << "frame_end=" << w.frame_end << '\n'
       << prefix << "tokens_full=" << w.tokens_full << '\n'
       << prefix << "tokens_retained=" << w.tokens_retained << '\n'
       << prefix << "patches_full=" << w.patches_full << '\n'
       << prefix << "patches_retained=" << w.patches_retained << '\n'
       << prefix << "patches_encoded=" << w.patches_encoded << '\n'
       << prefix << "positions=" << w.positions << '\n'
       << prefix << "recomputed_positions=" << w.recomputed_positions << '\n'
       << prefix << "anchor_positions=" << w.anchor_positions << '\n'
       << prefix << "reused_positions=" << w.reused_positions << '\n'
       << prefix << "flops_vit=" << w.flops_vit << '\n'
       << prefix << "flops_prefill=" << w.flops_prefill << '\n'
       << prefix << "flops_rope=" << w.flops_rope << '\n';
    if (w.has_drift) {
        os << prefix << "drift_mean=" << fmt_double(w.drift.mean_rel_l2) << '\n'
           << prefix << "drift_max=" << fmt_double(w.drift.max_rel_l2) << '\n'
           << prefix << "readout_agreement=" << fmt_double(w.drift.readout_agreement) << '\n';
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) throw InvalidArgument("report: bad integer for " + key + ": " + v);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw InvalidArgument("report: bad number for " + key + ": " + v);
    }
}

void set_window_field(WindowReport& w, const std::string& key, const std::string& v) {
    if (key == "frame_begin") w.frame_begin = static_cast<int>(to_u64(key, v));
    else if (key == "frame_end") w.frame_end = static_cast<int>(to_u64(key, v));
    else if (key == "tokens_full") w.tokens_full = to_u64(key, v);
    else if (key == "tokens_retained") w.tokens_retained = to_u64(key, v);
    else if (key == "patches_full") w.patches_full = to_u64(key, v);
    else if (key == "patches_retained") w.patches_retained = to_u64(key, v);
    else if (key == "patches_encoded") w.patches_encoded = to_u64(key, v);
    else if (key == "positions") w.positions = to_u64(key, v);
    else if (key == "recomputed_positions") w.recomputed_positions = to_u64(key, v);
    else if (key == "anchor_positions") w.anchor_positions = to_u64(key, v);
    else if (key == "reused_positions") w.reused_positions = to_u64(key, v);
    else if (key == "flops_vit") w.flops_vit = to_u64(key, v);
    else if (key == "flops_prefill") w.flops_prefill = to_u64(key, v);
    else if (key == "flops_rope") w.flops_rope = to_u64(key, v);
    else if (key == "drift_mean") { w.drift.mean_rel_l2 = to_double(key, v); w.has_drift = true; }
    else if (key == "drift_max") w.drift.max_rel_l2 = to_double(key, v);
    else if (key == "readout_agreement") w.drift.readout_agreement = to_double(key, v);
    else throw InvalidArgument("report: unknown window key " + key);
}

}  // namespace

std::string format_report(const RunReport& r, bool timings) {
    std::ostringstream os;
    const WindowReport t = r.totals();
    os << "# flops_vit = P*2*(p^2*dv + dv^2) + (P/g^2)*2*g^2*dv*dt\n"
       << "# flops_prefill = L*R*(24*d^2 + 4*d*N) + 2*R*d*dt ; flops_rope = L*U*3*d\n";
    os << "mode=" << r.mode << '\n'
       << "refresh_mode=" << r.refresh_mode << '\n'
       << "window_frames=" << r.window_frames << '\n'
       << "stride_frames=" << r.stride_frames << '\n'
       << "gop_size=" << r.gop_size << '\n'
       << "tau=" << fmt_double(r.tau) << '\n'
       << "alpha=" << fmt_double(r.alpha) << '\n'
       << "width=" << r.width << '\n'
       << "height=" << r.height << '\n'
       << "frames=" << r.frames << '\n'
       << "decoded_frames=" << r.decoded_frames << '\n'
       << "raw_bytes=" << r.raw_bytes << '\n'
       << "bitstream_bytes=" << r.bitstream_bytes << '\n'
       << "transmitted_bytes=" << r.transmitted_bytes << '\n'
       << "windows=" << r.windows.size() << '\n'
       << "redundancy_factor="
       << fmt_double(r.stride_frames > 0 ? static_cast<double>(r.window_frames) / r.stride_frames : 0.0) << '\n';
    os << "total.tokens_full=" << t.tokens_full << '\n'
       << "total.tokens_retained=" << t.tokens_retained << '\n'
       << "total.patches_full=" << t.patches_full << '\n'
       << "total.patches_retained=" << t.patches_retained << '\n'
       << "total.patches_encoded=" << t.patches_encoded << '\n'
       << "total.positions=" << t.positions << '\n'
       << "total.recomputed_positions=" << t.recomputed_positions << '\n'
       << "total.anchor_positions=" << t.anchor_positions << '\n'
       << "total.reused_positions=" << t.reused_positions << '\n'
       << "total.flops_vit=" << t.flops_vit << '\n'
       << "total.flops_prefill=" << t.flops_prefill << '\n'
       << "total.flops_rope=" << t.flops_rope << '\n'
       << "total.flops=" << (t.flops_vit + t.flops_prefill + t.flops_rope) << '\n';
    if (t.has_drift) {
        os << "total.drift_mean=" << fmt_double(t.drift.mean_rel_l2) << '\n'
           << "total.drift_max=" << fmt_double(t.drift.max_rel_l2) << '\n'
           << "total.readout_agreement=" << fmt_double(t.drift.readout_agreement) << '\n';
    }
    if (timings) {
        os << "ms_decode=" << fmt_double(r.ms_decode) << '\n'
           << "ms_analyze=" << fmt_double(r.ms_analyze) << '\n'
           << "ms_vit=" << fmt_double(r.ms_vit) << '\n'
           << "ms_prefill=" << fmt_double(r.ms_prefill) << '\n';
    }
    for (const auto& w : r.windows) put_window(os, "window." + std::to_string(w.window) + ".", w);
    return os.str();
}

RunReport parse_report(const std::string& text) {
    RunReport r;
    std::istringstream is(text);
    std::string line;
    std::map<int, WindowReport> windows;
    std::size_t declared_windows = 0;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument("report line " + std::to_string(lineno) + ": missing '='");
        const std::string key = line.substr(0, eq), v = line.substr(eq + 1);
        if (key.rfind("window.", 0) == 0) {
            const auto dot = key.find('.', 7);
            if (dot == std::string::npos) throw InvalidArgument("report line " + std::to_string(lineno) + ": bad window key");
            const int k = static_cast<int>(to_u64(key, key.substr(7, dot - 7)));
            auto& w = windows[k];
            w.window = k;
            set_window_field(w, key.substr(dot + 1), v);
            continue;
        }
        if (key.rfind("total.", 0) == 0 || key.rfind("ms_", 0) == 0 || key == "redundancy_factor") {
            // derived values are recomputed from the windows
            if (key == "ms_decode") r.ms_decode = to_double(key, v);
            else if (key == "ms_analyze") r.ms_analyze = to_double(key, v);
            else if (key == "ms_vit") r.ms_vit = to_double(key, v);
            else if (key == "ms_prefill") r.ms_prefill = to_double(key, v);
            continue;
        }
        if (key == "mode") r.mode = v;
        else if (key == "refresh_mode") r.refresh_mode = v;
        else if (key == "window_frames") r.window_frames = static_cast<int>(to_u64(key, v));
        else if (key == "stride_frames") r.stride_frames = static_cast<int>(to_u64(key, v));
        else if (key == "gop_size") r.gop_size = static_cast<int>(to_u64(key, v));
        else if (key == "tau") r.tau = to_double(key, v);
        else if (key == "alpha") r.alpha = to_double(key, v);
        else if (key == "width") r.width = static_cast<int>(to_u64(key, v));
        else if (key == "height") r.height = static_cast<int>(to_u64(key, v));
        else if (key == "frames") r.frames = to_u64(key, v);
        else if (key == "decoded_frames") r.decoded_frames = to_u64(key, v);
        else if (key == "raw_bytes") r.raw_bytes = to_u64(key, v);
        else if (key == "bitstream_bytes") r.bitstream_bytes = to_u64(key, v);
        else if (key == "transmitted_bytes") r.transmitted_bytes = to_u64(key, v);
        else if (key == "windows") declared_windows = to_u64(key, v);
        else throw InvalidArgument("report line " + std::to_string(lineno) + ": unknown key " + key);
    }
    for (auto& [k, w] : windows) r.windows.push_back(w);
    if (r.windows.size() != declared_windows) {
        throw InvalidArgument("report: declares " + std::to_string(declared_windows) + " windows but lists " +
                              std::to_string(r.windows.size()));
    }
    return r;
}

std::string format_window_csv(const RunReport& r) {
    std::ostringstream os;
    os << "window,frame_begin,frame_end,tokens_full,tokens_retained,patches_full,patches_retained,patches_encoded,"
          "positions,recomputed_positions,anchor_positions,reused_positions,flops_vit,flops_prefill,flops_rope,"
          "drift_mean,drift_max,readout_agreement\n";
    for (const auto& w : r.windows) {
        os << w.window << ',' << w.frame_begin << ',' << w.frame_end << ',' << w.tokens_full << ',' << w.tokens_retained
           << ',' << w.patches_full << ',' << w.patches_retained << ',' << w.patches_encoded << ',' << w.positions << ','
           << w.recomputed_positions << ',' << w.anchor_positions << ',' << w.reused_positions << ',' << w.flops_vit
           << ',' << w.flops_prefill << ',' << w.flops_rope << ',';
        if (w.has_drift) {
            os << fmt_double(w.drift.mean_rel_l2) << ',' << fmt_double(w.drift.max_rel_l2) << ','
               << fmt_double(w.drift.readout_agreement);
        } else {
            os << ",,";
        }
        os << '\n';
    }
    return os.str();
}

namespace {

double reduction(double baseline, double optimized) {
    if (baseline <= 0.0) return 0.0;
    return std::clamp(1.0 - optimized / baseline, 0.0, 1.0);
}

}  // namespace

Savings savings_summary(const RunReport& full, const RunReport& optimized) {
    if (full.window_frames != optimized.window_frames || full.stride_frames != optimized.stride_frames ||
        full.frames != optimized.frames || full.windows.size() != optimized.windows.size() ||
        full.width != optimized.width || full.height != optimized.height) {
        throw InvalidArgument("savings_summary: reports describe different streams or window configurations");
    }
    const WindowReport a = full.totals(), b = optimized.totals();
    Savings s;
    s.token_reduction = reduction(static_cast<double>(a.tokens_retained), static_cast<double>(b.tokens_retained));
    s.vit_flop_reduction = reduction(static_cast<double>(a.flops_vit), static_cast<double>(b.flops_vit));
    s.prefill_flop_reduction = reduction(static_cast<double>(a.flops_prefill + a.flops_rope),
                                         static_cast<double>(b.flops_prefill + b.flops_rope));
    s.flop_reduction = reduction(static_cast<double>(a.flops_vit + a.flops_prefill + a.flops_rope),
                                 static_cast<double>(b.flops_vit + b.flops_prefill + b.flops_rope));
    s.byte_reduction = reduction(static_cast<double>(full.transmitted_bytes), static_cast<double>(optimized.transmitted_bytes));
    s.redundancy_factor = full.stride_frames > 0 ? static_cast<double>(full.window_frames) / full.stride_frames : 0.0;
    return s;
}

std::string format_savings(const Savings& s) {
    std::ostringstream os;
    os << "token_reduction=" << fmt_double(s.token_reduction) << '\n'
       << "flop_reduction=" << fmt_double(s.flop_reduction) << '\n'
       << "vit_flop_reduction=" << fmt_double(s.vit_flop_reduction) << '\n'
       << "prefill_flop_reduction=" << fmt_double(s.prefill_flop_reduction) << '\n'
       << "byte_reduction=" << fmt_double(s.byte_reduction) << '\n'
       << "redundancy_factor=" << fmt_double(s.redundancy_factor) << '\n';
    return os.str();
}

std::vector<CdfRow> similar_patch_cdf(const std::vector<Bitstream>& videos, const std::vector<double>& thresholds,
                                      const CdfParams& params) {
    if (videos.empty()) throw InvalidArgument("similar_patch_cdf: no videos");
    // Scores are independent of tau, so compute them once per P-frame.
    std::vector<std::vector<double>> scores;
    for (const auto& bs : videos) {
        const PatchGridSpec spec = PatchGridSpec::for_frame(bs.width, bs.height, params.patch_size, params.group_size);
        Decoder dec(bs);
        while (auto f = dec.next()) {
            if (f->type != FrameType::P) continue;
            const ResidualPlane* res = params.alpha > 0 ? &*f->residual : nullptr;
            scores.push_back(build_motion_mask(resample_to_patches(*f->motion, res, spec), params.alpha).score);
        }
    }
    std::vector<CdfRow> rows;
    for (double tau : thresholds) {
        std::vector<double> ratios;
        ratios.reserve(scores.size());
        for (const auto& s : scores) {
            const auto similar = std::count_if(s.begin(), s.end(), [tau](double m) { return m < tau; });
            ratios.push_back(static_cast<double>(similar) / static_cast<double>(s.size()));
        }
        std::sort(ratios.begin(), ratios.end());
        for (int pct : params.percentiles) {
            double v = 0.0;
            if (!ratios.empty()) {
                const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(ratios.size())));
                v = ratios[std::min(ratios.size() - 1, rank == 0 ? 0 : rank - 1)];
            }
            rows.push_back({tau, pct, v});
        }
    }
    return rows;
}

std::string format_cdf(const std::vector<CdfRow>& rows) {
    std::ostringstream os;
    os << "tau,percentile,similar_ratio\n";
    for (const auto& r : rows) os << fmt_double(r.tau) << ',' << r.percentile << ',' << fmt_double(r.ratio) << '\n';
    return os.str();
}

}  // namespace cvlm
