#pragma once

// Token, compute, byte and drift accounting.
//
// FLOPs are counted analytically as 2 x multiply-adds:
//
//   vit(P)        = P * 2 (p^2 d_v + d_v^2) + (P / g^2) * 2 g^2 d_v d_t
//   prefill(N, R) = L * R * (24 d^2 + 4 d N) + 2 R d d_t
//   rope(U)       = L * U * 3 d
//
// P retained patches, g group side, p patch side, d_v patch embedding width,
// d_t token width; N sequence length, R recomputed positions, d model width,
// L layers, U reused positions. The prefill term charges every recomputed
// query against all N keys (causality ignored) and per layer 4 d^2 for
// Q/K/V/O plus 8 d^2 for the 4x MLP.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cvlm/codec.hpp"
#include "cvlm/kvc.hpp"
#include "cvlm/motion_analyzer.hpp"
#include "cvlm/vision_encoder.hpp"

namespace cvlm {

std::uint64_t flops_vit(std::uint64_t retained_patches, const EncoderConfig& cfg);
/// Extra cost of the optional cross-patch attention layer for one frame.
std::uint64_t flops_vit_cross_attention(std::uint64_t patches_in_frame, const EncoderConfig& cfg);
std::uint64_t flops_prefill(std::uint64_t n_total, std::uint64_t n_recomputed, const LlmConfig& cfg);
std::uint64_t flops_rope_correction(std::uint64_t n_reused, const LlmConfig& cfg);

struct WindowReport {
    int window = 0;
    int frame_begin = 0;
    int frame_end = 0;
    std::uint64_t tokens_full = 0;      // visual tokens with no pruning
    std::uint64_t tokens_retained = 0;  // visual tokens in the sequence
    std::uint64_t patches_full = 0;
    std::uint64_t patches_retained = 0;  // patches kept by the mask
    std::uint64_t patches_encoded = 0;   // patches that actually went through the encoder
    std::uint64_t positions = 0;         // sequence length incl. prompt
    std::uint64_t recomputed_positions = 0;
    std::uint64_t anchor_positions = 0;
    std::uint64_t reused_positions = 0;
    std::uint64_t flops_vit = 0;
    std::uint64_t flops_prefill = 0;
    std::uint64_t flops_rope = 0;
    bool has_drift = false;
    DriftStats drift;
};

struct RunReport {
    // configuration echo
    std::string mode;
    std::string refresh_mode;
    int window_frames = 0;
    int stride_frames = 0;
    int gop_size = 0;
    double tau = 0.0;
    double alpha = 0.0;
    int width = 0;
    int height = 0;

    std::uint64_t frames = 0;          // sampled frames ingested
    std::uint64_t decoded_frames = 0;  // frames decoded (before decimation)
    std::uint64_t raw_bytes = 0;
    std::uint64_t bitstream_bytes = 0;
    std::uint64_t transmitted_bytes = 0;  // raw_bytes in mode full, bitstream_bytes otherwise

    std::vector<WindowReport> windows;

    // wall-clock, milliseconds; informational only
    double ms_decode = 0.0;
    double ms_analyze = 0.0;
    double ms_vit = 0.0;
    double ms_prefill = 0.0;

    WindowReport totals() const;
    /// Appends `other`'s windows and adds its counters.
    void merge(const RunReport& other);
};

/// `key=value` lines: configuration, aggregate counters, then `window.<k>.<key>=value`.
/// Wall-clock `ms_*` lines are written only when `timings` is set, so reports of
/// identical runs compare equal byte for byte.
std::string format_report(const RunReport& r, bool timings = false);
RunReport parse_report(const std::string& text);
/// One CSV row per window, with a header line.
std::string format_window_csv(const RunReport& r);

struct Savings {
    double token_reduction = 0.0;
    double flop_reduction = 0.0;
    double vit_flop_reduction = 0.0;
    double prefill_flop_reduction = 0.0;
    double byte_reduction = 0.0;
    double redundancy_factor = 0.0;
};

/// Reductions of `optimized` relative to `full`, each clamped to [0, 1].
Savings savings_summary(const RunReport& full, const RunReport& optimized);
std::string format_savings(const Savings& s);

struct CdfRow {
    double tau = 0.0;
    int percentile = 0;
    double ratio = 0.0;
};

struct CdfParams {
    int patch_size = 8;
    int group_size = 2;
    double alpha = 0.0;
    std::vector<int> percentiles{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
};

/// Per P-frame share of patches with score < tau, summarized as an empirical CDF (nearest rank).
std::vector<CdfRow> similar_patch_cdf(const std::vector<Bitstream>& videos, const std::vector<double>& thresholds,
                                      const CdfParams& params);
std::string format_cdf(const std::vector<CdfRow>& rows);

}  // namespace cvlm
