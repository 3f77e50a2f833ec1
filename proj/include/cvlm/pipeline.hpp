#pragma once

// End-to-end stream processing: decode once -> sliding windows -> motion
// analysis -> pruned patch encoding -> (selective) prefill, with accounting.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvlm/codec.hpp"
#include "cvlm/kvc.hpp"
#include "cvlm/metrics.hpp"
#include "cvlm/vision_encoder.hpp"
#include "cvlm/windower.hpp"

namespace cvlm {

/// full: no pruning, full prefill. prune_only: pruning, full prefill.
/// kvc_only: no pruning, selective refresh. full_opt: both.
enum class PipelineMode { full, prune_only, kvc_only, full_opt };

const char* to_string(PipelineMode m);
PipelineMode parse_pipeline_mode(const std::string& s);

struct PipelineConfig {
    WindowConfig window{80, 16, 2};
    int target_fps = 0;  // 0 keeps every decoded frame
    int patch_size = 8;
    int group_size = 2;
    double tau = 0.25;
    double alpha = 0.0;
    CodecParams codec{16, 8, 7};
    EncoderConfig encoder;
    LlmConfig llm;
    PipelineMode mode = PipelineMode::full_opt;
    std::optional<RefreshMode> refresh_override;
    bool measure_drift = true;
    bool allow_partial_tail = false;
    bool keep_hidden = false;  // retain each window's final hidden states in the result
    bool keep_masks = false;   // retain the per-frame mask dump lines

    bool prunes() const { return mode == PipelineMode::prune_only || mode == PipelineMode::full_opt; }
    RefreshMode refresh() const;
    /// Threshold in effect: 0 (keep everything) when the mode does not prune.
    double effective_tau() const { return prunes() ? tau : 0.0; }

    /// Cross-field checks against the stream's frame size.
    void validate(int width, int height) const;
};

struct PipelineResult {
    RunReport report;
    std::vector<Matrix> hidden;           // per window, when keep_hidden
    std::vector<std::string> mask_lines;  // per sampled frame, when keep_masks
};

PipelineResult run_pipeline(const Bitstream& bitstream, const PipelineConfig& cfg);
/// Encodes with cfg.codec first, then runs on the bitstream.
PipelineResult run_pipeline(const RawVideo& video, const PipelineConfig& cfg);

}  // namespace cvlm
