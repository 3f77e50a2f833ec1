#pragma once

// Turns block-level codec metadata into patch-level keep/drop decisions.
//
//   score(i)   = V(i) + alpha * R(i)
//   dynamic(i) = score(i) >= tau
//
// V is the largest motion-vector magnitude of any block touching patch i,
// R the mean |residual| inside the patch scaled to [0, 1]. Per-frame
// detections are OR-ed into a mask that lives until the next I-frame, and the
// mask is widened to whole spatial groups before encoding.

#include <cstdint>
#include <string>
#include <vector>

#include "cvlm/codec.hpp"

namespace cvlm {

struct PatchGridSpec {
    int patch_size = 8;
    int grid_h = 0;
    int grid_w = 0;
    int group_size = 2;

    static PatchGridSpec for_frame(int width, int height, int patch_size, int group_size);

    void validate() const;
    int patch_count() const { return grid_h * grid_w; }
    int groups_h() const { return grid_h / group_size; }
    int groups_w() const { return grid_w / group_size; }
    int group_count() const { return groups_h() * groups_w(); }
    int frame_width() const { return grid_w * patch_size; }
    int frame_height() const { return grid_h * patch_size; }

    bool operator==(const PatchGridSpec&) const = default;
};

struct PatchMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> bits;

    PatchMask() = default;
    PatchMask(int r, int c, bool fill = false)
        : rows(r), cols(c), bits(static_cast<std::size_t>(r) * c, fill ? 1 : 0) {}

    bool at(int r, int c) const { return bits[static_cast<std::size_t>(r) * cols + c] != 0; }
    void set(int r, int c, bool v = true) { bits[static_cast<std::size_t>(r) * cols + c] = v ? 1 : 0; }
    std::size_t count() const;
    /// True when every set bit here is also set in `other`.
    bool subset_of(const PatchMask& other) const;

    bool operator==(const PatchMask&) const = default;
};

struct PatchSignals {
    int rows = 0;
    int cols = 0;
    std::vector<double> motion;    // V(i), pixels
    std::vector<double> residual;  // R(i), in [0, 1]
};

PatchSignals resample_to_patches(const MotionField& field, const ResidualPlane* residual, const PatchGridSpec& spec);

struct MotionMask {
    int rows = 0;
    int cols = 0;
    std::vector<double> score;
};

MotionMask build_motion_mask(const PatchSignals& signals, double alpha);

PatchMask threshold_mask(const MotionMask& mask, double tau);

/// Active patches of the current GOP. `epoch` counts I-frames seen (-1 before the first).
/// After an I-frame every patch is active for that frame only; the union over the
/// following P-frames starts empty.
struct DynamicPatchMask {
    PatchMask active;
    int epoch = -1;
    bool intra = false;
};

DynamicPatchMask accumulate_gop(const DynamicPatchMask& state, const PatchMask& frame_dynamic, FrameType type,
                                const PatchGridSpec& spec);

struct GroupSelection {
    int groups_h = 0;
    int groups_w = 0;
    std::vector<std::uint8_t> retain;  // row-major over groups
    PatchMask retained;                // patch-level, always a union of whole groups

    std::size_t retained_groups() const;
};

GroupSelection expand_group_complete(const PatchMask& active, const PatchGridSpec& spec);

bool is_group_complete(const PatchMask& mask, const PatchGridSpec& spec);

struct AnalyzerParams {
    double tau = 0.25;
    double alpha = 0.0;
};

/// Per-frame outcome of the analyzer.
struct FrameAnalysis {
    PatchMask dynamic;  // this frame's own detections (all set on I-frames)
    DynamicPatchMask accumulated;
    GroupSelection selection;
};

/// Stateful per-stream analyzer.
class MotionAnalyzer {
public:
    MotionAnalyzer(PatchGridSpec spec, AnalyzerParams params);

    FrameAnalysis analyze(FrameType type, const MotionField* motion, const ResidualPlane* residual);
    FrameAnalysis analyze(const DecodedFrame& frame);

    const PatchGridSpec& spec() const { return spec_; }
    const DynamicPatchMask& state() const { return state_; }

private:
    PatchGridSpec spec_;
    AnalyzerParams params_;
    DynamicPatchMask state_;
};

/// Debug dump line: "<frame> <epoch> <grid rows of 0/1 separated by '/'>".
std::string format_mask_line(int frame_index, const DynamicPatchMask& mask);

}  // namespace cvlm
