#include "cvlm/motion_analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "cvlm/error.hpp"

namespace cvlm {

PatchGridSpec PatchGridSpec::for_frame(int width, int height, int patch_size, int group_size) {
    if (patch_size <= 0 || width % patch_size != 0 || height % patch_size != 0) {
        throw InvalidArgument("patch size " + std::to_string(patch_size) + " does not tile " + std::to_string(width) +
                              "x" + std::to_string(height));
    }
    PatchGridSpec s{patch_size, height / patch_size, width / patch_size, group_size};
    s.validate();
    return s;
}

void PatchGridSpec::validate() const {
    if (patch_size <= 0 || grid_h <= 0 || grid_w <= 0) throw InvalidArgument("patch grid must be nonempty");
    if (group_size <= 0 || grid_h % group_size != 0 || grid_w % group_size != 0) {
        throw InvalidArgument("group size " + std::to_string(group_size) + " does not divide patch grid " +
                              std::to_string(grid_h) + "x" + std::to_string(grid_w));
    }
}

std::size_t PatchMask::count() const {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

bool PatchMask::subset_of(const PatchMask& other) const {
    if (rows != other.rows || cols != other.cols) return false;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i] && !other.bits[i]) return false;
    return true;
}

PatchSignals resample_to_patches(const MotionField& field, const ResidualPlane* residual, const PatchGridSpec& spec) {
    spec.validate();
    const int bs = field.block_size;
    // The coded area is the frame rounded up to whole blocks.
    const auto covers = [bs](int coded, int frame) { return coded >= frame && coded < frame + bs; };
    if (bs <= 0 || !covers(field.blocks_w * bs, spec.frame_width()) ||
        !covers(field.blocks_h * bs, spec.frame_height())) {
        throw InvalidArgument("resample_to_patches: motion field and patch grid describe different frame sizes");
    }
    if (residual && (residual->width < spec.frame_width() || residual->height < spec.frame_height())) {
        throw InvalidArgument("resample_to_patches: residual plane smaller than the patch grid");
    }

    PatchSignals out{spec.grid_h, spec.grid_w, std::vector<double>(spec.patch_count(), 0.0),
                     std::vector<double>(spec.patch_count(), 0.0)};
    const int p = spec.patch_size;
    for (int r = 0; r < spec.grid_h; ++r) {
        for (int c = 0; c < spec.grid_w; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * spec.grid_w + c;
            // Blocks intersecting the patch rectangle.
            const int bx0 = (c * p) / bs, bx1 = ((c + 1) * p - 1) / bs;
            const int by0 = (r * p) / bs, by1 = ((r + 1) * p - 1) / bs;
            double v = 0.0;
            for (int by = by0; by <= by1; ++by)
                for (int bx = bx0; bx <= bx1; ++bx) v = std::max(v, motion_magnitude(field.at(bx, by)));
            out.motion[i] = v;

            if (residual) {
                std::int64_t sum = 0;
                for (int y = r * p; y < (r + 1) * p; ++y)
                    for (int x = c * p; x < (c + 1) * p; ++x) sum += std::abs(int(residual->at(x, y)));
                out.residual[i] = static_cast<double>(sum) / (static_cast<double>(p) * p * 255.0);
            }
        }
    }
    return out;
}

MotionMask build_motion_mask(const PatchSignals& signals, double alpha) {
    if (alpha < 0) throw InvalidArgument("alpha must be >= 0");
    if (signals.motion.size() != signals.residual.size() ||
        signals.motion.size() != static_cast<std::size_t>(signals.rows) * signals.cols) {
        throw InvalidArgument("build_motion_mask: V and R shapes differ");
    }
    MotionMask m{signals.rows, signals.cols, std::vector<double>(signals.motion.size())};
    for (std::size_t i = 0; i < m.score.size(); ++i) m.score[i] = signals.motion[i] + alpha * signals.residual[i];
    return m;
}

PatchMask threshold_mask(const MotionMask& mask, double tau) {
    if (!(tau >= 0)) throw InvalidArgument("tau must be >= 0");
    PatchMask out(mask.rows, mask.cols);
    for (std::size_t i = 0; i < mask.score.size(); ++i) out.bits[i] = mask.score[i] >= tau ? 1 : 0;
    return out;
}

DynamicPatchMask accumulate_gop(const DynamicPatchMask& state, const PatchMask& frame_dynamic, FrameType type,
                                const PatchGridSpec& spec) {
    DynamicPatchMask next;
    if (type == FrameType::I) {
        next.active = PatchMask(spec.grid_h, spec.grid_w, true);
        next.epoch = state.epoch + 1;
        next.intra = true;
        return next;
    }
    if (frame_dynamic.rows != spec.grid_h || frame_dynamic.cols != spec.grid_w) {
        throw InvalidArgument("accumulate_gop: detection mask shape differs from patch grid");
    }
    next.epoch = state.epoch;
    next.active = state.active.bits.empty() || state.intra ? PatchMask(spec.grid_h, spec.grid_w) : state.active;
    for (std::size_t i = 0; i < next.active.bits.size(); ++i) next.active.bits[i] |= frame_dynamic.bits[i];
    return next;
}

std::size_t GroupSelection::retained_groups() const {
    return static_cast<std::size_t>(std::count_if(retain.begin(), retain.end(), [](auto b) { return b != 0; }));
}

GroupSelection expand_group_complete(const PatchMask& active, const PatchGridSpec& spec) {
    spec.validate();
    if (active.rows != spec.grid_h || active.cols != spec.grid_w) {
        throw InvalidArgument("expand_group_complete: mask shape differs from patch grid");
    }
    const int g = spec.group_size;
    GroupSelection sel{spec.groups_h(), spec.groups_w(), std::vector<std::uint8_t>(spec.group_count(), 0),
                       PatchMask(spec.grid_h, spec.grid_w)};
    for (int gr = 0; gr < sel.groups_h; ++gr) {
        for (int gc = 0; gc < sel.groups_w; ++gc) {
            bool any = false;
            for (int r = gr * g; r < (gr + 1) * g && !any; ++r)
                for (int c = gc * g; c < (gc + 1) * g; ++c) any = any || active.at(r, c);
            if (!any) continue;
            sel.retain[static_cast<std::size_t>(gr) * sel.groups_w + gc] = 1;
            for (int r = gr * g; r < (gr + 1) * g; ++r)
                for (int c = gc * g; c < (gc + 1) * g; ++c) sel.retained.set(r, c);
        }
    }
    return sel;
}

bool is_group_complete(const PatchMask& mask, const PatchGridSpec& spec) {
    if (mask.rows != spec.grid_h || mask.cols != spec.grid_w) return false;
    const int g = spec.group_size;
    for (int gr = 0; gr < spec.groups_h(); ++gr) {
        for (int gc = 0; gc < spec.groups_w(); ++gc) {
            const bool first = mask.at(gr * g, gc * g);
            for (int r = gr * g; r < (gr + 1) * g; ++r)
                for (int c = gc * g; c < (gc + 1) * g; ++c)
                    if (mask.at(r, c) != first) return false;
        }
    }
    return true;
}

MotionAnalyzer::MotionAnalyzer(PatchGridSpec spec, AnalyzerParams params) : spec_(spec), params_(params) {
    spec_.validate();
    if (!(params_.tau >= 0) || params_.alpha < 0) throw InvalidArgument("analyzer requires tau >= 0 and alpha >= 0");
}

FrameAnalysis MotionAnalyzer::analyze(FrameType type, const MotionField* motion, const ResidualPlane* residual) {
    FrameAnalysis out;
    if (type == FrameType::I) {
        out.dynamic = PatchMask(spec_.grid_h, spec_.grid_w, true);
    } else {
        if (!motion) throw InvalidArgument("analyzer: P-frame without motion metadata");
        // Residuals only matter when they are weighted in.
        const ResidualPlane* r = params_.alpha > 0 ? residual : nullptr;
        out.dynamic = threshold_mask(build_motion_mask(resample_to_patches(*motion, r, spec_), params_.alpha),
                                     params_.tau);
    }
    state_ = accumulate_gop(state_, out.dynamic, type, spec_);
    out.accumulated = state_;
    out.selection = expand_group_complete(state_.active, spec_);
    return out;
}

FrameAnalysis MotionAnalyzer::analyze(const DecodedFrame& frame) {
    return analyze(frame.type, frame.motion ? &*frame.motion : nullptr,
                   frame.residual ? &*frame.residual : nullptr);
}

std::string format_mask_line(int frame_index, const DynamicPatchMask& mask) {
    std::string line = std::to_string(frame_index) + " " + std::to_string(mask.epoch) + " ";
    for (int r = 0; r < mask.active.rows; ++r) {
        if (r) line += '/';
        for (int c = 0; c < mask.active.cols; ++c) line += mask.active.at(r, c) ? '1' : '0';
    }
    return line;
}

}  // namespace cvlm
