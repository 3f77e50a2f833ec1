#include "cvlm/windower.hpp"

#include <algorithm>
#include <string>

#include "cvlm/error.hpp"

namespace cvlm {

void WindowConfig::validate() const {
    if (stride_frames < 1 || stride_frames > window_frames) {
        throw InvalidArgument("window config requires 1 <= stride (" + std::to_string(stride_frames) +
                              ") <= window (" + std::to_string(window_frames) + ")");
    }
    if (fps < 1) throw InvalidArgument("window config requires fps >= 1");
}

FrameRange window_bounds(int k, const WindowConfig& cfg) {
    if (k < 0) throw InvalidArgument("window index must be >= 0");
    const int begin = k * cfg.stride_frames;
    return {begin, begin + cfg.window_frames};
}

double redundancy_factor(const WindowConfig& cfg) {
    cfg.validate();
    return static_cast<double>(cfg.window_frames) / cfg.stride_frames;
}

OverlapSplit overlap_split(int prev_index, FrameRange prev, int cur_index, FrameRange cur) {
    if (cur_index != prev_index + 1) {
        throw InvalidArgument("overlap_split: windows " + std::to_string(prev_index) + " and " +
                              std::to_string(cur_index) + " are not consecutive");
    }
    if (cur.begin < prev.begin) throw InvalidArgument("overlap_split: current window starts before previous");
    const int mid = std::max(cur.begin, std::min(prev.end, cur.end));
    return {{cur.begin, mid}, {mid, cur.end}};
}

Decimator::Decimator(int source_fps, int target_fps) {
    if (source_fps < 1 || target_fps < 1) throw InvalidArgument("decimator: fps must be >= 1");
    step_ = (source_fps + target_fps - 1) / target_fps;
}

}  // namespace cvlm
