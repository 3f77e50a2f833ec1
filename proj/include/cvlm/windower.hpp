#pragma once

// Sliding windows over a single-pass decoded stream. Frames are decoded and
// ingested once; windows hold shared handles into the ring, never copies.

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "cvlm/codec.hpp"

namespace cvlm {

struct WindowConfig {
    int window_frames = 80;
    int stride_frames = 16;
    int fps = 2;

    void validate() const;
};

/// Half-open frame interval [begin, end).
struct FrameRange {
    int begin = 0;
    int end = 0;

    int size() const { return end > begin ? end - begin : 0; }
    bool empty() const { return end <= begin; }
    bool contains(int f) const { return f >= begin && f < end; }
    bool operator==(const FrameRange&) const = default;
};

FrameRange window_bounds(int k, const WindowConfig& cfg);

/// w / s: how many times a naive sliding window re-processes each frame.
double redundancy_factor(const WindowConfig& cfg);

/// A decoded frame in sampled-frame units plus whatever per-frame metadata
/// later stages attach. `T` is the attached payload.
template <class T>
struct RingEntry {
    int index = 0;  // sampled-frame index
    DecodedFrame decoded;
    T payload{};
};

template <class T>
struct WindowView {
    int index = 0;
    FrameRange range;
    std::vector<std::shared_ptr<const RingEntry<T>>> frames;

    FrameType frame_type(int frame) const { return at(frame).decoded.type; }
    const RingEntry<T>& at(int frame) const { return *frames.at(static_cast<std::size_t>(frame - range.begin)); }
};

struct OverlapSplit {
    FrameRange overlap;
    FrameRange fresh;
};

/// Overlap and newly-arrived ranges between consecutive windows.
OverlapSplit overlap_split(int prev_index, FrameRange prev, int cur_index, FrameRange cur);

template <class T>
OverlapSplit overlap_split(const WindowView<T>& prev, const WindowView<T>& cur) {
    return overlap_split(prev.index, prev.range, cur.index, cur.range);
}

/// Periodic decimation: keeps every ceil(source_fps / target_fps)-th frame.
class Decimator {
public:
    Decimator(int source_fps, int target_fps);

    /// Returns true when the frame at `source_index` is kept.
    bool keep(int source_index) const { return source_index % step_ == 0; }
    int step() const { return step_; }

private:
    int step_ = 1;
};

/// Bounded single-producer ring that emits a window as soon as its last frame arrives.
template <class T>
class FrameRing {
public:
    explicit FrameRing(WindowConfig cfg, bool allow_partial_tail = false)
        : cfg_(cfg), allow_partial_(allow_partial_tail) {
        cfg_.validate();
    }

    /// Frames must arrive with consecutive sampled indices starting at 0.
    std::vector<WindowView<T>> push(RingEntry<T> entry);

    /// End of stream. Emits a truncated trailing window only in batch mode.
    std::vector<WindowView<T>> finish();

    std::int64_t ingested() const { return ingested_; }
    std::size_t resident() const { return ring_.size(); }
    std::size_t peak_resident() const { return peak_; }
    int windows_emitted() const { return next_window_; }

private:
    WindowView<T> make_view(int k, FrameRange r) const;
    void evict();

    WindowConfig cfg_;
    bool allow_partial_;
    std::deque<std::shared_ptr<const RingEntry<T>>> ring_;
    int ring_first_ = 0;  // sampled index of ring_.front()
    int next_index_ = 0;
    int next_window_ = 0;
    std::int64_t ingested_ = 0;
    std::size_t peak_ = 0;
    bool finished_ = false;
};

}  // namespace cvlm

#include "cvlm/windower_impl.hpp"
