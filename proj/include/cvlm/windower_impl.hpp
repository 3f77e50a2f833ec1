#pragma once

#include <algorithm>
#include <string>

#include "cvlm/error.hpp"

namespace cvlm {

template <class T>
std::vector<WindowView<T>> FrameRing<T>::push(RingEntry<T> entry) {
    if (finished_) throw InvalidArgument("FrameRing: push after finish");
    if (entry.index != next_index_) {
        throw InvalidArgument("FrameRing: out-of-order push, expected frame " + std::to_string(next_index_) +
                              ", got " + std::to_string(entry.index));
    }
    ++next_index_;
    ++ingested_;
    ring_.push_back(std::make_shared<const RingEntry<T>>(std::move(entry)));
    peak_ = std::max(peak_, ring_.size());

    std::vector<WindowView<T>> out;
    for (;;) {
        const FrameRange r = window_bounds(next_window_, cfg_);
        if (r.end > next_index_) break;
        out.push_back(make_view(next_window_, r));
        ++next_window_;
    }
    evict();
    return out;
}

template <class T>
std::vector<WindowView<T>> FrameRing<T>::finish() {
    finished_ = true;
    std::vector<WindowView<T>> out;
    if (!allow_partial_) return out;
    const FrameRange r = window_bounds(next_window_, cfg_);
    // Only when the tail holds frames no emitted window has covered.
    const int covered = next_window_ == 0 ? 0 : window_bounds(next_window_ - 1, cfg_).end;
    if (r.begin < next_index_ && next_index_ > covered) {
        out.push_back(make_view(next_window_, {r.begin, next_index_}));
        ++next_window_;
    }
    return out;
}

template <class T>
WindowView<T> FrameRing<T>::make_view(int k, FrameRange r) const {
    WindowView<T> v;
    v.index = k;
    v.range = r;
    v.frames.reserve(static_cast<std::size_t>(r.size()));
    for (int f = r.begin; f < r.end; ++f) v.frames.push_back(ring_.at(static_cast<std::size_t>(f - ring_first_)));
    return v;
}

template <class T>
void FrameRing<T>::evict() {
    // Frames before the next window's start are never referenced by the ring again.
    const int keep_from = std::min(window_bounds(next_window_, cfg_).begin, next_index_);
    while (ring_first_ < keep_from && !ring_.empty()) {
        ring_.pop_front();
        ++ring_first_;
    }
}

}  // namespace cvlm
