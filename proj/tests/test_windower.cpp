#include <set>

#include "doctest.h"
#include "cvlm/error.hpp"
#include "cvlm/windower.hpp"

using namespace cvlm;

namespace {

RingEntry<int> entry(int i) {
    RingEntry<int> e;
    e.index = i;
    e.decoded.index = i;
    e.decoded.type = i % 4 == 0 ? FrameType::I : FrameType::P;
    e.payload = i * 10;
    return e;
}

std::vector<WindowView<int>> drive(FrameRing<int>& ring, int n) {
    std::vector<WindowView<int>> out;
    for (int i = 0; i < n; ++i)
        for (auto& w : ring.push(entry(i))) out.push_back(std::move(w));
    for (auto& w : ring.finish()) out.push_back(std::move(w));
    return out;
}

}  // namespace

TEST_CASE("window bounds") {
    const WindowConfig defaults{80, 16, 2};
    CHECK(window_bounds(0, defaults) == FrameRange{0, 80});
    CHECK(window_bounds(1, defaults) == FrameRange{16, 96});
    CHECK(window_bounds(3, WindowConfig{12, 4, 2}) == FrameRange{12, 24});
    CHECK_THROWS_AS(window_bounds(-1, defaults), InvalidArgument);
}

TEST_CASE("redundancy factor") {
    CHECK(redundancy_factor({80, 16, 2}) == 5.0);
    CHECK(redundancy_factor({8, 8, 2}) == 1.0);
    CHECK(redundancy_factor({12, 4, 2}) == 3.0);
    CHECK_THROWS_AS(redundancy_factor({8, 0, 2}), InvalidArgument);
    CHECK_THROWS_AS(redundancy_factor({8, 9, 2}), InvalidArgument);
}

TEST_CASE("overlap split") {
    const WindowConfig c{12, 4, 2};
    const auto s = overlap_split(0, window_bounds(0, c), 1, window_bounds(1, c));
    CHECK(s.overlap == FrameRange{4, 12});
    CHECK(s.fresh == FrameRange{12, 16});
    const WindowConfig defaults{80, 16, 2};
    CHECK(overlap_split(0, window_bounds(0, defaults), 1, window_bounds(1, defaults)).overlap.size() == 64);
    CHECK_THROWS_AS(overlap_split(0, window_bounds(0, c), 2, window_bounds(2, c)), InvalidArgument);
    // stride == window: no overlap
    const WindowConfig tiling{8, 8, 2};
    const auto t = overlap_split(0, window_bounds(0, tiling), 1, window_bounds(1, tiling));
    CHECK(t.overlap.empty());
    CHECK(t.fresh == FrameRange{8, 16});
}

TEST_CASE("ring emits windows as soon as their last frame arrives") {
    FrameRing<int> ring({4, 2, 2});
    std::vector<int> emitted_at;
    for (int i = 0; i < 10; ++i) {
        for (const auto& w : ring.push(entry(i))) {
            CHECK(w.range.end == i + 1);
            emitted_at.push_back(i);
        }
    }
    CHECK(emitted_at == std::vector<int>{3, 5, 7, 9});
}

TEST_CASE("ring covers the stream, decodes once, and bounds memory") {
    FrameRing<int> ring({80, 16, 2});
    const auto windows = drive(ring, 160);
    CHECK(windows.size() == 6);
    CHECK(ring.ingested() == 160);
    CHECK(ring.peak_resident() <= 80u);
    std::set<int> seen;
    for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto& w = windows[k];
        CHECK(w.index == static_cast<int>(k));
        CHECK(w.range == window_bounds(w.index, {80, 16, 2}));
        REQUIRE(w.frames.size() == 80u);
        for (int f = w.range.begin; f < w.range.end; ++f) {
            CHECK(w.at(f).index == f);
            CHECK(w.at(f).payload == f * 10);
            seen.insert(f);
        }
        if (k > 0) {
            // overlapping frames are the same ring entries, not copies
            CHECK(windows[k - 1].frames[16].get() == w.frames[0].get());
        }
    }
    CHECK(seen.size() == 160u);
}

TEST_CASE("coverage and overlap for assorted geometries") {
    for (int w = 1; w <= 9; ++w)
        for (int s = 1; s <= w; ++s) {
            FrameRing<int> ring({w, s, 2});
            const auto windows = drive(ring, 30);
            int covered_end = 0;
            for (std::size_t k = 0; k < windows.size(); ++k) {
                CHECK(windows[k].range.begin <= covered_end);
                covered_end = windows[k].range.end;
                if (k > 0) CHECK(windows[k - 1].range.end - windows[k].range.begin == w - s);
            }
            // number of complete windows from brute force
            int expect = 0;
            for (int k = 0; k * s + w <= 30; ++k) ++expect;
            CHECK(static_cast<int>(windows.size()) == expect);
            CHECK(ring.peak_resident() <= static_cast<std::size_t>(std::max(w, s)));
        }
}

TEST_CASE("partial tail window only when allowed") {
    FrameRing<int> strict({8, 4, 2});
    CHECK(drive(strict, 10).size() == 1);
    FrameRing<int> batch({8, 4, 2}, true);
    const auto w = drive(batch, 10);
    REQUIRE(w.size() == 2);
    CHECK(w[1].range == FrameRange{4, 10});
    FrameRing<int> exact({8, 4, 2}, true);
    CHECK(drive(exact, 12).size() == 2);
}

TEST_CASE("ring rejects out-of-order frames") {
    FrameRing<int> ring({4, 2, 2});
    ring.push(entry(0));
    CHECK_THROWS_AS(ring.push(entry(2)), InvalidArgument);
    CHECK_THROWS_AS(FrameRing<int>({4, 5, 2}), InvalidArgument);
}

TEST_CASE("decimator keeps every ceil(src/target)-th frame") {
    CHECK(Decimator(30, 2).step() == 15);
    CHECK(Decimator(25, 2).step() == 13);
    CHECK(Decimator(2, 2).step() == 1);
    CHECK(Decimator(1, 2).step() == 1);
    const Decimator d(30, 2);
    int kept = 0;
    for (int i = 0; i < 300; ++i) kept += d.keep(i) ? 1 : 0;
    CHECK(kept == 20);
    CHECK_THROWS_AS(Decimator(0, 2), InvalidArgument);
}
