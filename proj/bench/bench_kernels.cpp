// Serial reference kernels vs the OpenMP ones.
#include <benchmark/benchmark.h>

#include <random>

#include "cvlm/codec.hpp"
#include "cvlm/motion_analyzer.hpp"
#include "cvlm/reference.hpp"
#include "cvlm/vision_encoder.hpp"

using namespace cvlm;

namespace {

Frame noise_frame(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Frame f(w, h);
    for (auto& p : f.plane) p = static_cast<std::uint8_t>(rng() & 0xff);
    return f;
}

// Current frame is the reference shifted by (3, -2), so the search has a real minimum.
std::pair<Frame, Frame> shifted_pair(int size) {
    const Frame ref = noise_frame(size, size, 5);
    Frame cur(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const int sx = std::clamp(x + 3, 0, size - 1), sy = std::clamp(y - 2, 0, size - 1);
            cur.plane[static_cast<std::size_t>(y) * size + x] = ref.plane[static_cast<std::size_t>(sy) * size + sx];
        }
    return {cur, ref};
}

void BM_motion_reference(benchmark::State& st) {
    const auto [cur, ref] = shifted_pair(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(reference::estimate_motion(cur, ref, 8, 7));
    st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}

void BM_motion_parallel(benchmark::State& st) {
    const auto [cur, ref] = shifted_pair(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(estimate_motion(cur, ref, 8, 7));
    st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}

struct EncodeCase {
    VisionEncoder enc{EncoderConfig{}};
    PatchGridSpec spec;
    Patches patches;
    PatchMask all;

    explicit EncodeCase(int size)
        : spec(PatchGridSpec::for_frame(size, size, 8, 2)),
          patches(patchify(noise_frame(size, size, 9), spec)),
          all(spec.grid_h, spec.grid_w, true) {}
};

void BM_encode_reference(benchmark::State& st) {
    const EncodeCase c(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(reference::encode_selected(c.enc, c.patches, c.all));
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(c.patches.count()));
}

void BM_encode_parallel(benchmark::State& st) {
    const EncodeCase c(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(c.enc.encode_selected(c.patches, c.all, c.spec));
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(c.patches.count()));
}

}  // namespace

BENCHMARK(BM_motion_reference)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_motion_parallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_encode_reference)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_encode_parallel)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
