#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cvlm {

/// 8-bit luma plane, row-major.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> plane;

    Frame() = default;
    Frame(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), plane(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int x, int y) const { return plane[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return plane[static_cast<std::size_t>(y) * width + x]; }

    // Edge-replicating accessor used by motion compensation.
    std::uint8_t clamped(int x, int y) const {
        x = x < 0 ? 0 : (x >= width ? width - 1 : x);
        y = y < 0 ? 0 : (y >= height ? height - 1 : y);
        return at(x, y);
    }

    bool operator==(const Frame&) const = default;
};

struct RawVideo {
    int width = 0;
    int height = 0;
    int fps = 1;
    std::vector<Frame> frames;

    bool operator==(const RawVideo&) const = default;
};

/// Pads a frame to (w, h) >= its size by edge replication.
Frame pad_frame(const Frame& f, int w, int h);
/// Returns the top-left (w, h) window of `f`.
Frame crop_frame(const Frame& f, int w, int h);

// CSRV container: "CSRV" | u32 width | u32 height | u32 fps | u32 count | frames.
std::vector<std::uint8_t> serialize_raw_video(const RawVideo& video);
RawVideo parse_raw_video(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cvlm
