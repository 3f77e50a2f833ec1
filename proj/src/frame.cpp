#include "cvlm/frame.hpp"

#include <fstream>
#include <iterator>

#include "bytes.hpp"
#include "cvlm/error.hpp"

namespace cvlm {

Frame pad_frame(const Frame& f, int w, int h) {
    if (w < f.width || h < f.height) throw InvalidArgument("pad_frame: target smaller than source");
    if (w == f.width && h == f.height) return f;
    Frame out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = f.clamped(x, y);
    return out;
}

Frame crop_frame(const Frame& f, int w, int h) {
    if (w > f.width || h > f.height) throw InvalidArgument("crop_frame: target larger than source");
    if (w == f.width && h == f.height) return f;
    Frame out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = f.at(x, y);
    return out;
}

std::vector<std::uint8_t> serialize_raw_video(const RawVideo& video) {
    detail::ByteWriter w;
    w.magic("CSRV");
    w.u32(static_cast<std::uint32_t>(video.width));
    w.u32(static_cast<std::uint32_t>(video.height));
    w.u32(static_cast<std::uint32_t>(video.fps));
    w.u32(static_cast<std::uint32_t>(video.frames.size()));
    for (const auto& f : video.frames) {
        if (f.width != video.width || f.height != video.height) {
            throw InvalidArgument("serialize_raw_video: frame dimensions differ from video dimensions");
        }
        w.bytes(f.plane);
    }
    return w.take();
}

RawVideo parse_raw_video(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    r.expect_magic("CSRV");
    RawVideo v;
    std::size_t dims_at = r.offset();
    v.width = static_cast<int>(r.u32("width"));
    v.height = static_cast<int>(r.u32("height"));
    v.fps = static_cast<int>(r.u32("fps"));
    std::uint32_t count = r.u32("frame_count");
    if (v.width <= 0 || v.height <= 0 || v.fps <= 0) throw ParseError(dims_at, "non-positive width/height/fps");
    std::size_t plane = static_cast<std::size_t>(v.width) * v.height;
    if (r.remaining() != plane * count) {
        throw ParseError(r.offset(), "body length " + std::to_string(r.remaining()) + " does not match header (" +
                                         std::to_string(count) + " frames of " + std::to_string(plane) + " bytes)");
    }
    v.frames.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto body = r.bytes(plane, "frame plane");
        Frame f(v.width, v.height);
        std::copy(body.begin(), body.end(), f.plane.begin());
        v.frames.push_back(std::move(f));
    }
    return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace cvlm
