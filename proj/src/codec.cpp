#include "cvlm/codec.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "bytes.hpp"
#include "cvlm/error.hpp"

namespace cvlm {

const char* to_string(FrameType t) { return t == FrameType::I ? "I" : "P"; }

double motion_magnitude(MotionVector mv) { return std::hypot(static_cast<double>(mv.dx), static_cast<double>(mv.dy)); }

namespace {

void check_block_grid(const Frame& a, const Frame& b, int block_size) {
    if (a.width != b.width || a.height != b.height) {
        throw InvalidArgument("frame dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                              " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
    }
    if (block_size <= 0 || a.width % block_size != 0 || a.height % block_size != 0) {
        throw InvalidArgument("block_size " + std::to_string(block_size) + " does not divide " +
                              std::to_string(a.width) + "x" + std::to_string(a.height));
    }
}

void check_field(const Frame& f, const MotionField& field) {
    if (field.block_size <= 0 || field.blocks_w * field.block_size != f.width ||
        field.blocks_h * field.block_size != f.height) {
        throw InvalidArgument("motion field grid does not match frame dimensions");
    }
}

int round_up(int v, int m) { return (v + m - 1) / m * m; }

// SAD with early exit once `bound` is exceeded.
std::uint32_t bounded_sad(const Frame& cur, const Frame& ref, int x0, int y0, int bs, int dx, int dy,
                          std::uint32_t bound) {
    std::uint32_t sad = 0;
    const bool inside = x0 + dx >= 0 && y0 + dy >= 0 && x0 + dx + bs <= ref.width && y0 + dy + bs <= ref.height;
    for (int y = 0; y < bs; ++y) {
        const std::uint8_t* c = &cur.plane[static_cast<std::size_t>(y0 + y) * cur.width + x0];
        if (inside) {
            const std::uint8_t* r = &ref.plane[static_cast<std::size_t>(y0 + y + dy) * ref.width + x0 + dx];
            for (int x = 0; x < bs; ++x) sad += static_cast<std::uint32_t>(std::abs(int(c[x]) - int(r[x])));
        } else {
            for (int x = 0; x < bs; ++x) {
                sad += static_cast<std::uint32_t>(std::abs(int(c[x]) - int(ref.clamped(x0 + x + dx, y0 + y + dy))));
            }
        }
        if (sad > bound) return sad;
    }
    return sad;
}

}  // namespace

std::uint32_t block_sad(const Frame& current, const Frame& reference, int bx, int by, int block_size,
                        MotionVector mv) {
    return bounded_sad(current, reference, bx * block_size, by * block_size, block_size, mv.dx, mv.dy,
                       std::numeric_limits<std::uint32_t>::max());
}

MotionField estimate_motion(const Frame& current, const Frame& reference, int block_size, int search_radius) {
    check_block_grid(current, reference, block_size);
    if (search_radius < 0) throw InvalidArgument("search_radius must be >= 0");

    MotionField field(block_size, current.width / block_size, current.height / block_size);
    const int blocks = static_cast<int>(field.block_count());

#pragma omp parallel for schedule(dynamic, 4)
    for (int b = 0; b < blocks; ++b) {
        const int x0 = (b % field.blocks_w) * block_size;
        const int y0 = (b / field.blocks_w) * block_size;
        // (0,0) has the unique smallest magnitude, so evaluating it first does not disturb the scan-order tie-break.
        MotionVector best{0, 0};
        std::uint32_t best_sad =
            bounded_sad(current, reference, x0, y0, block_size, 0, 0, std::numeric_limits<std::uint32_t>::max());
        int best_mag2 = 0;
        // Only an exact (0,0) match is unbeatable.
        for (int dy = -search_radius; dy <= search_radius && !(best_sad == 0 && best_mag2 == 0); ++dy) {
            for (int dx = -search_radius; dx <= search_radius; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const std::uint32_t s = bounded_sad(current, reference, x0, y0, block_size, dx, dy, best_sad);
                if (s > best_sad) continue;
                const int mag2 = dx * dx + dy * dy;
                if (s < best_sad || mag2 < best_mag2) {
                    best = {dx, dy};
                    best_sad = s;
                    best_mag2 = mag2;
                }
            }
        }
        field.vectors[static_cast<std::size_t>(b)] = best;
        field.sad[static_cast<std::size_t>(b)] = best_sad;
    }
    return field;
}

Frame motion_compensate(const Frame& reference, const MotionField& field) {
    check_field(reference, field);
    Frame pred(reference.width, reference.height);
    const int bs = field.block_size;
    for (int by = 0; by < field.blocks_h; ++by) {
        for (int bx = 0; bx < field.blocks_w; ++bx) {
            const MotionVector mv = field.at(bx, by);
            for (int y = by * bs; y < (by + 1) * bs; ++y)
                for (int x = bx * bs; x < (bx + 1) * bs; ++x) pred.at(x, y) = reference.clamped(x + mv.dx, y + mv.dy);
        }
    }
    return pred;
}

ResidualPlane compute_residual(const Frame& current, const Frame& reference, const MotionField& field) {
    check_block_grid(current, reference, field.block_size);
    const Frame pred = motion_compensate(reference, field);
    ResidualPlane res(current.width, current.height);
    for (std::size_t i = 0; i < res.samples.size(); ++i) {
        res.samples[i] = static_cast<std::int16_t>(int(current.plane[i]) - int(pred.plane[i]));
    }
    return res;
}

Frame reconstruct(const Frame& prediction, const ResidualPlane& residual) {
    if (prediction.width != residual.width || prediction.height != residual.height) {
        throw InvalidArgument("reconstruct: residual dimensions differ from prediction");
    }
    Frame out(prediction.width, prediction.height);
    for (std::size_t i = 0; i < out.plane.size(); ++i) {
        const int v = int(prediction.plane[i]) + residual.samples[i];
        if (v < 0 || v > 255) throw InvalidArgument("reconstruct: sample out of range");
        out.plane[i] = static_cast<std::uint8_t>(v);
    }
    return out;
}

int Bitstream::padded_width() const { return round_up(width, params.block_size); }
int Bitstream::padded_height() const { return round_up(height, params.block_size); }

Bitstream encode(const RawVideo& video, const CodecParams& params) {
    if (video.frames.empty()) throw InvalidArgument("encode: empty video");
    if (params.gop_size < 1 || params.gop_size > 0xFFFF) throw InvalidArgument("encode: gop_size out of range");
    if (params.block_size < 1 || params.block_size > 0xFFFF) throw InvalidArgument("encode: block_size out of range");
    if (params.search_radius < 0 || params.search_radius > 0x7FFF) {
        throw InvalidArgument("encode: search_radius out of range");
    }
    if (video.width <= 0 || video.height <= 0) throw InvalidArgument("encode: non-positive dimensions");

    Bitstream bs;
    bs.width = video.width;
    bs.height = video.height;
    bs.fps = video.fps;
    bs.params = params;
    const int pw = bs.padded_width();
    const int ph = bs.padded_height();

    Frame reference;
    for (std::size_t i = 0; i < video.frames.size(); ++i) {
        const Frame& src = video.frames[i];
        if (src.width != video.width || src.height != video.height) {
            throw InvalidArgument("encode: frame " + std::to_string(i) + " has mismatched dimensions");
        }
        Frame padded = pad_frame(src, pw, ph);
        EncodedFrame ef;
        if (i % static_cast<std::size_t>(params.gop_size) == 0) {
            ef.type = FrameType::I;
            ef.intra = src;
        } else {
            ef.type = FrameType::P;
            ef.motion = estimate_motion(padded, reference, params.block_size, params.search_radius);
            ef.residual = compute_residual(padded, reference, ef.motion);
        }
        // Lossless: the decoder's reconstruction equals the padded source.
        reference = std::move(padded);
        bs.frames.push_back(std::move(ef));
    }
    return bs;
}

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs) {
    detail::ByteWriter w;
    w.magic("CSBS");
    w.u32(static_cast<std::uint32_t>(bs.width));
    w.u32(static_cast<std::uint32_t>(bs.height));
    w.u32(static_cast<std::uint32_t>(bs.fps));
    w.u32(static_cast<std::uint32_t>(bs.frames.size()));
    w.u16(static_cast<std::uint16_t>(bs.params.gop_size));
    w.u16(static_cast<std::uint16_t>(bs.params.block_size));
    w.u16(static_cast<std::uint16_t>(bs.params.search_radius));

    const int blk = bs.params.block_size;
    for (const auto& f : bs.frames) {
        if (f.type == FrameType::I) {
            w.u8(0);
            w.bytes(f.intra.plane);
            continue;
        }
        const bool sparse = bs.params.coding == ResidualCoding::skip_zero;
        w.u8(static_cast<std::uint8_t>(bs.params.coding));
        for (int by = 0; by < f.motion.blocks_h; ++by) {
            for (int bx = 0; bx < f.motion.blocks_w; ++bx) {
                const MotionVector mv = f.motion.at(bx, by);
                w.i16(static_cast<std::int16_t>(mv.dx));
                w.i16(static_cast<std::int16_t>(mv.dy));
                if (sparse) {
                    const bool coded = f.motion.sad[static_cast<std::size_t>(by) * f.motion.blocks_w + bx] != 0;
                    w.u8(coded ? 1 : 0);
                    if (!coded) continue;
                }
                for (int y = by * blk; y < (by + 1) * blk; ++y)
                    for (int x = bx * blk; x < (bx + 1) * blk; ++x) w.i16(f.residual.at(x, y));
            }
        }
    }
    return w.take();
}

Bitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    r.expect_magic("CSBS");
    Bitstream bs;
    const std::size_t header_at = r.offset();
    bs.width = static_cast<int>(r.u32("width"));
    bs.height = static_cast<int>(r.u32("height"));
    bs.fps = static_cast<int>(r.u32("fps"));
    const std::uint32_t count = r.u32("frame_count");
    bs.params.gop_size = r.u16("gop_size");
    bs.params.block_size = r.u16("block_size");
    bs.params.search_radius = r.u16("search_radius");
    if (bs.width <= 0 || bs.height <= 0 || bs.fps <= 0) throw ParseError(header_at, "non-positive width/height/fps");
    if (bs.params.gop_size == 0 || bs.params.block_size == 0) {
        throw ParseError(header_at, "gop_size and block_size must be nonzero");
    }

    const int blk = bs.params.block_size;
    const int pw = bs.padded_width();
    const int ph = bs.padded_height();
    const int radius = bs.params.search_radius;
    const std::size_t plane = static_cast<std::size_t>(bs.width) * bs.height;

    bs.frames.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t type_at = r.offset();
        const std::uint8_t type = r.u8("frame_type");
        EncodedFrame f;
        if (type == 0) {
            f.type = FrameType::I;
            f.intra = Frame(bs.width, bs.height);
            auto body = r.bytes(plane, "I-frame plane");
            std::copy(body.begin(), body.end(), f.intra.plane.begin());
        } else if (type == 1 || type == 2) {
            if (i == 0) throw ParseError(type_at, "first frame is not an I-frame");
            bs.params.coding = static_cast<ResidualCoding>(type);
            f.type = FrameType::P;
            f.motion = MotionField(blk, pw / blk, ph / blk);
            f.residual = ResidualPlane(pw, ph);
            for (int by = 0; by < f.motion.blocks_h; ++by) {
                for (int bx = 0; bx < f.motion.blocks_w; ++bx) {
                    const std::size_t mv_at = r.offset();
                    MotionVector mv;
                    mv.dx = r.i16("motion vector");
                    mv.dy = r.i16("motion vector");
                    if (std::abs(mv.dx) > radius || std::abs(mv.dy) > radius) {
                        throw ParseError(mv_at, "motion vector exceeds search radius");
                    }
                    const std::size_t b = static_cast<std::size_t>(by) * f.motion.blocks_w + bx;
                    f.motion.vectors[b] = mv;
                    bool coded = true;
                    if (type == 2) {
                        const std::size_t flag_at = r.offset();
                        const std::uint8_t flag = r.u8("block coded flag");
                        if (flag > 1) throw ParseError(flag_at, "block coded flag must be 0 or 1");
                        coded = flag == 1;
                    }
                    if (!coded) continue;
                    std::uint32_t sad = 0;
                    for (int y = by * blk; y < (by + 1) * blk; ++y) {
                        for (int x = bx * blk; x < (bx + 1) * blk; ++x) {
                            const std::int16_t s = r.i16("residual sample");
                            f.residual.samples[static_cast<std::size_t>(y) * pw + x] = s;
                            sad += static_cast<std::uint32_t>(std::abs(int(s)));
                        }
                    }
                    f.motion.sad[b] = sad;
                }
            }
        } else {
            throw ParseError(type_at, "unknown frame_type " + std::to_string(type));
        }
        bs.frames.push_back(std::move(f));
    }
    if (r.remaining() != 0) {
        throw ParseError(r.offset(), std::to_string(r.remaining()) + " trailing bytes after " + std::to_string(count) +
                                         " frames declared in header");
    }
    return bs;
}

Decoder::Decoder(const Bitstream& bs) : bs_(&bs) {}

std::optional<DecodedFrame> Decoder::next() {
    if (next_index_ >= static_cast<int>(bs_->frames.size())) return std::nullopt;
    const EncodedFrame& ef = bs_->frames[static_cast<std::size_t>(next_index_)];
    DecodedFrame out;
    out.index = next_index_;
    out.type = ef.type;
    if (ef.type == FrameType::I) {
        reference_ = pad_frame(ef.intra, bs_->padded_width(), bs_->padded_height());
        out.frame = ef.intra;
    } else {
        if (reference_.plane.empty()) throw InvalidArgument("decode: P-frame without a reference");
        reference_ = reconstruct(motion_compensate(reference_, ef.motion), ef.residual);
        out.frame = crop_frame(reference_, bs_->width, bs_->height);
        out.motion = ef.motion;
        out.residual = ef.residual;
    }
    ++next_index_;
    return out;
}

RawVideo decode_all(const Bitstream& bs) {
    RawVideo v;
    v.width = bs.width;
    v.height = bs.height;
    v.fps = bs.fps;
    Decoder dec(bs);
    while (auto f = dec.next()) v.frames.push_back(std::move(f->frame));
    return v;
}

}  // namespace cvlm
