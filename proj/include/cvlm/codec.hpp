#pragma once

// Block-based inter-frame codec. I-frames are stored as raw planes; P-frames
// as one integer motion vector per block plus an exact 16-bit residual, so a
// decode reproduces the encoder input bit-for-bit. Motion vectors and the
// per-block SAD are surfaced at decode time as metadata for the analyzer.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cvlm/frame.hpp"

namespace cvlm {

enum class FrameType : std::uint8_t { I = 0, P = 1 };

const char* to_string(FrameType t);

/// Offset from a block to its prediction region in the reference frame.
struct MotionVector {
    int dx = 0;
    int dy = 0;

    bool operator==(const MotionVector&) const = default;
};

/// Euclidean length of the vector, in pixels.
double motion_magnitude(MotionVector mv);

struct MotionField {
    int block_size = 0;
    int blocks_w = 0;
    int blocks_h = 0;
    std::vector<MotionVector> vectors;  // row-major over blocks
    std::vector<std::uint32_t> sad;     // residual energy of each block

    MotionField() = default;
    MotionField(int bs, int bw, int bh)
        : block_size(bs), blocks_w(bw), blocks_h(bh),
          vectors(static_cast<std::size_t>(bw) * bh), sad(static_cast<std::size_t>(bw) * bh, 0) {}

    std::size_t block_count() const { return vectors.size(); }
    const MotionVector& at(int bx, int by) const { return vectors[static_cast<std::size_t>(by) * blocks_w + bx]; }

    bool operator==(const MotionField&) const = default;
};

struct ResidualPlane {
    int width = 0;
    int height = 0;
    std::vector<std::int16_t> samples;

    ResidualPlane() = default;
    ResidualPlane(int w, int h) : width(w), height(h), samples(static_cast<std::size_t>(w) * h, 0) {}

    std::int16_t at(int x, int y) const { return samples[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const ResidualPlane&) const = default;
};

/// Full-search integer-pel block matching (OpenMP over blocks).
///
/// The prediction of the block at (x, y) is the reference window at
/// (x + dx, y + dy) with edge-replicating clamps. Among all offsets with
/// |dx|, |dy| <= search_radius the minimum-SAD offset wins; ties go to the
/// smaller magnitude, then to the earlier offset in row-major scan
/// (dy ascending, then dx ascending).
MotionField estimate_motion(const Frame& current, const Frame& reference, int block_size, int search_radius);

/// SAD of one block against the reference displaced by `mv`.
std::uint32_t block_sad(const Frame& current, const Frame& reference, int bx, int by, int block_size,
                        MotionVector mv);

/// Builds the motion-compensated prediction of a whole frame.
Frame motion_compensate(const Frame& reference, const MotionField& field);

/// current - prediction, per pixel.
ResidualPlane compute_residual(const Frame& current, const Frame& reference, const MotionField& field);

/// prediction + residual. Throws if a sample leaves [0, 255].
Frame reconstruct(const Frame& prediction, const ResidualPlane& residual);

/// How P-frame residuals are written to the wire.
enum class ResidualCoding : std::uint8_t {
    dense = 1,      // frame_type 1: every block carries block_size^2 samples
    skip_zero = 2,  // frame_type 2: u8 coded flag per block; all-zero blocks omit samples
};

struct CodecParams {
    int gop_size = 16;
    int block_size = 8;
    int search_radius = 7;
    ResidualCoding coding = ResidualCoding::skip_zero;
    bool operator==(const CodecParams&) const = default;
};

struct EncodedFrame {
    FrameType type = FrameType::I;
    Frame intra;             // I: original-size plane
    MotionField motion;      // P only
    ResidualPlane residual;  // P only, padded size

    bool operator==(const EncodedFrame&) const = default;
};

struct Bitstream {
    int width = 0;
    int height = 0;
    int fps = 1;
    CodecParams params;
    std::vector<EncodedFrame> frames;

    int padded_width() const;
    int padded_height() const;

    bool operator==(const Bitstream&) const = default;
};

Bitstream encode(const RawVideo& video, const CodecParams& params);

// CSBS container. See README for the byte layout.
std::vector<std::uint8_t> serialize_bitstream(const Bitstream& bs);
Bitstream parse_bitstream(std::span<const std::uint8_t> bytes);

/// Bytes of the serialized header (magic through search_radius).
inline constexpr std::size_t kBitstreamHeaderBytes = 4 + 4 * 4 + 3 * 2;

struct DecodedFrame {
    int index = 0;
    FrameType type = FrameType::I;
    Frame frame;                            // cropped to the stream dimensions
    std::optional<MotionField> motion;      // present for P-frames only
    std::optional<ResidualPlane> residual;  // present for P-frames only
};

/// Single-pass sequential decoder; each frame is produced exactly once.
class Decoder {
public:
    explicit Decoder(const Bitstream& bs);

    std::optional<DecodedFrame> next();
    int frames_decoded() const { return next_index_; }

private:
    const Bitstream* bs_;
    Frame reference_;  // padded reconstruction of the previous frame
    int next_index_ = 0;
};

RawVideo decode_all(const Bitstream& bs);

}  // namespace cvlm
