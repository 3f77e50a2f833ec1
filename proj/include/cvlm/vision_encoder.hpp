#pragma once

// Toy patch encoder. Each patch goes through the same two-layer MLP on its
// own, so skipping a patch never changes another patch's embedding. Retained
// 2x2 (group_size^2) patch groups are concatenated and projected to one
// visual token.

#include <cstdint>
#include <span>
#include <vector>

#include "cvlm/dense.hpp"
#include "cvlm/frame.hpp"
#include "cvlm/motion_analyzer.hpp"

namespace cvlm {

struct EncoderConfig {
    int patch_size = 8;
    int embed_dim = 32;
    int token_dim = 32;
    int group_size = 2;
    std::uint64_t seed = 7;
    // One cross-patch attention layer over the retained patches. Makes
    // pruning approximate; off by default.
    bool cross_attention = false;

    void validate() const;
};

/// Row-major patches with samples scaled to [0, 1].
struct Patches {
    int rows = 0;
    int cols = 0;
    int patch_size = 0;
    std::vector<double> values;

    std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
    std::span<const double> patch(std::size_t i) const {
        const std::size_t n = static_cast<std::size_t>(patch_size) * patch_size;
        return {values.data() + i * n, n};
    }
};

Patches patchify(const Frame& frame, const PatchGridSpec& spec);

struct PatchEmbeddings {
    int rows = 0;
    int cols = 0;
    int dim = 0;
    std::vector<double> values;          // rows*cols*dim, zero where absent
    std::vector<std::uint8_t> present;   // rows*cols
    std::size_t encoded = 0;             // patches that went through the encoder

    std::span<const double> at(std::size_t i) const {
        return {values.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

struct VisualToken {
    std::vector<double> vector;
    int frame = 0;
    int group = 0;  // row-major group index within the frame
    int epoch = 0;  // GOP epoch of the frame's mask
};

class VisionEncoder {
public:
    explicit VisionEncoder(EncoderConfig cfg);

    const EncoderConfig& config() const { return cfg_; }

    /// Embeds the retained patches (OpenMP over patches); dropped positions are absent.
    /// Throws when `retained` is not group-complete.
    PatchEmbeddings encode_selected(const Patches& patches, const PatchMask& retained,
                                    const PatchGridSpec& spec) const;

    /// One token per retained group, in row-major group order.
    std::vector<VisualToken> project_downsample(const PatchEmbeddings& embeddings, const GroupSelection& groups,
                                                const PatchGridSpec& spec, int frame, int epoch) const;

    /// Per-patch MLP: W2 gelu(W1 x + b1) + b2.
    void embed_patch(std::span<const double> patch, std::span<double> out) const;

    // Weights, exposed for the serial reference kernels.
    const Matrix& w1() const { return w1_; }
    const Matrix& w2() const { return w2_; }
    const std::vector<double>& b1() const { return b1_; }
    const std::vector<double>& b2() const { return b2_; }
    const Matrix& projection() const { return proj_; }
    const std::vector<double>& projection_bias() const { return proj_b_; }

private:
    void cross_attend(PatchEmbeddings& emb) const;

    EncoderConfig cfg_;
    Matrix w1_, w2_, proj_;
    std::vector<double> b1_, b2_, proj_b_;
    Matrix wq_, wk_, wv_;
};

}  // namespace cvlm
