#pragma once

// Serial, unoptimized versions of the OpenMP kernels. Kept for tests and the
// benchmark; results must match the parallel kernels exactly.

#include "cvlm/codec.hpp"
#include "cvlm/vision_encoder.hpp"

namespace cvlm::reference {

/// Exhaustive block matching without early exits, same tie-break as cvlm::estimate_motion.
MotionField estimate_motion(const Frame& current, const Frame& reference, int block_size, int search_radius);

/// Per-patch MLP evaluated serially with explicit loops over the encoder's weights.
PatchEmbeddings encode_selected(const VisionEncoder& encoder, const Patches& patches, const PatchMask& retained);

}  // namespace cvlm::reference
