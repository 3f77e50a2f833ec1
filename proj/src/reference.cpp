#include "cvlm/reference.hpp"

#include <cstdlib>
#include <limits>
#include <tuple>

#include "cvlm/error.hpp"

namespace cvlm::reference {

MotionField estimate_motion(const Frame& current, const Frame& reference, int block_size, int search_radius) {
    if (current.width != reference.width || current.height != reference.height) {
        throw InvalidArgument("reference::estimate_motion: dimension mismatch");
    }
    if (block_size <= 0 || current.width % block_size || current.height % block_size) {
        throw InvalidArgument("reference::estimate_motion: block size does not divide frame");
    }
    MotionField field(block_size, current.width / block_size, current.height / block_size);
    for (int by = 0; by < field.blocks_h; ++by) {
        for (int bx = 0; bx < field.blocks_w; ++bx) {
            // (sad, |mv|^2, scan index) ordered lexicographically
            auto best = std::make_tuple(std::numeric_limits<std::uint64_t>::max(), 0, 0);
            MotionVector best_mv;
            int scan = 0;
            for (int dy = -search_radius; dy <= search_radius; ++dy) {
                for (int dx = -search_radius; dx <= search_radius; ++dx, ++scan) {
                    std::uint64_t sad = 0;
                    for (int y = by * block_size; y < (by + 1) * block_size; ++y)
                        for (int x = bx * block_size; x < (bx + 1) * block_size; ++x)
                            sad += static_cast<std::uint64_t>(
                                std::abs(int(current.at(x, y)) - int(reference.clamped(x + dx, y + dy))));
                    const auto key = std::make_tuple(sad, dx * dx + dy * dy, scan);
                    if (key < best) {
                        best = key;
                        best_mv = {dx, dy};
                    }
                }
            }
            const std::size_t b = static_cast<std::size_t>(by) * field.blocks_w + bx;
            field.vectors[b] = best_mv;
            field.sad[b] = static_cast<std::uint32_t>(std::get<0>(best));
        }
    }
    return field;
}

PatchEmbeddings encode_selected(const VisionEncoder& encoder, const Patches& patches, const PatchMask& retained) {
    const auto& cfg = encoder.config();
    if (cfg.cross_attention) throw InvalidArgument("reference::encode_selected: cross attention not supported");
    const int d = cfg.embed_dim;
    const int in = patches.patch_size * patches.patch_size;
    PatchEmbeddings emb{patches.rows, patches.cols, d, std::vector<double>(patches.count() * static_cast<std::size_t>(d), 0.0),
                        retained.bits, retained.count()};
    std::vector<double> hidden(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < patches.count(); ++i) {
        if (!retained.bits[i]) continue;
        const auto x = patches.patch(i);
        for (int r = 0; r < d; ++r) {
            double acc = encoder.b1()[static_cast<std::size_t>(r)];
            for (int c = 0; c < in; ++c) acc += encoder.w1()(r, c) * x[static_cast<std::size_t>(c)];
            hidden[static_cast<std::size_t>(r)] = gelu(acc);
        }
        for (int r = 0; r < d; ++r) {
            double acc = encoder.b2()[static_cast<std::size_t>(r)];
            for (int c = 0; c < d; ++c) acc += encoder.w2()(r, c) * hidden[static_cast<std::size_t>(c)];
            emb.values[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(r)] = acc;
        }
    }
    return emb;
}

}  // namespace cvlm::reference
