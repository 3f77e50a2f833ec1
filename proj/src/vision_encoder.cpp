#include "cvlm/vision_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvlm/error.hpp"

namespace cvlm {

void EncoderConfig::validate() const {
    if (patch_size <= 0 || embed_dim <= 0 || token_dim <= 0 || group_size <= 0) {
        throw InvalidArgument("encoder config: sizes must be positive");
    }
}

Patches patchify(const Frame& frame, const PatchGridSpec& spec) {
    spec.validate();
    if (frame.width != spec.frame_width() || frame.height != spec.frame_height()) {
        throw InvalidArgument("patchify: frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                              " does not match patch grid " + std::to_string(spec.frame_width()) + "x" +
                              std::to_string(spec.frame_height()));
    }
    const int p = spec.patch_size;
    Patches out{spec.grid_h, spec.grid_w, p, std::vector<double>(static_cast<std::size_t>(frame.width) * frame.height)};
    std::size_t k = 0;
    for (int r = 0; r < spec.grid_h; ++r)
        for (int c = 0; c < spec.grid_w; ++c)
            for (int y = r * p; y < (r + 1) * p; ++y)
                for (int x = c * p; x < (c + 1) * p; ++x) out.values[k++] = frame.at(x, y) / 255.0;
    return out;
}

VisionEncoder::VisionEncoder(EncoderConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    const int in = cfg_.patch_size * cfg_.patch_size;
    const int d = cfg_.embed_dim;
    w1_ = random_matrix(d, in, rng);
    b1_ = random_vector(d, 0.1, rng);
    w2_ = random_matrix(d, d, rng);
    b2_ = random_vector(d, 0.1, rng);
    proj_ = random_matrix(cfg_.token_dim, cfg_.group_size * cfg_.group_size * d, rng);
    proj_b_ = random_vector(cfg_.token_dim, 0.1, rng);
    if (cfg_.cross_attention) {
        wq_ = random_matrix(d, d, rng);
        wk_ = random_matrix(d, d, rng);
        wv_ = random_matrix(d, d, rng);
    }
}

void VisionEncoder::embed_patch(std::span<const double> patch, std::span<double> out) const {
    std::vector<double> hidden(static_cast<std::size_t>(cfg_.embed_dim));
    matvec(w1_, patch, hidden, b1_);
    for (auto& h : hidden) h = gelu(h);
    matvec(w2_, hidden, out, b2_);
}

PatchEmbeddings VisionEncoder::encode_selected(const Patches& patches, const PatchMask& retained,
                                               const PatchGridSpec& spec) const {
    if (patches.rows != spec.grid_h || patches.cols != spec.grid_w || patches.patch_size != cfg_.patch_size) {
        throw InvalidArgument("encode_selected: patches do not match grid/encoder patch size");
    }
    if (spec.group_size != cfg_.group_size) throw InvalidArgument("encode_selected: group size mismatch");
    if (!is_group_complete(retained, spec)) throw InvalidArgument("encode_selected: mask is not group-complete");

    const int n = static_cast<int>(patches.count());
    PatchEmbeddings emb{patches.rows, patches.cols, cfg_.embed_dim,
                        std::vector<double>(static_cast<std::size_t>(n) * cfg_.embed_dim, 0.0),
                        retained.bits, retained.count()};

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        if (!emb.present[static_cast<std::size_t>(i)]) continue;
        std::span<double> out(emb.values.data() + static_cast<std::size_t>(i) * cfg_.embed_dim,
                              static_cast<std::size_t>(cfg_.embed_dim));
        embed_patch(patches.patch(static_cast<std::size_t>(i)), out);
    }
    if (cfg_.cross_attention) cross_attend(emb);
    return emb;
}

void VisionEncoder::cross_attend(PatchEmbeddings& emb) const {
    const int d = emb.dim;
    std::vector<int> idx;
    for (std::size_t i = 0; i < emb.present.size(); ++i)
        if (emb.present[i]) idx.push_back(static_cast<int>(i));
    const int m = static_cast<int>(idx.size());
    Matrix q(m, d), k(m, d), v(m, d);
    for (int a = 0; a < m; ++a) {
        const auto x = emb.at(static_cast<std::size_t>(idx[static_cast<std::size_t>(a)]));
        matvec(wq_, x, q.row(a));
        matvec(wk_, x, k.row(a));
        matvec(wv_, x, v.row(a));
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> next(emb.values);
#pragma omp parallel for schedule(static)
    for (int a = 0; a < m; ++a) {
        std::vector<double> w(static_cast<std::size_t>(m));
        double mx = -1e300;
        for (int b = 0; b < m; ++b) {
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += q(a, c) * k(b, c);
            w[static_cast<std::size_t>(b)] = s * scale;
            mx = std::max(mx, w[static_cast<std::size_t>(b)]);
        }
        double z = 0.0;
        for (auto& x : w) z += (x = std::exp(x - mx));
        double* out = next.data() + static_cast<std::size_t>(idx[static_cast<std::size_t>(a)]) * d;
        for (int b = 0; b < m; ++b)
            for (int c = 0; c < d; ++c) out[c] += w[static_cast<std::size_t>(b)] / z * v(b, c);
    }
    emb.values = std::move(next);
}

std::vector<VisualToken> VisionEncoder::project_downsample(const PatchEmbeddings& embeddings,
                                                           const GroupSelection& groups, const PatchGridSpec& spec,
                                                           int frame, int epoch) const {
    if (embeddings.rows != spec.grid_h || embeddings.cols != spec.grid_w || embeddings.dim != cfg_.embed_dim) {
        throw InvalidArgument("project_downsample: embeddings do not match grid");
    }
    if (groups.groups_h != spec.groups_h() || groups.groups_w != spec.groups_w()) {
        throw InvalidArgument("project_downsample: group mask does not match grid");
    }
    const int g = spec.group_size;
    const std::size_t d = static_cast<std::size_t>(cfg_.embed_dim);
    std::vector<VisualToken> tokens;
    std::vector<double> concat(static_cast<std::size_t>(g * g) * d);
    for (int gr = 0; gr < groups.groups_h; ++gr) {
        for (int gc = 0; gc < groups.groups_w; ++gc) {
            const int gi = gr * groups.groups_w + gc;
            if (!groups.retain[static_cast<std::size_t>(gi)]) continue;
            std::size_t k = 0;
            for (int r = gr * g; r < (gr + 1) * g; ++r) {
                for (int c = gc * g; c < (gc + 1) * g; ++c) {
                    const std::size_t pi = static_cast<std::size_t>(r) * spec.grid_w + c;
                    if (!embeddings.present[pi]) {
                        throw InvalidArgument("project_downsample: retained group " + std::to_string(gi) +
                                              " has an absent patch");
                    }
                    const auto e = embeddings.at(pi);
                    std::copy(e.begin(), e.end(), concat.begin() + static_cast<std::ptrdiff_t>(k * d));
                    ++k;
                }
            }
            VisualToken t;
            t.vector.resize(static_cast<std::size_t>(cfg_.token_dim));
            matvec(proj_, concat, t.vector, proj_b_);
            t.frame = frame;
            t.group = gi;
            t.epoch = epoch;
            tokens.push_back(std::move(t));
        }
    }
    return tokens;
}

}  // namespace cvlm
