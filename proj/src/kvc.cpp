#include "cvlm/kvc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cvlm/error.hpp"

namespace cvlm {

void LlmConfig::validate() const {
    if (layers < 1 || heads < 1 || model_dim < 1 || token_dim < 1) throw InvalidArgument("llm config: sizes must be positive");
    if (model_dim % heads != 0) throw InvalidArgument("llm config: model_dim must be divisible by heads");
    if (head_dim() % 2 != 0) throw InvalidArgument("llm config: head_dim must be even for rotary pairs");
    if (!(rope_base > 1.0)) throw InvalidArgument("llm config: rope_base must be > 1");
    if (prompt_tokens < 0) throw InvalidArgument("llm config: prompt_tokens must be >= 0");
}

const char* to_string(RefreshMode m) {
    switch (m) {
        case RefreshMode::full: return "full";
        case RefreshMode::naive_reuse: return "naive_reuse";
        case RefreshMode::selective: return "selective";
    }
    return "?";
}

RefreshMode parse_refresh_mode(const std::string& s) {
    if (s == "full") return RefreshMode::full;
    if (s == "naive_reuse") return RefreshMode::naive_reuse;
    if (s == "selective") return RefreshMode::selective;
    throw InvalidArgument("unknown refresh mode: " + s);
}

const char* to_string(Disposition d) {
    switch (d) {
        case Disposition::recompute_new: return "RECOMPUTE_NEW";
        case Disposition::recompute_anchor: return "RECOMPUTE_ANCHOR";
        case Disposition::reuse: return "REUSE";
    }
    return "?";
}

std::optional<int> CacheSegment::find(const TokenOrigin& o) const {
    if (std::is_sorted(origins.begin(), origins.end())) {
        auto it = std::lower_bound(origins.begin(), origins.end(), o);
        if (it == origins.end() || *it != o) return std::nullopt;
        return static_cast<int>(it - origins.begin());
    }
    auto it = std::find(origins.begin(), origins.end(), o);
    if (it == origins.end()) return std::nullopt;
    return static_cast<int>(it - origins.begin());
}

std::size_t PrefillPlan::count(Disposition d) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [d](const PlanEntry& e) { return e.disposition == d; }));
}

void rope_rotate_inplace(std::span<double> key, int delta_p, const LlmConfig& cfg) {
    const int hd = cfg.head_dim();
    if (hd % 2 != 0) throw InvalidArgument("rope_rotate: head_dim must be even");
    if (key.size() != static_cast<std::size_t>(cfg.model_dim)) throw InvalidArgument("rope_rotate: key length mismatch");
    for (int i = 0; i < hd / 2; ++i) {
        const double inv_freq = std::pow(cfg.rope_base, -2.0 * i / hd);
        const double angle = static_cast<double>(delta_p) * inv_freq;
        const double c = std::cos(angle), s = std::sin(angle);
        for (int h = 0; h < cfg.heads; ++h) {
            double& x = key[static_cast<std::size_t>(h * hd + 2 * i)];
            double& y = key[static_cast<std::size_t>(h * hd + 2 * i + 1)];
            const double nx = x * c - y * s;
            const double ny = x * s + y * c;
            x = nx;
            y = ny;
        }
    }
}

std::vector<double> rope_rotate(std::span<const double> key, int delta_p, const LlmConfig& cfg) {
    std::vector<double> out(key.begin(), key.end());
    rope_rotate_inplace(out, delta_p, cfg);
    return out;
}

namespace {

void rms_norm(std::span<const double> x, std::span<double> out) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv;
}

}  // namespace

PrefillModel::PrefillModel(LlmConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(cfg_.seed);
    const int d = cfg_.model_dim;
    w_in_ = random_matrix(d, cfg_.token_dim, rng);
    layers_.resize(static_cast<std::size_t>(cfg_.layers));
    for (auto& l : layers_) {
        l.wq = random_matrix(d, d, rng);
        l.wk = random_matrix(d, d, rng);
        l.wv = random_matrix(d, d, rng);
        l.wo = random_matrix(d, d, rng);
        l.up = random_matrix(4 * d, d, rng);
        l.up_b = random_vector(4 * d, 0.05, rng);
        l.down = random_matrix(d, 4 * d, rng);
        l.down_b = random_vector(d, 0.05, rng);
    }
    prompt_ = Matrix(cfg_.prompt_tokens, cfg_.token_dim);
    for (auto& v : prompt_.data) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
}

void PrefillModel::embed_input(std::span<const double> embedding, std::span<double> out) const {
    if (embedding.size() != static_cast<std::size_t>(cfg_.token_dim)) throw InvalidArgument("prefill: embedding width mismatch");
    matvec(w_in_, embedding, out);
}

void PrefillModel::project_kv_q(const Layer& layer, std::span<const double> h, int position, std::span<double> q,
                                std::span<double> k, std::span<double> v) const {
    std::vector<double> x(h.size());
    rms_norm(h, x);
    matvec(layer.wq, x, q);
    matvec(layer.wk, x, k);
    matvec(layer.wv, x, v);
    rope_rotate_inplace(q, position, cfg_);
    rope_rotate_inplace(k, position, cfg_);
}

void PrefillModel::attend(std::span<const double> q, const Matrix& keys, const Matrix& values, int upto,
                          std::span<double> out) const {
    const int hd = cfg_.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<double> w(static_cast<std::size_t>(upto) + 1);
    for (int h = 0; h < cfg_.heads; ++h) {
        const int off = h * hd;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= upto; ++j) {
            const auto kj = keys.row(j);
            double s = 0.0;
            for (int c = 0; c < hd; ++c) s += q[static_cast<std::size_t>(off + c)] * kj[static_cast<std::size_t>(off + c)];
            w[static_cast<std::size_t>(j)] = s * scale;
            mx = std::max(mx, w[static_cast<std::size_t>(j)]);
        }
        double z = 0.0;
        for (int j = 0; j <= upto; ++j) z += (w[static_cast<std::size_t>(j)] = std::exp(w[static_cast<std::size_t>(j)] - mx));
        for (int c = 0; c < hd; ++c) out[static_cast<std::size_t>(off + c)] = 0.0;
        for (int j = 0; j <= upto; ++j) {
            const double a = w[static_cast<std::size_t>(j)] / z;
            const auto vj = values.row(j);
            for (int c = 0; c < hd; ++c) out[static_cast<std::size_t>(off + c)] += a * vj[static_cast<std::size_t>(off + c)];
        }
    }
}

void PrefillModel::finish_block(const Layer& layer, std::span<const double> h, std::span<const double> attn,
                                std::span<double> out) const {
    const std::size_t d = h.size();
    std::vector<double> o(d), mid(d), x(d), up(static_cast<std::size_t>(layer.up.rows)), down(d);
    matvec(layer.wo, attn, o);
    for (std::size_t i = 0; i < d; ++i) mid[i] = h[i] + o[i];
    rms_norm(mid, x);
    matvec(layer.up, x, up, layer.up_b);
    for (auto& u : up) u = gelu(u);
    matvec(layer.down, up, down, layer.down_b);
    for (std::size_t i = 0; i < d; ++i) out[i] = mid[i] + down[i];
}

void PrefillModel::run_layers(const std::vector<int>& compute, Matrix& hidden, CacheSegment& seg,
                              const CacheSegment* prev, const PrefillPlan* plan) const {
    const int n = seg.size();
    const int d = cfg_.model_dim;
    const int m = static_cast<int>(compute.size());
    seg.keys.assign(static_cast<std::size_t>(cfg_.layers), Matrix(n, d));
    seg.values.assign(static_cast<std::size_t>(cfg_.layers), Matrix(n, d));
    Matrix queries(n, d);
    Matrix next(n, d);

    for (int l = 0; l < cfg_.layers; ++l) {
        const Layer& layer = layers_[static_cast<std::size_t>(l)];
        Matrix& K = seg.keys[static_cast<std::size_t>(l)];
        Matrix& V = seg.values[static_cast<std::size_t>(l)];

        if (plan) {
            for (const auto& e : plan->entries) {
                if (e.disposition != Disposition::reuse) continue;
                const auto src_k = prev->keys[static_cast<std::size_t>(l)].row(e.p_old);
                const auto src_v = prev->values[static_cast<std::size_t>(l)].row(e.p_old);
                auto dst_k = K.row(e.p_new);
                std::copy(src_k.begin(), src_k.end(), dst_k.begin());
                rope_rotate_inplace(dst_k, e.p_new - e.p_old, cfg_);
                auto dst_v = V.row(e.p_new);
                std::copy(src_v.begin(), src_v.end(), dst_v.begin());
            }
        }

#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            const int p = compute[static_cast<std::size_t>(i)];
            project_kv_q(layer, hidden.row(p), p, queries.row(p), K.row(p), V.row(p));
        }
#pragma omp parallel for schedule(dynamic, 8)
        for (int i = 0; i < m; ++i) {
            const int p = compute[static_cast<std::size_t>(i)];
            std::vector<double> attn(static_cast<std::size_t>(d));
            attend(queries.row(p), K, V, p, attn);
            finish_block(layer, hidden.row(p), attn, next.row(p));
        }
        for (int p : compute) {
            auto src = next.row(p);
            std::copy(src.begin(), src.end(), hidden.row(p).begin());
        }
    }
}

PrefillResult PrefillModel::full_prefill(const PrefillInput& input, int window) const {
    const int n = static_cast<int>(input.origins.size());
    if (n == 0) throw InvalidArgument("full_prefill: empty token sequence");
    if (input.embeddings.rows != n || input.embeddings.cols != cfg_.token_dim) {
        throw InvalidArgument("full_prefill: embeddings shape does not match token sequence");
    }
    PrefillResult res;
    CacheSegment& seg = res.segment;
    seg.window = window;
    seg.frames = input.frames;
    seg.origins = input.origins;
    seg.embeddings = input.embeddings;
    Matrix hidden(n, cfg_.model_dim);
    for (int p = 0; p < n; ++p) embed_input(input.embeddings.row(p), hidden.row(p));

    std::vector<int> all(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) all[static_cast<std::size_t>(p)] = p;
    run_layers(all, hidden, seg, nullptr, nullptr);
    seg.hidden = std::move(hidden);
    res.recomputed = static_cast<std::size_t>(n);
    return res;
}

PrefillResult PrefillModel::selective_prefill(const PrefillPlan& plan, const CacheSegment& prev,
                                              const PrefillInput& input, int window) const {
    const int n = static_cast<int>(plan.entries.size());
    if (n == 0) throw InvalidArgument("selective_prefill: empty plan");
    if (input.origins.size() != plan.entries.size()) throw InvalidArgument("selective_prefill: plan/input length mismatch");
    if (input.embeddings.cols != cfg_.token_dim || input.embeddings.rows != n) {
        throw InvalidArgument("selective_prefill: embeddings shape does not match token sequence");
    }
    if (static_cast<int>(prev.keys.size()) != cfg_.layers && plan.count(Disposition::reuse) > 0) {
        throw InvalidArgument("selective_prefill: previous segment has a different layer count");
    }

    PrefillResult res;
    CacheSegment& seg = res.segment;
    seg.window = window;
    seg.frames = input.frames;
    seg.origins = input.origins;
    seg.embeddings = Matrix(n, cfg_.token_dim);
    Matrix hidden(n, cfg_.model_dim);
    std::vector<int> compute;

    for (int p = 0; p < n; ++p) {
        const PlanEntry& e = plan.entries[static_cast<std::size_t>(p)];
        if (e.p_new != p || e.origin != input.origins[static_cast<std::size_t>(p)]) {
            throw InvalidArgument("selective_prefill: plan entry " + std::to_string(p) + " does not match the input");
        }
        std::span<const double> emb;
        if (e.disposition == Disposition::recompute_new) {
            emb = input.embeddings.row(p);
        } else {
            if (e.p_old < 0 || e.p_old >= prev.size() || prev.origins[static_cast<std::size_t>(e.p_old)] != e.origin) {
                throw InvalidArgument("selective_prefill: plan entry " + std::to_string(p) +
                                      " has no matching token in the previous segment");
            }
            if (e.disposition == Disposition::recompute_anchor && prev.embeddings.rows != prev.size()) {
                throw InvalidArgument("selective_prefill: missing cached embedding for anchor " + std::to_string(p));
            }
            emb = prev.embeddings.row(e.p_old);
        }
        std::copy(emb.begin(), emb.end(), seg.embeddings.row(p).begin());
        if (e.disposition == Disposition::reuse) {
            const auto h = prev.hidden.row(e.p_old);
            std::copy(h.begin(), h.end(), hidden.row(p).begin());
        } else {
            embed_input(emb, hidden.row(p));
            compute.push_back(p);
        }
    }

    run_layers(compute, hidden, seg, &prev, &plan);
    seg.hidden = std::move(hidden);
    res.recomputed = compute.size();
    res.rotated = plan.count(Disposition::reuse);
    return res;
}

std::vector<double> PrefillModel::first_layer_key(std::span<const double> embedding, int position) const {
    const int d = cfg_.model_dim;
    std::vector<double> h(static_cast<std::size_t>(d)), q(h.size()), k(h.size()), v(h.size());
    embed_input(embedding, h);
    project_kv_q(layers_.front(), h, position, q, k, v);
    return k;
}

PrefillPlan plan_refresh(const CacheSegment& prev, std::span<const TokenOrigin> current, const FrameTypeLookup& type_of,
                         const OverlapSplit& split, RefreshMode mode) {
    if (!split.overlap.empty() && (split.overlap.begin < prev.frames.begin || split.overlap.end > prev.frames.end)) {
        throw InvalidArgument("plan_refresh: overlap [" + std::to_string(split.overlap.begin) + ", " +
                              std::to_string(split.overlap.end) + ") is not covered by the previous segment");
    }
    PrefillPlan plan;
    plan.entries.reserve(current.size());
    for (std::size_t i = 0; i < current.size(); ++i) {
        const TokenOrigin& o = current[i];
        if (i > 0 && !(current[i - 1] < o)) {
            throw InvalidArgument("plan_refresh: current tokens are not in (frame, group) order");
        }
        PlanEntry e{o, Disposition::recompute_new, -1, static_cast<int>(i)};
        if (!o.prompt && mode != RefreshMode::full && split.overlap.contains(o.frame)) {
            if (auto src = prev.find(o)) {
                e.p_old = *src;
                const bool anchor = mode == RefreshMode::selective &&
                                    (o.frame == split.overlap.begin || type_of(o.frame) == FrameType::I);
                e.disposition = anchor ? Disposition::recompute_anchor : Disposition::reuse;
            }
        }
        plan.entries.push_back(e);
    }
    return plan;
}

DriftStats measure_drift(const Matrix& a, const Matrix& b, std::uint64_t readout_seed, int classes) {
    if (a.rows != b.rows || a.cols != b.cols) throw InvalidArgument("measure_drift: shape mismatch");
    DriftStats st;
    if (a.rows == 0) return st;
    std::mt19937_64 rng(readout_seed);
    const Matrix readout = random_matrix(classes, a.cols, rng);
    std::vector<double> la(static_cast<std::size_t>(classes)), lb(la.size()), diff(static_cast<std::size_t>(a.cols));
    double sum = 0.0;
    int agree = 0;
    for (int p = 0; p < a.rows; ++p) {
        const auto ra = a.row(p), rb = b.row(p);
        for (int c = 0; c < a.cols; ++c) diff[static_cast<std::size_t>(c)] = ra[static_cast<std::size_t>(c)] - rb[static_cast<std::size_t>(c)];
        const double rel = l2_norm(diff) / std::max(l2_norm(rb), 1e-12);
        sum += rel;
        st.max_rel_l2 = std::max(st.max_rel_l2, rel);
        matvec(readout, ra, la);
        matvec(readout, rb, lb);
        if (std::max_element(la.begin(), la.end()) - la.begin() == std::max_element(lb.begin(), lb.end()) - lb.begin()) {
            ++agree;
        }
    }
    st.mean_rel_l2 = sum / a.rows;
    st.readout_agreement = static_cast<double>(agree) / a.rows;
    return st;
}

}  // namespace cvlm
