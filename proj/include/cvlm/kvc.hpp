#pragma once

// Toy decoder-only prefill stage with rotary position embeddings and
// selective KV-cache refresh across sliding windows.
//
// A window's token sequence is the retained visual tokens in (frame, group)
// order followed by the fixed prompt tokens; positions are the compacted
// indices 0..n-1 of that sequence. When the window slides, overlap tokens
// can keep their cached keys/values: keys are rotated by the position shift
// (K' = R(p_new - p_old) K), values are copied unchanged. Anchor tokens are
// recomputed from their cached input embeddings under the new context.

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cvlm/codec.hpp"
#include "cvlm/dense.hpp"
#include "cvlm/windower.hpp"

namespace cvlm {

struct LlmConfig {
    int layers = 2;
    int heads = 2;
    int model_dim = 32;
    int token_dim = 32;
    double rope_base = 10000.0;
    std::uint64_t seed = 11;
    int prompt_tokens = 4;

    int head_dim() const { return model_dim / heads; }
    void validate() const;
};

enum class RefreshMode { full, naive_reuse, selective };

const char* to_string(RefreshMode m);
RefreshMode parse_refresh_mode(const std::string& s);

/// Where a token came from. Prompt tokens sort after every visual token.
struct TokenOrigin {
    bool prompt = false;
    int frame = 0;  // prompt tokens: unused (0)
    int group = 0;  // prompt tokens: index within the prompt

    static TokenOrigin visual(int frame, int group) { return {false, frame, group}; }
    static TokenOrigin prompt_token(int i) { return {true, 0, i}; }

    auto operator<=>(const TokenOrigin&) const = default;
};

/// Per-window KV cache plus what is needed to reuse it in the next window.
struct CacheSegment {
    int window = 0;
    FrameRange frames;                // frame range of the window it was computed under
    std::vector<TokenOrigin> origins;  // position -> origin
    std::vector<Matrix> keys;          // per layer, n x model_dim, RoPE applied at the position
    std::vector<Matrix> values;        // per layer, n x model_dim
    Matrix embeddings;                 // n x token_dim input embeddings
    Matrix hidden;                     // n x model_dim final hidden states

    int size() const { return static_cast<int>(origins.size()); }
    std::optional<int> find(const TokenOrigin& o) const;

    bool operator==(const CacheSegment&) const = default;
};

enum class Disposition : std::uint8_t { recompute_new, recompute_anchor, reuse };

const char* to_string(Disposition d);

struct PlanEntry {
    TokenOrigin origin;
    Disposition disposition = Disposition::recompute_new;
    int p_old = -1;  // reuse / anchor only
    int p_new = 0;
};

struct PrefillPlan {
    std::vector<PlanEntry> entries;

    std::size_t count(Disposition d) const;
    std::size_t recomputed() const { return entries.size() - count(Disposition::reuse); }
};

/// Current-window token sequence. Rows of `embeddings` align with `origins`;
/// rows of reused or anchored tokens are not read by selective_prefill.
struct PrefillInput {
    std::vector<TokenOrigin> origins;
    Matrix embeddings;
    FrameRange frames;
};

struct PrefillResult {
    CacheSegment segment;
    std::size_t recomputed = 0;  // positions whose Q/K/V/MLP were computed
    std::size_t rotated = 0;     // reused keys corrected (per layer count not included)
};

/// Rotates each (2i, 2i+1) channel pair of every head by delta_p * base^(-2i/head_dim).
std::vector<double> rope_rotate(std::span<const double> key, int delta_p, const LlmConfig& cfg);
void rope_rotate_inplace(std::span<double> key, int delta_p, const LlmConfig& cfg);

class PrefillModel {
public:
    explicit PrefillModel(LlmConfig cfg);

    const LlmConfig& config() const { return cfg_; }

    /// Fixed prompt embeddings (prompt_tokens x token_dim), identical for every window.
    const Matrix& prompt() const { return prompt_; }

    /// Standard causal prefill over the whole sequence.
    PrefillResult full_prefill(const PrefillInput& input, int window) const;

    /// Prefill that reuses `prev` per `plan`. REUSE tokens get rotated keys and copied values and no
    /// query/MLP compute; anchors are recomputed from `prev.embeddings`; new tokens from `input`.
    PrefillResult selective_prefill(const PrefillPlan& plan, const CacheSegment& prev, const PrefillInput& input,
                                    int window) const;

    /// Input projection followed by RMS norm and the key projection of layer 0, at `position`.
    /// Exposed so tests can recompute a first-layer key at any position.
    std::vector<double> first_layer_key(std::span<const double> embedding, int position) const;

private:
    struct Layer {
        Matrix wq, wk, wv, wo, up, down;
        std::vector<double> up_b, down_b;
    };

    void embed_input(std::span<const double> embedding, std::span<double> out) const;
    void project_kv_q(const Layer& layer, std::span<const double> h, int position, std::span<double> q,
                      std::span<double> k, std::span<double> v) const;
    void attend(std::span<const double> q, const Matrix& keys, const Matrix& values, int upto,
                std::span<double> out) const;
    void finish_block(const Layer& layer, std::span<const double> h, std::span<const double> attn,
                      std::span<double> out) const;
    // Runs all layers for the positions in `compute`, with keys/values of other positions pre-filled.
    void run_layers(const std::vector<int>& compute, Matrix& hidden, CacheSegment& seg, const CacheSegment* prev,
                    const PrefillPlan* plan) const;

    LlmConfig cfg_;
    Matrix w_in_;
    std::vector<Layer> layers_;
    Matrix prompt_;
};

using FrameTypeLookup = std::function<FrameType(int frame)>;

/// Assigns a disposition to every current-window token.
///
/// full: everything recomputed. naive_reuse: every overlap token cached in `prev` is reused.
/// selective: like naive_reuse, except overlap tokens of I-frames and of the first overlap frame
/// are anchors. Prompt tokens and tokens without a cached source are always recomputed.
PrefillPlan plan_refresh(const CacheSegment& prev, std::span<const TokenOrigin> current, const FrameTypeLookup& type_of,
                         const OverlapSplit& split, RefreshMode mode);

struct DriftStats {
    double mean_rel_l2 = 0.0;
    double max_rel_l2 = 0.0;
    double readout_agreement = 1.0;
};

/// Per-position ||a - b|| / max(||b||, 1e-12), plus argmax agreement of a fixed random readout.
DriftStats measure_drift(const Matrix& a, const Matrix& b, std::uint64_t readout_seed = 1234, int classes = 16);

}  // namespace cvlm
