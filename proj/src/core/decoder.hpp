#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/encoder.hpp"
#include "core/layers.hpp"

namespace raseg {

enum class RaVariant { Sigmoid, Softmax };

struct DecoderConfig {
    int channels = 32;  // C, pyramid width
    int repeats = 4;    // D, stacked block count
    int n_classes = 1;  // 1 = binary
    RaVariant ra_variant = RaVariant::Sigmoid;
    bool use_ra = true;          // false = plain weighted-BiFPN baseline
    bool use_bottleneck = true;  // false = plain 3x3 conv output blocks
    double fusion_eps = 1e-4;

    int n_out() const { return n_classes <= 1 ? 1 : n_classes; }
    void validate() const;
};

template <class S>
struct DecoderOutputs {
    TensorT<S> final_logits;                 // [N, n_out, H_in, W_in]
    std::vector<TensorT<S>> supervision;     // coarse -> fine, pre-upsampling
};

// Learned non-negative scalar weights normalized by their sum plus eps:
// y = sum_i relu(w_i) / (eps + sum_j relu(w_j)) * x_i
template <class S>
struct FastFusion {
    TensorT<S> w;  // [1,1,1,k]
    double eps = 1e-4;

    FastFusion() = default;
    FastFusion(int k, double eps_);

    TensorT<S> forward(const std::vector<TensorT<S>>& inputs) const;
    void visit(const std::string& name, const ParamVisitor<S>& v) { v(name + ".w", w, true); }
    void complexity(Complexity& c) const { c.params += uint64_t(w.numel()); }

    // Normalized coefficients for the current weight values.
    std::vector<double> coefficients() const;
};

// 1x1 reduce -> 3x3 -> 1x1 expand, batch norm after each conv, relu after the
// first two. Cuts conv parameters of repeated C->C blocks by ~2.8x.
template <class S>
struct BottleneckConv {
    ConvBnLayer<S> reduce, mid, expand;

    BottleneckConv() = default;
    BottleneckConv(int in_ch, int out_ch, Rng& rng);

    TensorT<S> forward(const TensorT<S>& x, RunMode mode);
    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(int h, int w, Complexity& c) const;
    uint64_t conv_param_count() const;
};

// Output block of a decoder node: bottleneck, or one plain 3x3 conv+bn+relu
// when bottlenecks are ablated away.
template <class S>
struct OutputBlock {
    std::optional<BottleneckConv<S>> bottleneck;
    std::optional<ConvBnLayer<S>> plain;

    OutputBlock() = default;
    OutputBlock(int in_ch, int out_ch, bool use_bottleneck, Rng& rng);

    TensorT<S> forward(const TensorT<S>& x, RunMode mode);
    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(int h, int w, Complexity& c) const;
};

// The reverse gate: features scaled by the complement of the attention map.
template <class S>
TensorT<S> ra_reverse_gate(const TensorT<S>& x, const TensorT<S>& logit);

// Reverse attention. Sigmoid variant gates all channels with 1-sigmoid(logit);
// softmax variant gates per class and concatenates the n reversed maps into an
// n*C volume before the output block.
template <class S>
struct ReverseAttention {
    RaVariant variant = RaVariant::Sigmoid;
    int n_classes = 1;
    Conv2dLayer<S> attn_conv;  // 3x3, C -> 1 or C -> n
    OutputBlock<S> out;

    ReverseAttention() = default;
    ReverseAttention(int channels, RaVariant variant_, int n_classes_, bool use_bottleneck,
                     Rng& rng);

    // returns {gated features, attention logits}
    std::pair<TensorT<S>, TensorT<S>> forward(const TensorT<S>& x, RunMode mode);
    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(int h, int w, Complexity& c) const;
};

// Coarse-to-fine boundary refinement: each level fuses its input with the
// upsampled coarser output, then runs RA (or a plain output block when RA is
// ablated).
template <class S>
struct RefinementPass {
    std::array<FastFusion<S>, 4> fuse;                      // levels 6..3
    std::array<std::optional<ReverseAttention<S>>, 4> ra;   // set when use_ra
    std::array<std::optional<OutputBlock<S>>, 4> plain_out; // set when !use_ra

    struct Result {
        Pyramid<S> levels;
        std::array<TensorT<S>, 4> logits;  // levels 6..3 (index i -> level 6-i); empty if no RA
    };

    RefinementPass() = default;
    RefinementPass(const DecoderConfig& cfg, Rng& rng);

    Result forward(const Pyramid<S>& in, RunMode mode);
    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(const std::array<int, 5>& sizes, Complexity& c) const;
};

// Fine-to-coarse aggregation: each level fuses its input with the max-pooled
// finer output and passes through an output block.
template <class S>
struct AggregationPass {
    std::array<FastFusion<S>, 4> fuse;    // levels 4..7
    std::array<OutputBlock<S>, 4> out;

    AggregationPass() = default;
    AggregationPass(const DecoderConfig& cfg, Rng& rng);

    Pyramid<S> forward(const Pyramid<S>& in, RunMode mode);
    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(const std::array<int, 5>& sizes, Complexity& c) const;
};

template <class S>
struct Decoder {
    DecoderConfig cfg;

    struct Block {
        RefinementPass<S> refine;
        AggregationPass<S> aggregate;
    };
    std::vector<Block> blocks;      // D repeats, independent parameters
    RefinementPass<S> final_refine; // the last refinement branch
    Conv2dLayer<S> p7_head;         // 3x3 C -> n_out on the final level-7 map
    // Per-level prediction heads when RA logits cannot serve as predictions
    // (RA ablated, or sigmoid RA with n_classes >= 2).
    std::array<std::optional<Conv2dLayer<S>>, 4> aux_heads;  // levels 6..3

    Decoder() = default;
    Decoder(const DecoderConfig& cfg, Rng& rng);

    bool ra_logits_are_predictions() const;
    DecoderOutputs<S> forward(const Pyramid<S>& pyr, int input_h, int input_w, RunMode mode);

    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(int input_size, Complexity& c) const;
};

// Spatial sizes of pyramid levels 3..7 for a square input divisible by 32.
std::array<int, 5> pyramid_sizes(int input_size);

}  // namespace raseg
