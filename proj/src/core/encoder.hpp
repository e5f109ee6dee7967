#pragma once

#include <array>
#include <optional>
#include <vector>

#include "core/layers.hpp"

namespace raseg {

// Configurable stand-in for the hierarchical attention backbone: five stride-2
// stages with overlapped 3x3 patch embeds; stages listed in attn_stages run a
// spatial-reduction self-attention block, the rest a plain conv block.
struct EncoderConfig {
    std::array<int, 5> stage_dims{8, 16, 32, 64, 96};  // channels of P1..P5
    std::vector<int> attn_stages{3, 4, 5};
    std::vector<int> heads{1, 2, 2};      // aligned with attn_stages
    std::vector<int> sr_ratios{2, 2, 1};  // aligned with attn_stages
    int decoder_width = 32;               // C, the uniform pyramid channel count

    void validate() const;
    bool is_attn_stage(int stage) const;
    int attn_index(int stage) const;  // position within attn_stages
};

// Feature maps at strides 2^3..2^7, all with the decoder width C.
template <class S>
struct Pyramid {
    std::array<TensorT<S>, 5> maps;

    TensorT<S>& level(int i) { return maps[size_t(i - 3)]; }
    const TensorT<S>& level(int i) const { return maps[size_t(i - 3)]; }
};

// Scaled dot-product attention over all H*W query tokens with keys/values
// taken from an sr-strided average-pool reduction; residual added.
template <class S>
struct SelfAttention {
    LinearLayer<S> q, k, v, o;
    int heads = 1;
    int sr_ratio = 1;
    int dim = 0;

    SelfAttention() = default;
    SelfAttention(int dim_, int heads_, int sr, Rng& rng);

    TensorT<S> forward(const TensorT<S>& x) const;
    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(int h, int w, Complexity& c) const;
};

// Two linear layers with gelu, expansion 4, residual added.
template <class S>
struct FeedForward {
    LinearLayer<S> fc1, fc2;

    FeedForward() = default;
    FeedForward(int dim, Rng& rng);

    TensorT<S> forward(const TensorT<S>& x) const;
    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(int h, int w, Complexity& c) const;
};

template <class S>
struct EncoderStage {
    Conv2dLayer<S> embed_conv;  // 3x3 stride 2 pad 1
    BatchNorm2dLayer<S> embed_bn;
    std::optional<SelfAttention<S>> attn;
    std::optional<FeedForward<S>> ff;
    std::optional<ConvBnLayer<S>> conv_block;  // body of conv-only stages

    TensorT<S> forward(const TensorT<S>& x, RunMode mode);
    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(int in_h, int in_w, Complexity& c) const;
};

template <class S>
struct Encoder {
    EncoderConfig cfg;
    std::array<EncoderStage<S>, 5> stages;
    Conv2dLayer<S> p6_conv;  // 1x1 stage_dims[4] -> C
    BatchNorm2dLayer<S> p6_bn;
    std::array<Conv2dLayer<S>, 3> compress;  // 3x3 per level P3..P5 -> C

    Encoder() = default;
    Encoder(const EncoderConfig& cfg, Rng& rng);

    // Raw stage outputs P1..P5 (P1, P2 are computed but unused downstream).
    std::array<TensorT<S>, 5> forward_stages(const TensorT<S>& image, RunMode mode);

    // P6 = maxpool3x3/s2(bn(conv1x1(P5))), P7 = maxpool3x3/s2(P6).
    std::pair<TensorT<S>, TensorT<S>> derive_p6_p7(const TensorT<S>& p5, RunMode mode);

    // Independent 3x3 convs mapping P3..P5 to C channels.
    std::array<TensorT<S>, 3> compress_levels(const TensorT<S>& p3, const TensorT<S>& p4,
                                              const TensorT<S>& p5) const;

    Pyramid<S> forward_pyramid(const TensorT<S>& image, RunMode mode);

    void visit(const std::string& name, const ParamVisitor<S>& v);
    void complexity(int input_size, Complexity& c) const;
};

// Stand-alone patch embed used by the encoder stages: stride-2 overlapped
// conv (kernel 3, pad 1) + batch norm.
template <class S>
TensorT<S> patch_embed(const TensorT<S>& x, Conv2dLayer<S>& conv, BatchNorm2dLayer<S>& bn,
                       RunMode mode);

}  // namespace raseg
