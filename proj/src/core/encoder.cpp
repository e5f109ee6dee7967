#include "core/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace raseg {

using detail::check;

void EncoderConfig::validate() const {
    check(attn_stages.size() == heads.size() && attn_stages.size() == sr_ratios.size(),
          "encoder config: attn_stages/heads/sr_ratios lengths differ");
    for (size_t i = 0; i < attn_stages.size(); ++i) {
        const int stage = attn_stages[i];
        check(stage >= 1 && stage <= 5, "encoder config: attention stage out of range");
        check(stage_dims[size_t(stage - 1)] % heads[i] == 0,
              "encoder config: stage dim not divisible by head count");
        check(sr_ratios[i] >= 1, "encoder config: sr_ratio must be >= 1");
    }
    for (const int d : stage_dims) check(d >= 1, "encoder config: stage dim must be >= 1");
    check(decoder_width >= 2 && decoder_width % 2 == 0,
          "encoder config: decoder width must be even");
}

bool EncoderConfig::is_attn_stage(int stage) const {
    return std::find(attn_stages.begin(), attn_stages.end(), stage) != attn_stages.end();
}

int EncoderConfig::attn_index(int stage) const {
    const auto it = std::find(attn_stages.begin(), attn_stages.end(), stage);
    check(it != attn_stages.end(), "encoder config: not an attention stage");
    return int(it - attn_stages.begin());
}

// ---------------------------------------------------------------------------

template <class S>
SelfAttention<S>::SelfAttention(int dim_, int heads_, int sr, Rng& rng)
    : q(dim_, dim_, rng), k(dim_, dim_, rng), v(dim_, dim_, rng), o(dim_, dim_, rng),
      heads(heads_), sr_ratio(sr), dim(dim_) {
    check(dim_ % heads_ == 0, "self attention: dim not divisible by heads");
}

template <class S>
TensorT<S> SelfAttention<S>::forward(const TensorT<S>& x) const {
    const Shape s = x.shape();
    check(s.c == dim, "self attention: channel mismatch");
    check(s.h % sr_ratio == 0 && s.w % sr_ratio == 0,
          "self attention: spatial size not divisible by sr_ratio");

    const TensorT<S> tokens = im2tokens(x);
    const TensorT<S> kv_src =
        sr_ratio > 1 ? im2tokens(avg_pool2d(x, sr_ratio, sr_ratio, 0)) : tokens;

    TensorT<S> qh = split_heads(q.forward(tokens), heads);
    TensorT<S> kh = split_heads(k.forward(kv_src), heads);
    TensorT<S> vh = split_heads(v.forward(kv_src), heads);

    const int head_dim = dim / heads;
    TensorT<S> att = matmul(qh, transpose_last2(kh));
    att = scalar_mul(att, 1.0 / std::sqrt(double(head_dim)));
    att = softmax_lastdim(att);

    TensorT<S> out = o.forward(merge_heads(matmul(att, vh)));
    return add(x, tokens2im(out, s.h, s.w));
}

template <class S>
void SelfAttention<S>::visit(const std::string& name, const ParamVisitor<S>& vis) {
    q.visit(name + ".q", vis);
    k.visit(name + ".k", vis);
    v.visit(name + ".v", vis);
    o.visit(name + ".o", vis);
}

template <class S>
void SelfAttention<S>::complexity(int h, int w, Complexity& c) const {
    const int64_t t = int64_t(h) * w;
    const int64_t tr = t / (int64_t(sr_ratio) * sr_ratio);
    q.complexity(t, c);
    k.complexity(tr, c);
    v.complexity(tr, c);
    o.complexity(t, c);
    // QK^T and AV batched matmuls
    c.flops += 2ull * 2ull * uint64_t(t) * uint64_t(tr) * uint64_t(dim);
}

// ---------------------------------------------------------------------------

template <class S>
FeedForward<S>::FeedForward(int dim, Rng& rng) : fc1(dim, dim * 4, rng), fc2(dim * 4, dim, rng) {}

template <class S>
TensorT<S> FeedForward<S>::forward(const TensorT<S>& x) const {
    const Shape s = x.shape();
    TensorT<S> y = im2tokens(x);
    y = fc2.forward(gelu(fc1.forward(y)));
    return add(x, tokens2im(y, s.h, s.w));
}

template <class S>
void FeedForward<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    fc1.visit(name + ".fc1", v);
    fc2.visit(name + ".fc2", v);
}

template <class S>
void FeedForward<S>::complexity(int h, int w, Complexity& c) const {
    const int64_t t = int64_t(h) * w;
    fc1.complexity(t, c);
    fc2.complexity(t, c);
}

// ---------------------------------------------------------------------------

template <class S>
TensorT<S> patch_embed(const TensorT<S>& x, Conv2dLayer<S>& conv, BatchNorm2dLayer<S>& bn,
                       RunMode mode) {
    check(x.shape().h >= 2 && x.shape().w >= 2, "patch_embed: input too small");
    return bn.forward(conv.forward(x), mode);
}

template <class S>
TensorT<S> EncoderStage<S>::forward(const TensorT<S>& x, RunMode mode) {
    TensorT<S> y = patch_embed(x, embed_conv, embed_bn, mode);
    if (attn) y = ff->forward(attn->forward(y));
    if (conv_block) y = conv_block->forward(y, mode);
    return y;
}

template <class S>
void EncoderStage<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    embed_conv.visit(name + ".embed.conv", v);
    embed_bn.visit(name + ".embed.bn", v);
    if (attn) attn->visit(name + ".attn", v);
    if (ff) ff->visit(name + ".ff", v);
    if (conv_block) conv_block->visit(name + ".body", v);
}

template <class S>
void EncoderStage<S>::complexity(int in_h, int in_w, Complexity& c) const {
    embed_conv.complexity(in_h, in_w, c);
    embed_bn.complexity(c);
    const int h = embed_conv.out_dim(in_h), w = embed_conv.out_dim(in_w);
    if (attn) attn->complexity(h, w, c);
    if (ff) ff->complexity(h, w, c);
    if (conv_block) conv_block->complexity(h, w, c);
}

// ---------------------------------------------------------------------------

template <class S>
Encoder<S>::Encoder(const EncoderConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    int in_ch = 3;
    for (int stage = 1; stage <= 5; ++stage) {
        const int out_ch = cfg.stage_dims[size_t(stage - 1)];
        EncoderStage<S>& st = stages[size_t(stage - 1)];
        st.embed_conv = Conv2dLayer<S>(in_ch, out_ch, 3, 2, 1, rng);
        st.embed_bn = BatchNorm2dLayer<S>(out_ch);
        if (cfg.is_attn_stage(stage)) {
            const int i = cfg.attn_index(stage);
            st.attn.emplace(out_ch, cfg.heads[size_t(i)], cfg.sr_ratios[size_t(i)], rng);
            st.ff.emplace(out_ch, rng);
        } else {
            st.conv_block.emplace(out_ch, out_ch, 3, 1, 1, true, rng);
        }
        in_ch = out_ch;
    }
    const int c = cfg.decoder_width;
    p6_conv = Conv2dLayer<S>(cfg.stage_dims[4], c, 1, 1, 0, rng);
    p6_bn = BatchNorm2dLayer<S>(c);
    compress[0] = Conv2dLayer<S>(cfg.stage_dims[2], c, 3, 1, 1, rng);
    compress[1] = Conv2dLayer<S>(cfg.stage_dims[3], c, 3, 1, 1, rng);
    compress[2] = Conv2dLayer<S>(cfg.stage_dims[4], c, 3, 1, 1, rng);
}

template <class S>
std::array<TensorT<S>, 5> Encoder<S>::forward_stages(const TensorT<S>& image, RunMode mode) {
    const Shape s = image.shape();
    check(s.c == 3, "encoder: expected a 3-channel image");
    check(s.h % 32 == 0 && s.w % 32 == 0, "encoder: input size must be divisible by 32");
    std::array<TensorT<S>, 5> out;
    TensorT<S> x = image;
    for (int stage = 1; stage <= 5; ++stage) {
        x = stages[size_t(stage - 1)].forward(x, mode);
        out[size_t(stage - 1)] = x;
    }
    return out;
}

template <class S>
std::pair<TensorT<S>, TensorT<S>> Encoder<S>::derive_p6_p7(const TensorT<S>& p5, RunMode mode) {
    TensorT<S> p6 = max_pool2d(p6_bn.forward(p6_conv.forward(p5), mode), 3, 2, 1);
    TensorT<S> p7 = max_pool2d(p6, 3, 2, 1);
    check(p7.shape().h >= 1 && p7.shape().w >= 1, "derive_p6_p7: degenerate pyramid");
    return {p6, p7};
}

template <class S>
std::array<TensorT<S>, 3> Encoder<S>::compress_levels(const TensorT<S>& p3, const TensorT<S>& p4,
                                                      const TensorT<S>& p5) const {
    return {compress[0].forward(p3), compress[1].forward(p4), compress[2].forward(p5)};
}

template <class S>
Pyramid<S> Encoder<S>::forward_pyramid(const TensorT<S>& image, RunMode mode) {
    const auto raw = forward_stages(image, mode);
    const auto [p6, p7] = derive_p6_p7(raw[4], mode);
    const auto low = compress_levels(raw[2], raw[3], raw[4]);
    Pyramid<S> pyr;
    pyr.level(3) = low[0];
    pyr.level(4) = low[1];
    pyr.level(5) = low[2];
    pyr.level(6) = p6;
    pyr.level(7) = p7;
    return pyr;
}

template <class S>
void Encoder<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    for (int stage = 1; stage <= 5; ++stage)
        stages[size_t(stage - 1)].visit(name + ".stage" + std::to_string(stage), v);
    p6_conv.visit(name + ".p6.conv", v);
    p6_bn.visit(name + ".p6.bn", v);
    for (int i = 0; i < 3; ++i)
        compress[size_t(i)].visit(name + ".compress" + std::to_string(i + 3), v);
}

template <class S>
void Encoder<S>::complexity(int input_size, Complexity& c) const {
    int h = input_size, w = input_size;
    for (int stage = 1; stage <= 5; ++stage) {
        stages[size_t(stage - 1)].complexity(h, w, c);
        h = stages[size_t(stage - 1)].embed_conv.out_dim(h);
        w = stages[size_t(stage - 1)].embed_conv.out_dim(w);
    }
    // here h,w = P5 size
    p6_conv.complexity(h, w, c);
    p6_bn.complexity(c);
    int lh = input_size / 8, lw = input_size / 8;
    for (int i = 0; i < 3; ++i) {
        compress[size_t(i)].complexity(lh, lw, c);
        lh /= 2;
        lw /= 2;
    }
}

template struct SelfAttention<float>;
template struct SelfAttention<double>;
template struct FeedForward<float>;
template struct FeedForward<double>;
template struct EncoderStage<float>;
template struct EncoderStage<double>;
template struct Encoder<float>;
template struct Encoder<double>;
template TensorT<float> patch_embed<float>(const TensorT<float>&, Conv2dLayer<float>&,
                                           BatchNorm2dLayer<float>&, RunMode);
template TensorT<double> patch_embed<double>(const TensorT<double>&, Conv2dLayer<double>&,
                                             BatchNorm2dLayer<double>&, RunMode);

}  // namespace raseg
