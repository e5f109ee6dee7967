#include "core/decoder.hpp"

namespace raseg {

using detail::check;

void DecoderConfig::validate() const {
    check(channels >= 2 && channels % 2 == 0, "decoder config: channels must be even");
    check(repeats >= 1, "decoder config: repeats must be >= 1");
    check(n_classes >= 1, "decoder config: n_classes must be >= 1");
    if (ra_variant == RaVariant::Softmax)
        check(n_classes >= 2, "decoder config: softmax RA requires n_classes >= 2");
    check(fusion_eps > 0, "decoder config: fusion_eps must be positive");
}

std::array<int, 5> pyramid_sizes(int input_size) {
    check(input_size % 32 == 0, "pyramid_sizes: input size must be divisible by 32");
    const int s3 = input_size / 8, s4 = input_size / 16, s5 = input_size / 32;
    const int s6 = (s5 + 1) / 2, s7 = (s6 + 1) / 2;
    return {s3, s4, s5, s6, s7};
}

// ---------------------------------------------------------------------------
// fast normalized fusion

template <class S>
FastFusion<S>::FastFusion(int k, double eps_) : eps(eps_) {
    check(k >= 2, "fast fusion: needs at least two inputs");
    w = TensorT<S>::full(Shape{1, 1, 1, k}, S(1), true);
}

template <class S>
TensorT<S> FastFusion<S>::forward(const std::vector<TensorT<S>>& inputs) const {
    check(int(inputs.size()) == w.shape().w, "fast fusion: input count mismatch");
    check(inputs.size() >= 2, "fast fusion: needs at least two inputs");
    const Shape s0 = inputs[0].shape();
    for (const auto& t : inputs)
        check(t.shape() == s0, "fast fusion: inputs must share a shape");

    TensorT<S> r = relu(w);
    TensorT<S> denom = add_scalar(sum_all(r), eps);
    TensorT<S> acc;
    for (size_t i = 0; i < inputs.size(); ++i) {
        TensorT<S> term = mul(inputs[i], divide(pick(r, int64_t(i)), denom));
        acc = i == 0 ? term : add(acc, term);
    }
    return acc;
}

template <class S>
std::vector<double> FastFusion<S>::coefficients() const {
    double total = eps;
    for (const S v : w.values()) total += std::max(0.0, double(v));
    std::vector<double> coef;
    for (const S v : w.values()) coef.push_back(std::max(0.0, double(v)) / total);
    return coef;
}

// ---------------------------------------------------------------------------
// bottleneck / output block

template <class S>
BottleneckConv<S>::BottleneckConv(int in_ch, int out_ch, Rng& rng) {
    check(out_ch % 2 == 0, "bottleneck: channel count must be even");
    const int mid_ch = out_ch / 2;
    reduce = ConvBnLayer<S>(in_ch, mid_ch, 1, 1, 0, true, rng);
    mid = ConvBnLayer<S>(mid_ch, mid_ch, 3, 1, 1, true, rng);
    expand = ConvBnLayer<S>(mid_ch, out_ch, 1, 1, 0, false, rng);
}

template <class S>
TensorT<S> BottleneckConv<S>::forward(const TensorT<S>& x, RunMode mode) {
    return expand.forward(mid.forward(reduce.forward(x, mode), mode), mode);
}

template <class S>
void BottleneckConv<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    reduce.visit(name + ".reduce", v);
    mid.visit(name + ".mid", v);
    expand.visit(name + ".expand", v);
}

template <class S>
void BottleneckConv<S>::complexity(int h, int w, Complexity& c) const {
    reduce.complexity(h, w, c);
    mid.complexity(h, w, c);
    expand.complexity(h, w, c);
}

template <class S>
uint64_t BottleneckConv<S>::conv_param_count() const {
    return reduce.conv.param_count() + mid.conv.param_count() + expand.conv.param_count();
}

template <class S>
OutputBlock<S>::OutputBlock(int in_ch, int out_ch, bool use_bottleneck, Rng& rng) {
    if (use_bottleneck)
        bottleneck.emplace(in_ch, out_ch, rng);
    else
        plain.emplace(in_ch, out_ch, 3, 1, 1, true, rng);
}

template <class S>
TensorT<S> OutputBlock<S>::forward(const TensorT<S>& x, RunMode mode) {
    return bottleneck ? bottleneck->forward(x, mode) : plain->forward(x, mode);
}

template <class S>
void OutputBlock<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    if (bottleneck) bottleneck->visit(name + ".bottleneck", v);
    if (plain) plain->visit(name + ".plain", v);
}

template <class S>
void OutputBlock<S>::complexity(int h, int w, Complexity& c) const {
    if (bottleneck) bottleneck->complexity(h, w, c);
    if (plain) plain->complexity(h, w, c);
}

// ---------------------------------------------------------------------------
// reverse attention

template <class S>
TensorT<S> ra_reverse_gate(const TensorT<S>& x, const TensorT<S>& logit) {
    return mul(x, sub_from_scalar(1.0, sigmoid(logit)));
}

template <class S>
ReverseAttention<S>::ReverseAttention(int channels, RaVariant variant_, int n_classes_,
                                      bool use_bottleneck, Rng& rng)
    : variant(variant_), n_classes(n_classes_) {
    if (variant == RaVariant::Softmax) {
        check(n_classes >= 2, "softmax RA: n_classes must be >= 2");
        attn_conv = Conv2dLayer<S>(channels, n_classes, 3, 1, 1, rng);
        out = OutputBlock<S>(n_classes * channels, channels, use_bottleneck, rng);
    } else {
        attn_conv = Conv2dLayer<S>(channels, 1, 3, 1, 1, rng);
        out = OutputBlock<S>(channels, channels, use_bottleneck, rng);
    }
}

template <class S>
std::pair<TensorT<S>, TensorT<S>> ReverseAttention<S>::forward(const TensorT<S>& x, RunMode mode) {
    TensorT<S> logits = attn_conv.forward(x);
    TensorT<S> gated;
    if (variant == RaVariant::Softmax) {
        TensorT<S> attn = softmax_channels(logits);
        std::vector<TensorT<S>> reversed;
        reversed.reserve(size_t(n_classes));
        for (int k = 0; k < n_classes; ++k)
            reversed.push_back(mul(x, sub_from_scalar(1.0, slice_channels(attn, k, k + 1))));
        gated = concat_channels(reversed);
    } else {
        gated = ra_reverse_gate(x, logits);
    }
    return {out.forward(gated, mode), logits};
}

template <class S>
void ReverseAttention<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    attn_conv.visit(name + ".attn_conv", v);
    out.visit(name + ".out", v);
}

template <class S>
void ReverseAttention<S>::complexity(int h, int w, Complexity& c) const {
    attn_conv.complexity(h, w, c);
    out.complexity(h, w, c);
}

// ---------------------------------------------------------------------------
// refinement pass (coarse -> fine)

template <class S>
RefinementPass<S>::RefinementPass(const DecoderConfig& cfg, Rng& rng) {
    for (int i = 0; i < 4; ++i) {
        fuse[size_t(i)] = FastFusion<S>(2, cfg.fusion_eps);
        if (cfg.use_ra)
            ra[size_t(i)].emplace(cfg.channels, cfg.ra_variant, cfg.n_classes,
                                  cfg.use_bottleneck, rng);
        else
            plain_out[size_t(i)].emplace(cfg.channels, cfg.channels, cfg.use_bottleneck, rng);
    }
}

template <class S>
typename RefinementPass<S>::Result RefinementPass<S>::forward(const Pyramid<S>& in, RunMode mode) {
    Result res;
    res.levels.level(7) = in.level(7);
    TensorT<S> prev = in.level(7);
    for (int level = 6; level >= 3; --level) {
        const size_t i = size_t(6 - level);
        const TensorT<S>& lateral = in.level(level);
        check(lateral.defined(), "refinement pass: missing pyramid level");
        TensorT<S> up = bilinear_resize(prev, lateral.shape().h, lateral.shape().w);
        TensorT<S> fused = fuse[i].forward({lateral, up});
        if (ra[i]) {
            auto [y, logit] = ra[i]->forward(fused, mode);
            res.levels.level(level) = y;
            res.logits[i] = logit;
            prev = y;
        } else {
            TensorT<S> y = plain_out[i]->forward(fused, mode);
            res.levels.level(level) = y;
            prev = y;
        }
    }
    return res;
}

template <class S>
void RefinementPass<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    for (int level = 6; level >= 3; --level) {
        const size_t i = size_t(6 - level);
        const std::string base = name + ".level" + std::to_string(level);
        fuse[i].visit(base + ".fuse", v);
        if (ra[i]) ra[i]->visit(base + ".ra", v);
        if (plain_out[i]) plain_out[i]->visit(base + ".out", v);
    }
}

template <class S>
void RefinementPass<S>::complexity(const std::array<int, 5>& sizes, Complexity& c) const {
    for (int level = 6; level >= 3; --level) {
        const size_t i = size_t(6 - level);
        const int hw = sizes[size_t(level - 3)];
        fuse[i].complexity(c);
        if (ra[i]) ra[i]->complexity(hw, hw, c);
        if (plain_out[i]) plain_out[i]->complexity(hw, hw, c);
    }
}

// ---------------------------------------------------------------------------
// aggregation pass (fine -> coarse)

template <class S>
AggregationPass<S>::AggregationPass(const DecoderConfig& cfg, Rng& rng) {
    for (int i = 0; i < 4; ++i) {
        fuse[size_t(i)] = FastFusion<S>(2, cfg.fusion_eps);
        out[size_t(i)] = OutputBlock<S>(cfg.channels, cfg.channels, cfg.use_bottleneck, rng);
    }
}

template <class S>
Pyramid<S> AggregationPass<S>::forward(const Pyramid<S>& in, RunMode mode) {
    Pyramid<S> res;
    res.level(3) = in.level(3);
    TensorT<S> prev = in.level(3);
    for (int level = 4; level <= 7; ++level) {
        const size_t i = size_t(level - 4);
        const TensorT<S>& lateral = in.level(level);
        check(lateral.defined(), "aggregation pass: missing pyramid level");
        TensorT<S> down = max_pool2d(prev, 3, 2, 1);
        TensorT<S> fused = fuse[i].forward({lateral, down});
        TensorT<S> y = out[i].forward(fused, mode);
        res.level(level) = y;
        prev = y;
    }
    return res;
}

template <class S>
void AggregationPass<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    for (int level = 4; level <= 7; ++level) {
        const size_t i = size_t(level - 4);
        const std::string base = name + ".level" + std::to_string(level);
        fuse[i].visit(base + ".fuse", v);
        out[i].visit(base + ".out", v);
    }
}

template <class S>
void AggregationPass<S>::complexity(const std::array<int, 5>& sizes, Complexity& c) const {
    for (int level = 4; level <= 7; ++level) {
        const size_t i = size_t(level - 4);
        const int hw = sizes[size_t(level - 3)];
        fuse[i].complexity(c);
        out[i].complexity(hw, hw, c);
    }
}

// ---------------------------------------------------------------------------
// decoder

template <class S>
Decoder<S>::Decoder(const DecoderConfig& cfg_, Rng& rng) : cfg(cfg_) {
    cfg.validate();
    blocks.reserve(size_t(cfg.repeats));
    for (int d = 0; d < cfg.repeats; ++d)
        blocks.push_back(Block{RefinementPass<S>(cfg, rng), AggregationPass<S>(cfg, rng)});
    final_refine = RefinementPass<S>(cfg, rng);
    p7_head = Conv2dLayer<S>(cfg.channels, cfg.n_out(), 3, 1, 1, rng);
    if (!ra_logits_are_predictions())
        for (int i = 0; i < 4; ++i)
            aux_heads[size_t(i)].emplace(cfg.channels, cfg.n_out(), 3, 1, 1, rng);
}

template <class S>
bool Decoder<S>::ra_logits_are_predictions() const {
    if (!cfg.use_ra) return false;
    // sigmoid RA gates with one channel; usable as the prediction only in the
    // binary task
    return cfg.ra_variant == RaVariant::Softmax || cfg.n_out() == 1;
}

template <class S>
DecoderOutputs<S> Decoder<S>::forward(const Pyramid<S>& pyr, int input_h, int input_w,
                                      RunMode mode) {
    Pyramid<S> levels = pyr;
    for (auto& block : blocks) {
        auto refined = block.refine.forward(levels, mode);
        levels = block.aggregate.forward(refined.levels, mode);
    }
    auto final_res = final_refine.forward(levels, mode);

    DecoderOutputs<S> out;
    out.supervision.push_back(p7_head.forward(final_res.levels.level(7)));
    std::array<TensorT<S>, 4> level_logits;  // levels 6..3
    for (int level = 6; level >= 3; --level) {
        const size_t i = size_t(6 - level);
        level_logits[i] = ra_logits_are_predictions()
                              ? final_res.logits[i]
                              : aux_heads[i]->forward(final_res.levels.level(level));
        out.supervision.push_back(level_logits[i]);
    }
    out.final_logits = bilinear_resize(level_logits[3], input_h, input_w);
    return out;
}

template <class S>
void Decoder<S>::visit(const std::string& name, const ParamVisitor<S>& v) {
    for (size_t d = 0; d < blocks.size(); ++d) {
        const std::string base = name + ".block" + std::to_string(d);
        blocks[d].refine.visit(base + ".refine", v);
        blocks[d].aggregate.visit(base + ".aggregate", v);
    }
    final_refine.visit(name + ".final_refine", v);
    p7_head.visit(name + ".p7_head", v);
    for (int level = 6; level >= 3; --level) {
        const size_t i = size_t(6 - level);
        if (aux_heads[i])
            aux_heads[i]->visit(name + ".aux_head" + std::to_string(level), v);
    }
}

template <class S>
void Decoder<S>::complexity(int input_size, Complexity& c) const {
    const auto sizes = pyramid_sizes(input_size);
    for (const auto& block : blocks) {
        block.refine.complexity(sizes, c);
        block.aggregate.complexity(sizes, c);
    }
    final_refine.complexity(sizes, c);
    p7_head.complexity(sizes[4], sizes[4], c);
    for (int level = 6; level >= 3; --level) {
        const size_t i = size_t(6 - level);
        if (aux_heads[i]) {
            const int hw = sizes[size_t(level - 3)];
            aux_heads[i]->complexity(hw, hw, c);
        }
    }
}

template struct FastFusion<float>;
template struct FastFusion<double>;
template struct BottleneckConv<float>;
template struct BottleneckConv<double>;
template struct OutputBlock<float>;
template struct OutputBlock<double>;
template struct ReverseAttention<float>;
template struct ReverseAttention<double>;
template struct RefinementPass<float>;
template struct RefinementPass<double>;
template struct AggregationPass<float>;
template struct AggregationPass<double>;
template struct Decoder<float>;
template struct Decoder<double>;
template TensorT<float> ra_reverse_gate<float>(const TensorT<float>&, const TensorT<float>&);
template TensorT<double> ra_reverse_gate<double>(const TensorT<double>&, const TensorT<double>&);

}  // namespace raseg
