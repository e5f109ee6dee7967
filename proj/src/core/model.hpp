#pragma once

#include "core/decoder.hpp"
#include "core/encoder.hpp"

namespace raseg {

struct ModelConfig {
    EncoderConfig encoder;
    DecoderConfig decoder;

    void validate() const {
        encoder.validate();
        decoder.validate();
        detail::check(encoder.decoder_width == decoder.channels,
                      "model config: encoder decoder_width must equal decoder channels");
    }
};

template <class S>
struct NamedParam {
    std::string name;
    TensorT<S> tensor;
    bool trainable = true;
};

template <class S>
struct Model {
    ModelConfig cfg;
    Encoder<S> encoder;
    Decoder<S> decoder;

    Model() = default;
    Model(const ModelConfig& cfg_, uint64_t seed) : cfg(cfg_) {
        cfg.validate();
        Rng rng = Rng::child(seed, 0x6d6f64656c /* "model" */);
        encoder = Encoder<S>(cfg.encoder, rng);
        decoder = Decoder<S>(cfg.decoder, rng);
    }

    DecoderOutputs<S> forward(const TensorT<S>& image, RunMode mode) {
        Pyramid<S> pyr = encoder.forward_pyramid(image, mode);
        return decoder.forward(pyr, image.shape().h, image.shape().w, mode);
    }

    void visit(const ParamVisitor<S>& v) {
        encoder.visit("encoder", v);
        decoder.visit("decoder", v);
    }

    std::vector<NamedParam<S>> named_tensors() {
        std::vector<NamedParam<S>> out;
        visit([&](const std::string& name, TensorT<S>& t, bool trainable) {
            out.push_back({name, t, trainable});
        });
        return out;
    }

    uint64_t param_count() {
        uint64_t n = 0;
        visit([&](const std::string&, TensorT<S>& t, bool trainable) {
            if (trainable) n += uint64_t(t.numel());
        });
        return n;
    }

    Complexity complexity(int input_size) const {
        Complexity c;
        encoder.complexity(input_size, c);
        decoder.complexity(input_size, c);
        return c;
    }
};

using ModelF = Model<float>;
using ModelD = Model<double>;

}  // namespace raseg
