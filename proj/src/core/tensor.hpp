#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "core/rng.hpp"

namespace raseg {

namespace detail {
inline void check(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    int64_t numel() const { return int64_t(n) * c * h * w; }
    bool operator==(const Shape&) const = default;
    std::string str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w);
    }
};

namespace detail {

// One node of the reverse-mode graph. Leaves have no op/backward_fn; interior
// nodes keep their inputs alive via shared_ptr so the tape survives until
// backward() runs.
template <class S>
struct Node {
    Shape shape;
    std::vector<S> values;
    std::vector<S> grad;  // allocated lazily, same length as values
    bool requires_grad = false;  // leaf flag set by the user
    bool needs_grad = false;     // requires_grad or any input needs_grad
    const char* op = nullptr;    // null for leaves
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), S(0));
    }
};

}  // namespace detail

// Value-semantics handle to a graph node. Copies alias the same storage.
template <class S>
class TensorT {
public:
    using scalar_type = S;

    TensorT() = default;

    static TensorT zeros(Shape s, bool requires_grad = false) {
        return full(s, S(0), requires_grad);
    }

    static TensorT full(Shape s, S value, bool requires_grad = false) {
        detail::check(s.n >= 1 && s.c >= 1 && s.h >= 1 && s.w >= 1,
                      "tensor: shape components must be >= 1");
        TensorT t;
        t.node_ = std::make_shared<detail::Node<S>>();
        t.node_->shape = s;
        t.node_->values.assign(size_t(s.numel()), value);
        t.node_->requires_grad = requires_grad;
        t.node_->needs_grad = requires_grad;
        return t;
    }

    static TensorT from_values(Shape s, std::vector<S> values, bool requires_grad = false) {
        detail::check(int64_t(values.size()) == s.numel(), "tensor: value buffer length mismatch");
        TensorT t = zeros(s, requires_grad);
        t.node_->values = std::move(values);
        return t;
    }

    static TensorT scalar(S value, bool requires_grad = false) {
        return full(Shape{1, 1, 1, 1}, value, requires_grad);
    }

    static TensorT randn(Shape s, Rng& rng, S stddev, bool requires_grad = false) {
        TensorT t = zeros(s, requires_grad);
        for (auto& v : t.node_->values) v = S(rng.normal()) * stddev;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return node_->shape.numel(); }
    bool requires_grad() const { return node_->requires_grad; }
    bool needs_grad() const { return node_->needs_grad; }

    std::vector<S>& values() { return node_->values; }
    const std::vector<S>& values() const { return node_->values; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<S>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<S>& grad() const {
        detail::check(has_grad(), "tensor: grad not populated");
        return node_->grad;
    }

    void zero_grad() { node_->grad.clear(); }

    S& at(int n, int c, int h, int w) { return node_->values[size_t(index(n, c, h, w))]; }
    S at(int n, int c, int h, int w) const { return node_->values[size_t(index(n, c, h, w))]; }

    int64_t index(int n, int c, int h, int w) const {
        const Shape& s = node_->shape;
        return ((int64_t(n) * s.c + c) * s.h + h) * s.w + w;
    }

    S item() const {
        detail::check(numel() == 1, "tensor: item() requires a single element");
        return node_->values[0];
    }

    // Detached copy of the values as a fresh leaf.
    TensorT detach_copy(bool requires_grad = false) const {
        return from_values(shape(), node_->values, requires_grad);
    }

    std::shared_ptr<detail::Node<S>>& node() { return node_; }
    const std::shared_ptr<detail::Node<S>>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node<S>> node_;
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

// Reverse topological sweep from a scalar loss. Leaf grads accumulate across
// calls until zero_grad() is used.
template <class S>
void backward(const TensorT<S>& loss);

// Count of each op kind reachable from `root` (graph inspection for the
// ablation contracts).
template <class S>
std::map<std::string, int> op_histogram(const TensorT<S>& root);

}  // namespace raseg
