#include "core/tensor.hpp"

#include <unordered_set>

namespace raseg {

namespace {

template <class S>
void topo_visit(detail::Node<S>* node,
                std::unordered_set<detail::Node<S>*>& seen,
                std::vector<detail::Node<S>*>& order) {
    // Iterative DFS; graphs can be a few thousand nodes deep once the decoder
    // is repeated.
    struct Frame {
        detail::Node<S>* node;
        size_t next_input;
    };
    std::vector<Frame> stack;
    if (!seen.insert(node).second) return;
    stack.push_back({node, 0});
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_input < f.node->inputs.size()) {
            detail::Node<S>* in = f.node->inputs[f.next_input++].get();
            if (in->needs_grad && seen.insert(in).second) stack.push_back({in, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
}

}  // namespace

template <class S>
void backward(const TensorT<S>& loss) {
    detail::check(loss.defined(), "backward: undefined tensor");
    detail::check(loss.numel() == 1, "backward: loss must be scalar");
    detail::Node<S>* root = loss.node().get();
    if (!root->needs_grad) return;

    std::unordered_set<detail::Node<S>*> seen;
    std::vector<detail::Node<S>*> order;  // post-order: inputs before consumers
    topo_visit(root, seen, order);

    // interior gradients are transient per sweep; only leaves accumulate
    // across repeated calls
    for (detail::Node<S>* node : order)
        if (node->op) node->grad.clear();

    root->ensure_grad();
    root->grad[0] += S(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node<S>* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
}

template <class S>
std::map<std::string, int> op_histogram(const TensorT<S>& root) {
    std::map<std::string, int> hist;
    if (!root.defined()) return hist;
    std::unordered_set<detail::Node<S>*> seen;
    std::vector<detail::Node<S>*> stack{root.node().get()};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        detail::Node<S>* node = stack.back();
        stack.pop_back();
        if (node->op) ++hist[node->op];
        for (const auto& in : node->inputs)
            if (seen.insert(in.get()).second) stack.push_back(in.get());
    }
    return hist;
}

template void backward<float>(const TensorT<float>&);
template void backward<double>(const TensorT<double>&);
template std::map<std::string, int> op_histogram<float>(const TensorT<float>&);
template std::map<std::string, int> op_histogram<double>(const TensorT<double>&);

}  // namespace raseg
