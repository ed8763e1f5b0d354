#include "pimnet/autodiff.hpp"

#include "pimnet/errors.hpp"

namespace pimnet::ad {

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Tape::Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}

Var Tape::push(Node node)
{
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor& tensor)
{
    Node n;
    n.op = "leaf";
    n.external = &tensor;
    n.requires_grad = grad_enabled_ && tensor.requires_grad();
    return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& tensor)
{
    Node n;
    n.op = "constant";
    n.external_const = &tensor;
    return push(std::move(n));
}

Var Tape::constant(Tensor tensor)
{
    Node n;
    n.op = "constant";
    n.owned = std::move(tensor);
    return push(std::move(n));
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward)
{
    if (consumed_) throw std::logic_error(std::string("tape already consumed by backward; cannot record ") + op);
    Node n;
    n.op = op;
    n.owned = std::move(value);
    if (grad_enabled_) {
        for (auto in : inputs) {
            if (nodes_.at(in).requires_grad) {
                n.requires_grad = true;
                break;
            }
        }
    }
    if (n.requires_grad) {
        n.inputs = std::move(inputs);
        n.backward = std::move(backward);
    }
    return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const
{
    const Node& n = nodes_.at(id);
    if (n.external) return *n.external;
    if (n.external_const) return *n.external_const;
    return n.owned;
}

std::span<const double> Tape::grad(std::size_t id) const
{
    const Node& n = nodes_[id];
    if (n.external) return n.external->grad();
    return n.grad;
}

std::span<double> Tape::grad_mut(std::size_t id)
{
    Node& n = nodes_[id];
    if (!n.requires_grad) throw std::logic_error("grad_mut on node that does not require grad");
    if (n.external) return n.external->grad();
    if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
    return n.grad;
}

void Tape::backward(Var loss)
{
    if (loss.tape != this) throw std::logic_error("backward: loss belongs to another tape");
    if (consumed_) throw std::logic_error("backward called twice on the same tape; re-run the forward pass");
    const Tensor& lv = value(loss.id);
    if (lv.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
    if (!nodes_[loss.id].requires_grad)
        throw std::logic_error("backward: loss does not depend on any tensor that requires grad");
    consumed_ = true;

    grad_mut(loss.id)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward) continue;
        if (n.grad.empty()) continue; // not on a path to the loss
        n.backward(*this, i);
        n.backward = nullptr;
        n.grad.clear();
        n.grad.shrink_to_fit();
    }
}

} // namespace pimnet::ad
