#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pimnet/tensor.hpp"

namespace pimnet::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// vector is already a topological order of the DAG.
///
/// A tape built with grad disabled records values only; every Var it hands out
/// is a constant and backward() is rejected.
class Tape {
public:
    /// Adds the gradient contribution of node `self` into its inputs.
    using BackwardFn = std::function<void(Tape& tape, std::size_t self)>;

    explicit Tape(bool grad_enabled = true);
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Registers an external tensor (typically a parameter). If it requires
    /// grad, backward() accumulates into its grad buffer.
    Var leaf(Tensor& tensor);
    /// Read-only external tensor; never differentiated.
    Var constant_ref(const Tensor& tensor);
    /// Owned constant value.
    Var constant(Tensor tensor);

    /// Appends a node computed from `inputs`. When none of the inputs requires
    /// grad (or grad is disabled) the backward function is dropped.
    Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
    const char* op(std::size_t id) const { return nodes_[id].op; }

    /// Gradient of the loss w.r.t. node `id`. Only valid during backward().
    std::span<const double> grad(std::size_t id) const;
    /// Accumulation target for node `id`; node must require grad.
    std::span<double> grad_mut(std::size_t id);

    /// Runs reverse accumulation from a scalar loss. A tape supports one
    /// backward pass; intermediate buffers are released afterwards.
    void backward(Var loss);

    bool grad_enabled() const noexcept { return grad_enabled_; }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        const char* op = "";
        Tensor owned;
        Tensor* external = nullptr;
        const Tensor* external_const = nullptr;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
        detail::AlignedBuffer grad;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
    bool grad_enabled_;
    bool consumed_ = false;
};

} // namespace pimnet::ad
