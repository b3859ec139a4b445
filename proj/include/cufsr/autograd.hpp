#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cufsr/tensor.hpp"

namespace cufsr {

/// A named trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
};

/// Ordered collection of uniquely named parameters. Element addresses stay
/// valid as parameters are appended.
template <typename T>
class ParameterSet {
public:
    Parameter<T>& add(std::string name, Tensor<T> value);

    std::size_t size() const { return params_.size(); }
    Parameter<T>& operator[](std::size_t i) { return params_[i]; }
    const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }

    Parameter<T>* find(const std::string& name);
    const Parameter<T>* find(const std::string& name) const;
    Parameter<T>& at(const std::string& name);
    const Parameter<T>& at(const std::string& name) const;
    bool contains(const Parameter<T>* p) const;

    void zero_grad();
    std::int64_t element_count() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    template <typename U>
    ParameterSet<U> cast() const {
        ParameterSet<U> out;
        for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
        return out;
    }

private:
    std::deque<Parameter<T>> params_;
};

template <typename T>
class Tape;

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until a gradient flows in
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    std::function<void(const Tensor<T>&)> backward;

    Tensor<T>& grad_buffer() {
        if (grad.shape() != value.shape() || grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
        return grad;
    }
};

/// Handle to a value in the computation graph. A Var without a tape is a
/// constant: operations over constants only record nothing.
template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(Tensor<T> value);
    Var(std::shared_ptr<Node<T>> node, Tape<T>* tape) : node_(std::move(node)), tape_(tape) {}

    const Tensor<T>& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Tape<T>* tape() const { return tape_; }

    /// Gradient accumulated into this node by the last reverse pass.
    const Tensor<T>& grad() const { return node_->grad; }

    const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
    Tape<T>* tape_ = nullptr;
};

template <typename T>
Var<T> constant(Tensor<T> value) {
    return Var<T>(std::move(value));
}

/// Returns a constant copy of `v`; no gradient flows through it.
template <typename T>
Var<T> detach(const Var<T>& v) {
    return Var<T>(v.value());
}

/// Records operations in execution order for reverse-mode accumulation.
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf node reading the current value of `p`.
    Var<T> bind(Parameter<T>& p);
    std::vector<Var<T>> bind_all(ParameterSet<T>& params);

    Var<T> record(Tensor<T> value, std::function<void(const Tensor<T>&)> backward);

    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    /// Clears node gradients, seeds d(loss)/d(loss) = 1 and visits recorded
    /// operations in exact reverse order. Parameters are not touched.
    void reverse(const Var<T>& loss);

    /// Adds every bound leaf's gradient into its Parameter::grad. All bound
    /// parameters must belong to `params`.
    void accumulate_into(ParameterSet<T>& params) const;

    /// Test hook: invoked with the index of each node as the reverse pass
    /// visits it.
    std::function<void(std::size_t)> on_visit;

private:
    std::vector<std::shared_ptr<Node<T>>> nodes_;
};

/// Reverse pass from a scalar loss followed by accumulation into `params`.
/// Calling twice without zero_grad accumulates twice.
template <typename T>
void backward(const Var<T>& loss, Tape<T>& tape, ParameterSet<T>& params);

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class Tape<float>;
extern template class Tape<double>;

} // namespace cufsr
