#include "cufsr/autograd.hpp"

#include <algorithm>

namespace cufsr {

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, Tensor<T> value) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Tensor<T> grad(value.shape());
    params_.push_back(Parameter<T>{std::move(name), std::move(value), std::move(grad)});
    return params_.back();
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

template <typename T>
Parameter<T>& ParameterSet<T>::at(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw std::out_of_range("no parameter named " + name);
}

template <typename T>
const Parameter<T>& ParameterSet<T>::at(const std::string& name) const {
    if (const auto* p = find(name)) return *p;
    throw std::out_of_range("no parameter named " + name);
}

template <typename T>
bool ParameterSet<T>::contains(const Parameter<T>* p) const {
    return std::any_of(params_.begin(), params_.end(), [p](const Parameter<T>& q) { return &q == p; });
}

template <typename T>
void ParameterSet<T>::zero_grad() {
    for (auto& p : params_) p.grad = Tensor<T>(p.value.shape());
}

template <typename T>
std::int64_t ParameterSet<T>::element_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

template <typename T>
Var<T>::Var(Tensor<T> value) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
}

template <typename T>
Var<T> Tape<T>::bind(Parameter<T>& p) {
    auto node = std::make_shared<Node<T>>();
    node->value = p.value;
    node->requires_grad = true;
    node->param = &p;
    nodes_.push_back(node);
    return Var<T>(std::move(node), this);
}

template <typename T>
std::vector<Var<T>> Tape<T>::bind_all(ParameterSet<T>& params) {
    std::vector<Var<T>> out;
    out.reserve(params.size());
    for (auto& p : params) out.push_back(bind(p));
    return out;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::function<void(const Tensor<T>&)> backward) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->backward = std::move(backward);
    nodes_.push_back(node);
    return Var<T>(std::move(node), this);
}

template <typename T>
void Tape<T>::reverse(const Var<T>& loss) {
    if (nodes_.empty()) throw std::logic_error("backward on an empty tape");
    if (!loss.node() || loss.value().numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (loss.tape() != this) throw std::logic_error("loss was not recorded on this tape");
    for (auto& n : nodes_) n->grad = Tensor<T>();
    loss.node()->grad_buffer()[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (on_visit) on_visit(i);
        auto& n = *nodes_[i];
        if (n.backward && !n.grad.empty()) n.backward(n.grad);
    }
}

template <typename T>
void Tape<T>::accumulate_into(ParameterSet<T>& params) const {
    for (const auto& n : nodes_) {
        if (!n->param) continue;
        if (!params.contains(n->param)) {
            throw std::logic_error("tape holds parameter '" + n->param->name + "' outside the given set");
        }
        if (n->grad.empty()) continue;
        auto dst = n->param->grad.data();
        auto src = n->grad.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
}

template <typename T>
void backward(const Var<T>& loss, Tape<T>& tape, ParameterSet<T>& params) {
    tape.reverse(loss);
    tape.accumulate_into(params);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Var<float>;
template class Var<double>;
template class Tape<float>;
template class Tape<double>;
template void backward(const Var<float>&, Tape<float>&, ParameterSet<float>&);
template void backward(const Var<double>&, Tape<double>&, ParameterSet<double>&);

} // namespace cufsr
