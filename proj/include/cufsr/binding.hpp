#pragma once

#include <string>
#include <unordered_map>

#include "cufsr/autograd.hpp"

namespace cufsr {

/// Name -> Var view of a ParameterSet for one forward pass: either constants
/// (inference) or leaves bound on a tape (training).
template <typename T>
class Binding {
public:
    static Binding constants(const ParameterSet<T>& params) {
        Binding b;
        for (const auto& p : params) b.vars_.emplace(p.name, Var<T>(p.value));
        return b;
    }

    static Binding on_tape(Tape<T>& tape, ParameterSet<T>& params) {
        Binding b;
        for (auto& p : params) b.vars_.emplace(p.name, tape.bind(p));
        return b;
    }

    const Var<T>& operator()(const std::string& name) const {
        auto it = vars_.find(name);
        if (it == vars_.end()) throw std::out_of_range("parameter not bound: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return vars_.count(name) != 0; }

private:
    std::unordered_map<std::string, Var<T>> vars_;
};

} // namespace cufsr
