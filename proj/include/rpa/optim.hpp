#pragma once

// Named parameter store, global-norm gradient clipping, and Adam.

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpa/autodiff.hpp"

namespace rpa {

// Named learnable parameters; iteration is sorted by name so every walk over
// the store is deterministic.
struct ParameterStore {
  std::map<std::string, ad::ValueRef> params;
  std::string version = "1";

  ad::ValueRef add(const std::string& name, ad::ValueRef v) {
    if (params.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    v->requires_grad = true;
    v->ensure_grad();
    return params.emplace(name, std::move(v)).first->second;
  }

  const ad::ValueRef& at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::out_of_range("no parameter: " + name);
    return it->second;
  }

  void zero_grad() {
    for (auto& [name, p] : params) p->zero_grad();
  }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params) n += p->size();
    return n;
  }
};

// Scales all gradients so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
inline real clip_global_norm(ParameterStore& store, real max_norm) {
  real sq = 0;
  for (auto& [name, p] : store.params) {
    p->ensure_grad();
    for (real g : p->grad) sq += g * g;
  }
  const real norm = std::sqrt(sq);
  if (norm > max_norm && norm > real(0)) {
    const real s = max_norm / norm;
    for (auto& [name, p] : store.params)
      for (real& g : p->grad) g *= s;
  }
  return norm;
}

struct AdamState {
  struct Moments {
    std::vector<real> m;
    std::vector<real> v;
  };
  std::map<std::string, Moments> moments;
  long step = 0;
  real lr = real(1e-4);
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real eps = real(1e-8);
  real weight_decay = real(0);
};

// Bias-corrected Adam with decoupled weight decay: the decay is applied
// directly to the parameters, not mixed into the adaptive moments, so it
// cannot dominate when loss gradients are small.
inline void adam_step(ParameterStore& store, AdamState& state) {
  state.step += 1;
  const real bc1 = real(1) - std::pow(state.beta1, static_cast<real>(state.step));
  const real bc2 = real(1) - std::pow(state.beta2, static_cast<real>(state.step));
  for (auto& [name, p] : store.params) {
    auto& mom = state.moments[name];
    if (mom.m.empty()) {
      mom.m.assign(p->size(), real(0));
      mom.v.assign(p->size(), real(0));
    }
    if (mom.m.size() != p->size())
      throw std::runtime_error("adam_step: shape drift for parameter " + name);
    p->ensure_grad();
    for (std::size_t i = 0; i < p->size(); ++i) {
      const real g = p->grad[i];
      mom.m[i] = state.beta1 * mom.m[i] + (real(1) - state.beta1) * g;
      mom.v[i] = state.beta2 * mom.v[i] + (real(1) - state.beta2) * g * g;
      const real mhat = mom.m[i] / bc1;
      const real vhat = mom.v[i] / bc2;
      p->data[i] -= state.lr * (mhat / (std::sqrt(vhat) + state.eps) +
                                state.weight_decay * p->data[i]);
    }
  }
}

}  // namespace rpa
