#pragma once

// Reverse-mode autodiff over dense real arrays. Nodes form a DAG through
// shared_ptr parents; backward() walks reachable nodes in reverse creation
// order, so any forward pass built in program order differentiates correctly.
// Gradients accumulate additively; callers zero them between optimizer steps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "rpa/core.hpp"

namespace rpa::ad {

struct Value;
using ValueRef = std::shared_ptr<Value>;

inline std::atomic<std::uint64_t>& value_counter() {
  static std::atomic<std::uint64_t> c{0};
  return c;
}

struct Value {
  std::vector<int> shape;
  std::vector<real> data;
  std::vector<real> grad;  // same length as data once backward has run
  bool requires_grad = false;
  std::uint64_t id = 0;

  std::vector<ValueRef> parents;
  std::function<void(Value&)> backprop;

  std::size_t size() const { return data.size(); }
  bool is_scalar() const { return data.size() == 1; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), real(0));
  }
  void zero_grad() { grad.assign(data.size(), real(0)); }
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] inline void shape_fail(const char* prim, const Value& a) {
  throw std::invalid_argument(std::string(prim) + ": bad shape " + shape_str(a.shape));
}
[[noreturn]] inline void shape_fail(const char* prim, const Value& a, const Value& b) {
  throw std::invalid_argument(std::string(prim) + ": shape mismatch " + shape_str(a.shape) +
                              " vs " + shape_str(b.shape));
}

inline ValueRef make_value(std::vector<int> shape, bool requires_grad = false) {
  auto v = std::make_shared<Value>();
  v->shape = std::move(shape);
  v->data.assign(shape_numel(v->shape), real(0));
  v->requires_grad = requires_grad;
  v->id = value_counter().fetch_add(1, std::memory_order_relaxed);
  return v;
}

inline ValueRef constant(std::vector<int> shape, std::vector<real> data) {
  auto v = make_value(std::move(shape));
  if (data.size() != v->data.size()) shape_fail("constant", *v);
  v->data = std::move(data);
  return v;
}

inline ValueRef scalar(real x) { return constant({1}, {x}); }

inline ValueRef vector_value(std::vector<real> data) {
  const int n = static_cast<int>(data.size());
  return constant({n}, std::move(data));
}

// Learnable parameter, uniform in [-bound, bound].
inline ValueRef param(std::vector<int> shape, Rng& rng, real bound) {
  auto v = make_value(std::move(shape), true);
  std::uniform_real_distribution<real> u(-bound, bound);
  for (auto& x : v->data) x = u(rng);
  v->zero_grad();
  return v;
}

namespace detail {
inline ValueRef node(std::vector<int> shape, std::vector<ValueRef> parents,
                     std::function<void(Value&)> backprop) {
  auto v = make_value(std::move(shape));
  v->parents = std::move(parents);
  v->backprop = std::move(backprop);
  return v;
}
}  // namespace detail

// ---- elementwise ----

inline ValueRef add(const ValueRef& a, const ValueRef& b) {
  if (a->shape != b->shape) shape_fail("add", *a, *b);
  auto out = detail::node(a->shape, {a, b}, [](Value& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    A.ensure_grad();
    B.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      A.grad[i] += self.grad[i];
      B.grad[i] += self.grad[i];
    }
  });
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] + b->data[i];
  return out;
}

inline ValueRef sub(const ValueRef& a, const ValueRef& b) {
  if (a->shape != b->shape) shape_fail("sub", *a, *b);
  auto out = detail::node(a->shape, {a, b}, [](Value& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    A.ensure_grad();
    B.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      A.grad[i] += self.grad[i];
      B.grad[i] -= self.grad[i];
    }
  });
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] - b->data[i];
  return out;
}

inline ValueRef mul(const ValueRef& a, const ValueRef& b) {
  if (a->shape != b->shape) shape_fail("mul", *a, *b);
  auto out = detail::node(a->shape, {a, b}, [](Value& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    A.ensure_grad();
    B.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      A.grad[i] += self.grad[i] * B.data[i];
      B.grad[i] += self.grad[i] * A.data[i];
    }
  });
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] * b->data[i];
  return out;
}

inline ValueRef scale(const ValueRef& a, real k) {
  auto out = detail::node(a->shape, {a}, [k](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) A.grad[i] += self.grad[i] * k;
  });
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] * k;
  return out;
}

inline ValueRef sigmoid(const ValueRef& a) {
  auto out = detail::node(a->shape, {a}, [](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      const real y = self.data[i];
      A.grad[i] += self.grad[i] * y * (real(1) - y);
    }
  });
  for (std::size_t i = 0; i < out->size(); ++i)
    out->data[i] = real(1) / (real(1) + std::exp(-a->data[i]));
  return out;
}

inline ValueRef tanh_(const ValueRef& a) {
  auto out = detail::node(a->shape, {a}, [](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      const real y = self.data[i];
      A.grad[i] += self.grad[i] * (real(1) - y * y);
    }
  });
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = std::tanh(a->data[i]);
  return out;
}

inline ValueRef relu(const ValueRef& a) {
  auto out = detail::node(a->shape, {a}, [](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i)
      if (A.data[i] > real(0)) A.grad[i] += self.grad[i];
  });
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = std::max(real(0), a->data[i]);
  return out;
}

// ---- linear algebra ----

inline ValueRef matmul(const ValueRef& a, const ValueRef& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    shape_fail("matmul", *a, *b);
  const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
  auto out = detail::node({m, n}, {a, b}, [m, k, n](Value& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    A.ensure_grad();
    B.ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const real g = self.grad[i * n + j];
        if (g == real(0)) continue;
        for (int p = 0; p < k; ++p) {
          A.grad[i * k + p] += g * B.data[p * n + j];
          B.grad[p * n + j] += g * A.data[i * k + p];
        }
      }
  });
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      real acc = 0;
      for (int p = 0; p < k; ++p) acc += a->data[i * k + p] * b->data[p * n + j];
      out->data[i * n + j] = acc;
    }
  return out;
}

// y = A x, A [m,n], x [n]
inline ValueRef matvec(const ValueRef& a, const ValueRef& x) {
  if (a->shape.size() != 2 || x->shape.size() != 1 || a->shape[1] != x->shape[0])
    shape_fail("matvec", *a, *x);
  const int m = a->shape[0], n = a->shape[1];
  auto out = detail::node({m}, {a, x}, [m, n](Value& self) {
    auto& A = *self.parents[0];
    auto& X = *self.parents[1];
    A.ensure_grad();
    X.ensure_grad();
    for (int i = 0; i < m; ++i) {
      const real g = self.grad[i];
      if (g == real(0)) continue;
      for (int j = 0; j < n; ++j) {
        A.grad[i * n + j] += g * X.data[j];
        X.grad[j] += g * A.data[i * n + j];
      }
    }
  });
  for (int i = 0; i < m; ++i) {
    real acc = 0;
    for (int j = 0; j < n; ++j) acc += a->data[i * n + j] * x->data[j];
    out->data[i] = acc;
  }
  return out;
}

// y = A^T x, A [m,n], x [m]
inline ValueRef matvec_t(const ValueRef& a, const ValueRef& x) {
  if (a->shape.size() != 2 || x->shape.size() != 1 || a->shape[0] != x->shape[0])
    shape_fail("matvec_t", *a, *x);
  const int m = a->shape[0], n = a->shape[1];
  auto out = detail::node({n}, {a, x}, [m, n](Value& self) {
    auto& A = *self.parents[0];
    auto& X = *self.parents[1];
    A.ensure_grad();
    X.ensure_grad();
    for (int i = 0; i < m; ++i) {
      const real xi = X.data[i];
      real gx = 0;
      for (int j = 0; j < n; ++j) {
        const real g = self.grad[j];
        A.grad[i * n + j] += g * xi;
        gx += g * A.data[i * n + j];
      }
      X.grad[i] += gx;
    }
  });
  for (int j = 0; j < n; ++j) out->data[j] = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out->data[j] += a->data[i * n + j] * x->data[i];
  return out;
}

// ---- structural ----

inline ValueRef concat(const std::vector<ValueRef>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: empty input");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->shape.size() != 1) shape_fail("concat", *p);
    total += p->size();
  }
  auto out = detail::node({static_cast<int>(total)}, parts, [](Value& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      p->ensure_grad();
      for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += self.grad[off + i];
      off += p->size();
    }
  });
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->data.begin(), p->data.end(), out->data.begin() + off);
    off += p->size();
  }
  return out;
}

inline ValueRef slice(const ValueRef& a, int start, int len) {
  if (a->shape.size() != 1 || start < 0 || len < 1 || start + len > a->shape[0])
    shape_fail("slice", *a);
  auto out = detail::node({len}, {a}, [start, len](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    for (int i = 0; i < len; ++i) A.grad[start + i] += self.grad[i];
  });
  for (int i = 0; i < len; ++i) out->data[i] = a->data[start + i];
  return out;
}

// Rows [d] each -> matrix [n,d].
inline ValueRef stack_rows(const std::vector<ValueRef>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
  const int d = rows[0]->shape.size() == 1 ? rows[0]->shape[0] : -1;
  for (const auto& r : rows)
    if (r->shape.size() != 1 || r->shape[0] != d) shape_fail("stack_rows", *rows[0], *r);
  const int n = static_cast<int>(rows.size());
  auto out = detail::node({n, d}, rows, [d](Value& self) {
    for (std::size_t r = 0; r < self.parents.size(); ++r) {
      auto& p = *self.parents[r];
      p.ensure_grad();
      for (int i = 0; i < d; ++i) p.grad[i] += self.grad[r * d + i];
    }
  });
  for (int r = 0; r < n; ++r)
    std::copy(rows[r]->data.begin(), rows[r]->data.end(), out->data.begin() + r * d);
  return out;
}

// ---- reductions and losses ----

inline ValueRef sum(const ValueRef& a) {
  auto out = detail::node({1}, {a}, [](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    for (std::size_t i = 0; i < A.size(); ++i) A.grad[i] += self.grad[0];
  });
  real acc = 0;
  for (real x : a->data) acc += x;
  out->data[0] = acc;
  return out;
}

inline ValueRef mean(const ValueRef& a) {
  const real inv = real(1) / static_cast<real>(a->size());
  auto out = detail::node({1}, {a}, [inv](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    for (std::size_t i = 0; i < A.size(); ++i) A.grad[i] += self.grad[0] * inv;
  });
  real acc = 0;
  for (real x : a->data) acc += x;
  out->data[0] = acc * inv;
  return out;
}

inline ValueRef mse(const ValueRef& a, const ValueRef& b) {
  if (a->shape != b->shape) shape_fail("mse", *a, *b);
  const real inv = real(1) / static_cast<real>(a->size());
  auto out = detail::node({1}, {a, b}, [inv](Value& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    A.ensure_grad();
    B.ensure_grad();
    for (std::size_t i = 0; i < A.size(); ++i) {
      const real d = real(2) * inv * (A.data[i] - B.data[i]) * self.grad[0];
      A.grad[i] += d;
      B.grad[i] -= d;
    }
  });
  real acc = 0;
  for (std::size_t i = 0; i < a->size(); ++i) {
    const real d = a->data[i] - b->data[i];
    acc += d * d;
  }
  out->data[0] = acc * inv;
  return out;
}

// Softmax over the last (only) axis of a vector.
inline ValueRef softmax(const ValueRef& a) {
  if (a->shape.size() != 1) shape_fail("softmax", *a);
  auto out = detail::node(a->shape, {a}, [](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    real dot = 0;
    for (std::size_t i = 0; i < self.size(); ++i) dot += self.grad[i] * self.data[i];
    for (std::size_t i = 0; i < self.size(); ++i)
      A.grad[i] += self.data[i] * (self.grad[i] - dot);
  });
  real mx = a->data[0];
  for (real x : a->data) mx = std::max(mx, x);
  real z = 0;
  for (std::size_t i = 0; i < a->size(); ++i) {
    out->data[i] = std::exp(a->data[i] - mx);
    z += out->data[i];
  }
  for (auto& x : out->data) x /= z;
  return out;
}

// -log softmax(logits)[index], computed stably from logits.
inline ValueRef nll_logits(const ValueRef& logits, int index) {
  if (logits->shape.size() != 1 || index < 0 || index >= logits->shape[0])
    shape_fail("nll_logits", *logits);
  const int n = logits->shape[0];
  auto out = detail::node({1}, {logits}, [index, n](Value& self) {
    auto& L = *self.parents[0];
    L.ensure_grad();
    real mx = L.data[0];
    for (int i = 0; i < n; ++i) mx = std::max(mx, L.data[i]);
    real z = 0;
    for (int i = 0; i < n; ++i) z += std::exp(L.data[i] - mx);
    for (int i = 0; i < n; ++i) {
      real p = std::exp(L.data[i] - mx) / z;
      L.grad[i] += self.grad[0] * (p - (i == index ? real(1) : real(0)));
    }
  });
  real mx = logits->data[0];
  for (real x : logits->data) mx = std::max(mx, x);
  real z = 0;
  for (real x : logits->data) z += std::exp(x - mx);
  out->data[0] = std::log(z) + mx - logits->data[index];
  return out;
}

// -log(probs[index]); prefer nll_logits when logits are available.
inline ValueRef nll(const ValueRef& probs, int index) {
  if (probs->shape.size() != 1 || index < 0 || index >= probs->shape[0])
    shape_fail("nll", *probs);
  auto out = detail::node({1}, {probs}, [index](Value& self) {
    auto& P = *self.parents[0];
    P.ensure_grad();
    P.grad[index] -= self.grad[0] / P.data[index];
  });
  out->data[0] = -std::log(probs->data[index]);
  return out;
}

// Embedding row lookup; gradient flows into the selected row only.
inline ValueRef embedding(const ValueRef& table, int index) {
  if (table->shape.size() != 2 || index < 0 || index >= table->shape[0])
    shape_fail("embedding", *table);
  const int d = table->shape[1];
  auto out = detail::node({d}, {table}, [index, d](Value& self) {
    auto& T = *self.parents[0];
    T.ensure_grad();
    for (int i = 0; i < d; ++i) T.grad[index * d + i] += self.grad[i];
  });
  std::copy(table->data.begin() + index * d, table->data.begin() + (index + 1) * d,
            out->data.begin());
  return out;
}

// Inverted dropout: identity at eval time.
inline ValueRef dropout(const ValueRef& a, real rate, Rng& rng, bool train) {
  if (rate < real(0) || rate >= real(1)) throw std::invalid_argument("dropout: bad rate");
  if (!train || rate == real(0)) return a;
  auto mask = std::make_shared<std::vector<real>>(a->size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const real keep = real(1) - rate;
  for (auto& m : *mask) m = (u(rng) < keep) ? real(1) / keep : real(0);
  auto out = detail::node(a->shape, {a}, [mask](Value& self) {
    auto& A = *self.parents[0];
    A.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) A.grad[i] += self.grad[i] * (*mask)[i];
  });
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a->data[i] * (*mask)[i];
  return out;
}

// ---- composite layers ----

inline ValueRef linear(const ValueRef& w, const ValueRef& x, const ValueRef& b) {
  return add(matvec(w, x), b);
}

struct LstmGates {
  ValueRef w_ih;  // [4H, X]
  ValueRef w_hh;  // [4H, H]
  ValueRef bias;  // [4H], gate order i,f,g,o
};

struct LstmState {
  ValueRef h;
  ValueRef c;
};

// One step of a standard 4-gate LSTM cell.
inline LstmState lstm_step(const LstmGates& g, const ValueRef& x, const LstmState& prev) {
  const int hidden = g.w_hh->shape[1];
  if (g.w_ih->shape[0] != 4 * hidden || g.w_hh->shape[0] != 4 * hidden)
    shape_fail("lstm_step", *g.w_ih, *g.w_hh);
  auto z = add(add(matvec(g.w_ih, x), matvec(g.w_hh, prev.h)), g.bias);
  auto i = sigmoid(slice(z, 0, hidden));
  auto f = sigmoid(slice(z, hidden, hidden));
  auto gg = tanh_(slice(z, 2 * hidden, hidden));
  auto o = sigmoid(slice(z, 3 * hidden, hidden));
  auto c = add(mul(i, gg), mul(f, prev.c));
  auto h = mul(o, tanh_(c));
  return {h, c};
}

// ---- backward ----

inline void backward(const ValueRef& root) {
  if (!root->is_scalar()) throw std::invalid_argument("backward: root must be scalar");
  std::vector<Value*> order;
  std::unordered_set<Value*> seen;
  std::vector<Value*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Value* v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (const auto& p : v->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Value* a, const Value* b) { return a->id > b->id; });
  root->ensure_grad();
  root->grad[0] += real(1);
  for (Value* v : order)
    if (v->backprop && !v->grad.empty()) v->backprop(*v);
}

}  // namespace rpa::ad
