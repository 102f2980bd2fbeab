#include "dgflow/discrete.hpp"

#include <cmath>
#include <string>

#include "dgflow/errors.hpp"

namespace dgflow {

namespace {

Var reduce_to(const Var& g, const Shape& target) {
  if (g.shape() == target) return g;
  if (shape_numel(target) == 1) return reshape(sum(g), target);
  throw ShapeError("discrete adjoint: cannot reduce " + shape_string(g.shape()) + " to " +
                   shape_string(target));
}

DiscreteGraph& same_graph(const DVar& a, const DVar& b) {
  if (&a.graph() != &b.graph()) throw std::invalid_argument("operands live on different graphs");
  return a.graph();
}

// Records a node that is linear in its single pair input.
template <class Fwd, class Adj>
DVar linear1(const DVar& x, Fwd fwd, Adj adj) {
  DiscreteGraph& g = x.graph();
  Var hu = fwd(x.u());
  Var hv = fwd(x.v());
  return g.record(hu, hv, {x.id()}, [adj](const Var& a) { return std::vector<Var>{adj(a)}; });
}

}  // namespace

// ---------------------------------------------------------------- activations

Var apply_activation(Activation f, const Var& x) {
  switch (f) {
    case Activation::identity: return x;
    case Activation::tanh: return tanh(x);
    case Activation::sin: return sin(x);
    case Activation::cos: return cos(x);
    case Activation::rsqrt: return rsqrt(x);
  }
  throw std::invalid_argument("unknown activation");
}

Var activation_derivative(Activation f, const Var& x) {
  switch (f) {
    case Activation::identity: return expand(x.tape().constant(1.0), x.shape());
    case Activation::tanh: {
      const Var t = tanh(x);
      return 1.0 - t * t;
    }
    case Activation::sin: return cos(x);
    case Activation::cos: return -sin(x);
    case Activation::rsqrt: {
      const Var r = rsqrt(x);
      return -0.5 * (r * (r * r));
    }
  }
  throw std::invalid_argument("unknown activation");
}

Var secant_slope(const Var& h, const Var& k, Activation f, double eps, std::optional<Var> fh,
                 std::optional<Var> fk) {
  if (h.shape() != k.shape()) throw ShapeError("secant_slope: shape mismatch");
  if (!(eps > 0.0)) throw std::invalid_argument("secant_slope: eps must be positive");
  const Tensor& hv = h.value();
  const Tensor& kv = k.value();
  std::vector<std::uint8_t> mask(hv.numel());
  std::size_t far = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = std::abs(hv[i] - kv[i]) > eps;
    far += mask[i];
  }
  Tape& t = h.tape();
  std::optional<Var> secant;
  std::optional<Var> midpoint;
  if (far > 0) {
    const Var diff = h - k;
    const Var safe = far == mask.size() ? diff : select(mask, diff, t.constant(1.0));
    const Var num = (fh ? *fh : apply_activation(f, h)) - (fk ? *fk : apply_activation(f, k));
    secant = num / safe;
  }
  if (far < mask.size()) midpoint = activation_derivative(f, 0.5 * (h + k));
  if (!midpoint) return *secant;
  if (!secant) return *midpoint;
  return select(mask, *secant, *midpoint);
}

Var discrete_product_rule(const Var& f1, const Var& f2, const Var& g1, const Var& g2, const Var& df,
                          const Var& dg) {
  return (0.5 * (g1 + g2)) * df + (0.5 * (f1 + f2)) * dg;
}

Tensor discrete_product_rule(const Tensor& f1, const Tensor& f2, const Tensor& g1,
                             const Tensor& g2, const Tensor& df, const Tensor& dg) {
  for (const Tensor* t : {&f2, &g1, &g2, &df, &dg}) {
    if (!t->same_shape(f1)) throw ShapeError("discrete_product_rule: shape mismatch");
  }
  return hadamard(0.5 * (g1 + g2), df) + hadamard(0.5 * (f1 + f2), dg);
}

// ---------------------------------------------------------------- graph

DiscreteGraph& DVar::graph() const {
  if (!graph_) throw std::logic_error("use of an unbound DVar");
  return *graph_;
}
const Var& DVar::u() const { return graph().u(id_); }
const Var& DVar::v() const { return graph().v(id_); }

DiscreteGraph::DiscreteGraph(Tape& tape, double eps)
    : tape_(&tape), eps_(eps > 0.0 ? eps : default_secant_eps(tape.precision())) {}

DVar DiscreteGraph::input(const Var& u, const Var& v) {
  if (u.tape_ptr() != tape_ || v.tape_ptr() != tape_) {
    throw std::invalid_argument("DiscreteGraph::input: state from another tape");
  }
  if (u.shape() != v.shape()) throw ShapeError("DiscreteGraph::input: states differ in shape");
  return record(u, v, {}, nullptr);
}

DVar DiscreteGraph::record(Var hu, Var hv, std::vector<std::size_t> inputs, Pullback pullback) {
  nodes_.push_back(DNode{hu, hv, std::move(inputs), std::move(pullback)});
  return DVar(this, nodes_.size() - 1);
}

Var DiscreteGraph::backward(const DVar& root, const DVar& input, std::optional<Var> seed) {
  if (&root.graph() != this || &input.graph() != this) {
    throw std::invalid_argument("DiscreteGraph::backward: node from another graph");
  }
  const std::size_t r = root.id();
  std::vector<std::optional<Var>> adj(r + 1);
  if (seed) {
    if (seed->shape() != root.shape()) throw ShapeError("DiscreteGraph::backward: seed shape");
    adj[r] = *seed;
  } else {
    adj[r] = tape_->constant(Tensor::full(root.shape(), 1.0));
  }
  for (std::size_t i = r + 1; i-- > 0;) {
    if (!adj[i] || nodes_[i].inputs.empty()) continue;
    const std::vector<Var> contribs = nodes_[i].pullback(*adj[i]);
    const std::vector<std::size_t>& ins = nodes_[i].inputs;
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (!contribs[k].valid()) continue;
      auto& slot = adj[ins[k]];
      slot = slot ? *slot + contribs[k] : contribs[k];
    }
  }
  if (input.id() <= r && adj[input.id()]) return *adj[input.id()];
  return tape_->constant(Tensor::zeros(input.shape()));
}

// ---------------------------------------------------------------- linear ops

DVar operator+(const DVar& a, const DVar& b) {
  DiscreteGraph& g = same_graph(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  return g.record(a.u() + b.u(), a.v() + b.v(), {a.id(), b.id()}, [sa, sb](const Var& adj) {
    return std::vector<Var>{reduce_to(adj, sa), reduce_to(adj, sb)};
  });
}

DVar operator-(const DVar& a, const DVar& b) {
  DiscreteGraph& g = same_graph(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  return g.record(a.u() - b.u(), a.v() - b.v(), {a.id(), b.id()}, [sa, sb](const Var& adj) {
    return std::vector<Var>{reduce_to(adj, sa), reduce_to(-adj, sb)};
  });
}

DVar operator-(const DVar& a) {
  return linear1(a, [](const Var& x) { return -x; }, [](const Var& g) { return -g; });
}

DVar operator*(double c, const DVar& a) {
  return linear1(a, [c](const Var& x) { return c * x; }, [c](const Var& g) { return c * g; });
}
DVar operator*(const DVar& a, double c) { return c * a; }

DVar operator+(const DVar& a, double c) {
  return linear1(a, [c](const Var& x) { return x + c; }, [](const Var& g) { return g; });
}
DVar operator+(double c, const DVar& a) { return a + c; }
DVar operator-(const DVar& a, double c) { return a + (-c); }
DVar operator-(double c, const DVar& a) { return (-a) + c; }

DVar operator+(const DVar& a, const Var& b) {
  const Shape sa = a.shape();
  return linear1(a, [b](const Var& x) { return x + b; }, [sa](const Var& g) { return reduce_to(g, sa); });
}
DVar operator+(const Var& a, const DVar& b) { return b + a; }

DVar operator-(const DVar& a, const Var& b) {
  const Shape sa = a.shape();
  return linear1(a, [b](const Var& x) { return x - b; }, [sa](const Var& g) { return reduce_to(g, sa); });
}

DVar operator-(const Var& a, const DVar& b) {
  const Shape sb = b.shape();
  return linear1(b, [a](const Var& x) { return a - x; }, [sb](const Var& g) { return reduce_to(-g, sb); });
}

DVar operator*(const DVar& a, const Var& b) {
  const Shape sa = a.shape();
  return linear1(a, [b](const Var& x) { return x * b; },
                 [b, sa](const Var& g) { return reduce_to(g * b, sa); });
}
DVar operator*(const Var& a, const DVar& b) { return b * a; }

DVar operator/(const DVar& a, const Var& b) {
  const Shape sa = a.shape();
  return linear1(a, [b](const Var& x) { return x / b; },
                 [b, sa](const Var& g) { return reduce_to(g / b, sa); });
}

DVar operator*(const DVar& a, const DVar& b) {
  DiscreteGraph& g = same_graph(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  const Var au = a.u(), av = a.v(), bu = b.u(), bv = b.v();
  return g.record(au * bu, av * bv, {a.id(), b.id()}, [=](const Var& adj) {
    return std::vector<Var>{reduce_to(adj * (0.5 * (bu + bv)), sa),
                            reduce_to(adj * (0.5 * (au + av)), sb)};
  });
}

DVar operator/(const DVar&, const DVar&) {
  throw NoDiscreteRuleError("division of two state-dependent values has no discrete differential");
}

DVar matmul(const DVar& a, const Var& b, bool ta, bool tb) {
  DiscreteGraph& g = a.graph();
  Var hu = matmul(a.u(), b, ta, tb);
  Var hv = matmul(a.v(), b, ta, tb);
  const Shape sa = a.shape();
  if (b.shape().size() == 1 && !tb) {
    // Matrix-vector product: the adjoint is an outer product.
    return g.record(hu, hv, {a.id()}, [b, ta](const Var& adj) {
      const std::size_t m = adj.numel(), n = b.numel();
      const Var gc = reshape(adj, {m, 1});
      const Var br = reshape(b, {1, n});
      return std::vector<Var>{ta ? matmul(br, gc, true, true) : matmul(gc, br)};
    });
  }
  return g.record(hu, hv, {a.id()}, [b, ta, tb](const Var& adj) {
    Var da;
    if (!ta && !tb) da = matmul(adj, b, false, true);
    else if (ta && !tb) da = matmul(b, adj, false, true);
    else if (!ta && tb) da = matmul(adj, b, false, false);
    else da = matmul(b, adj, true, true);
    return std::vector<Var>{da};
  });
}

DVar matmul(const Var& a, const DVar& b, bool ta, bool tb) {
  DiscreteGraph& g = b.graph();
  Var hu = matmul(a, b.u(), ta, tb);
  Var hv = matmul(a, b.v(), ta, tb);
  const Shape sb = b.shape();
  if (sb.size() == 1 && !tb) {
    return g.record(hu, hv, {b.id()}, [a, ta, sb](const Var& adj) {
      return std::vector<Var>{reshape(matmul(a, adj, !ta, false), sb)};
    });
  }
  return g.record(hu, hv, {b.id()}, [a, ta, tb](const Var& adj) {
    Var db;
    if (!ta && !tb) db = matmul(a, adj, true, false);
    else if (ta && !tb) db = matmul(a, adj, false, false);
    else if (!ta && tb) db = matmul(adj, a, true, false);
    else db = matmul(adj, a, true, true);
    return std::vector<Var>{db};
  });
}

DVar matmul(const DVar&, const DVar&, bool, bool) {
  throw NoDiscreteRuleError("product of two state-dependent matrices has no discrete differential");
}

// ---------------------------------------------------------------- activations

DVar activate(Activation f, const DVar& x) {
  DiscreteGraph& g = x.graph();
  const Var h = x.u(), k = x.v();
  const Var fh = apply_activation(f, h);
  const Var fk = apply_activation(f, k);
  const double eps = g.eps();
  return g.record(fh, fk, {x.id()}, [=](const Var& adj) {
    return std::vector<Var>{adj * secant_slope(h, k, f, eps, fh, fk)};
  });
}

DVar tanh(const DVar& x) { return activate(Activation::tanh, x); }
DVar sin(const DVar& x) { return activate(Activation::sin, x); }
DVar cos(const DVar& x) { return activate(Activation::cos, x); }
DVar rsqrt(const DVar& x) { return activate(Activation::rsqrt, x); }

// ---------------------------------------------------------------- shape ops

DVar sum(const DVar& x) {
  const Shape s = x.shape();
  return linear1(x, [](const Var& a) { return sum(a); }, [s](const Var& g) { return expand(g, s); });
}

DVar expand(const DVar& scalar, const Shape& shape) {
  const Shape s = scalar.shape();
  return linear1(scalar, [shape](const Var& a) { return expand(a, shape); },
                 [s](const Var& g) { return reshape(sum(g), s); });
}

DVar sum_rows(const DVar& x) {
  const std::size_t r = x.shape().at(0);
  return linear1(x, [](const Var& a) { return sum_rows(a); },
                 [r](const Var& g) { return broadcast_rows(g, r); });
}

DVar broadcast_rows(const DVar& x, std::size_t rows) {
  return linear1(x, [rows](const Var& a) { return broadcast_rows(a, rows); },
                 [](const Var& g) { return sum_rows(g); });
}

DVar sum_cols(const DVar& x) {
  const std::size_t c = x.shape().at(1);
  return linear1(x, [](const Var& a) { return sum_cols(a); },
                 [c](const Var& g) { return broadcast_cols(g, c); });
}

DVar broadcast_cols(const DVar& x, std::size_t cols) {
  return linear1(x, [cols](const Var& a) { return broadcast_cols(a, cols); },
                 [](const Var& g) { return sum_cols(g); });
}

DVar roll(const DVar& x, std::int64_t shift, std::size_t period, std::size_t inner) {
  return linear1(x, [=](const Var& a) { return roll(a, shift, period, inner); },
                 [=](const Var& g) { return roll(g, -shift, period, inner); });
}

DVar reshape(const DVar& x, const Shape& shape) {
  const Shape s = x.shape();
  if (s == shape) return x;
  return linear1(x, [shape](const Var& a) { return reshape(a, shape); },
                 [s](const Var& g) { return reshape(g, s); });
}

DVar slice_cols(const DVar& x, std::size_t start, std::size_t len) {
  const std::size_t total = x.shape().at(1);
  return linear1(x, [=](const Var& a) { return slice_cols(a, start, len); },
                 [=](const Var& g) { return pad_cols(g, start, total); });
}

DVar pad_cols(const DVar& x, std::size_t start, std::size_t total) {
  const std::size_t len = x.shape().at(1);
  return linear1(x, [=](const Var& a) { return pad_cols(a, start, total); },
                 [=](const Var& g) { return slice_cols(g, start, len); });
}

DVar concat_cols(const DVar& a, const DVar& b) {
  const std::size_t total = a.shape().at(1) + b.shape().at(1);
  return pad_cols(a, 0, total) + pad_cols(b, a.shape()[1], total);
}

DVar conv1d_periodic(const Var& kernel, const DVar& x) {
  return linear1(x, [kernel](const Var& a) { return conv1d_periodic(kernel, a); },
                 [kernel](const Var& g) {
                   // Adjoint of cross-correlation: flipped taps on the transposed channels.
                   const std::size_t k = kernel.shape()[2];
                   const std::size_t n = g.shape()[1];
                   const auto r = static_cast<std::int64_t>((k - 1) / 2);
                   std::optional<Var> acc;
                   for (std::size_t j = 0; j < k; ++j) {
                     const Var term = roll(matmul(kernel_tap(kernel, j), g, true, false),
                                           r - static_cast<std::int64_t>(j), n);
                     acc = acc ? *acc + term : term;
                   }
                   return *acc;
                 });
}

DVar conv1d_periodic_rows(const Var& kernel, const DVar& x, std::size_t n) {
  return linear1(x, [kernel, n](const Var& a) { return conv1d_periodic_rows(kernel, a, n); },
                 [kernel, n](const Var& g) {
                   const std::size_t c_out = kernel.shape()[0];
                   const std::size_t c_in = kernel.shape()[1];
                   const std::size_t k = kernel.shape()[2];
                   const auto r = static_cast<std::int64_t>((k - 1) / 2);
                   std::optional<Var> acc;
                   if (c_in == 1) {
                     const Var cols = matmul(g, reshape(kernel, {c_out, k}));
                     for (std::size_t j = 0; j < k; ++j) {
                       const Var term = roll(slice_cols(cols, j, 1), r - static_cast<std::int64_t>(j), n);
                       acc = acc ? *acc + term : term;
                     }
                     return *acc;
                   }
                   for (std::size_t j = 0; j < k; ++j) {
                     const Var term = roll(matmul(g, kernel_tap(kernel, j)),
                                           r - static_cast<std::int64_t>(j), n, c_in);
                     acc = acc ? *acc + term : term;
                   }
                   return *acc;
                 });
}

}  // namespace dgflow
