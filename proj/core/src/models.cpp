#include "dgflow/models.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>

#include "dgflow/errors.hpp"

namespace dgflow {

std::string to_string(ArchKind k) {
  switch (k) {
    case ArchKind::mlp: return "mlp";
    case ArchKind::conv: return "conv";
    case ArchKind::separable: return "separable";
    case ArchKind::node_mlp: return "node_mlp";
    case ArchKind::node_conv: return "node_conv";
  }
  return "?";
}

ArchKind arch_from_string(const std::string& s) {
  if (s == "mlp") return ArchKind::mlp;
  if (s == "conv") return ArchKind::conv;
  if (s == "separable") return ArchKind::separable;
  if (s == "node_mlp") return ArchKind::node_mlp;
  if (s == "node_conv") return ArchKind::node_conv;
  throw std::invalid_argument("unknown architecture '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sin: return "sin";
    case Activation::cos: return "cos";
    case Activation::rsqrt: return "rsqrt";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "sin") return Activation::sin;
  if (s == "cos") return Activation::cos;
  if (s == "rsqrt") return Activation::rsqrt;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string ArchSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["state_dim"] = state_dim;
  j["hidden"] = hidden;
  j["activation"] = to_string(activation);
  j["kernel"] = kernel;
  j["dx"] = dx;
  j["flattened"] = flattened;
  return j.dump();
}

ArchSpec ArchSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("architecture: ") + e.what());
  }
  ArchSpec a;
  try {
    a.kind = arch_from_string(j.at("kind").get<std::string>());
    a.state_dim = j.at("state_dim").get<std::size_t>();
    a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    a.activation = activation_from_string(j.value("activation", std::string("tanh")));
    a.kernel = j.value("kernel", std::size_t{3});
    a.dx = j.value("dx", 1.0);
    a.flattened = j.value("flattened", false);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("architecture: ") + e.what());
  }
  return a;
}

// ---------------------------------------------------------------- ParamStore

void ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  names_.push_back(name);
  values_.push_back(std::move(value));
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.numel();
  return n;
}

std::size_t ParamStore::index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw std::out_of_range("no parameter '" + name + "'");
}

const Tensor& ParamStore::at(const std::string& name) const { return values_[index(name)]; }

bool ParamStore::contains(const std::string& name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

void ParamStore::set(std::size_t i, Tensor value) {
  if (value.shape() != values_.at(i).shape())
    throw ShapeError("parameter '" + names_[i] + "': expected " + shape_string(values_[i].shape()) +
                     ", got " + shape_string(value.shape()));
  values_[i] = std::move(value);
}

std::vector<Tensor*> ParamStore::mutable_values() {
  std::vector<Tensor*> out;
  for (auto& v : values_) out.push_back(&v);
  return out;
}

bool ParamStore::identical(const ParamStore& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!values_[i].identical(other.values_[i])) return false;
  return true;
}

// ---------------------------------------------------------------- init

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Tensor orthogonal_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ShapeError("orthogonal_matrix: empty shape");
  const bool tall = rows >= cols;
  const std::size_t m = tall ? rows : cols, n = tall ? cols : rows;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = tall ? q(i, j) : q(j, i);
  return Tensor::matrix(rows, cols, std::move(out));
}

namespace {

// Dense layers in -> widths... -> out, named prefix + "W<i>" / "b<i>".
void add_dense_stack(ParamStore& p, const std::string& prefix, std::size_t in,
                     const std::vector<std::size_t>& hidden, std::size_t out, std::uint64_t& seed) {
  std::size_t prev = in;
  std::size_t layer = 0;
  auto add = [&](std::size_t width) {
    seed = splitmix(seed);
    p.add(prefix + "W" + std::to_string(layer), orthogonal_matrix(width, prev, seed));
    p.add(prefix + "b" + std::to_string(layer), Tensor::zeros({width}));
    prev = width;
    ++layer;
  };
  for (std::size_t w : hidden) add(w);
  add(out);
}

void add_conv_stack(ParamStore& p, const ArchSpec& a, std::size_t out, std::uint64_t& seed) {
  if (a.hidden.empty()) throw std::invalid_argument("conv architecture needs a hidden width");
  if (a.kernel % 2 == 0) throw std::invalid_argument("conv kernel size must be odd");
  const std::size_t h = a.hidden.front();
  seed = splitmix(seed);
  p.add("conv.K", orthogonal_matrix(h, a.kernel, seed).reshaped({h, 1, a.kernel}));
  p.add("conv.b", Tensor::zeros({h}));
  const std::size_t fc1_in = a.flattened ? h * a.state_dim : h;
  const std::size_t h2 = a.hidden.size() > 1 ? a.hidden[1] : h;
  seed = splitmix(seed);
  p.add("fc1.W", orthogonal_matrix(h2, fc1_in, seed));
  p.add("fc1.b", Tensor::zeros({h2}));
  seed = splitmix(seed);
  p.add("fc2.W", orthogonal_matrix(out, h2, seed));
  p.add("fc2.b", Tensor::zeros({out}));
}

void validate(const ArchSpec& a) {
  if (a.state_dim == 0) throw std::invalid_argument("state dimension must be positive");
  if (a.kind == ArchKind::separable && a.state_dim % 2 != 0)
    throw std::invalid_argument("separable energy needs an even state dimension");
  if ((a.kind == ArchKind::conv || a.kind == ArchKind::node_conv) && !(a.dx > 0.0))
    throw std::invalid_argument("conv architecture needs dx > 0");
  for (std::size_t w : a.hidden)
    if (w == 0) throw std::invalid_argument("hidden widths must be positive");
}

void check_params(const ArchSpec& a, const ParamStore& p) {
  const ParamStore ref = init_params(a, 0);
  if (ref.names() != p.names()) throw FormatError("parameter names do not match the architecture");
  for (std::size_t i = 0; i < ref.size(); ++i)
    if (ref[i].shape() != p[i].shape())
      throw FormatError("parameter '" + p.name(i) + "' has shape " + shape_string(p[i].shape()) +
                        ", expected " + shape_string(ref[i].shape()));
}

ParamStore rounded(ParamStore p, Precision prec) {
  for (std::size_t i = 0; i < p.size(); ++i) p.set(i, p[i].with_precision(prec));
  return p;
}

}  // namespace

ParamStore init_params(const ArchSpec& a, std::uint64_t seed) {
  validate(a);
  ParamStore p;
  std::uint64_t s = seed;
  switch (a.kind) {
    case ArchKind::mlp: add_dense_stack(p, "", a.state_dim, a.hidden, 1, s); break;
    case ArchKind::separable:
      add_dense_stack(p, "T.", a.state_dim / 2, a.hidden, 1, s);
      add_dense_stack(p, "V.", a.state_dim / 2, a.hidden, 1, s);
      break;
    case ArchKind::node_mlp: add_dense_stack(p, "", a.state_dim, a.hidden, a.state_dim, s); break;
    case ArchKind::conv: add_conv_stack(p, a, 1, s); break;
    case ArchKind::node_conv:
      if (a.flattened) throw std::invalid_argument("node_conv has no flattened variant");
      add_conv_stack(p, a, 1, s);
      break;
  }
  return p;
}

// ---------------------------------------------------------------- programs

namespace {

template <class V>
V act(Activation f, const V& x) {
  if constexpr (std::is_same_v<V, Var>) return apply_activation(f, x);
  else return activate(f, x);
}

template <class V>
std::size_t batch_rows(const V& x) {
  return x.shape()[0];
}

// x[B x in] -> [B x out] through p[at] (W [out x in]) and p[at+1] (b [out]).
template <class V>
V dense(const V& x, const std::vector<Var>& p, std::size_t at) {
  return matmul(x, p[at], false, true) + broadcast_rows(p[at + 1], batch_rows(x));
}

template <class V>
V dense_stack(const V& x, const std::vector<Var>& p, std::size_t at, std::size_t layers,
              Activation f) {
  V h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    h = dense(h, p, at + 2 * l);
    if (l + 1 < layers) h = act(f, h);
  }
  return h;
}

// Periodic conv on each row of x[B x N] followed by the dense head; returns
// per-point outputs [(B*N) x out] or, flattened, [B x out].
template <class V>
V conv_stack(const ArchSpec& a, const V& x, const std::vector<Var>& p) {
  const std::size_t b = batch_rows(x), n = a.state_dim;
  const V col = reshape(x, {b * n, 1});
  V z = conv1d_periodic_rows(p[0], col, n) + broadcast_rows(p[1], b * n);
  z = act(a.activation, z);
  if (a.flattened) z = reshape(z, {b, n * a.hidden.front()});
  z = act(a.activation, dense(z, p, 2));
  return dense(z, p, 4);
}

template <class V>
V as_rows(const V& x, std::size_t dim) {
  const Shape s = x.shape();
  if (s.size() == 1 && s[0] == dim) return reshape(x, {1, dim});
  if (s.size() != 2 || s[1] != dim)
    throw ShapeError("model input: expected [B x " + std::to_string(dim) + "], got " +
                     shape_string(s));
  return x;
}

}  // namespace

EnergyModel::EnergyModel(ArchSpec arch, std::uint64_t seed, Precision precision)
    : arch_(std::move(arch)), precision_(precision) {
  if (!arch_.is_energy()) throw std::invalid_argument("not an energy architecture");
  params_ = rounded(init_params(arch_, seed), precision_);
}

EnergyModel::EnergyModel(ArchSpec arch, ParamStore params, Precision precision)
    : arch_(std::move(arch)), precision_(precision) {
  if (!arch_.is_energy()) throw std::invalid_argument("not an energy architecture");
  check_params(arch_, params);
  params_ = rounded(std::move(params), precision_);
}

double EnergyModel::gradient_scale() const {
  return arch_.kind == ArchKind::conv && !arch_.flattened ? 1.0 / arch_.dx : 1.0;
}

template <class V>
V EnergyModel::program(const V& xin, const std::vector<Var>& p) const {
  if (p.size() != params_.size()) throw std::invalid_argument("parameter count mismatch");
  const V x = as_rows(xin, arch_.state_dim);
  const std::size_t b = batch_rows(x);
  const std::size_t layers = arch_.hidden.size() + 1;
  switch (arch_.kind) {
    case ArchKind::mlp: return reshape(dense_stack(x, p, 0, layers, arch_.activation), {b});
    case ArchKind::separable: {
      const std::size_t half = arch_.state_dim / 2;
      const std::vector<Var> pt(p.begin(), p.begin() + 2 * layers);
      const std::vector<Var> pv(p.begin() + 2 * layers, p.end());
      const V t = dense_stack(slice_cols(x, half, half), pt, 0, layers, arch_.activation);
      const V v = dense_stack(slice_cols(x, 0, half), pv, 0, layers, arch_.activation);
      return reshape(t + v, {b});
    }
    case ArchKind::conv: {
      const V y = conv_stack(arch_, x, p);
      if (arch_.flattened) return reshape(y, {b});
      return arch_.dx * sum_cols(reshape(y, {b, arch_.state_dim}));
    }
    default: break;
  }
  throw std::logic_error("energy program: bad architecture");
}

std::vector<Var> EnergyModel::bind_params(Tape& tape, bool trainable) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& t : params_.values()) out.push_back(trainable ? tape.leaf(t) : tape.constant(t));
  return out;
}

BoundEnergyModel EnergyModel::bind(Tape& tape, bool trainable) const {
  return BoundEnergyModel(*this, bind_params(tape, trainable));
}

Var EnergyModel::energy(const Var& x, const std::vector<Var>& p) const { return program(x, p); }
DVar EnergyModel::energy(const DVar& x, const std::vector<Var>& p) const { return program(x, p); }

Var EnergyModel::energy(const Var& x) const { return program(x, bind_params(x.tape(), false)); }
DVar EnergyModel::energy(const DVar& x) const {
  return program(x, bind_params(x.graph().tape(), false));
}

// ---------------------------------------------------------------- NODE

NodeModel::NodeModel(ArchSpec arch, std::uint64_t seed, Precision precision)
    : arch_(std::move(arch)), precision_(precision) {
  if (arch_.kind != ArchKind::node_mlp && arch_.kind != ArchKind::node_conv)
    throw std::invalid_argument("not a vector-field architecture");
  params_ = rounded(init_params(arch_, seed), precision_);
}

NodeModel::NodeModel(ArchSpec arch, ParamStore params, Precision precision)
    : arch_(std::move(arch)), precision_(precision) {
  if (arch_.kind != ArchKind::node_mlp && arch_.kind != ArchKind::node_conv)
    throw std::invalid_argument("not a vector-field architecture");
  check_params(arch_, params);
  params_ = rounded(std::move(params), precision_);
}

Var NodeModel::forward(const Var& xin, const std::vector<Var>& p) const {
  if (p.size() != params_.size()) throw std::invalid_argument("parameter count mismatch");
  const Var x = as_rows(xin, arch_.state_dim);
  if (arch_.kind == ArchKind::node_mlp)
    return dense_stack(x, p, 0, arch_.hidden.size() + 1, arch_.activation);
  return reshape(conv_stack(arch_, x, p), {batch_rows(x), arch_.state_dim});
}

Tensor NodeModel::forward(const Tensor& x) const {
  Tape tape(precision_);
  const Var xv = tape.constant(as_batch(x));
  return forward(xv, bind_params(tape, false)).value().reshaped(x.shape());
}

std::vector<Var> NodeModel::bind_params(Tape& tape, bool trainable) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& t : params_.values()) out.push_back(trainable ? tape.leaf(t) : tape.constant(t));
  return out;
}

}  // namespace dgflow
