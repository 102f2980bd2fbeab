#include "dgflow/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>

#include "dgflow/errors.hpp"
#include "dgflow/parallel.hpp"

namespace dgflow {

std::string to_string(ModelRole r) {
  switch (r) {
    case ModelRole::dgnet: return "dgnet";
    case ModelRole::hnn: return "hnn";
    case ModelRole::node: return "node";
  }
  return "?";
}

ModelRole role_from_string(const std::string& s) {
  if (s == "dgnet") return ModelRole::dgnet;
  if (s == "hnn") return ModelRole::hnn;
  if (s == "node") return ModelRole::node;
  throw std::invalid_argument("unknown model '" + s + "' (dgnet, hnn or node)");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (batch == 0) throw std::invalid_argument("train: batch must be at least 1");
  if (log_every == 0) throw std::invalid_argument("train: log interval must be at least 1");
  if (learn_friction && role == ModelRole::node)
    throw std::invalid_argument("train: a vector-field model has no friction parameter");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["model"] = to_string(role);
  j["lr"] = lr;
  j["batch"] = batch;
  j["iterations"] = iterations;
  j["seed"] = seed;
  j["precision"] = to_string(precision);
  j["integrator"] = role == ModelRole::dgnet ? "discrete_gradient" : to_string(integrator);
  j["normalize_by_dt"] = normalize_by_dt;
  j["micro_batch"] = micro_batch;
  j["learn_friction"] = learn_friction;
  return j.dump();
}

namespace {

using Clock = std::chrono::steady_clock;

std::size_t micro_size(const TrainConfig& cfg, const ArchSpec& arch) {
  if (cfg.micro_batch > 0) return std::min(cfg.micro_batch, cfg.batch);
  std::size_t width = 1;
  for (std::size_t w : arch.hidden) width = std::max(width, w);
  const bool conv = arch.kind == ArchKind::conv || arch.kind == ArchKind::node_conv;
  const std::size_t per_row = conv ? arch.state_dim * width : width;
  return std::clamp<std::size_t>(40000 / std::max<std::size_t>(per_row, 1), 1, cfg.batch);
}

// Structure operator used when friction is learned.
GSpec friction_operator(const GSpec& g) {
  if (g.kind() == GKind::damped) return GSpec::damped(g.dim() / 2, g.friction(), true);
  if (g.kind() == GKind::symplectic) return GSpec::damped(g.dim() / 2, Tensor::zeros({g.dim() / 2}), true);
  throw std::invalid_argument("friction can only be learned for G = S - R");
}

// Shared loop: `loss_fn(tape, params, friction, u0, u1)` builds the loss of
// one micro-batch on `tape`.
template <class LossFn>
TrainResult run(ParamStore& params, std::optional<Tensor> friction, const PairSet& data,
                const TrainConfig& cfg, std::size_t micro, const LossFn& loss_fn) {
  cfg.validate();
  tune_allocator();
  if (data.size() == 0) throw std::invalid_argument("train: dataset is empty");
  TrainResult res;
  const auto start = Clock::now();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  Adam adam(AdamConfig{cfg.lr});
  Adam friction_adam(AdamConfig{cfg.lr});

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> idx(cfg.batch);
    for (auto& i : idx) i = pick(rng);

    std::vector<Tensor> grads;
    for (std::size_t i = 0; i < params.size(); ++i) grads.push_back(Tensor::zeros(params[i].shape()));
    Tensor friction_grad = friction ? Tensor::zeros(friction->shape()) : Tensor();
    double loss = 0.0;
    try {
      for (std::size_t lo = 0; lo < idx.size(); lo += micro) {
        const std::size_t hi = std::min(idx.size(), lo + micro);
        const PairSet part = data.gather({idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                          idx.begin() + static_cast<std::ptrdiff_t>(hi)});
        const double w = static_cast<double>(hi - lo) / static_cast<double>(idx.size());
        Tape tape(cfg.precision);
        std::vector<Var> pv;
        for (const auto& t : params.values()) pv.push_back(tape.leaf(t));
        std::optional<Var> fv;
        if (friction) fv = tape.leaf(*friction);
        const Var u0 = tape.constant(part.u0), u1 = tape.constant(part.u1);
        const Var l = loss_fn(tape, pv, fv, u0, u1);
        loss += w * l.value().item();
        std::vector<Var> wrt = pv;
        if (fv) wrt.push_back(*fv);
        const GradMap gm = tape.backward(l, wrt);
        for (std::size_t i = 0; i < pv.size(); ++i) grads[i] = grads[i] + w * gm.value(pv[i]);
        if (fv) friction_grad = friction_grad + w * gm.value(*fv);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(loss))
      throw NumericalError("training diverged at iteration " + std::to_string(it) + ": loss is not finite");

    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      res.log.push_back({it, loss, std::chrono::duration<double>(Clock::now() - start).count()});
    }
    adam.step(params.mutable_values(), grads);
    if (friction) {
      friction_adam.step({&*friction}, {friction_grad});
      std::vector<double> f(friction->values());
      for (double& v : f) v = std::max(v, 0.0);
      friction = Tensor(friction->shape(), std::move(f), friction->precision());
    }
  }
  res.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  res.friction = friction;
  return res;
}

}  // namespace

TrainResult train_energy(EnergyModel& model, const GSpec& g, const PairSet& data, const TrainConfig& cfg) {
  if (cfg.role == ModelRole::node) throw std::invalid_argument("train_energy: role must be dgnet or hnn");
  if (data.u0.dim(1) != model.state_dim()) throw ShapeError("train: data and model dimensions differ");
  const GSpec gl = cfg.learn_friction ? friction_operator(g) : g;
  std::optional<Tensor> friction;
  if (cfg.learn_friction) friction = Tensor::zeros(gl.friction().shape(), cfg.precision);
  const std::size_t micro = micro_size(cfg, model.arch());
  const double dt = data.dt;
  return run(model.params(), friction, data, cfg, micro,
             [&](Tape&, const std::vector<Var>& p, const std::optional<Var>& f, const Var& u0, const Var& u1) {
               const BoundEnergyModel h(model, p);
               if (cfg.role == ModelRole::dgnet) return loss_dgnet(h, gl, u0, u1, dt, f);
               return loss_integrator(h, gl, cfg.integrator, u0, u1, dt, cfg.normalize_by_dt, f);
             });
}

TrainResult train_node(NodeModel& model, const PairSet& data, const TrainConfig& cfg) {
  if (cfg.role != ModelRole::node) throw std::invalid_argument("train_node: role must be node");
  if (data.u0.dim(1) != model.state_dim()) throw ShapeError("train: data and model dimensions differ");
  const std::size_t micro = micro_size(cfg, model.arch());
  const double dt = data.dt;
  return run(model.params(), std::nullopt, data, cfg, micro,
             [&](Tape&, const std::vector<Var>& p, const std::optional<Var>&, const Var& u0, const Var& u1) {
               return loss_integrator(model, p, cfg.integrator, u0, u1, dt, cfg.normalize_by_dt);
             });
}

double evaluate_loss(const EnergyModel& model, const GSpec& g, const PairSet& data, const TrainConfig& cfg,
                     std::optional<Tensor> friction) {
  Tape tape(cfg.precision);
  const BoundEnergyModel h = model.bind(tape, false);
  const Var u0 = tape.constant(data.u0), u1 = tape.constant(data.u1);
  std::optional<Var> f;
  const GSpec gl = friction ? friction_operator(g) : g;
  if (friction) f = tape.constant(*friction);
  const Var l = cfg.role == ModelRole::dgnet
                    ? loss_dgnet(h, gl, u0, u1, data.dt, f)
                    : loss_integrator(h, gl, cfg.integrator, u0, u1, data.dt, cfg.normalize_by_dt, f);
  return l.value().item();
}

}  // namespace dgflow
