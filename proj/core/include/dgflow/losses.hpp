#pragma once

#include <optional>
#include <string>

#include "dgflow/energy.hpp"
#include "dgflow/models.hpp"
#include "dgflow/structure.hpp"

namespace dgflow {

// mean_b |(u1 - u0)/dt - s * G * dg(u1, u0)|^2 with dg the discrete gradient
// of h. u0, u1 are [B x dim] nodes on one tape; `friction`, when given,
// replaces the friction of a damped G so it can be learned.
Var loss_dgnet(const Energy& h, const GSpec& g, const Var& u0, const Var& u1, double dt,
               std::optional<Var> friction = std::nullopt, double eps = 0.0);

enum class TrainIntegrator { euler, rk2 };

std::string to_string(TrainIntegrator k);
TrainIntegrator train_integrator_from_string(const std::string& s);

// One explicit step of du/dt = f(u) recorded on the tape, so the loss
// back-propagates through every stage.
template <class F>
Var explicit_step(TrainIntegrator k, const F& f, const Var& u, double dt) {
  const Var k1 = f(u);
  if (k == TrainIntegrator::euler) return u + dt * k1;
  return u + dt * f(u + (0.5 * dt) * k1);
}

// s * G * grad H(u) on the tape, differentiable in the energy parameters.
Var energy_field(const Energy& h, const GSpec& g, const Var& u,
                 std::optional<Var> friction = std::nullopt);

// mean_b |u1 - Step(u0)|^2, or of (u1 - Step(u0))/dt when normalized, for a
// learned energy (HNN-style) under G.
Var loss_integrator(const Energy& h, const GSpec& g, TrainIntegrator k, const Var& u0,
                    const Var& u1, double dt, bool normalize = true,
                    std::optional<Var> friction = std::nullopt);
// Same for a neural vector field.
Var loss_integrator(const NodeModel& m, const std::vector<Var>& params, TrainIntegrator k,
                    const Var& u0, const Var& u1, double dt, bool normalize = true);

}  // namespace dgflow
