#include "veil/attack.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "veil/rng.hpp"

namespace veil {

namespace {

void check_pixel_range(const Tensor& x, const char* what) {
  if (min_value(x) < 0.0 || max_value(x) > 1.0) {
    throw std::invalid_argument(std::string(what) + ": pixel values outside [0,1]");
  }
}

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

std::optional<double> cosine(const Tensor& a, const Tensor& b) {
  double na = std::sqrt(dot(a, a));
  double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return dot(a, b) / (na * nb);
}

}  // namespace

const char* mode_name(AttackMode m) {
  switch (m) {
    case AttackMode::kSemantic: return "semantic";
    case AttackMode::kTextural: return "textural";
    case AttackMode::kFused: return "fused";
  }
  return "?";
}

void AttackConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("attack config: alpha must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("attack config: epsilon must be > 0");
  if (!(alpha <= epsilon)) throw std::invalid_argument("attack config: alpha must be <= epsilon");
  if (steps < 1) throw std::invalid_argument("attack config: steps must be >= 1");
  if (!(fused_weight >= 0.0)) {
    throw std::invalid_argument("attack config: fused_weight must be finite and >= 0");
  }
  if (mode != AttackMode::kSemantic) {
    if (!target.has_value()) {
      throw std::invalid_argument(std::string("attack config: mode '") + mode_name(mode) +
                                  "' requires a target image");
    }
    check_image_shape(*target, "attack config target");
    check_pixel_range(*target, "attack config target");
  }
}

double semantic_term(const ModelParams& params, const NoiseSchedule& schedule,
                     const Tensor& x_prime, int64_t t, const Tensor& eps) {
  return dm_loss(params, schedule, x_prime, t, eps);
}

double textural_term(const ModelParams& params, const Tensor& x, const Tensor& delta,
                     const Tensor& y) {
  check_image_shape(x, "textural_term x");
  check_image_shape(y, "textural_term target");
  if (!x.same_shape(delta)) {
    throw std::invalid_argument("textural_term: delta shape " + shape_str(delta.shape) +
                                " differs from image shape " + shape_str(x.shape));
  }
  Graph g;
  ParamVars pv = load_params(g, params);
  Var xp = g.add(g.input(x), g.input(delta));
  Var diff = g.sub(encode_node(g, pv, g.input(y)), encode_node(g, pv, xp));
  return g.scalar_value(g.l2norm(diff));
}

double fused_objective(const ModelParams& params, const NoiseSchedule& schedule, const Tensor& x,
                       const Tensor& delta, const Tensor& y, double w, int64_t t,
                       const Tensor& eps) {
  if (!(w >= 0.0)) throw std::invalid_argument("fused_objective: w must be finite and >= 0");
  Tensor x_prime = x;
  for (int64_t i = 0; i < x_prime.numel(); ++i) x_prime[i] += delta[i];
  return w * semantic_term(params, schedule, x_prime, t, eps) -
         textural_term(params, x, delta, y);
}

Tensor pgd_step(const Tensor& x, const Tensor& delta, const Tensor& grad, double alpha,
                double eps) {
  if (!x.same_shape(delta) || !x.same_shape(grad)) {
    throw std::invalid_argument("pgd_step: mismatched shapes x " + shape_str(x.shape) +
                                ", delta " + shape_str(delta.shape) + ", grad " +
                                shape_str(grad.shape));
  }
  Tensor out = delta;
  for (int64_t i = 0; i < out.numel(); ++i) {
    double d = clamp(out[i] + alpha * sign(grad[i]), -eps, eps);
    // Fold the pixel box only when it actually binds: rewriting d as
    // clamp(x+d)-x unconditionally would round through x and lose the
    // exact +/-eps value at saturation.
    double px = x[i] + d;
    if (px < 0.0) {
      d = -x[i];  // x + d == 0 exactly
    } else if (px > 1.0) {
      d = 1.0 - x[i];  // exact whenever x >= 0.5; back off rounding overshoot otherwise
      while (x[i] + d > 1.0) d = std::nextafter(d, -1.0);
    }
    out[i] = d;
  }
  return out;
}

PerturbationResult pgd_attack(const ModelParams& params, const NoiseSchedule& schedule,
                              const Tensor& x, const AttackConfig& cfg) {
  cfg.validate();
  check_image_shape(x, "pgd_attack");
  check_pixel_range(x, "pgd_attack input");

  const bool with_semantic = cfg.mode != AttackMode::kTextural;
  const bool with_textural = cfg.mode != AttackMode::kSemantic;

  // The target latent is constant across steps.
  Tensor target_latent;
  if (with_textural) target_latent = encode(params, *cfg.target);

  PerturbationResult res;
  res.config = cfg;
  res.delta = Tensor::zeros(x.shape);
  res.loss_trace.reserve(static_cast<size_t>(cfg.steps));
  res.audit.reserve(static_cast<size_t>(cfg.steps));

  Rng rng(cfg.seed);
  for (int64_t step = 0; step < cfg.steps; ++step) {
    // Drawn every step in every mode so streams align across modes.
    int64_t t = rng.uniform_int(1, schedule.T);
    Tensor eps = rng.normal_tensor({kLatentChannels, kLatentSide, kLatentSide});

    StepLoss sl;
    Tensor grad;
    try {
      Graph g;
      ParamVars pv = load_params(g, params);
      Var dv = g.input(res.delta);
      Var xp = g.add(g.input(x), dv);
      Var sem{}, tex{};
      if (with_semantic) {
        sem = dm_loss_node(g, pv, schedule, xp, t, g.input(eps));
        sl.semantic = g.scalar_value(sem);
      }
      if (with_textural) {
        tex = g.l2norm(g.sub(g.input(target_latent), encode_node(g, pv, xp)));
        sl.textural = g.scalar_value(tex);
      }
      Var obj{};
      switch (cfg.mode) {
        case AttackMode::kSemantic: obj = sem; break;
        case AttackMode::kTextural: obj = g.scale(tex, -1.0); break;
        case AttackMode::kFused: obj = g.sub(g.scale(sem, cfg.fused_weight), tex); break;
      }
      sl.objective = g.scalar_value(obj);
      grad = std::move(g.backward(obj, {dv})[0]);
      ensure_finite(grad, "objective gradient");
    } catch (const std::exception& e) {
      throw std::runtime_error("pgd_attack: step " + std::to_string(step) + ": " + e.what());
    }

    res.loss_trace.push_back(sl);
    res.delta = pgd_step(x, res.delta, grad, cfg.alpha, cfg.epsilon);

    StepAudit audit;
    audit.max_abs_delta = max_abs(res.delta);
    double lo = 1.0, hi = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) {
      double px = x[i] + res.delta[i];
      if (px < lo) lo = px;
      if (px > hi) hi = px;
    }
    audit.min_pixel = lo;
    audit.max_pixel = hi;
    res.audit.push_back(audit);
    if (cfg.record_deltas) res.delta_history.push_back(res.delta);
    if (audit.max_abs_delta > cfg.epsilon + 1e-12 || lo < 0.0 || hi > 1.0) {
      throw std::logic_error("pgd_attack: feasibility violated at step " + std::to_string(step));
    }
  }

  res.adversarial = x;
  for (int64_t i = 0; i < x.numel(); ++i) res.adversarial[i] = x[i] + res.delta[i];
  return res;
}

std::vector<DirectionProbe> gradient_direction_probe(const ModelParams& params,
                                                     const NoiseSchedule& schedule,
                                                     const Tensor& x, const Tensor& y,
                                                     const std::vector<double>& w_list,
                                                     uint64_t seed) {
  check_image_shape(x, "gradient_direction_probe x");
  check_image_shape(y, "gradient_direction_probe target");

  Rng rng(seed);
  int64_t t = rng.uniform_int(1, schedule.T);
  Tensor eps = rng.normal_tensor({kLatentChannels, kLatentSide, kLatentSide});

  Graph g;
  ParamVars pv = load_params(g, params);
  Var dv = g.input(Tensor::zeros(x.shape));
  Var xp = g.add(g.input(x), dv);
  Var sem = dm_loss_node(g, pv, schedule, xp, t, g.input(eps));
  Var tex = g.l2norm(g.sub(g.input(encode(params, y)), encode_node(g, pv, xp)));

  Tensor grad_sem = std::move(g.backward(sem, {dv})[0]);
  Tensor grad_tex_obj = std::move(g.backward(g.scale(tex, -1.0), {dv})[0]);

  std::vector<DirectionProbe> probes;
  probes.reserve(w_list.size());
  for (double w : w_list) {
    if (!(w >= 0.0)) {
      throw std::invalid_argument("gradient_direction_probe: w must be finite and >= 0");
    }
    Var obj = g.sub(g.scale(sem, w), tex);
    Tensor grad_w = std::move(g.backward(obj, {dv})[0]);
    DirectionProbe p;
    p.w = w;
    p.cos_semantic = cosine(grad_w, grad_sem);
    p.cos_textural = cosine(grad_w, grad_tex_obj);
    probes.push_back(p);
  }
  return probes;
}

}  // namespace veil
