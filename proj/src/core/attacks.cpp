#include "core/attacks.hpp"

#include <cmath>
#include <limits>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace atdkit {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_objective(const ObjectiveEval& eval, std::size_t batch,
                     std::size_t elems) {
  require(eval.values.size() == batch, ErrorCode::Contract,
          "attack: objective returned ", eval.values.size(),
          " values for batch ", batch);
  require(eval.grad.size() == elems, ErrorCode::Contract,
          "attack: objective gradient size ", eval.grad.size(), ", expected ",
          elems);
  for (std::size_t i = 0; i < batch; ++i) {
    require(std::isfinite(eval.values[i]), ErrorCode::Numeric,
            "attack: non-finite objective value at sample ", i);
    for (double g : eval.grad.row(i)) {
      require(std::isfinite(g), ErrorCode::Numeric,
              "attack: non-finite gradient at sample ", i);
    }
  }
}

double mean(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

double AttackConfig::resolved_step_size() const {
  if (step_size > 0.0) return step_size;
  return steps > 0 ? 2.5 * epsilon / static_cast<double>(steps) : epsilon;
}

void AttackConfig::validate() const {
  require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorCode::Config,
          "attack.epsilon: must be finite and >= 0, got ", epsilon);
  require(steps >= 0, ErrorCode::Config, "attack.steps: must be >= 0, got ",
          steps);
  require(restarts >= 1, ErrorCode::Config,
          "attack.restarts: must be >= 1, got ", restarts);
  if (clamp) {
    require(clamp->lo < clamp->hi, ErrorCode::Config,
            "attack.clamp: empty range [", clamp->lo, ", ", clamp->hi, "]");
  }
}

double project_step(double x, double v, double eps, double lo, double hi) {
  if (v > hi) v = hi;
  if (v < lo) v = lo;
  double d = v - x;
  if (d > eps) {
    v = x + eps;
    // One addition can round outward past the ball; walk back toward x.
    // x is inside the box, so moving toward it cannot leave the box.
    while (v - x > eps) v = std::nextafter(v, x);
  } else if (d < -eps) {
    v = x - eps;
    while (v - x < -eps) v = std::nextafter(v, x);
  }
  return v;
}

namespace {

// Shared projection of a full tensor of proposals against the source.
void project_all(const Tensor& x, Tensor& v, double eps,
                 const std::optional<ClampRange>& clamp) {
  const double lo = clamp ? clamp->lo : -std::numeric_limits<double>::infinity();
  const double hi = clamp ? clamp->hi : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = project_step(x[i], v[i], eps, lo, hi);
  }
}

}  // namespace

Tensor fgsm(const Tensor& x, const BatchObjective& objective, Direction dir,
            double epsilon, const std::optional<ClampRange>& clamp) {
  require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorCode::Config,
          "attack.epsilon: must be finite and >= 0, got ", epsilon);
  require(x.all_finite(), ErrorCode::Contract, "attack: non-finite input");
  const double s = dir == Direction::Maximize ? 1.0 : -1.0;
  ObjectiveEval eval = objective(x);
  check_objective(eval, x.batch(), x.size());
  Tensor v = x;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = x[i] + epsilon * (s * sign(eval.grad[i]));
  }
  project_all(x, v, epsilon, clamp);
  return v;
}

Tensor pgd(const Tensor& x, const BatchObjective& objective, Direction dir,
           const AttackConfig& cfg, std::uint64_t seed, AttackTrace* trace) {
  cfg.validate();
  require(x.all_finite(), ErrorCode::Contract, "attack: non-finite input");
  const double s = dir == Direction::Maximize ? 1.0 : -1.0;
  const double eps = cfg.epsilon;
  const double alpha = cfg.resolved_step_size();

  Tensor best = x;
  std::vector<double> best_value(
      x.batch(), -std::numeric_limits<double>::infinity());

  for (int restart = 0; restart < cfg.restarts; ++restart) {
    RngStream rng = RngStream::derive(seed, "pgd-restart",
                                      static_cast<std::uint64_t>(restart));
    Tensor v = x;
    if (cfg.rand_init && eps > 0.0) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = x[i] + rng.uniform(-eps, eps);
      }
      project_all(x, v, eps, cfg.clamp);
    }

    for (int step = 0; step < cfg.steps; ++step) {
      ObjectiveEval eval = objective(v);
      check_objective(eval, x.batch(), x.size());
      if (trace) {
        trace->rows.push_back({restart, step, mean(eval.values)});
      }
      for (std::size_t i = 0; i < v.size(); ++i) {
        // Delta-centric update: the ball constraint is enforced on the
        // carried difference, the box on the absolute value.
        double delta = v[i] - x[i];
        delta += alpha * (s * sign(eval.grad[i]));
        if (delta > eps) delta = eps;
        if (delta < -eps) delta = -eps;
        v[i] = x[i] + delta;
      }
      project_all(x, v, eps, cfg.clamp);
    }

    ObjectiveEval final_eval = objective(v);
    check_objective(final_eval, x.batch(), x.size());
    if (trace) {
      trace->rows.push_back({restart, cfg.steps, mean(final_eval.values)});
    }
    for (std::size_t i = 0; i < x.batch(); ++i) {
      const double value = s * final_eval.values[i];
      if (value > best_value[i]) {
        best_value[i] = value;
        best.set_row(i, v.row(i));
      }
    }
  }
  return best;
}

}  // namespace atdkit
