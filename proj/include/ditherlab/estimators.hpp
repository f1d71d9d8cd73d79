// Location estimators for dithered and quantized batches.
//
//   mean, midrange          classical estimators on dithered samples
//   q_mean, qml             sample mean and EM maximum likelihood on quantized samples
//   dml                     EM maximum likelihood on dithered samples
//   ggml                    maximum likelihood under the GG approximation
//   nearly_best, alpha_trim L-estimators with GG-derived weights
//   nonlinear               data-dependent order-statistic weights
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ditherlab/ggapprox.hpp"
#include "ditherlab/numerics.hpp"
#include "ditherlab/quantize.hpp"

namespace ditherlab {

enum class EstimatorKind { kMean, kMidrange, kQMean, kQml, kDml, kGgml, kNearlyBest, kAlphaTrim, kNonlinear };

inline constexpr std::array<EstimatorKind, 9> kAllEstimators = {
    EstimatorKind::kMean, EstimatorKind::kMidrange,   EstimatorKind::kQMean,
    EstimatorKind::kQml,  EstimatorKind::kDml,        EstimatorKind::kGgml,
    EstimatorKind::kNearlyBest, EstimatorKind::kAlphaTrim, EstimatorKind::kNonlinear};

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kMean: return "mean";
    case EstimatorKind::kMidrange: return "mid";
    case EstimatorKind::kQMean: return "q_mean";
    case EstimatorKind::kQml: return "qml";
    case EstimatorKind::kDml: return "dml";
    case EstimatorKind::kGgml: return "ggml";
    case EstimatorKind::kNearlyBest: return "nearly_best";
    case EstimatorKind::kAlphaTrim: return "alpha_trim";
    case EstimatorKind::kNonlinear: return "nonlinear";
  }
  return "?";
}

/// Accepts the canonical names plus "midrange".
inline std::optional<EstimatorKind> parse_estimator_kind(std::string_view name) {
  if (name == "midrange") return EstimatorKind::kMidrange;
  for (auto k : kAllEstimators) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

/// Batch kind an estimator consumes.
inline BatchKind input_kind(EstimatorKind k) {
  return (k == EstimatorKind::kQMean || k == EstimatorKind::kQml) ? BatchKind::kQuantized : BatchKind::kDithered;
}

/// Coefficients applied to ascending order statistics.
struct WeightVector {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  double sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
};

struct EmTrace {
  std::vector<double> iterates;
  std::vector<double> log_likelihoods;
  bool converged = false;
  int iterations = 0;
};

struct EmOptions {
  int max_iter = 500;
  /// Stop when an iterate moves less than step_tol * delta.
  double step_tol = 1e-9;
  /// Propose a secant estimate of the EM fixed point before each plain EM
  /// step and keep it only when the log-likelihood does not drop.
  bool accelerate = true;
};

struct EmResult {
  double estimate;
  EmTrace trace;
};

namespace detail {

inline void require_nonempty(const MeasurementBatch& b, const char* who) {
  if (b.samples.empty()) throw std::invalid_argument(std::string(who) + ": empty batch");
}

inline void require_kind(const MeasurementBatch& b, BatchKind kind, const char* who) {
  if (b.kind != kind) {
    throw std::invalid_argument(std::string(who) + ": expects a " + std::string(to_string(kind)) + " batch, got " +
                                std::string(to_string(b.kind)));
  }
}

inline std::vector<double> sorted(std::span<const double> xs) {
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  return s;
}

struct EmPoint {
  double log_likelihood;
  double step;
};

// Log-likelihood sum_i log(Phi(b_i) - Phi(a_i)) and EM step
// (sigma / K) sum_i E[Z | a_i < Z < b_i] at location mu, where
// a_i = (x_i - delta/2 - mu) / sigma and b_i = (x_i + delta/2 - mu) / sigma.
inline EmPoint em_evaluate(std::span<const double> xs, double mu, double sigma, double delta) {
  const double half = 0.5 * delta;
  double ll = 0.0;
  double m = 0.0;
  for (double x : xs) {
    const double a = (x - half - mu) / sigma;
    const double b = (x + half - mu) / sigma;
    const double lp = log_normal_interval(a, b);
    ll += lp;
    m += std::exp(std_normal_log_pdf(a) - lp) - std::exp(std_normal_log_pdf(b) - lp);
  }
  return {ll, sigma * m / static_cast<double>(xs.size())};
}

// EM iteration for the location of interval-censored Gaussian data; each
// sample x_i stands for the interval [x_i - delta/2, x_i + delta/2].
//
// The EM step is sigma^2 / K times the score, and the log-likelihood is
// concave, so the EM fixed point is the single root of the decreasing step
// function. With acceleration on, each iteration first tries the secant root
// of the step function through the current iterate and the most recent other
// evaluation, kept inside the bracket established so far, and falls back to
// the plain EM step when that try lowers the likelihood. Every recorded
// iterate therefore has a log-likelihood at least that of its predecessor.
//
// A plain EM step can be far below step_tol * delta while the iterate is
// still far from the fixed point (flat likelihoods), so a small move only
// counts as convergence once the step function is seen to change sign
// within step_tol * delta of the iterate.
inline EmResult em_location(std::span<const double> xs, double sigma, double delta, double init,
                            const EmOptions& opt) {
  if (!(sigma > 0.0)) throw DomainError("EM: sigma_z must be positive");
  EmResult out{init, {}};
  auto& tr = out.trace;
  const double tol = opt.step_tol * delta;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double lo = -kInf;  // step > 0 here
  double hi = kInf;   // step < 0 here
  double other_x = 0.0;
  double other_step = 0.0;
  bool have_other = false;

  double mu = init;
  EmPoint cur = em_evaluate(xs, mu, sigma, delta);
  auto note = [&](double x, const EmPoint& e) {
    if (e.step > 0.0) lo = std::max(lo, x);
    if (e.step < 0.0) hi = std::min(hi, x);
    if (x != mu) {
      other_x = x;
      other_step = e.step;
      have_other = true;
    }
  };
  auto certified = [&] {
    if (cur.step == 0.0 || hi - lo <= tol) return true;
    const double x = cur.step > 0.0 ? mu + tol : mu - tol;
    const EmPoint e = em_evaluate(xs, x, sigma, delta);
    note(x, e);
    return cur.step > 0.0 ? e.step <= 0.0 : e.step >= 0.0;
  };

  note(mu, cur);
  tr.iterates.push_back(mu);
  tr.log_likelihoods.push_back(cur.log_likelihood);
  if (cur.step == 0.0) tr.converged = true;

  double reach = tol;  // expansion distance while only one side is bracketed
  while (!tr.converged && tr.iterations < opt.max_iter) {
    double next = mu + cur.step;
    EmPoint at_next{};
    bool accepted = false;
    if (opt.accelerate) {
      const bool two_sided = std::isfinite(lo) && std::isfinite(hi);
      double x = next;
      if (have_other && cur.step != other_step) x = mu - cur.step * (mu - other_x) / (cur.step - other_step);
      const bool usable = std::isfinite(x) && x > lo && x < hi && (x - mu) * cur.step > 0.0;
      if (two_sided) {
        if (!usable) x = 0.5 * (lo + hi);
      } else if (!usable || std::abs(x - mu) <= std::abs(cur.step)) {
        // Flat step function: walk outward, doubling the distance.
        reach = std::max(2.0 * reach, std::abs(cur.step));
        x = cur.step > 0.0 ? mu + reach : mu - reach;
      }
      if (x != next && x != mu) {
        const EmPoint at_x = em_evaluate(xs, x, sigma, delta);
        note(x, at_x);
        if (at_x.log_likelihood >= cur.log_likelihood) {
          next = x;
          at_next = at_x;
          accepted = true;
        }
      }
    }
    if (!accepted) {
      at_next = em_evaluate(xs, next, sigma, delta);
      note(next, at_next);
    }
    const double moved = std::abs(next - mu);
    if (next != mu) {
      other_x = mu;
      other_step = cur.step;
      have_other = true;
    }
    mu = next;
    cur = at_next;
    ++tr.iterations;
    tr.iterates.push_back(mu);
    tr.log_likelihoods.push_back(cur.log_likelihood);
    if (opt.accelerate) {
      if (hi - lo <= tol || (moved < tol && certified())) tr.converged = true;
    } else if (moved < tol) {
      tr.converged = true;
    }
  }
  out.estimate = mu;
  return out;
}

}  // namespace detail

inline double est_mean(const MeasurementBatch& batch) {
  detail::require_nonempty(batch, "est_mean");
  return std::accumulate(batch.samples.begin(), batch.samples.end(), 0.0) / static_cast<double>(batch.size());
}

inline double est_midrange(const MeasurementBatch& batch) {
  detail::require_nonempty(batch, "est_midrange");
  const auto [lo, hi] = std::minmax_element(batch.samples.begin(), batch.samples.end());
  return 0.5 * (*lo + *hi);
}

inline double est_q_mean(const MeasurementBatch& batch) {
  detail::require_kind(batch, BatchKind::kQuantized, "est_q_mean");
  return est_mean(batch);
}

/// Log-likelihood shared by the quantized and dithered ML estimators:
/// sum_i log(Phi((x_i - mu + delta/2)/sigma_z) - Phi((x_i - mu - delta/2)/sigma_z)).
inline double interval_log_likelihood(std::span<const double> xs, double mu, double sigma_z, double delta) {
  return detail::em_evaluate(xs, mu, sigma_z, delta).log_likelihood;
}

/// Quantized-sample ML by EM, started from the quantized-sample mean.
inline EmResult est_qml(const MeasurementBatch& batch, double sigma_z, const EmOptions& opt = {}) {
  detail::require_kind(batch, BatchKind::kQuantized, "est_qml");
  detail::require_nonempty(batch, "est_qml");
  return detail::em_location(batch.samples, sigma_z, batch.spec.delta, est_mean(batch), opt);
}

/// Dithered-sample ML by EM, started from the midrange.
inline EmResult est_dml(const MeasurementBatch& batch, double sigma_z, const EmOptions& opt = {}) {
  detail::require_kind(batch, BatchKind::kDithered, "est_dml");
  detail::require_nonempty(batch, "est_dml");
  return detail::em_location(batch.samples, sigma_z, batch.spec.delta, est_midrange(batch), opt);
}

/// Root of sum_i sign(y_i - mu) |y_i - mu|^(p-1) on [Y_(1), Y_(K)].
///
/// The terms are evaluated relative to the largest one, in log space, so
/// shapes up to kShapeMax neither overflow nor underflow to an all-zero sum.
inline double est_ggml(const MeasurementBatch& batch, double p) {
  detail::require_nonempty(batch, "est_ggml");
  if (!(p >= 2.0)) throw DomainError("est_ggml: p must be >= 2");
  const auto [lo_it, hi_it] = std::minmax_element(batch.samples.begin(), batch.samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double range = hi - lo;
  if (range == 0.0) return lo;
  if (p == 2.0) return est_mean(batch);

  std::vector<double> logs(batch.size());
  auto score = [&](double mu) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double d = std::abs(batch.samples[i] - mu) / range;
      logs[i] = d > 0.0 ? (p - 1.0) * std::log(d) : -std::numeric_limits<double>::infinity();
      top = std::max(top, logs[i]);
    }
    double g = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double t = std::exp(logs[i] - top);
      g += batch.samples[i] > mu ? t : (batch.samples[i] < mu ? -t : 0.0);
    }
    return g;
  };
  return find_root(score, lo, hi, {1e-10 * range, 1e-16, 400});
}

/// Sorts the samples ascending and returns sum_i w_i Y_(i).
inline double apply_weights(const MeasurementBatch& batch, const WeightVector& w) {
  if (w.size() != batch.size()) {
    throw std::invalid_argument("apply_weights: " + std::to_string(w.size()) + " weights for " +
                                std::to_string(batch.size()) + " samples");
  }
  const auto ys = detail::sorted(batch.samples);
  double acc = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) acc += w.weights[i] * ys[i];
  return acc;
}

/// Nearly-best L-estimate weights from the GG density f and quantiles
/// c_i = F^{-1}(i / (K + 1)):
///   b_i = f(c_i) [f(c_{i-1}) - 2 f(c_i) + f(c_{i+1})],  f(c_0) = f(c_{K+1}) = 0,
/// normalized to unit sum. The two halves are averaged so a_i = a_{K-i+1}
/// holds exactly.
inline WeightVector weights_nearly_best(std::size_t k, const GGParams& params) {
  if (k < 2) throw DomainError("weights_nearly_best: K must be >= 2");
  std::vector<double> f(k + 2, 0.0);
  const std::size_t half = (k + 1) / 2;
  for (std::size_t i = 1; i <= half; ++i) {
    const double c = gg_inv_cdf(static_cast<double>(i) / static_cast<double>(k + 1), params);
    f[i] = gg_pdf(c, params);
    f[k + 1 - i] = gg_pdf(2.0 * params.mu() - c, params);
  }
  std::vector<double> b(k);
  for (std::size_t i = 1; i <= k; ++i) b[i - 1] = f[i] * (f[i - 1] - 2.0 * f[i] + f[i + 1]);
  WeightVector w{std::vector<double>(k)};
  for (std::size_t i = 0; i < k; ++i) w.weights[i] = 0.5 * (b[i] + b[k - 1 - i]);
  const double total = w.sum();
  if (!(total != 0.0) || !std::isfinite(total)) throw NonConvergence("weights_nearly_best: degenerate weights");
  for (auto& a : w.weights) a /= total;
  return w;
}

/// alpha-outer trimmed mean: keeps a fraction alpha of the outermost order
/// statistics. With F = floor(K alpha / 2), indices i <= F get 1/(K alpha)
/// and index F + 1 gets the fractional remainder (K alpha / 2 - F)/(K alpha);
/// when K is odd and F + 1 is the median, it gets (K alpha - 2F)/(K alpha).
/// alpha = 1 gives the mean, alpha = 0 the midrange.
inline WeightVector weights_alpha_outer(std::size_t k, double alpha) {
  if (k < 1) throw DomainError("weights_alpha_outer: K must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("weights_alpha_outer: alpha must lie in [0,1]");
  WeightVector w{std::vector<double>(k, 0.0)};
  if (k == 1) {
    w.weights[0] = 1.0;
    return w;
  }
  const double ka = static_cast<double>(k) * alpha;
  if (ka < 2.0) {
    // Fewer than two samples' worth of weight: only the extremes survive.
    w.weights.front() = w.weights.back() = 0.5;
    return w;
  }
  const std::size_t n_half = (k + 1) / 2;
  const auto whole = static_cast<std::size_t>(std::floor(0.5 * ka));
  for (std::size_t i = 1; i <= std::min(whole, n_half); ++i) {
    w.weights[i - 1] = w.weights[k - i] = 1.0 / ka;
  }
  const std::size_t frac_index = whole + 1;
  if (frac_index <= n_half) {
    const bool is_median = (k % 2 == 1) && frac_index == n_half;
    const double a = is_median ? (ka - 2.0 * static_cast<double>(whole)) / ka
                               : (0.5 * ka - static_cast<double>(whole)) / ka;
    w.weights[frac_index - 1] = w.weights[k - frac_index] = a;
  }
  return w;
}

/// Trimming fraction matched to the GG shape: alpha = 2 / p (clamped to 1).
inline double alpha_for_shape(double p) { return std::min(1.0, 2.0 / p); }

/// Data-dependent weights a_i = a_{K-i+1} proportional to
/// (Y_(K-i+1) - Y_(i))^(p-2) for i = 1..floor(K/2); the median of an odd batch
/// gets zero weight. A zero gap raised to the power 0 counts as 1, so p = 2
/// reproduces the mean exactly for even K.
inline WeightVector weights_nonlinear(std::span<const double> sorted_samples, double p) {
  const std::size_t k = sorted_samples.size();
  if (k < 2) throw DomainError("est_nonlinear: K must be >= 2");
  if (!(p >= 2.0)) throw DomainError("est_nonlinear: p must be >= 2");
  const std::size_t m = k / 2;
  std::vector<double> log_terms(m);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double gap = sorted_samples[k - 1 - i] - sorted_samples[i];
    if (p == 2.0) {
      log_terms[i] = 0.0;
    } else {
      log_terms[i] = gap > 0.0 ? (p - 2.0) * std::log(gap) : -std::numeric_limits<double>::infinity();
    }
    top = std::max(top, log_terms[i]);
  }
  WeightVector w{std::vector<double>(k, 0.0)};
  if (top == -std::numeric_limits<double>::infinity()) return w;  // all gaps zero
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total += std::exp(log_terms[i] - top);
  for (std::size_t i = 0; i < m; ++i) {
    w.weights[i] = w.weights[k - 1 - i] = 0.5 * std::exp(log_terms[i] - top) / total;
  }
  return w;
}

inline double est_nonlinear(const MeasurementBatch& batch, double p) {
  detail::require_nonempty(batch, "est_nonlinear");
  if (batch.size() < 2) throw DomainError("est_nonlinear: K must be >= 2");
  if (!(p >= 2.0)) throw DomainError("est_nonlinear: p must be >= 2");
  const auto ys = detail::sorted(batch.samples);
  if (ys.front() == ys.back()) return ys.front();
  const auto w = weights_nonlinear(ys, p);
  double acc = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) acc += w.weights[i] * ys[i];
  return acc;
}

// ---------------------------------------------------------------------------
// Uniform dispatch over all nine estimators.

/// Everything the estimators need besides the samples. Build once per
/// (ratio, K) and reuse across trials.
struct EstimatorPlan {
  std::size_t k = 0;
  double delta = 1.0;
  double sigma_z = 0.0;
  double p = 2.0;
  std::optional<WeightVector> nearly_best;
  std::optional<WeightVector> alpha_trim;
  EmOptions em;
};

/// Plan for ratio r = sigma_z / delta with the kurtosis-matched shape.
inline EstimatorPlan make_plan(double r, std::size_t k, double delta = 1.0) {
  EstimatorPlan plan;
  plan.k = k;
  plan.delta = delta;
  plan.sigma_z = r * delta;
  plan.p = fit_shape(r).p_hat;
  const GGParams gg(0.0, delta * std::sqrt(r * r + 1.0 / 12.0), plan.p);
  if (k >= 2) plan.nearly_best = weights_nearly_best(k, gg);
  plan.alpha_trim = weights_alpha_outer(k, alpha_for_shape(plan.p));
  return plan;
}

/// Plan with an explicit shape p instead of the fitted one.
inline EstimatorPlan make_plan_with_shape(double r, std::size_t k, double p, double delta = 1.0) {
  if (!(p >= 2.0)) throw DomainError("shape p must be >= 2");
  EstimatorPlan plan;
  plan.k = k;
  plan.delta = delta;
  plan.sigma_z = r * delta;
  plan.p = p;
  const GGParams gg(0.0, delta * std::sqrt(r * r + 1.0 / 12.0), p);
  if (k >= 2) plan.nearly_best = weights_nearly_best(k, gg);
  plan.alpha_trim = weights_alpha_outer(k, alpha_for_shape(p));
  return plan;
}

struct EstimateResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = true;
};

/// Runs one estimator. With sigma_z = 0 the ML estimators reduce to their
/// limits: dml to the midrange and qml to the quantized-sample mean.
inline EstimateResult run_estimator(EstimatorKind kind, const MeasurementBatch& batch, const EstimatorPlan& plan) {
  detail::require_kind(batch, input_kind(kind), std::string(to_string(kind)).c_str());
  switch (kind) {
    case EstimatorKind::kMean: return {est_mean(batch)};
    case EstimatorKind::kMidrange: return {est_midrange(batch)};
    case EstimatorKind::kQMean: return {est_q_mean(batch)};
    case EstimatorKind::kQml: {
      if (plan.sigma_z == 0.0) return {est_q_mean(batch)};
      const auto r = est_qml(batch, plan.sigma_z, plan.em);
      return {r.estimate, r.trace.iterations, r.trace.converged};
    }
    case EstimatorKind::kDml: {
      if (plan.sigma_z == 0.0) return {est_midrange(batch)};
      const auto r = est_dml(batch, plan.sigma_z, plan.em);
      return {r.estimate, r.trace.iterations, r.trace.converged};
    }
    case EstimatorKind::kGgml: return {est_ggml(batch, plan.p)};
    case EstimatorKind::kNearlyBest:
      if (batch.size() == 1) return {batch.samples[0]};
      if (!plan.nearly_best || plan.nearly_best->size() != batch.size()) {
        throw std::invalid_argument("nearly_best: plan weights do not match batch size");
      }
      return {apply_weights(batch, *plan.nearly_best)};
    case EstimatorKind::kAlphaTrim:
      if (!plan.alpha_trim || plan.alpha_trim->size() != batch.size()) {
        throw std::invalid_argument("alpha_trim: plan weights do not match batch size");
      }
      return {apply_weights(batch, *plan.alpha_trim)};
    case EstimatorKind::kNonlinear:
      if (batch.size() == 1) return {batch.samples[0]};
      return {est_nonlinear(batch, plan.p)};
  }
  throw std::logic_error("run_estimator: unknown estimator");
}

}  // namespace ditherlab
