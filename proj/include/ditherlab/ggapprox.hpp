// Generalized Gaussian (GG) approximation of the total noise V = Z + W, where
// Z ~ N(0, sigma_z^2) and W ~ U[-delta/2, delta/2].
//
// Density:  f(v) = exp(-(|v - mu| / A)^p) / (2 Gamma(1 + 1/p) A),
//           A(p) = sqrt(sigma^2 Gamma(1/p) / Gamma(3/p)),
// so sigma is the standard deviation for every shape p. The shape is chosen
// so that the GG excess kurtosis equals that of Z + W.
#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>

#include "ditherlab/numerics.hpp"

namespace ditherlab {

/// Upper clamp on the fitted shape; sigma_z / delta below kMinRatio maps here.
inline constexpr double kShapeMax = 1e6;
inline constexpr double kMinRatio = 1e-6;

class GGParams {
 public:
  GGParams(double mu, double sigma, double p) : mu_(mu), sigma_(sigma), p_(p) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("GGParams: sigma must be positive");
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("GGParams: p must be positive");
    a_of_p_ = sigma * std::exp(0.5 * (ln_gamma(1.0 / p) - ln_gamma(3.0 / p)));
    log_norm_ = std::log(2.0) + ln_gamma(1.0 + 1.0 / p) + std::log(a_of_p_);
  }

  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  double p() const { return p_; }
  double a_of_p() const { return a_of_p_; }
  /// log of the normalizing constant 2 Gamma(1 + 1/p) A(p).
  double log_norm() const { return log_norm_; }

 private:
  double mu_;
  double sigma_;
  double p_;
  double a_of_p_;
  double log_norm_;
};

inline double gg_pdf(double v, const GGParams& g) {
  const double z = std::abs(v - g.mu()) / g.a_of_p();
  if (z == 0.0) return std::exp(-g.log_norm());
  const double log_t = g.p() * std::log(z);
  if (log_t > 709.0) return 0.0;
  return std::exp(-std::exp(log_t) - g.log_norm());
}

/// F(v) = 1/2 + sign(v - mu) P(1/p, (|v - mu| / A)^p) / 2.
inline double gg_cdf(double v, const GGParams& g) {
  const double dv = v - g.mu();
  if (dv == 0.0) return 0.5;
  const double log_x = g.p() * std::log(std::abs(dv) / g.a_of_p());
  const double half_mass = 0.5 * detail::reg_lower_inc_gamma_log(1.0 / g.p(), log_x);
  return dv > 0.0 ? 0.5 + half_mass : 0.5 - half_mass;
}

/// Quantile by bracketed root finding on [mu, mu + 20 sigma], reflected for
/// q < 1/2 so that quantiles are exactly antisymmetric about mu.
inline double gg_inv_cdf(double q, const GGParams& g, const ToleranceConfig& tol = {1e-14, 1e-14, 400}) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("gg_inv_cdf: q must lie in (0,1)");
  if (q == 0.5) return g.mu();
  const double upper = q > 0.5 ? q : 1.0 - q;
  const double hi = 20.0 * g.sigma();
  auto f = [&](double t) { return gg_cdf(g.mu() + t, g) - upper; };
  const double t = f(hi) < 0.0 ? hi : find_root(f, 0.0, hi, tol);
  return q > 0.5 ? g.mu() + t : g.mu() - t;
}

/// Excess kurtosis of Z + W as a function of r = sigma_z / delta:
/// -(6/5) / (12 r^2 + 1)^2.
inline double sum_excess_kurtosis(double r) {
  if (!(r >= 0.0)) throw DomainError("sum_excess_kurtosis: r must be >= 0");
  const double s = 12.0 * r * r + 1.0;
  return -1.2 / (s * s);
}

/// Gamma(1/p) Gamma(5/p) / Gamma(3/p)^2 - 3.
inline double gg_excess_kurtosis(double p) {
  if (!(p > 0.0)) throw DomainError("gg_excess_kurtosis: p must be positive");
  return std::exp(ln_gamma(1.0 / p) + ln_gamma(5.0 / p) - 2.0 * ln_gamma(3.0 / p)) - 3.0;
}

struct ShapeFit {
  double sigma_over_delta;
  double p_hat;
  double target_excess_kurtosis;
};

/// Kurtosis-matched GG shape for r = sigma_z / delta.
///
/// Starts from p0 = max(2, 1/r), walks outward by factors of two until the
/// kurtosis residual changes sign, then refines in log p with find_root.
/// Ratios below kMinRatio, or targets that need p beyond kShapeMax, return
/// kShapeMax.
inline ShapeFit fit_shape(double r) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("fit_shape: r must be finite and >= 0");
  const double target = sum_excess_kurtosis(r);
  if (r < kMinRatio) return {r, kShapeMax, target};

  // Decreasing in log p: positive means p is still too small.
  auto residual = [target](double log_p) { return gg_excess_kurtosis(std::exp(log_p)) - target; };
  const double log_min = std::log(2.0);
  const double log_max = std::log(kShapeMax);
  if (residual(log_max) >= 0.0) return {r, kShapeMax, target};
  if (residual(log_min) <= 0.0) return {r, 2.0, target};

  double lo = std::clamp(std::log(std::max(2.0, 1.0 / r)), log_min, log_max);
  double hi = lo;
  if (residual(lo) > 0.0) {
    while (residual(hi) > 0.0) {
      lo = hi;
      hi = std::min(hi + std::numbers::ln2, log_max);
    }
  } else {
    while (residual(lo) < 0.0) {
      hi = lo;
      lo = std::max(lo - std::numbers::ln2, log_min);
    }
  }
  const double log_p = lo == hi ? lo : find_root(residual, lo, hi, {1e-15, 1e-15, 400});
  return {r, std::exp(log_p), target};
}

/// Memoized fit_shape keyed on the exact ratio. Thread-safe.
class ShapeTable {
 public:
  ShapeFit lookup(double r) {
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(r); it != cache_.end()) return it->second;
    }
    const ShapeFit fit = fit_shape(r);
    std::lock_guard lock(mutex_);
    cache_.emplace(r, fit);
    return fit;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<double, ShapeFit> cache_;
};

/// Asymptotic-variance factor of the GG location MLE relative to the sample
/// mean: Gamma(1/p)^2 / (p^2 Gamma((2p - 1)/p) Gamma(3/p)).
inline double beta_coefficient(double p) {
  if (!(p >= 1.0)) throw DomainError("beta_coefficient: p must be >= 1");
  return std::exp(2.0 * ln_gamma(1.0 / p) - 2.0 * std::log(p) - ln_gamma((2.0 * p - 1.0) / p) -
                  ln_gamma(3.0 / p));
}

/// Asymptotic variance of the GG location MLE, normalized by delta^2:
/// beta(p) (r^2 + 1/12) / K.
inline double nvar_ggml(double p, double r, std::size_t k) {
  if (k < 1) throw DomainError("nvar_ggml: K must be >= 1");
  if (!(p >= 2.0)) throw DomainError("nvar_ggml: p must be >= 2");
  if (!(r >= 0.0)) throw DomainError("nvar_ggml: r must be >= 0");
  return beta_coefficient(p) * (r * r + 1.0 / 12.0) / static_cast<double>(k);
}

/// Exact density of V = Z + W, with Z ~ N(0, (r delta)^2), W ~ U[-delta/2, delta/2]:
/// (Phi((v + delta/2) / sigma_z) - Phi((v - delta/2) / sigma_z)) / delta.
inline double true_total_noise_pdf(double v, double r, double delta) {
  if (!(delta > 0.0)) throw DomainError("true_total_noise_pdf: delta must be positive");
  if (!(r >= 0.0)) throw DomainError("true_total_noise_pdf: r must be >= 0");
  const double half = 0.5 * delta;
  if (r == 0.0) return std::abs(v) < half ? 1.0 / delta : (std::abs(v) == half ? 0.5 / delta : 0.0);
  const double sigma = r * delta;
  return std::exp(log_normal_interval((v - half) / sigma, (v + half) / sigma)) / delta;
}

/// GG approximation of the total noise for a given ratio and bin size.
inline GGParams total_noise_gg(double r, double delta) {
  const double sigma_v = delta * std::sqrt(r * r + 1.0 / 12.0);
  return GGParams(0.0, sigma_v, fit_shape(r).p_hat);
}

}  // namespace ditherlab
