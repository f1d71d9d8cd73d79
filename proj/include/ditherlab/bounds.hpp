// Performance bounds normalized by delta^2, and the regime boundaries.
//
// All quantities are functions of r = sigma_z / delta and the sample count K.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ditherlab/ggapprox.hpp"
#include "ditherlab/numerics.hpp"

namespace ditherlab {

/// Sample mean of dithered data: (r^2 + 1/12) / K.
inline double nmse_mean(double r, std::size_t k) {
  if (k < 1) throw DomainError("nmse_mean: K must be >= 1");
  return (r * r + 1.0 / 12.0) / static_cast<double>(k);
}

/// Midrange of K uniform samples: 1 / (2 (K + 1) (K + 2)).
inline double nmse_mid(std::size_t k) {
  if (k < 1) throw DomainError("nmse_mid: K must be >= 1");
  const double kk = static_cast<double>(k);
  return 1.0 / (2.0 * (kk + 1.0) * (kk + 2.0));
}

/// Integrand of the per-sample Fisher information in the unit-bin variable u:
/// [phi((u - 1/2)/r) - phi((u + 1/2)/r)]^2 / [Phi((u + 1/2)/r) - Phi((u - 1/2)/r)].
inline double fisher_integrand(double u, double r) {
  const double a = (u - 0.5) / r;
  const double b = (u + 0.5) / r;
  const double log_p = log_normal_interval(a, b);
  // |phi(a) - phi(b)| = phi(c) |expm1(d)| with c the argument nearer zero and
  // d = (c^2 - other^2) / 2 <= 0; a^2 - b^2 = -2u / r^2.
  const double log_near = std_normal_log_pdf(std::abs(a) < std::abs(b) ? a : b);
  const double d = -std::abs(2.0 * u / (r * r)) * 0.5;
  const double gap = -std::expm1(d);
  if (gap == 0.0) return 0.0;
  return std::exp(2.0 * (log_near + std::log(gap)) - log_p);
}

/// Half-width of the truncated Fisher-information domain: 1/2 + 8 r.
inline double fisher_domain_halfwidth(double r) { return 0.5 + 8.0 * r; }

/// Normalized Cramer-Rao bound for K dithered samples:
/// r^2 / (K * integral of fisher_integrand over |u| <= 1/2 + 8r).
inline double ncrb(double r, std::size_t k, const ToleranceConfig& tol = {1e-13, 1e-11, 2000}) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("ncrb: r must be positive");
  if (k < 1) throw DomainError("ncrb: K must be >= 1");
  const double w = fisher_domain_halfwidth(r);
  // Even integrand: integrate [0, w] and double. Breakpoints bracket the
  // transition band of width ~r around u = 1/2.
  std::vector<double> cuts{0.5};
  for (double s : {1.0, 2.0, 4.0}) {
    cuts.push_back(0.5 - s * r);
    cuts.push_back(0.5 + s * r);
  }
  const double info = 2.0 * integrate([r](double u) { return fisher_integrand(u, r); }, 0.0, w, tol, cuts);
  return r * r / (info * static_cast<double>(k));
}

/// Probability that q(x + Z) = m (unit bins), Z ~ N(0, r^2):
/// Phi((m + 1/2 - x)/r) - Phi((m - 1/2 - x)/r).
inline double level_probability(int m, double x, double r) {
  const double lo = static_cast<double>(m) - 0.5 - x;
  const double hi = static_cast<double>(m) + 0.5 - x;
  if (r == 0.0) return (lo < 0.0 && 0.0 < hi) ? 1.0 : ((lo == 0.0 || hi == 0.0) ? 0.5 : 0.0);
  return std::exp(log_normal_interval(lo / r, hi / r));
}

/// Levels summed on each side of zero in nmse_q: ceil(1 + 6 r).
inline int nmse_q_levels(double r) { return static_cast<int>(std::ceil(1.0 + 6.0 * r)); }

/// Expected normalized MSE of the quantized-sample mean with mu_x uniform on
/// one bin:
///   1/12 + (1/K) int S2(x) dx + ((K-1)/K) int S1(x)^2 dx - 2 int x S1(x) dx,
/// where S1 = sum_m m Psi(m, x), S2 = sum_m m^2 Psi(m, x), |m| <= M, and all
/// integrals run over x in [-1/2, 1/2].
inline double nmse_q(double r, std::size_t k, const ToleranceConfig& tol = {1e-14, 1e-12, 4000}) {
  if (k < 1) throw DomainError("nmse_q: K must be >= 1");
  if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("nmse_q: r must be >= 0");
  if (r == 0.0) return 1.0 / 12.0;
  const int levels = nmse_q_levels(r);
  const double kk = static_cast<double>(k);
  auto integrand = [&](double x) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (int m = -levels; m <= levels; ++m) {
      const double psi = level_probability(m, x, r);
      s1 += m * psi;
      s2 += static_cast<double>(m) * m * psi;
    }
    return s2 / kk + (kk - 1.0) / kk * s1 * s1 - 2.0 * x * s1;
  };
  // The integrand is even in x.
  std::vector<double> cuts;
  for (double s : {1.0, 4.0, 8.0}) cuts.push_back(0.5 - s * r);
  return 1.0 / 12.0 + 2.0 * integrate(integrand, 0.0, 0.5, tol, cuts);
}

/// The bounds of one (r, K) grid point.
struct BoundCurve {
  double r;
  std::size_t k;
  double nmse_mean;
  double nmse_mid;
  double nvar_ggml;
  double ncrb;
  double nmse_q;
};

inline BoundCurve bound_curve(double r, std::size_t k) {
  const double p = fit_shape(r).p_hat;
  return {r, k, nmse_mean(r, k), nmse_mid(k), nvar_ggml(p, r, k), ncrb(r, k), nmse_q(r, k)};
}

// ---------------------------------------------------------------------------
// Regime boundaries

/// Ratio where the GG-MLE asymptotic variance meets the midrange MSE:
/// beta(p_hat(r)) (r^2 + 1/12) = (K/2) / (K^2 + 3K + 2), solved on [1e-6, 1].
inline double xi1(std::size_t k) {
  if (k < 3) throw DomainError("xi1: defined for K >= 3");
  const double kk = static_cast<double>(k);
  const double rhs = 0.5 * kk / (kk * kk + 3.0 * kk + 2.0);
  auto h = [rhs](double r) { return beta_coefficient(fit_shape(r).p_hat) * (r * r + 1.0 / 12.0) / rhs - 1.0; };
  try {
    return find_root(h, kMinRatio, 1.0, {1e-16, 1e-14, 400});
  } catch (const NoSignChange&) {
    throw NonConvergence("xi1: no crossing in [1e-6, 1] for K = " + std::to_string(k));
  }
}

/// Log-log-cubic fit of xi1 (natural logarithms).
inline double xi1_fit_cubic(std::size_t k) {
  if (k < 3) throw DomainError("xi1_fit_cubic: defined for K >= 3");
  const double l = std::log(static_cast<double>(k));
  return std::exp(0.0104 * l * l * l - 0.1760 * l * l + 0.0274 * l - 1.8511);
}

/// Log-log-linear fit of xi1, 0.8217 K^-0.9301; intended for K > 20.
inline double xi1_fit_linear(std::size_t k) {
  if (k <= 20) throw DomainError("xi1_fit_linear: intended for K > 20");
  return 0.8217 * std::pow(static_cast<double>(k), -0.9301);
}

/// Ratio minimizing nmse_q(r, K), searched on [0.05, 1].
inline double xi2(std::size_t k, double tol = 1e-4) {
  if (k < 3) throw DomainError("xi2: defined for K >= 3");
  return minimize_1d([k](double r) { return nmse_q(r, k); }, 0.05, 1.0, {tol, 1e-9, 200});
}

/// sqrt(-0.000756 (ln K)^2 + 0.328 ln K).
inline double xi2_fit(std::size_t k) {
  if (k < 1) throw DomainError("xi2_fit: K must be >= 1");
  const double l = std::log(static_cast<double>(k));
  const double radicand = -0.000756 * l * l + 0.328 * l;
  if (!(radicand > 0.0)) throw DomainError("xi2_fit: radicand is not positive for K = " + std::to_string(k));
  return std::sqrt(radicand);
}

enum class Regime { kI, kII, kIII };

inline const char* to_string(Regime g) {
  switch (g) {
    case Regime::kI: return "I";
    case Regime::kII: return "II";
    case Regime::kIII: return "III";
  }
  return "?";
}

struct RegimeBoundaries {
  std::size_t k;
  double xi1;
  double xi2;

  Regime regime(double r) const {
    if (r < xi1) return Regime::kI;
    if (r < xi2) return Regime::kII;
    return Regime::kIII;
  }
};

inline RegimeBoundaries regime_boundaries(std::size_t k) { return {k, xi1(k), xi2(k)}; }

}  // namespace ditherlab
