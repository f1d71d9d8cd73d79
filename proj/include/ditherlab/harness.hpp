// Monte Carlo sweeps over (sigma_z / delta, K).
//
// Trial t of a sweep with seed s draws everything from RandomStream(s, t):
// mu_x from substream 2, signal noise from substream 0 and dither from
// substream 1. Both the dithered and the quantized batch of a trial share the
// same signal-noise draws. Per-trial squared errors land in a buffer indexed
// by trial and are summed in trial order, so the output does not depend on
// the number of worker threads.
#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ditherlab/estimators.hpp"
#include "ditherlab/quantize.hpp"
#include "ditherlab/random.hpp"

namespace ditherlab {

struct SweepConfig {
  double delta = 1.0;
  std::vector<double> r_values;
  std::vector<std::size_t> k_values;
  std::size_t trials = 20000;
  std::uint64_t master_seed = 0;
  std::vector<EstimatorKind> estimators{kAllEstimators.begin(), kAllEstimators.end()};
  /// 0 selects DITHERLAB_THREADS, falling back to the hardware concurrency.
  unsigned threads = 0;

  void validate() const {
    if (!(delta > 0.0)) throw DomainError("SweepConfig: delta must be positive");
    if (trials < 1) throw DomainError("SweepConfig: trials must be >= 1");
    for (double r : r_values) {
      if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("SweepConfig: ratios must be finite and >= 0");
    }
    for (auto k : k_values) {
      if (k < 1) throw DomainError("SweepConfig: K must be >= 1");
    }
  }
};

struct SweepRow {
  double r;
  std::size_t k;
  EstimatorKind estimator;
  double nmse;
  std::size_t trials;
  std::uint64_t seed;
  /// EM runs that hit the iteration cap; they are still scored.
  std::size_t nonconverged = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Squared normalized errors ((mu_hat - mu_x) / delta)^2, one per requested
/// estimator, and whether each estimate came from an unconverged EM run.
struct TrialOutcome {
  double mu_x = 0.0;
  std::vector<double> squared_errors;
  std::vector<bool> flagged;
};

inline TrialOutcome run_trial(const EstimatorPlan& plan, std::span<const EstimatorKind> estimators,
                              const RandomStream& stream) {
  auto location_rng = stream.substream(substream::kLocation);
  const double half = 0.5 * plan.delta;
  TrialOutcome out;
  out.mu_x = location_rng.uniform(-half, half);
  const auto draw = draw_paired(SignalModel(out.mu_x, plan.sigma_z), QuantizerSpec(plan.delta), plan.k, stream);
  out.squared_errors.reserve(estimators.size());
  out.flagged.reserve(estimators.size());
  for (auto kind : estimators) {
    const auto& batch = input_kind(kind) == BatchKind::kDithered ? draw.dithered : draw.quantized;
    const auto est = run_estimator(kind, batch, plan);
    const double e = (est.value - out.mu_x) / plan.delta;
    out.squared_errors.push_back(e * e);
    out.flagged.push_back(!est.converged);
  }
  return out;
}

inline TrialOutcome run_trial(double r, std::size_t k, double delta, std::span<const EstimatorKind> estimators,
                              const RandomStream& stream) {
  return run_trial(make_plan(r, k, delta), estimators, stream);
}

/// Worker count: explicit request, else DITHERLAB_THREADS, else hardware.
inline unsigned resolve_thread_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DITHERLAB_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& body) {
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// NMSE = (1/T) sum_t ((mu_hat_t - mu_x,t) / delta)^2 for every (r, K,
/// estimator). Rows are ordered by r, then K, then estimator as configured.
inline SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const unsigned workers = resolve_thread_count(config.threads);
  const std::size_t n_est = config.estimators.size();
  SweepResult result;
  for (double r : config.r_values) {
    for (auto k : config.k_values) {
      const auto plan = make_plan(r, k, config.delta);
      std::vector<double> errors(config.trials * n_est);
      std::vector<unsigned char> flags(config.trials * n_est);
      detail::parallel_for(config.trials, workers, [&](std::size_t t) {
        const auto outcome = run_trial(plan, config.estimators, RandomStream(config.master_seed, t));
        for (std::size_t e = 0; e < n_est; ++e) {
          errors[t * n_est + e] = outcome.squared_errors[e];
          flags[t * n_est + e] = outcome.flagged[e] ? 1 : 0;
        }
      });
      for (std::size_t e = 0; e < n_est; ++e) {
        double sum = 0.0;
        std::size_t flagged = 0;
        for (std::size_t t = 0; t < config.trials; ++t) {
          sum += errors[t * n_est + e];
          flagged += flags[t * n_est + e];
        }
        result.rows.push_back({r, k, config.estimators[e], sum / static_cast<double>(config.trials), config.trials,
                               config.master_seed, flagged});
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV: header r,K,estimator,nmse,trials,seed; values at 9 significant digits.
// Unconverged EM counts follow as comment lines
//   # nonconverged r=<r> K=<K> estimator=<name> count=<n>

inline std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void emit_csv(const SweepResult& result, std::ostream& os) {
  os << "r,K,estimator,nmse,trials,seed\n";
  for (const auto& row : result.rows) {
    os << format_g9(row.r) << ',' << row.k << ',' << to_string(row.estimator) << ',' << format_g9(row.nmse) << ','
       << row.trials << ',' << row.seed << '\n';
  }
  for (const auto& row : result.rows) {
    if (row.nonconverged == 0) continue;
    os << "# nonconverged r=" << format_g9(row.r) << " K=" << row.k << " estimator=" << to_string(row.estimator)
       << " count=" << row.nonconverged << '\n';
  }
}

inline void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "' for writing");
  emit_csv(result, out);
  out.flush();
  if (!out) throw std::runtime_error("emit_csv: write failed for '" + path + "'");
}

inline SweepResult parse_sweep_csv(std::istream& is) {
  SweepResult result;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream fields(line.substr(1));
      std::string tag;
      fields >> tag;
      if (tag != "nonconverged") continue;
      double r = 0.0;
      std::size_t k = 0;
      std::size_t count = 0;
      std::string name;
      std::string field;
      while (fields >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const auto key = field.substr(0, eq);
        const auto val = field.substr(eq + 1);
        if (key == "r") r = std::stod(val);
        else if (key == "K") k = std::stoul(val);
        else if (key == "estimator") name = val;
        else if (key == "count") count = std::stoul(val);
      }
      for (auto& row : result.rows) {
        if (row.r == r && row.k == k && to_string(row.estimator) == name) row.nonconverged = count;
      }
      continue;
    }
    if (!header) {
      if (line != "r,K,estimator,nmse,trials,seed") throw std::runtime_error("sweep csv: unexpected header");
      header = true;
      continue;
    }
    std::istringstream cells(line);
    std::string c[6];
    for (auto& cell : c) {
      if (!std::getline(cells, cell, ',')) {
        throw std::runtime_error("sweep csv line " + std::to_string(lineno) + ": expected 6 fields");
      }
    }
    const auto kind = parse_estimator_kind(c[2]);
    if (!kind) throw std::runtime_error("sweep csv line " + std::to_string(lineno) + ": unknown estimator " + c[2]);
    result.rows.push_back({std::stod(c[0]), std::stoul(c[1]), *kind, std::stod(c[3]), std::stoul(c[4]),
                           std::stoull(c[5]), 0});
  }
  return result;
}

}  // namespace ditherlab
