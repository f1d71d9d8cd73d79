#include "ditherlab/cli.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ditherlab/bounds.hpp"
#include "ditherlab/estimators.hpp"
#include "ditherlab/ggapprox.hpp"
#include "ditherlab/harness.hpp"
#include "ditherlab/quantize.hpp"

namespace ditherlab {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) { return format_g9(v); }

std::vector<EstimatorKind> parse_estimator_list(const std::vector<std::string>& names) {
  std::vector<EstimatorKind> kinds;
  for (const auto& n : names) {
    const auto k = parse_estimator_kind(n);
    if (!k) throw UsageError("unknown estimator '" + n + "'");
    kinds.push_back(*k);
  }
  return kinds;
}

// lo:hi:n, n points evenly spaced (geometrically with log_spacing).
std::vector<double> parse_grid(const std::string& spec, bool log_spacing) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 3) throw UsageError("--r-grid expects lo:hi:n, got '" + spec + "'");
  double lo = 0.0;
  double hi = 0.0;
  long n = 0;
  try {
    std::size_t used = 0;
    lo = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("lo");
    hi = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("hi");
    n = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("n");
  } catch (const std::logic_error&) {
    throw UsageError("--r-grid expects lo:hi:n, got '" + spec + "'");
  }
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw UsageError("--r-grid needs 0 < lo <= hi and n >= 1");
  if (n == 1) return {lo};
  std::vector<double> grid(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    grid[static_cast<std::size_t>(i)] =
        log_spacing ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo);
  }
  grid.back() = hi;
  return grid;
}

int run_simulate(const std::vector<double>& r, const std::vector<std::size_t>& k, std::size_t trials,
                 std::uint64_t seed, const std::vector<std::string>& estimators, const std::string& out_path,
                 double delta, unsigned threads, std::ostream& out) {
  SweepConfig cfg;
  cfg.delta = delta;
  cfg.r_values = r;
  cfg.k_values = k;
  cfg.trials = trials;
  cfg.master_seed = seed;
  if (!estimators.empty()) cfg.estimators = parse_estimator_list(estimators);
  cfg.threads = threads;
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  const auto result = run_sweep(cfg);
  if (out_path == "-") {
    emit_csv(result, out);
  } else {
    emit_csv(result, out_path);
  }
  return kExitOk;
}

int run_bounds(const std::vector<std::size_t>& ks, const std::string& grid_spec, bool log_spacing,
               std::ostream& out) {
  const auto grid = parse_grid(grid_spec, log_spacing);
  out << "r,K,nmse_mean,nmse_mid,nvar_ggml,ncrb,nmse_q\n";
  for (auto k : ks) {
    for (double r : grid) {
      const auto c = bound_curve(r, k);
      out << fmt(c.r) << ',' << c.k << ',' << fmt(c.nmse_mean) << ',' << fmt(c.nmse_mid) << ','
          << fmt(c.nvar_ggml) << ',' << fmt(c.ncrb) << ',' << fmt(c.nmse_q) << '\n';
    }
  }
  return kExitOk;
}

int run_regimes(const std::vector<std::size_t>& ks, std::ostream& out) {
  for (auto k : ks) {
    if (k < 3) throw UsageError("regimes: K must be >= 3");
  }
  out << "K,xi1,xi1_fit_cubic,xi1_fit_linear,xi2,xi2_fit\n";
  for (auto k : ks) {
    out << k << ',' << fmt(xi1(k)) << ',' << fmt(xi1_fit_cubic(k)) << ',';
    if (k > 20) out << fmt(xi1_fit_linear(k));
    out << ',' << fmt(xi2(k)) << ',' << fmt(xi2_fit(k)) << '\n';
  }
  return kExitOk;
}

int run_fitp(const std::vector<double>& ratios, std::ostream& out) {
  out << "r,p_hat,excess_kurtosis\n";
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw UsageError("fitp: ratio must be finite and >= 0");
    const auto fit = fit_shape(r);
    out << fmt(fit.sigma_over_delta) << ',' << fmt(fit.p_hat) << ',' << fmt(fit.target_excess_kurtosis) << '\n';
  }
  return kExitOk;
}

bool uses_shape(EstimatorKind k) {
  return k == EstimatorKind::kGgml || k == EstimatorKind::kNearlyBest || k == EstimatorKind::kAlphaTrim ||
         k == EstimatorKind::kNonlinear;
}

int run_estimate(const std::string& input, const std::string& name, std::optional<double> sigma_z_flag,
                 std::optional<double> p_flag, bool auto_p, std::ostream& out) {
  const auto kind = parse_estimator_kind(name);
  if (!kind) throw UsageError("unknown estimator '" + name + "'");
  MeasurementBatch batch;
  try {
    batch = read_batch_csv(input);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (batch.kind != input_kind(*kind)) {
    throw UsageError("estimator " + name + " needs a " + std::string(to_string(input_kind(*kind))) + " batch");
  }
  std::optional<double> sigma_z = sigma_z_flag;
  if (!sigma_z && batch.truth) sigma_z = batch.truth->sigma_z;
  const bool needs_sigma = *kind == EstimatorKind::kQml || *kind == EstimatorKind::kDml;
  if (needs_sigma && !sigma_z) throw UsageError(name + " needs --sigma-z or a sigma_z header field");
  if (sigma_z && !(*sigma_z >= 0.0)) throw UsageError("--sigma-z must be >= 0");

  const double delta = batch.spec.delta;
  const double r = sigma_z.value_or(0.0) / delta;
  double p = 2.0;
  if (uses_shape(*kind)) {
    if (p_flag) {
      if (!(*p_flag >= 2.0)) throw UsageError("--p must be >= 2");
      p = *p_flag;
    } else if (auto_p || sigma_z) {
      if (!sigma_z) throw UsageError("--auto-p needs --sigma-z or a sigma_z header field");
      p = fit_shape(r).p_hat;
    } else {
      throw UsageError(name + " needs --p, --auto-p, or a sigma_z header field");
    }
  }
  const auto plan = make_plan_with_shape(r, batch.size(), p, delta);
  const auto est = run_estimator(*kind, batch, plan);
  out << "estimator,estimate,iterations\n";
  out << to_string(*kind) << ',' << fmt(est.value) << ',' << est.iterations << '\n';
  return est.converged ? kExitOk : kExitNonConvergence;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subtractive-dither location estimation toolkit", "ditherlab"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo NMSE sweep, CSV output");
  std::vector<double> sim_r;
  std::vector<std::size_t> sim_k;
  std::size_t sim_trials = 20000;
  std::uint64_t sim_seed = 0;
  std::vector<std::string> sim_est;
  std::string sim_out = "-";
  double sim_delta = 1.0;
  unsigned sim_threads = 0;
  sim->add_option("--r", sim_r, "ratios sigma_z / delta (comma-separated)")->required()->delimiter(',');
  sim->add_option("--k", sim_k, "sample counts K (comma-separated)")->required()->delimiter(',');
  sim->add_option("--trials", sim_trials, "trials per grid point")->capture_default_str();
  sim->add_option("--seed", sim_seed, "master seed")->capture_default_str();
  sim->add_option("--estimators", sim_est, "estimators (comma-separated; default all)")->delimiter(',');
  sim->add_option("--out", sim_out, "output path, - for stdout")->capture_default_str();
  sim->add_option("--delta", sim_delta, "bin size")->capture_default_str();
  sim->add_option("--threads", sim_threads, "worker threads (0: DITHERLAB_THREADS or hardware)");

  auto* bnd = app.add_subcommand("bounds", "NMSE bounds on a ratio grid");
  std::vector<std::size_t> bnd_k;
  std::string bnd_grid;
  bool bnd_log = false;
  bnd->add_option("--k", bnd_k, "sample counts K")->required()->delimiter(',');
  bnd->add_option("--r-grid", bnd_grid, "lo:hi:n with lo > 0")->required();
  bnd->add_flag("--log", bnd_log, "geometric spacing");

  auto* reg = app.add_subcommand("regimes", "regime boundaries xi1, xi2 and their fits");
  std::vector<std::size_t> reg_k;
  reg->add_option("--k", reg_k, "sample counts K >= 3")->required()->delimiter(',');

  auto* fit = app.add_subcommand("fitp", "kurtosis-matched GG shape");
  std::vector<double> fit_r;
  fit->add_option("--ratio", fit_r, "ratios sigma_z / delta")->required()->delimiter(',');

  auto* est = app.add_subcommand("estimate", "estimate the location of a batch file");
  std::string est_input;
  std::string est_kind;
  std::optional<double> est_sigma;
  std::optional<double> est_p;
  bool est_auto = false;
  est->add_option("--input", est_input, "batch CSV")->required();
  est->add_option("--estimator", est_kind, "estimator name")->required();
  est->add_option("--sigma-z", est_sigma, "signal noise std (default: header value)");
  auto* p_opt = est->add_option("--p", est_p, "GG shape");
  auto* auto_opt = est->add_flag("--auto-p", est_auto, "fit the shape from sigma_z / delta");
  p_opt->excludes(auto_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) return run_simulate(sim_r, sim_k, sim_trials, sim_seed, sim_est, sim_out, sim_delta, sim_threads, out);
    if (*bnd) return run_bounds(bnd_k, bnd_grid, bnd_log, out);
    if (*reg) return run_regimes(reg_k, out);
    if (*fit) return run_fitp(fit_r, out);
    if (*est) return run_estimate(est_input, est_kind, est_sigma, est_p, est_auto, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NonConvergence& e) {
    err << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace ditherlab
