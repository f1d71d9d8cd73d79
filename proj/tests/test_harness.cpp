#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ditherlab/harness.hpp"

using namespace ditherlab;

namespace {

std::string csv_of(const SweepResult& r) {
  std::ostringstream os;
  emit_csv(r, os);
  return os.str();
}

SweepConfig small_config() {
  SweepConfig c;
  c.r_values = {0.0, 0.04, 0.4};
  c.k_values = {5, 25};
  c.trials = 300;
  c.master_seed = 11;
  return c;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) {
      had_ = true;
      old_ = old;
    }
    if (value) setenv(name, value, 1);
    else unsetenv(name);
  }
  ~ScopedEnv() {
    if (had_) setenv(name_, old_.c_str(), 1);
    else unsetenv(name_);
  }

 private:
  const char* name_;
  bool had_ = false;
  std::string old_;
};

double nmse_of(const SweepResult& r, double ratio, std::size_t k, EstimatorKind e) {
  for (const auto& row : r.rows) {
    if (row.r == ratio && row.k == k && row.estimator == e) return row.nmse;
  }
  ADD_FAILURE() << "row missing";
  return NAN;
}

}  // namespace

TEST(RunSweep, IdenticalAcrossThreadCounts) {
  auto c = small_config();
  c.threads = 1;
  const auto one = csv_of(run_sweep(c));
  for (unsigned t : {2u, 3u, 8u}) {
    c.threads = t;
    EXPECT_EQ(csv_of(run_sweep(c)), one) << "threads=" << t;
  }
  c.threads = 0;
  ScopedEnv env("DITHERLAB_THREADS", "5");
  EXPECT_EQ(csv_of(run_sweep(c)), one);
}

TEST(RunSweep, RowLayout) {
  const auto c = small_config();
  const auto res = run_sweep(c);
  ASSERT_EQ(res.rows.size(), c.r_values.size() * c.k_values.size() * c.estimators.size());
  std::size_t i = 0;
  for (double r : c.r_values) {
    for (auto k : c.k_values) {
      for (auto e : c.estimators) {
        EXPECT_EQ(res.rows[i].r, r);
        EXPECT_EQ(res.rows[i].k, k);
        EXPECT_EQ(res.rows[i].estimator, e);
        EXPECT_EQ(res.rows[i].trials, c.trials);
        EXPECT_EQ(res.rows[i].seed, c.master_seed);
        EXPECT_GE(res.rows[i].nmse, 0.0);
        ++i;
      }
    }
  }
}

TEST(RunSweep, SingleTrialEqualsRunTrial) {
  SweepConfig c;
  c.r_values = {0.04};
  c.k_values = {7};
  c.trials = 1;
  c.master_seed = 99;
  const auto res = run_sweep(c);
  const auto outcome = run_trial(0.04, 7, 1.0, c.estimators, RandomStream(99, 0));
  ASSERT_EQ(res.rows.size(), outcome.squared_errors.size());
  for (std::size_t e = 0; e < res.rows.size(); ++e) EXPECT_EQ(res.rows[e].nmse, outcome.squared_errors[e]);
}

TEST(RunTrial, ZeroNoiseMidrangeWithinHalfBin) {
  const std::array<EstimatorKind, 1> mid{EstimatorKind::kMidrange};
  for (std::uint64_t t = 0; t < 2000; ++t) {
    const auto o = run_trial(0.0, 9, 1.0, mid, RandomStream(3, t));
    EXPECT_LE(o.squared_errors[0], 0.25);
    EXPECT_GE(o.mu_x, -0.5);
    EXPECT_LT(o.mu_x, 0.5);
  }
}

TEST(RunTrial, DeltaScaling) {
  // Errors are normalized by delta, so scaling delta with sigma_z leaves them unchanged.
  const std::array<EstimatorKind, 3> kinds{EstimatorKind::kMean, EstimatorKind::kMidrange, EstimatorKind::kQMean};
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto a = run_trial(0.3, 6, 1.0, kinds, RandomStream(5, t));
    const auto b = run_trial(0.3, 6, 4.0, kinds, RandomStream(5, t));
    for (std::size_t e = 0; e < kinds.size(); ++e) EXPECT_NEAR(a.squared_errors[e], b.squared_errors[e], 1e-12);
  }
}

TEST(RunSweep, MeanMatchesClosedForm) {
  SweepConfig c;
  c.r_values = {0.4};
  c.k_values = {125};
  c.trials = 20000;
  c.master_seed = 1;
  c.estimators = {EstimatorKind::kMean};
  const auto res = run_sweep(c);
  EXPECT_NEAR(res.rows[0].nmse / 1.947e-3, 1.0, 0.05);
}

TEST(RunSweep, SeedSpreadBelowFivePercent) {
  SweepConfig c;
  c.r_values = {0.004, 0.04, 0.4};
  c.k_values = {25};
  c.trials = 20000;
  c.master_seed = 101;
  const auto a = run_sweep(c);
  c.master_seed = 202;
  const auto b = run_sweep(c);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const double x = a.rows[i].nmse;
    const double y = b.rows[i].nmse;
    EXPECT_LT(std::abs(x - y) / (0.5 * (x + y)), 0.05)
        << "r=" << a.rows[i].r << " estimator=" << to_string(a.rows[i].estimator);
    EXPECT_EQ(a.rows[i].nonconverged, 0u);
  }
}

TEST(RunSweep, GgEstimatorsImproveAsRatioShrinks) {
  SweepConfig c;
  c.r_values = {0.4, 0.04, 0.004};
  c.k_values = {125};
  c.trials = 4000;
  c.master_seed = 17;
  c.estimators = {EstimatorKind::kGgml, EstimatorKind::kNearlyBest, EstimatorKind::kAlphaTrim,
                  EstimatorKind::kNonlinear};
  const auto res = run_sweep(c);
  for (auto e : c.estimators) {
    for (std::size_t i = 1; i < c.r_values.size(); ++i) {
      EXPECT_LE(nmse_of(res, c.r_values[i], 125, e), 1.02 * nmse_of(res, c.r_values[i - 1], 125, e))
          << to_string(e) << " r=" << c.r_values[i];
    }
  }
}

TEST(RunSweep, RejectsInvalidConfig) {
  SweepConfig c;
  c.r_values = {-0.1};
  c.k_values = {5};
  EXPECT_THROW(run_sweep(c), DomainError);
  c.r_values = {0.1};
  c.k_values = {0};
  EXPECT_THROW(run_sweep(c), DomainError);
  c.k_values = {5};
  c.trials = 0;
  EXPECT_THROW(run_sweep(c), DomainError);
}

TEST(ResolveThreadCount, Precedence) {
  EXPECT_EQ(resolve_thread_count(3), 3u);
  {
    ScopedEnv env("DITHERLAB_THREADS", "6");
    EXPECT_EQ(resolve_thread_count(0), 6u);
    EXPECT_EQ(resolve_thread_count(2), 2u);
  }
  {
    ScopedEnv env("DITHERLAB_THREADS", "abc");
    EXPECT_GE(resolve_thread_count(0), 1u);
  }
  {
    ScopedEnv env("DITHERLAB_THREADS", nullptr);
    EXPECT_GE(resolve_thread_count(0), 1u);
  }
}

TEST(Csv, EmptyResultIsHeaderOnly) { EXPECT_EQ(csv_of(SweepResult{}), "r,K,estimator,nmse,trials,seed\n"); }

TEST(Csv, RoundTrip) {
  const auto res = run_sweep(small_config());
  std::istringstream in(csv_of(res));
  const auto back = parse_sweep_csv(in);
  ASSERT_EQ(back.rows.size(), res.rows.size());
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].r, std::stod(format_g9(res.rows[i].r)));
    EXPECT_EQ(back.rows[i].k, res.rows[i].k);
    EXPECT_EQ(back.rows[i].estimator, res.rows[i].estimator);
    EXPECT_EQ(back.rows[i].nmse, std::stod(format_g9(res.rows[i].nmse)));
    EXPECT_EQ(back.rows[i].trials, res.rows[i].trials);
    EXPECT_EQ(back.rows[i].seed, res.rows[i].seed);
  }
  EXPECT_EQ(csv_of(back), csv_of(res));
}

TEST(Csv, NonconvergedCommentLines) {
  SweepResult res;
  res.rows.push_back({0.04, 5, EstimatorKind::kDml, 1.5e-3, 100, 3, 2});
  res.rows.push_back({0.04, 5, EstimatorKind::kMean, 1.7e-3, 100, 3, 0});
  const auto text = csv_of(res);
  EXPECT_NE(text.find("# nonconverged r=0.04 K=5 estimator=dml count=2\n"), std::string::npos);
  EXPECT_EQ(text.find("estimator=mean count"), std::string::npos);
  std::istringstream in(text);
  const auto back = parse_sweep_csv(in);
  EXPECT_EQ(back.rows[0].nonconverged, 2u);
  EXPECT_EQ(back.rows[1].nonconverged, 0u);
}

TEST(Csv, NineSignificantDigits) {
  EXPECT_EQ(format_g9(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_g9(3.12e-5), "3.12e-05");
}

TEST(Csv, FileOutputAndErrors) {
  const auto path = std::filesystem::temp_directory_path() / "ditherlab_sweep_test.csv";
  const auto res = run_sweep(small_config());
  emit_csv(res, path.string());
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  EXPECT_EQ(buf.str(), csv_of(res));
  std::filesystem::remove(path);
  try {
    emit_csv(res, std::string("/nonexistent-dir/x.csv"));
    FAIL() << "expected an exception";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/x.csv"), std::string::npos);
  }
  std::istringstream bad_header("a,b\n");
  EXPECT_THROW(parse_sweep_csv(bad_header), std::runtime_error);
  std::istringstream bad_row("r,K,estimator,nmse,trials,seed\n0.1,5,bogus,1,1,1\n");
  EXPECT_THROW(parse_sweep_csv(bad_row), std::runtime_error);
  std::istringstream short_row("r,K,estimator,nmse,trials,seed\n0.1,5\n");
  EXPECT_THROW(parse_sweep_csv(short_row), std::runtime_error);
}
