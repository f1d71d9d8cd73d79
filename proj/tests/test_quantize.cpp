#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ditherlab/quantize.hpp"
#include "support/oracles.hpp"

using namespace ditherlab;

TEST(QuantizerSpec, RejectsNonPositiveBins) {
  EXPECT_THROW(QuantizerSpec(0.0), DomainError);
  EXPECT_THROW(QuantizerSpec(-1.0), DomainError);
  EXPECT_THROW(SignalModel(0.0, -0.1), DomainError);
}

TEST(Quantize, Examples) {
  const QuantizerSpec unit(1.0);
  EXPECT_EQ(quantize(0.0, unit), 0.0);
  EXPECT_EQ(quantize(0.49, unit), 0.0);
  EXPECT_EQ(quantize(0.51, unit), 1.0);
  EXPECT_EQ(quantize(0.5, unit), 1.0);
  EXPECT_EQ(quantize(-0.5, unit), -1.0);
  EXPECT_EQ(quantize(-1.49, unit), -1.0);
  EXPECT_EQ(quantize(1.2, QuantizerSpec(0.5)), 1.0);
  EXPECT_EQ(quantize(1e6 + 0.3, unit), 1e6);
}

TEST(Quantize, OutputIsIntegerMultipleOfDelta) {
  const QuantizerSpec spec(0.25);
  for (double x = -7.0; x < 7.0; x += 0.0137) {
    const double level = quantize(x, spec) / spec.delta;
    EXPECT_EQ(level, std::round(level));
    EXPECT_LE(std::abs(quantize(x, spec) - x), 0.5 * spec.delta + 1e-15);
  }
}

TEST(DrawDithered, ZeroNoiseGivesUniformTotalNoise) {
  const std::size_t k = 100000;
  const auto batch = draw_dithered_batch(SignalModel(0.3, 0.0), QuantizerSpec(1.0), k, RandomStream(1, 0));
  const auto v = quantization_error(batch);
  for (double x : v) {
    ASSERT_GE(x, -0.5);
    ASSERT_LE(x, 0.5);
  }
  EXPECT_LT(oracle::ks_uniform(v, -0.5, 0.5), oracle::ks_critical_1pct(k));
}

TEST(DrawDithered, TotalNoiseVarianceAndKurtosis) {
  const std::size_t k = 1000000;
  const double r = 0.04;
  const auto batch = draw_dithered_batch(SignalModel(-0.17, r), QuantizerSpec(1.0), k, RandomStream(2, 0));
  const auto m = oracle::moments(quantization_error(batch));
  const double var = r * r + 1.0 / 12.0;
  EXPECT_NEAR(m.variance / var, 1.0, 0.02);
  const double s = 12.0 * r * r + 1.0;
  const double kurt = -1.2 / (s * s);
  EXPECT_NEAR(kurt, -1.1552139, 1e-7);
  EXPECT_NEAR(m.excess_kurtosis / kurt, 1.0, 0.02);
  EXPECT_LT(std::abs(m.mean), 4.0 * std::sqrt(var / k));
}

TEST(DrawDithered, DeterministicForFixedStream) {
  const SignalModel model(0.1, 0.2);
  const auto a = draw_dithered_batch(model, QuantizerSpec(1.0), 500, RandomStream(9, 4));
  const auto b = draw_dithered_batch(model, QuantizerSpec(1.0), 500, RandomStream(9, 4));
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.kind, BatchKind::kDithered);
  ASSERT_TRUE(a.truth.has_value());
  EXPECT_EQ(a.truth->mu_x, 0.1);
}

TEST(DrawDithered, WhiteningForAnySignal) {
  // W_i = Y_i - (mu_x + Z_i) is uniform and uncorrelated with X_i.
  const std::size_t k = 100000;
  for (double r : {0.0, 0.04, 0.4, 2.0}) {
    for (double mu : {0.0, 0.23, -0.41}) {
      const SignalModel model(mu, r);
      const auto d = draw_paired(model, QuantizerSpec(1.0), k, RandomStream(17, 3));
      std::vector<double> w(k);
      std::vector<double> x(k);
      for (std::size_t i = 0; i < k; ++i) {
        x[i] = mu + d.noise[i];
        w[i] = d.dithered.samples[i] - x[i];
      }
      EXPECT_LT(oracle::ks_uniform(w, -0.5, 0.5), oracle::ks_critical_1pct(k)) << "r=" << r << " mu=" << mu;
      if (r > 0.0) {
        const auto mw = oracle::moments(w);
        const auto mx = oracle::moments(x);
        double cov = 0.0;
        for (std::size_t i = 0; i < k; ++i) cov += (w[i] - mw.mean) * (x[i] - mx.mean);
        cov /= static_cast<double>(k);
        EXPECT_LT(std::abs(cov / std::sqrt(mw.variance * mx.variance)), 4.0 / std::sqrt(static_cast<double>(k)));
      }
    }
  }
}

TEST(DrawDithered, ScaleEquivariance) {
  const auto a = draw_dithered_batch(SignalModel(0.3, 0.1), QuantizerSpec(1.0), 1000, RandomStream(5, 5));
  const auto b = draw_dithered_batch(SignalModel(0.75, 0.25), QuantizerSpec(2.5), 1000, RandomStream(5, 5));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.samples[i], 2.5 * a.samples[i], 1e-12);
}

TEST(DrawDithered, RejectsEmpty) {
  EXPECT_THROW(draw_dithered_batch(SignalModel(0, 1), QuantizerSpec(1.0), 0, RandomStream(1, 1)), DomainError);
  EXPECT_THROW(draw_quantized_batch(SignalModel(0, 1), QuantizerSpec(1.0), 0, RandomStream(1, 1)), DomainError);
}

TEST(DrawQuantized, Examples) {
  const auto coarse = draw_quantized_batch(SignalModel(0.2, 0.001), QuantizerSpec(1.0), 100, RandomStream(1, 2));
  for (double u : coarse.samples) EXPECT_EQ(u, 0.0);
  const auto exact = draw_quantized_batch(SignalModel(0.7, 0.0), QuantizerSpec(1.0), 50, RandomStream(1, 2));
  for (double u : exact.samples) EXPECT_EQ(u, 1.0);
  EXPECT_EQ(exact.kind, BatchKind::kQuantized);
}

TEST(DrawQuantized, CentralBinProbability) {
  const std::size_t k = 1000000;
  const auto b = draw_quantized_batch(SignalModel(0.0, 0.4), QuantizerSpec(1.0), k, RandomStream(3, 0));
  const double frac = static_cast<double>(std::count(b.samples.begin(), b.samples.end(), 0.0)) / k;
  const double p = std::erf(1.25 / std::sqrt(2.0));
  EXPECT_NEAR(p, 0.78870, 1e-5);
  EXPECT_NEAR(frac, p, 4.0 * std::sqrt(p * (1 - p) / k));
}

TEST(DrawPaired, ArmsShareSignalNoise) {
  const SignalModel model(0.12, 0.3);
  const auto d = draw_paired(model, QuantizerSpec(1.0), 200, RandomStream(8, 1));
  const auto q = draw_quantized_batch(model, QuantizerSpec(1.0), 200, RandomStream(8, 1));
  EXPECT_EQ(d.quantized.samples, q.samples);
  for (std::size_t i = 0; i < 200; ++i) {
    EXPECT_EQ(d.quantized.samples[i], quantize(0.12 + d.noise[i], QuantizerSpec(1.0)));
    EXPECT_EQ(d.dithered.samples[i], quantize(0.12 + d.noise[i] + d.dither[i], QuantizerSpec(1.0)) - d.dither[i]);
  }
}

TEST(QuantizationError, RequiresDitheredBatchWithTruth) {
  MeasurementBatch q{BatchKind::kQuantized, {0.0}, SignalModel(0, 1), QuantizerSpec(1.0)};
  EXPECT_THROW(quantization_error(q), std::invalid_argument);
  MeasurementBatch d{BatchKind::kDithered, {0.1}, std::nullopt, QuantizerSpec(1.0)};
  EXPECT_THROW(quantization_error(d), std::invalid_argument);
}

TEST(QuantizationError, MeanShrinksWithK) {
  int inside = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const double r = 0.3;
    const auto b = draw_dithered_batch(SignalModel(0.05, r), QuantizerSpec(1.0), 2000, RandomStream(21, t));
    const auto m = oracle::moments(quantization_error(b));
    inside += std::abs(m.mean) < 4.0 * std::sqrt((r * r + 1.0 / 12.0) / 2000.0);
  }
  EXPECT_EQ(inside, 200);
}

TEST(BatchCsv, RoundTrip) {
  const auto b = draw_dithered_batch(SignalModel(0.3, 0.07), QuantizerSpec(0.5), 40, RandomStream(4, 4));
  std::stringstream ss;
  write_batch_csv(ss, b);
  const auto back = read_batch_csv(ss);
  EXPECT_EQ(back.kind, b.kind);
  EXPECT_EQ(back.samples, b.samples);
  EXPECT_EQ(back.spec.delta, 0.5);
  ASSERT_TRUE(back.truth.has_value());
  EXPECT_EQ(back.truth->sigma_z, 0.07);
  EXPECT_EQ(back.truth->mu_x, 0.3);
}

TEST(BatchCsv, RejectsMalformedInput) {
  std::stringstream no_header("1\n2\n");
  EXPECT_THROW(read_batch_csv(no_header), BatchParseError);
  std::stringstream bad_kind("# kind=weird delta=1\n1\n");
  EXPECT_THROW(read_batch_csv(bad_kind), BatchParseError);
  std::stringstream bad_number("# kind=dithered delta=1\n0.5x\n");
  EXPECT_THROW(read_batch_csv(bad_number), BatchParseError);
  std::stringstream off_grid("# kind=quantized delta=1\n0.5\n");
  EXPECT_THROW(read_batch_csv(off_grid), BatchParseError);
  std::stringstream empty("# kind=dithered delta=1\n");
  EXPECT_THROW(read_batch_csv(empty), BatchParseError);
  EXPECT_THROW(read_batch_csv(std::string("/nonexistent/batch.csv")), std::runtime_error);
}
