// Midtread uniform quantizer and the two acquisition models:
//   quantized  U_i = q(mu_x + Z_i)
//   dithered   Y_i = q(mu_x + Z_i + D_i) - D_i,  D_i ~ U[-delta/2, delta/2]
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ditherlab/numerics.hpp"
#include "ditherlab/random.hpp"

namespace ditherlab {

enum class TieRule { kHalfAwayFromZero };

/// Non-overloading midtread quantizer: levels are unbounded integer multiples
/// of delta.
struct QuantizerSpec {
  double delta = 1.0;
  TieRule tie_rule = TieRule::kHalfAwayFromZero;

  explicit QuantizerSpec(double bin = 1.0) : delta(bin) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("QuantizerSpec: delta must be positive");
  }
};

struct SignalModel {
  double mu_x = 0.0;
  double sigma_z = 0.0;

  SignalModel(double mu, double sigma) : mu_x(mu), sigma_z(sigma) {
    if (!(sigma_z >= 0.0) || !std::isfinite(mu_x)) throw DomainError("SignalModel: need sigma_z >= 0, finite mu_x");
  }
};

enum class BatchKind { kDithered, kQuantized };

inline std::string_view to_string(BatchKind k) { return k == BatchKind::kDithered ? "dithered" : "quantized"; }

struct MeasurementBatch {
  BatchKind kind = BatchKind::kDithered;
  std::vector<double> samples;
  std::optional<SignalModel> truth;
  QuantizerSpec spec;

  std::size_t size() const { return samples.size(); }
};

/// delta * round(x / delta); exact bin edges round away from zero.
inline double quantize(double x, const QuantizerSpec& spec) { return spec.delta * std::round(x / spec.delta); }

/// Both arms of one acquisition, generated from shared signal-noise draws.
/// noise[i] and dither[i] are exposed so tests can reconstruct the
/// quantization error W_i = Y_i - (mu_x + Z_i).
struct PairedDraw {
  std::vector<double> noise;
  std::vector<double> dither;
  MeasurementBatch dithered;
  MeasurementBatch quantized;
};

/// Z_i come from stream.substream(0) and D_i from stream.substream(1), so the
/// dithered and quantized arms see the same signal noise.
inline PairedDraw draw_paired(const SignalModel& model, const QuantizerSpec& spec, std::size_t k,
                              const RandomStream& stream) {
  if (k < 1) throw DomainError("draw: K must be at least 1");
  auto noise_rng = stream.substream(substream::kSignalNoise);
  auto dither_rng = stream.substream(substream::kDither);
  PairedDraw out{{}, {}, {BatchKind::kDithered, {}, model, spec}, {BatchKind::kQuantized, {}, model, spec}};
  out.noise.resize(k);
  out.dither.resize(k);
  out.dithered.samples.resize(k);
  out.quantized.samples.resize(k);
  const double half = 0.5 * spec.delta;
  for (std::size_t i = 0; i < k; ++i) {
    const double z = model.sigma_z * noise_rng.normal();
    const double d = dither_rng.uniform(-half, half);
    const double x = model.mu_x + z;
    out.noise[i] = z;
    out.dither[i] = d;
    out.dithered.samples[i] = quantize(x + d, spec) - d;
    out.quantized.samples[i] = quantize(x, spec);
  }
  return out;
}

inline MeasurementBatch draw_dithered_batch(const SignalModel& model, const QuantizerSpec& spec, std::size_t k,
                                            const RandomStream& stream) {
  return draw_paired(model, spec, k, stream).dithered;
}

inline MeasurementBatch draw_quantized_batch(const SignalModel& model, const QuantizerSpec& spec, std::size_t k,
                                             const RandomStream& stream) {
  if (k < 1) throw DomainError("draw: K must be at least 1");
  auto noise_rng = stream.substream(substream::kSignalNoise);
  MeasurementBatch out{BatchKind::kQuantized, std::vector<double>(k), model, spec};
  for (auto& u : out.samples) u = quantize(model.mu_x + model.sigma_z * noise_rng.normal(), spec);
  return out;
}

/// Total noise V_i = Y_i - mu_x of a dithered batch. Diagnostic only: it needs
/// the ground truth.
inline std::vector<double> quantization_error(const MeasurementBatch& batch) {
  if (batch.kind != BatchKind::kDithered) throw std::invalid_argument("quantization_error: batch is not dithered");
  if (!batch.truth) throw std::invalid_argument("quantization_error: batch carries no ground truth");
  std::vector<double> v(batch.samples);
  for (auto& x : v) x -= batch.truth->mu_x;
  return v;
}

// ---------------------------------------------------------------------------
// CSV batch files:
//   # kind=<dithered|quantized> delta=<d> sigma_z=<s> mu_x=<m>
//   one sample per line

inline void write_batch_csv(std::ostream& os, const MeasurementBatch& batch) {
  char buf[64];
  os << "# kind=" << to_string(batch.kind);
  std::snprintf(buf, sizeof buf, "%.17g", batch.spec.delta);
  os << " delta=" << buf;
  if (batch.truth) {
    std::snprintf(buf, sizeof buf, "%.17g", batch.truth->sigma_z);
    os << " sigma_z=" << buf;
    std::snprintf(buf, sizeof buf, "%.17g", batch.truth->mu_x);
    os << " mu_x=" << buf;
  }
  os << '\n';
  for (double s : batch.samples) {
    std::snprintf(buf, sizeof buf, "%.17g", s);
    os << buf << '\n';
  }
}

class BatchParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline MeasurementBatch read_batch_csv(std::istream& is) {
  std::string line;
  std::optional<BatchKind> kind;
  std::optional<double> delta, sigma_z, mu_x;
  std::vector<double> samples;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') {
      if (header_seen) continue;
      header_seen = true;
      std::istringstream fields(line.substr(1));
      std::string field;
      while (fields >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const auto key = field.substr(0, eq);
        const auto val = field.substr(eq + 1);
        try {
          if (key == "kind") {
            if (val == "dithered") kind = BatchKind::kDithered;
            else if (val == "quantized") kind = BatchKind::kQuantized;
            else throw BatchParseError("unknown batch kind '" + val + "'");
          } else if (key == "delta") {
            delta = std::stod(val);
          } else if (key == "sigma_z") {
            sigma_z = std::stod(val);
          } else if (key == "mu_x") {
            mu_x = std::stod(val);
          }
        } catch (const std::logic_error&) {
          throw BatchParseError("line " + std::to_string(lineno) + ": bad header value '" + field + "'");
        }
      }
      continue;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(line, &used);
    } catch (const std::logic_error&) {
      throw BatchParseError("line " + std::to_string(lineno) + ": not a number: '" + line + "'");
    }
    if (line.find_first_not_of(" \t,", used) != std::string::npos) {
      throw BatchParseError("line " + std::to_string(lineno) + ": trailing characters in '" + line + "'");
    }
    samples.push_back(v);
  }
  if (!kind) throw BatchParseError("batch header missing 'kind='");
  if (samples.empty()) throw BatchParseError("batch has no samples");
  MeasurementBatch batch{*kind, std::move(samples), std::nullopt, QuantizerSpec(delta.value_or(1.0))};
  if (sigma_z) batch.truth = SignalModel(mu_x.value_or(0.0), *sigma_z);
  if (batch.kind == BatchKind::kQuantized) {
    for (double s : batch.samples) {
      const double level = s / batch.spec.delta;
      if (std::abs(level - std::round(level)) > 1e-9 * std::max(1.0, std::abs(level))) {
        throw BatchParseError("quantized batch holds a sample that is not a multiple of delta");
      }
    }
  }
  return batch;
}

inline MeasurementBatch read_batch_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open batch file '" + path + "'");
  try {
    return read_batch_csv(in);
  } catch (const BatchParseError& e) {
    throw BatchParseError(path + ": " + e.what());
  }
}

}  // namespace ditherlab
