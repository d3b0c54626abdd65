#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uplift/types.hpp"

namespace uplift {

// Canonical tabular form consumed by every downstream stage.
// tau_true is populated only by the synthetic generator; real-world loads
// leave it empty, and effect-recovery metrics refuse to run without it.
struct Dataset {
  Matrix x;                          // n × d
  IntVector t;                       // treatment indicator, entries in {0,1}
  Vector y;                          // outcome
  std::optional<Vector> tau_true;    // per-row true effect, synthetic only
  std::vector<std::string> feature_names;
  std::uint64_t seed = 0;

  Index n() const { return x.rows(); }
  Index d() const { return x.cols(); }
};

struct SyntheticConfig {
  Index n = 1000;
  Index d = 5;      // baseline surface reads columns 1,2,4,5 (1-based)
  double sigma = 1.0;
  double eta = 0.1;  // propensity trim level, in (0, 0.5)
  std::uint64_t seed = 0;
};

// Randomized-trial simulator. Per row, in this order: d uniform features,
// one Bernoulli treatment draw, one standard-normal noise draw (drawn even
// when sigma is 0, so the same seed yields the same X and W at every noise
// level). Same config ⇒ bit-identical Dataset.
Dataset generate_synthetic(const SyntheticConfig& cfg);

// Closed-form surfaces behind the generator, exposed for evaluation:
//   propensity  e*(x) = clamp(sin(pi·x1·x2), eta, 1−eta)
//   effect      tau*(x) = (x1 + x2) / 2
//   baseline    b*(x) = sin(pi·x1·x2) + 2(x1−0.5)² + x4 + 0.5·x5
Vector propensity_surface(const Matrix& x, double eta);
Vector treatment_effect_surface(const Matrix& x);
Vector baseline_surface(const Matrix& x);

// Noise-free potential outcomes (y0, y1) = b* ∓ tau*/2. With sigma = 0 the
// stored y equals the selected potential outcome bit for bit.
std::pair<Vector, Vector> potential_outcomes(const Matrix& x);

// Column mapping for CSV ingestion. An empty `features` list means "every
// column that is not treatment/outcome/tau_true, in file order". A non-empty
// tau_true name is used only when that column exists, so one mapping covers
// both synthetic exports and real-world files.
struct ColumnMapping {
  std::vector<std::string> features;
  std::string treatment = "treatment";
  std::string outcome = "conversion";
  std::string tau_true;  // empty = never load a true-effect column

  // Mapping for files written by Dataset::save_csv.
  static ColumnMapping canonical();
};

struct LoadReport {
  std::size_t rows_read = 0;     // data rows present in the file
  std::size_t rows_dropped = 0;  // rows removed for non-finite values
};

// Rows with any non-finite mapped value are dropped (and counted) before the
// binary-treatment check; a non-binary treatment value on a surviving row is
// a data error naming the 1-based data row.
Dataset load_csv(const std::filesystem::path& path, const ColumnMapping& mapping,
                 LoadReport* report = nullptr);

// Writes `<features...>,treatment,outcome[,tau_true]` with shortest
// round-trip doubles; load_csv(canonical mapping) recovers the exact bits.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

// Seed-deterministic disjoint row partition; each side keeps original row
// order. Throws config_error when either side would be empty.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed);

}  // namespace uplift
