#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uplift/dataset.hpp"
#include "uplift/dml.hpp"
#include "uplift/gbdt.hpp"
#include "uplift/gcn.hpp"
#include "uplift/structure.hpp"
#include "uplift/types.hpp"

namespace uplift {

// File-based stage functions. The pipeline command drives exactly these, and
// each CLI subcommand exposes exactly one of them, so a manual stage-by-stage
// run reproduces the pipeline's artifacts byte for byte.
namespace stages {

// Generates a synthetic dataset; optionally also writes a train/test split.
void simulate(const SyntheticConfig& cfg, const std::filesystem::path& dataset_out,
              const std::filesystem::path* train_out, const std::filesystem::path* test_out,
              double train_frac, std::uint64_t split_seed);

// Splits an existing CSV into canonical train/test files.
void split_csv(const std::filesystem::path& data_csv, const ColumnMapping& mapping,
               double train_frac, std::uint64_t split_seed,
               const std::filesystem::path& train_out, const std::filesystem::path& test_out);

// Fits the teacher on [X, t] -> y and writes the model plus train-row soft labels.
void distill(const std::filesystem::path& train_csv, const ColumnMapping& mapping,
             const GbdtParams& params, const std::filesystem::path& model_out,
             const std::filesystem::path& soft_out);

// Fits the per-feature heads and writes model, train weights, and summary;
// optionally applies the fitted heads to a second file (the test rows).
void cate_fit(const std::filesystem::path& train_csv, const ColumnMapping& mapping,
              const std::filesystem::path& soft_csv, const DmlConfig& cfg,
              const std::filesystem::path& model_out, const std::filesystem::path& weights_out,
              const std::filesystem::path& summary_out, const std::filesystem::path* apply_csv,
              const std::filesystem::path* apply_weights_out);

// Learns the DAG over feature columns and writes JSON, edge list, and the
// normalized adjacency CSV.
void learn_structure(const std::filesystem::path& data_csv, const ColumnMapping& mapping,
                     const HillClimbOptions& opts, const std::filesystem::path& dag_out,
                     const std::filesystem::path& edges_out,
                     const std::filesystem::path& adjacency_out);

// Trains the graph S-learner (weights_csv == nullptr trains the unweighted
// baseline) and writes the model JSON.
void train_gcn(const std::filesystem::path& train_csv, const ColumnMapping& mapping,
               const std::filesystem::path* weights_csv,
               const std::filesystem::path& adjacency_csv, const GcnHyperParams& hp,
               const std::filesystem::path& model_out);

// Scores a data file with a trained model; writes `id,mu0,mu1,tau_hat`.
void predict(const std::filesystem::path& model_json, const std::filesystem::path& data_csv,
             const ColumnMapping& mapping, const std::filesystem::path* weights_csv,
             const std::filesystem::path& pred_out);

struct LabeledPrediction {
  std::string label;                 // key in the report ("weighted", "plain", ...)
  std::filesystem::path pred_csv;
  std::filesystem::path curve_out;   // empty = skip curve export
};

// Builds the metrics report over one or more prediction files.
void evaluate(const std::filesystem::path& data_csv, const ColumnMapping& mapping,
              const std::vector<LabeledPrediction>& predictions,
              const std::filesystem::path& report_out);

// Shared artifact readers (also used by tests).
SoftLabels read_soft_labels(const std::filesystem::path& path);
Matrix read_weights_csv(const std::filesystem::path& path);
GcnAdjacency read_adjacency_csv(const std::filesystem::path& path);
std::string adjacency_to_csv(const Matrix& a_norm);

}  // namespace stages

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;

  bool synthetic = true;
  SyntheticConfig synth;         // total rows before the split
  std::filesystem::path csv_path;
  ColumnMapping mapping;         // applies to the csv source
  double train_frac = 0.8;

  GbdtParams teacher;
  DmlConfig dml;
  HillClimbOptions structure;
  GcnHyperParams gcn;
  bool compare = true;           // also train/evaluate the unweighted baseline

  std::string config_echo;       // normalized copy of the parsed config file
};

// Parses and validates the JSON config (strict keys, mandatory seed, exactly
// one dataset source, referenced files must exist). out_dir may stay empty
// here; the CLI resolves it from flag/config/environment.
PipelineConfig parse_pipeline_config(const std::string& json_text);

// Runs every stage in order inside cfg.out_dir, holding a lock file for the
// duration. Writes manifest.json last (also on failure, with the failing
// stage recorded) and rethrows the stage error.
void run_pipeline(const PipelineConfig& cfg);

// FNV-1a 64-bit content hash, hex-encoded; used for manifest entries.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace uplift
