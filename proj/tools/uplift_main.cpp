#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uplift/csv.hpp"
#include "uplift/pipeline.hpp"

namespace fs = std::filesystem;
using namespace uplift;

namespace {

struct ColumnFlags {
  std::string treatment = "treatment";
  std::string outcome = "outcome";
  std::string tau = "tau_true";
  std::vector<std::string> features;

  ColumnMapping mapping() const {
    ColumnMapping m;
    m.treatment = treatment;
    m.outcome = outcome;
    m.tau_true = tau;
    m.features = features;
    return m;
  }
};

void add_column_flags(CLI::App* cmd, ColumnFlags& cols) {
  cmd->add_option("--treatment-col", cols.treatment, "Treatment column name")
      ->capture_default_str();
  cmd->add_option("--outcome-col", cols.outcome, "Outcome column name")->capture_default_str();
  cmd->add_option("--tau-col", cols.tau,
                  "True-effect column name, used when present (empty disables)")
      ->capture_default_str();
  cmd->add_option("--features", cols.features,
                  "Feature columns (default: every remaining column in file order)");
}

void add_teacher_flags(CLI::App* cmd, GbdtParams& params) {
  cmd->add_option("--max-depth", params.max_depth, "Tree depth limit")->capture_default_str();
  cmd->add_option("--rounds", params.n_rounds, "Boosting rounds")->capture_default_str();
  cmd->add_option("--learning-rate", params.learning_rate, "Shrinkage per tree")
      ->capture_default_str();
  cmd->add_option("--min-leaf", params.min_samples_leaf, "Minimum samples per leaf")
      ->capture_default_str();
  cmd->add_option("--max-candidates", params.max_candidates,
                  "Split-threshold candidates per feature per node")
      ->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{
      "Uplift estimation pipeline: teacher distillation, per-feature causal weights,\n"
      "BIC-learned feature graph, and a graph-convolutional S-learner."};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // pipeline
  auto* cmd_pipeline = app.add_subcommand("pipeline", "Run every stage from a JSON config");
  std::string config_path;
  std::string out_dir_flag;
  cmd_pipeline->add_option("--config", config_path, "Pipeline config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_pipeline->add_option("--out-dir", out_dir_flag,
                           "Output directory (overrides config and UPLIFT_OUT)");
  cmd_pipeline->callback([&] {
    PipelineConfig cfg = parse_pipeline_config(read_file(config_path));
    if (!out_dir_flag.empty()) {
      cfg.out_dir = out_dir_flag;
    } else if (cfg.out_dir.empty()) {
      const char* env = std::getenv("UPLIFT_OUT");
      if (env != nullptr && *env != '\0') cfg.out_dir = env;
    }
    if (cfg.out_dir.empty()) {
      throw config_error("no output directory: pass --out-dir, set out_dir, or export UPLIFT_OUT");
    }
    run_pipeline(cfg);
    std::cout << "pipeline finished: " << (cfg.out_dir / "report.json").string() << "\n";
  });

  // simulate
  auto* cmd_sim = app.add_subcommand("simulate", "Generate randomized-trial data");
  SyntheticConfig synth;
  std::string sim_out;
  std::string sim_train_out, sim_test_out;
  double sim_train_frac = 0.8;
  std::uint64_t sim_split_seed = 0;
  bool sim_split_seed_set = false;
  cmd_sim->add_option("--n", synth.n, "Sample count")->required();
  cmd_sim->add_option("--d", synth.d, "Feature count (>= 5)")->required();
  cmd_sim->add_option("--sigma", synth.sigma, "Outcome noise level")->capture_default_str();
  cmd_sim->add_option("--eta", synth.eta, "Propensity trim level")->capture_default_str();
  cmd_sim->add_option("--seed", synth.seed, "Generator seed")->required();
  cmd_sim->add_option("--out", sim_out, "Dataset CSV path")->required();
  auto* sim_train_opt =
      cmd_sim->add_option("--train-out", sim_train_out, "Also write a train split here");
  auto* sim_test_opt =
      cmd_sim->add_option("--test-out", sim_test_out, "Also write a test split here");
  cmd_sim->add_option("--train-frac", sim_train_frac, "Train fraction for the split")
      ->capture_default_str();
  cmd_sim
      ->add_option_function<std::uint64_t>(
          "--split-seed",
          [&](const std::uint64_t v) {
            sim_split_seed = v;
            sim_split_seed_set = true;
          },
          "Split seed (default: seed + 1)")
      ->expected(1);
  sim_train_opt->needs(sim_test_opt);
  sim_test_opt->needs(sim_train_opt);
  cmd_sim->callback([&] {
    const fs::path train_p = sim_train_out;
    const fs::path test_p = sim_test_out;
    stages::simulate(synth, sim_out, sim_train_out.empty() ? nullptr : &train_p,
                     sim_test_out.empty() ? nullptr : &test_p, sim_train_frac,
                     sim_split_seed_set ? sim_split_seed : synth.seed + 1);
  });

  // distill
  auto* cmd_distill = app.add_subcommand("distill", "Fit the teacher and emit soft labels");
  std::string distill_data, distill_model_out, distill_soft_out;
  GbdtParams teacher_params;
  ColumnFlags distill_cols;
  cmd_distill->add_option("--data", distill_data, "Training CSV")->required()->check(CLI::ExistingFile);
  cmd_distill->add_option("--model-out", distill_model_out, "Teacher model JSON")->required();
  cmd_distill->add_option("--soft-out", distill_soft_out, "Soft-label CSV")->required();
  add_teacher_flags(cmd_distill, teacher_params);
  add_column_flags(cmd_distill, distill_cols);
  cmd_distill->callback([&] {
    stages::distill(distill_data, distill_cols.mapping(), teacher_params, distill_model_out,
                    distill_soft_out);
  });

  // cate
  auto* cmd_cate = app.add_subcommand("cate", "Fit per-feature causal-weight heads");
  std::string cate_data, cate_soft, cate_model_out, cate_weights_out, cate_summary_out;
  std::string cate_apply, cate_apply_out;
  DmlConfig dml;
  std::string nuisance_name = "ridge", final_stage_name = "linear";
  ColumnFlags cate_cols;
  cmd_cate->add_option("--data", cate_data, "Training CSV")->required()->check(CLI::ExistingFile);
  cmd_cate->add_option("--soft", cate_soft, "Soft-label CSV from distill")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_cate->add_option("--model-out", cate_model_out, "Head model JSON")->required();
  cmd_cate->add_option("--weights-out", cate_weights_out, "Train-row weight CSV")->required();
  cmd_cate->add_option("--summary-out", cate_summary_out, "Summary JSON")->required();
  auto* apply_opt = cmd_cate->add_option("--apply", cate_apply, "Score these rows as well")
                        ->check(CLI::ExistingFile);
  auto* apply_out_opt =
      cmd_cate->add_option("--apply-weights-out", cate_apply_out, "Weight CSV for --apply rows");
  apply_opt->needs(apply_out_opt);
  apply_out_opt->needs(apply_opt);
  cmd_cate->add_option("--folds", dml.n_folds, "Cross-fitting folds")->capture_default_str();
  cmd_cate->add_option("--nuisance", nuisance_name, "Nuisance model: ridge or gbdt")
      ->capture_default_str()
      ->check(CLI::IsMember({"ridge", "gbdt"}));
  cmd_cate->add_option("--ridge-lambda", dml.ridge_lambda, "Ridge strength")
      ->capture_default_str();
  cmd_cate->add_option("--final-stage", final_stage_name, "Effect model: constant or linear")
      ->capture_default_str()
      ->check(CLI::IsMember({"constant", "linear"}));
  cmd_cate->add_option("--seed", dml.seed, "Fold-assignment seed")->capture_default_str();
  cmd_cate->add_flag("--sequential", "Disable the per-head thread pool");
  add_column_flags(cmd_cate, cate_cols);
  cmd_cate->callback([&] {
    dml.nuisance = nuisance_name == "ridge" ? Nuisance::kRidge : Nuisance::kGbdt;
    dml.final_stage =
        final_stage_name == "constant" ? FinalStage::kConstant : FinalStage::kLinear;
    dml.parallel = cmd_cate->count("--sequential") == 0;
    const fs::path apply_p = cate_apply;
    const fs::path apply_out_p = cate_apply_out;
    stages::cate_fit(cate_data, cate_cols.mapping(), cate_soft, dml, cate_model_out,
                     cate_weights_out, cate_summary_out, cate_apply.empty() ? nullptr : &apply_p,
                     cate_apply.empty() ? nullptr : &apply_out_p);
  });

  // structure
  auto* cmd_structure = app.add_subcommand("structure", "Learn the feature DAG");
  std::string struct_data, dag_out, edges_out, adjacency_out;
  HillClimbOptions climb;
  ColumnFlags struct_cols;
  cmd_structure->add_option("--data", struct_data, "Data CSV")->required()->check(CLI::ExistingFile);
  cmd_structure->add_option("--dag-out", dag_out, "DAG JSON path")->required();
  cmd_structure->add_option("--edges-out", edges_out, "Edge-list text path");
  cmd_structure->add_option("--adjacency-out", adjacency_out, "Normalized adjacency CSV path");
  cmd_structure->add_option("--max-iters", climb.max_iters, "Moves per restart")
      ->capture_default_str();
  cmd_structure->add_option("--restarts", climb.restarts, "Total starts (first is empty graph)")
      ->capture_default_str();
  cmd_structure->add_option("--seed", climb.seed, "Random-restart seed")->capture_default_str();
  cmd_structure->add_option("--parent-cap", climb.parent_cap, "Max parents per node")
      ->capture_default_str();
  add_column_flags(cmd_structure, struct_cols);
  cmd_structure->callback([&] {
    const fs::path edges_p = edges_out.empty() ? fs::path(dag_out).replace_extension(".txt")
                                               : fs::path(edges_out);
    const fs::path adj_p = adjacency_out.empty()
                               ? fs::path(dag_out).parent_path() / "gcn_adjacency.csv"
                               : fs::path(adjacency_out);
    stages::learn_structure(struct_data, struct_cols.mapping(), climb, dag_out, edges_p, adj_p);
  });

  // train
  auto* cmd_train = app.add_subcommand("train", "Fit the graph S-learner");
  std::string train_data, train_weights, train_adjacency, train_model_out;
  std::string train_test, train_test_weights, train_pred_out;
  GcnHyperParams hp;
  ColumnFlags train_cols;
  cmd_train->add_option("--data", train_data, "Training CSV")->required()->check(CLI::ExistingFile);
  cmd_train->add_option("--adjacency", train_adjacency, "Normalized adjacency CSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_train->add_option("--weights", train_weights, "Causal-weight CSV (omit for the baseline)")
      ->check(CLI::ExistingFile);
  cmd_train->add_option("--model-out", train_model_out, "Model JSON path")->required();
  auto* test_opt = cmd_train->add_option("--test", train_test, "Also score this CSV")
                       ->check(CLI::ExistingFile);
  cmd_train->add_option("--test-weights", train_test_weights, "Weight CSV for --test rows")
      ->check(CLI::ExistingFile)
      ->needs(test_opt);
  auto* pred_opt = cmd_train->add_option("--pred-out", train_pred_out, "Predictions CSV path");
  test_opt->needs(pred_opt);
  pred_opt->needs(test_opt);
  cmd_train->add_option("--layers", hp.n_layers, "Graph layers")->capture_default_str();
  cmd_train->add_option("--hidden", hp.hidden, "Graph layer width")->capture_default_str();
  cmd_train->add_option("--readout-hidden", hp.readout_hidden, "Readout width")
      ->capture_default_str();
  cmd_train->add_option("--leaky-slope", hp.leaky_slope, "LeakyReLU negative slope")
      ->capture_default_str();
  cmd_train->add_option("--lr", hp.lr, "Learning rate")->capture_default_str();
  cmd_train->add_option("--epochs", hp.epochs, "Training epochs")->capture_default_str();
  cmd_train->add_option("--batch", hp.batch, "Minibatch size")->capture_default_str();
  cmd_train->add_option("--l2", hp.l2, "Weight decay")->capture_default_str();
  cmd_train->add_option("--momentum", hp.momentum, "SGD momentum")->capture_default_str();
  cmd_train->add_option("--seed", hp.seed, "Initialization/shuffle seed")->capture_default_str();
  add_column_flags(cmd_train, train_cols);
  cmd_train->callback([&] {
    const fs::path weights_p = train_weights;
    stages::train_gcn(train_data, train_cols.mapping(),
                      train_weights.empty() ? nullptr : &weights_p, train_adjacency, hp,
                      train_model_out);
    if (!train_test.empty()) {
      const fs::path test_weights_p = train_test_weights;
      stages::predict(train_model_out, train_test, train_cols.mapping(),
                      train_test_weights.empty() ? nullptr : &test_weights_p, train_pred_out);
    }
  });

  // evaluate
  auto* cmd_eval = app.add_subcommand("evaluate", "Score predictions against a labeled CSV");
  std::string eval_data, eval_pred, eval_pred_plain, eval_out;
  std::string eval_curve, eval_curve_plain;
  std::string eval_label = "weighted", eval_label_plain = "plain";
  ColumnFlags eval_cols;
  cmd_eval->add_option("--data", eval_data, "Labeled CSV (the test split)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_eval->add_option("--pred", eval_pred, "Predictions CSV")->required()->check(CLI::ExistingFile);
  cmd_eval->add_option("--pred-plain", eval_pred_plain, "Second predictions CSV to compare")
      ->check(CLI::ExistingFile);
  cmd_eval->add_option("--out", eval_out, "Report JSON path")->required();
  cmd_eval->add_option("--curve-out", eval_curve, "Uplift-curve CSV for --pred");
  cmd_eval->add_option("--curve-plain-out", eval_curve_plain, "Uplift-curve CSV for --pred-plain");
  cmd_eval->add_option("--label", eval_label, "Report key for --pred")->capture_default_str();
  cmd_eval->add_option("--label-plain", eval_label_plain, "Report key for --pred-plain")
      ->capture_default_str();
  add_column_flags(cmd_eval, eval_cols);
  cmd_eval->callback([&] {
    std::vector<stages::LabeledPrediction> preds;
    preds.push_back({eval_label, eval_pred, eval_curve});
    if (!eval_pred_plain.empty()) {
      preds.push_back({eval_label_plain, eval_pred_plain, eval_curve_plain});
    }
    stages::evaluate(eval_data, eval_cols.mapping(), preds, eval_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
