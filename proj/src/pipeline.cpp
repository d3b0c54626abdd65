#include "uplift/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "uplift/csv.hpp"
#include "uplift/metrics.hpp"
#include "uplift/rng.hpp"

namespace uplift {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace stages {

void simulate(const SyntheticConfig& cfg, const fs::path& dataset_out,
              const fs::path* train_out, const fs::path* test_out, double train_frac,
              std::uint64_t split_seed) {
  const Dataset ds = generate_synthetic(cfg);
  save_csv(ds, dataset_out);
  if ((train_out == nullptr) != (test_out == nullptr)) {
    throw config_error("simulate: train and test outputs must be given together");
  }
  if (train_out != nullptr) {
    const auto [train, test] = split(ds, train_frac, split_seed);
    save_csv(train, *train_out);
    save_csv(test, *test_out);
  }
}

void split_csv(const fs::path& data_csv, const ColumnMapping& mapping, double train_frac,
               std::uint64_t split_seed, const fs::path& train_out, const fs::path& test_out) {
  const Dataset ds = load_csv(data_csv, mapping);
  const auto [train, test] = split(ds, train_frac, split_seed);
  save_csv(train, train_out);
  save_csv(test, test_out);
}

namespace {

Matrix augment_with_treatment(const Dataset& ds) {
  Matrix x_aug(ds.n(), ds.d() + 1);
  x_aug.leftCols(ds.d()) = ds.x;
  for (Index i = 0; i < ds.n(); ++i) x_aug(i, ds.d()) = static_cast<double>(ds.t[i]);
  return x_aug;
}

std::string matrix_csv(const Matrix& m, const std::vector<std::string>& header) {
  std::ostringstream out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    out << header[j] << (j + 1 < header.size() ? ',' : '\n');
  }
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      out << format_double(m(i, j)) << (j + 1 < m.cols() ? ',' : '\n');
    }
  }
  return out.str();
}

Matrix matrix_from_table(const CsvTable& table, const std::string& where) {
  const Index rows = static_cast<Index>(table.rows.size());
  const Index cols = static_cast<Index>(table.header.size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = parse_double(table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                             where + ":" + std::to_string(i + 2));
    }
  }
  return m;
}

}  // namespace

void distill(const fs::path& train_csv, const ColumnMapping& mapping, const GbdtParams& params,
             const fs::path& model_out, const fs::path& soft_out) {
  const Dataset train = load_csv(train_csv, mapping);
  const Matrix x_aug = augment_with_treatment(train);
  const GbdtModel model = fit_gbdt(x_aug, train.y, params);
  const SoftLabels soft = predict_soft(model, x_aug);
  write_file_atomic(model_out, gbdt_to_json(model));
  std::ostringstream out;
  out << "y_hat\n";
  for (Index i = 0; i < soft.y_hat.size(); ++i) out << format_double(soft.y_hat[i]) << '\n';
  write_file_atomic(soft_out, out.str());
}

SoftLabels read_soft_labels(const fs::path& path) {
  const CsvTable table = read_csv_file(path);
  const Index col = table.find_column("y_hat");
  if (col < 0) throw schema_error(path.string() + ": missing y_hat column");
  SoftLabels soft;
  soft.y_hat.resize(static_cast<Index>(table.rows.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    soft.y_hat[static_cast<Index>(i)] =
        parse_double(table.rows[i][static_cast<std::size_t>(col)],
                     path.string() + ":" + std::to_string(i + 2));
  }
  return soft;
}

Matrix read_weights_csv(const fs::path& path) {
  return matrix_from_table(read_csv_file(path), path.string());
}

GcnAdjacency read_adjacency_csv(const fs::path& path) {
  const Matrix m = matrix_from_table(read_csv_file(path), path.string());
  if (m.rows() != m.cols()) throw schema_error(path.string() + ": adjacency must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw schema_error(path.string() + ": adjacency must be symmetric");
  }
  return GcnAdjacency{m};
}

std::string adjacency_to_csv(const Matrix& a_norm) {
  std::vector<std::string> header;
  header.reserve(static_cast<std::size_t>(a_norm.cols()));
  for (Index j = 0; j < a_norm.cols(); ++j) header.push_back("c" + std::to_string(j));
  return matrix_csv(a_norm, header);
}

void cate_fit(const fs::path& train_csv, const ColumnMapping& mapping, const fs::path& soft_csv,
              const DmlConfig& cfg, const fs::path& model_out, const fs::path& weights_out,
              const fs::path& summary_out, const fs::path* apply_csv,
              const fs::path* apply_weights_out) {
  const Dataset train = load_csv(train_csv, mapping);
  const SoftLabels soft = read_soft_labels(soft_csv);
  if (soft.y_hat.size() != train.n()) {
    throw shape_error("cate: soft labels have " + std::to_string(soft.y_hat.size()) +
                      " rows, training data has " + std::to_string(train.n()));
  }

  const CateModel model = multi_head_cate(train.x, soft, cfg);
  const CausalWeights weights = apply_cate(model, train.x);
  write_file_atomic(model_out, cate_to_json(model));
  write_file_atomic(weights_out, matrix_csv(weights.w, train.feature_names));

  json summary;
  summary["format"] = "cate-summary-v1";
  summary["feature_names"] = train.feature_names;
  summary["theta_mean"] = std::vector<double>(weights.theta_mean.data(),
                                              weights.theta_mean.data() + weights.theta_mean.size());
  summary["degenerate"] = weights.degenerate;
  summary["heterogeneity_basis"] = weights.heterogeneity_basis;
  json echo;
  echo["n_folds"] = cfg.n_folds;
  echo["nuisance"] = cfg.nuisance == Nuisance::kRidge ? "ridge" : "gbdt";
  echo["ridge_lambda"] = cfg.ridge_lambda;
  echo["final_stage"] = cfg.final_stage == FinalStage::kConstant ? "constant" : "linear";
  echo["seed"] = cfg.seed;
  summary["config"] = std::move(echo);
  write_file_atomic(summary_out, summary.dump(2) + "\n");

  if ((apply_csv == nullptr) != (apply_weights_out == nullptr)) {
    throw config_error("cate: apply input and output must be given together");
  }
  if (apply_csv != nullptr) {
    const Dataset target = load_csv(*apply_csv, mapping);
    const CausalWeights applied = apply_cate(model, target.x);
    write_file_atomic(*apply_weights_out, matrix_csv(applied.w, target.feature_names));
  }
}

void learn_structure(const fs::path& data_csv, const ColumnMapping& mapping,
                     const HillClimbOptions& opts, const fs::path& dag_out,
                     const fs::path& edges_out, const fs::path& adjacency_out) {
  const Dataset ds = load_csv(data_csv, mapping);
  const HillClimbResult result = hill_climb(ds.x, opts);
  write_file_atomic(dag_out, dag_to_json(result.dag));
  write_file_atomic(edges_out, dag_to_edge_list(result.dag, ds.feature_names));
  write_file_atomic(adjacency_out, adjacency_to_csv(to_gcn_adjacency(result.dag).a_norm));
}

void train_gcn(const fs::path& train_csv, const ColumnMapping& mapping,
               const fs::path* weights_csv, const fs::path& adjacency_csv,
               const GcnHyperParams& hp, const fs::path& model_out) {
  const Dataset train = load_csv(train_csv, mapping);
  const GcnAdjacency a = read_adjacency_csv(adjacency_csv);
  GcnModel model;
  if (weights_csv != nullptr) {
    const Matrix weights = read_weights_csv(*weights_csv);
    model = fit_gcn(train, &weights, a, hp);
  } else {
    model = fit_gcn(train, nullptr, a, hp);
  }
  write_file_atomic(model_out, gcn_to_json(model));
}

void predict(const fs::path& model_json, const fs::path& data_csv, const ColumnMapping& mapping,
             const fs::path* weights_csv, const fs::path& pred_out) {
  const GcnModel model = gcn_from_json(read_file(model_json));
  const Dataset ds = load_csv(data_csv, mapping);
  if (model.input_channels() == 2 && weights_csv == nullptr) {
    throw config_error("predict: this model needs a causal-weight file (--weights)");
  }
  if (model.input_channels() == 1 && weights_csv != nullptr) {
    throw config_error("predict: this model takes no causal weights, drop --weights");
  }
  UpliftScores scores;
  if (weights_csv != nullptr) {
    const Matrix weights = read_weights_csv(*weights_csv);
    scores = predict_uplift(model, ds, &weights);
  } else {
    scores = predict_uplift(model, ds, nullptr);
  }
  std::ostringstream out;
  out << "id,mu0,mu1,tau_hat\n";
  for (Index i = 0; i < ds.n(); ++i) {
    out << i << ',' << format_double(scores.mu0[i]) << ',' << format_double(scores.mu1[i]) << ','
        << format_double(scores.tau_hat[i]) << '\n';
  }
  write_file_atomic(pred_out, out.str());
}

namespace {

struct PredColumns {
  Vector mu0, mu1, tau_hat;
};

PredColumns read_predictions(const fs::path& path, Index expected_rows) {
  const CsvTable table = read_csv_file(path);
  const Index id_col = table.find_column("id");
  const Index mu0_col = table.find_column("mu0");
  const Index mu1_col = table.find_column("mu1");
  const Index tau_col = table.find_column("tau_hat");
  if (id_col < 0 || mu0_col < 0 || mu1_col < 0 || tau_col < 0) {
    throw schema_error(path.string() + ": predictions need columns id,mu0,mu1,tau_hat");
  }
  const Index n = static_cast<Index>(table.rows.size());
  if (n != expected_rows) {
    throw shape_error(path.string() + ": " + std::to_string(n) + " prediction rows for " +
                      std::to_string(expected_rows) + " data rows");
  }
  PredColumns cols{Vector(n), Vector(n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::string where = path.string() + ":" + std::to_string(i + 2);
    if (parse_int(row[static_cast<std::size_t>(id_col)], where) != i) {
      throw schema_error(where + ": prediction ids must run 0.." + std::to_string(n - 1) +
                         " in order");
    }
    cols.mu0[i] = parse_double(row[static_cast<std::size_t>(mu0_col)], where);
    cols.mu1[i] = parse_double(row[static_cast<std::size_t>(mu1_col)], where);
    cols.tau_hat[i] = parse_double(row[static_cast<std::size_t>(tau_col)], where);
  }
  return cols;
}

}  // namespace

void evaluate(const fs::path& data_csv, const ColumnMapping& mapping,
              const std::vector<LabeledPrediction>& predictions, const fs::path& report_out) {
  if (predictions.empty()) throw config_error("evaluate: need at least one prediction file");
  const Dataset ds = load_csv(data_csv, mapping);

  json inputs;
  inputs["data"] = data_csv.filename().string();
  json pred_echo = json::object();
  json results = json::object();
  for (const LabeledPrediction& lp : predictions) {
    const PredColumns cols = read_predictions(lp.pred_csv, ds.n());
    const UpliftReport report =
        make_report(cols.tau_hat, cols.mu0, cols.mu1, ds.t, ds.y, ds.tau_true);

    json jr;
    jr["mse_y"] = report.mse_y;
    if (report.abs_ite.has_value()) {
      jr["abs_ite"] = *report.abs_ite;
    } else {
      jr["abs_ite"] = nullptr;
    }
    jr["auuc_raw"] = report.auuc_raw;
    jr["auuc_norm"] = report.auuc_norm;
    jr["group_sizes"] = {report.n_treated, report.n_control};
    results[lp.label] = std::move(jr);
    pred_echo[lp.label] = lp.pred_csv.filename().string();

    if (!lp.curve_out.empty()) write_file_atomic(lp.curve_out, curve_to_csv(report.curve));
  }

  json doc;
  doc["format"] = "report-v1";
  inputs["predictions"] = std::move(pred_echo);
  doc["inputs"] = std::move(inputs);
  doc["results"] = std::move(results);
  write_file_atomic(report_out, doc.dump(2) + "\n");
}

}  // namespace stages

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw config_error("config: unknown key '" + key + "' in " + where);
  }
}

// Exclusive-create lock; removed on scope exit. A stale lock (crashed run)
// must be deleted manually, which is the honest behavior for shared dirs.
class DirLock {
 public:
  explicit DirLock(fs::path path) : path_(std::move(path)) {
    std::FILE* f = std::fopen(path_.string().c_str(), "wx");
    if (f == nullptr) {
      throw data_error("output directory is locked by another run (remove " + path_.string() +
                       " if that run is gone)");
    }
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config: invalid JSON: ") + e.what());
  }

  try {
    check_keys(doc, "the top level",
               {"seed", "out_dir", "dataset", "teacher", "dml", "structure", "gcn", "eval"});
    PipelineConfig cfg;
    if (!doc.contains("seed")) throw config_error("config: seed is mandatory");
    if (!doc["seed"].is_number_unsigned()) {
      throw config_error("config: seed must be an unsigned integer");
    }
    cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("out_dir")) cfg.out_dir = doc["out_dir"].get<std::string>();

    if (!doc.contains("dataset")) throw config_error("config: dataset section is mandatory");
    const json& ds = doc["dataset"];
    check_keys(ds, "dataset", {"synthetic", "csv", "train_frac"});
    const bool has_synth = ds.contains("synthetic");
    const bool has_csv = ds.contains("csv");
    if (has_synth == has_csv) {
      throw config_error("config: dataset needs exactly one of 'synthetic' or 'csv'");
    }
    cfg.synthetic = has_synth;
    cfg.train_frac = ds.value("train_frac", 0.8);
    if (has_synth) {
      const json& s = ds["synthetic"];
      check_keys(s, "dataset.synthetic", {"n", "d", "sigma", "eta"});
      cfg.synth.n = s.value("n", 1000);
      cfg.synth.d = s.value("d", 5);
      cfg.synth.sigma = s.value("sigma", 1.0);
      cfg.synth.eta = s.value("eta", 0.1);
      cfg.synth.seed = cfg.seed;
    } else {
      const json& c = ds["csv"];
      check_keys(c, "dataset.csv", {"path", "treatment", "outcome", "tau_true", "features"});
      if (!c.contains("path")) throw config_error("config: dataset.csv.path is mandatory");
      cfg.csv_path = c["path"].get<std::string>();
      if (!fs::exists(cfg.csv_path)) {
        throw config_error("config: dataset file does not exist: " + cfg.csv_path.string());
      }
      cfg.mapping.treatment = c.value("treatment", std::string("treatment"));
      cfg.mapping.outcome = c.value("outcome", std::string("conversion"));
      cfg.mapping.tau_true = c.value("tau_true", std::string());
      if (c.contains("features")) cfg.mapping.features = c["features"].get<std::vector<std::string>>();
    }

    if (doc.contains("teacher")) {
      const json& t = doc["teacher"];
      check_keys(t, "teacher",
                 {"max_depth", "n_rounds", "learning_rate", "min_samples_leaf", "max_candidates"});
      cfg.teacher.max_depth = t.value("max_depth", cfg.teacher.max_depth);
      cfg.teacher.n_rounds = t.value("n_rounds", cfg.teacher.n_rounds);
      cfg.teacher.learning_rate = t.value("learning_rate", cfg.teacher.learning_rate);
      cfg.teacher.min_samples_leaf = t.value("min_samples_leaf", cfg.teacher.min_samples_leaf);
      cfg.teacher.max_candidates = t.value("max_candidates", cfg.teacher.max_candidates);
    }

    if (doc.contains("dml")) {
      const json& m = doc["dml"];
      check_keys(m, "dml", {"n_folds", "nuisance", "ridge_lambda", "final_stage", "parallel"});
      cfg.dml.n_folds = m.value("n_folds", cfg.dml.n_folds);
      if (m.contains("nuisance")) {
        const std::string v = m["nuisance"].get<std::string>();
        if (v == "ridge") {
          cfg.dml.nuisance = Nuisance::kRidge;
        } else if (v == "gbdt") {
          cfg.dml.nuisance = Nuisance::kGbdt;
        } else {
          throw config_error("config: dml.nuisance must be 'ridge' or 'gbdt'");
        }
      }
      cfg.dml.ridge_lambda = m.value("ridge_lambda", cfg.dml.ridge_lambda);
      if (m.contains("final_stage")) {
        const std::string v = m["final_stage"].get<std::string>();
        if (v == "constant") {
          cfg.dml.final_stage = FinalStage::kConstant;
        } else if (v == "linear") {
          cfg.dml.final_stage = FinalStage::kLinear;
        } else {
          throw config_error("config: dml.final_stage must be 'constant' or 'linear'");
        }
      }
      cfg.dml.parallel = m.value("parallel", cfg.dml.parallel);
    }
    cfg.dml.gbdt = cfg.teacher;

    if (doc.contains("structure")) {
      const json& s = doc["structure"];
      check_keys(s, "structure", {"max_iters", "restarts", "parent_cap"});
      cfg.structure.max_iters = s.value("max_iters", cfg.structure.max_iters);
      cfg.structure.restarts = s.value("restarts", cfg.structure.restarts);
      cfg.structure.parent_cap = s.value("parent_cap", cfg.structure.parent_cap);
    }

    if (doc.contains("gcn")) {
      const json& g = doc["gcn"];
      check_keys(g, "gcn",
                 {"n_layers", "hidden", "readout_hidden", "leaky_slope", "lr", "epochs", "batch",
                  "l2", "momentum"});
      cfg.gcn.n_layers = g.value("n_layers", cfg.gcn.n_layers);
      cfg.gcn.hidden = g.value("hidden", cfg.gcn.hidden);
      cfg.gcn.readout_hidden = g.value("readout_hidden", cfg.gcn.readout_hidden);
      cfg.gcn.leaky_slope = g.value("leaky_slope", cfg.gcn.leaky_slope);
      cfg.gcn.lr = g.value("lr", cfg.gcn.lr);
      cfg.gcn.epochs = g.value("epochs", cfg.gcn.epochs);
      cfg.gcn.batch = g.value("batch", cfg.gcn.batch);
      cfg.gcn.l2 = g.value("l2", cfg.gcn.l2);
      cfg.gcn.momentum = g.value("momentum", cfg.gcn.momentum);
    }

    if (doc.contains("eval")) {
      const json& e = doc["eval"];
      check_keys(e, "eval", {"compare"});
      cfg.compare = e.value("compare", cfg.compare);
    }

    cfg.config_echo = doc.dump(2);
    return cfg;
  } catch (const json::exception& e) {
    throw config_error(std::string("config: malformed value: ") + e.what());
  }
}

void run_pipeline(const PipelineConfig& cfg) {
  if (cfg.out_dir.empty()) throw config_error("pipeline: no output directory resolved");
  fs::create_directories(cfg.out_dir);
  DirLock lock(cfg.out_dir / ".lock");

  const fs::path dataset_csv = cfg.out_dir / "dataset.csv";
  const fs::path train_csv = cfg.out_dir / "train.csv";
  const fs::path test_csv = cfg.out_dir / "test.csv";
  const fs::path teacher_json = cfg.out_dir / "teacher.json";
  const fs::path soft_csv = cfg.out_dir / "soft_labels_train.csv";
  const fs::path cate_json = cfg.out_dir / "cate_model.json";
  const fs::path weights_train_csv = cfg.out_dir / "weights_train.csv";
  const fs::path weights_test_csv = cfg.out_dir / "weights_test.csv";
  const fs::path cate_summary_json = cfg.out_dir / "cate_summary.json";
  const fs::path dag_json = cfg.out_dir / "dag.json";
  const fs::path dag_edges_txt = cfg.out_dir / "dag_edges.txt";
  const fs::path adjacency_csv = cfg.out_dir / "gcn_adjacency.csv";
  const fs::path gcn_weighted_json = cfg.out_dir / "gcn_weighted.json";
  const fs::path gcn_plain_json = cfg.out_dir / "gcn_plain.json";
  const fs::path pred_weighted_csv = cfg.out_dir / "predictions_weighted.csv";
  const fs::path pred_plain_csv = cfg.out_dir / "predictions_plain.csv";
  const fs::path curve_weighted_csv = cfg.out_dir / "curve_weighted.csv";
  const fs::path curve_plain_csv = cfg.out_dir / "curve_plain.csv";
  const fs::path report_json = cfg.out_dir / "report.json";

  std::vector<std::pair<std::string, double>> timings;
  std::string failed_stage;
  std::string error_text;

  auto run_stage = [&](const char* name, auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      body();
    } catch (...) {
      failed_stage = name;
      throw;
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    timings.emplace_back(name, elapsed.count());
  };

  auto write_manifest = [&]() {
    json doc;
    doc["format"] = "manifest-v1";
    doc["tool_version"] = kToolVersion;
    doc["rng_algorithm"] = Rng::algorithm_id();
    doc["status"] = failed_stage.empty() ? "ok" : "failed";
    doc["failed_stage"] = failed_stage.empty() ? json(nullptr) : json(failed_stage);
    doc["error"] = error_text.empty() ? json(nullptr) : json(error_text);
    doc["config"] = cfg.config_echo.empty() ? json(nullptr) : json::parse(cfg.config_echo);
    json artifacts = json::object();
    for (const fs::path& p :
         {dataset_csv, train_csv, test_csv, teacher_json, soft_csv, cate_json, weights_train_csv,
          weights_test_csv, cate_summary_json, dag_json, dag_edges_txt, adjacency_csv,
          gcn_weighted_json, gcn_plain_json, pred_weighted_csv, pred_plain_csv,
          curve_weighted_csv, curve_plain_csv, report_json}) {
      if (fs::exists(p)) artifacts[p.filename().string()] = fnv1a_hex(read_file(p));
    }
    doc["artifacts"] = std::move(artifacts);
    json stage_seconds = json::object();
    for (const auto& [name, seconds] : timings) stage_seconds[name] = seconds;
    doc["stage_seconds"] = std::move(stage_seconds);
    write_file_atomic(cfg.out_dir / "manifest.json", doc.dump(2) + "\n");
  };

  const ColumnMapping canon = ColumnMapping::canonical();
  try {
    run_stage("dataset", [&] {
      if (cfg.synthetic) {
        SyntheticConfig synth = cfg.synth;
        synth.seed = cfg.seed;
        stages::simulate(synth, dataset_csv, &train_csv, &test_csv, cfg.train_frac, cfg.seed + 1);
      } else {
        stages::split_csv(cfg.csv_path, cfg.mapping, cfg.train_frac, cfg.seed + 1, train_csv,
                          test_csv);
      }
    });
    run_stage("teacher",
              [&] { stages::distill(train_csv, canon, cfg.teacher, teacher_json, soft_csv); });
    run_stage("cate", [&] {
      DmlConfig dml = cfg.dml;
      dml.seed = cfg.seed + 2;
      stages::cate_fit(train_csv, canon, soft_csv, dml, cate_json, weights_train_csv,
                       cate_summary_json, &test_csv, &weights_test_csv);
    });
    run_stage("structure", [&] {
      HillClimbOptions opts = cfg.structure;
      opts.seed = cfg.seed + 3;
      stages::learn_structure(train_csv, canon, opts, dag_json, dag_edges_txt, adjacency_csv);
    });
    run_stage("train", [&] {
      GcnHyperParams hp = cfg.gcn;
      hp.seed = cfg.seed + 4;
      stages::train_gcn(train_csv, canon, &weights_train_csv, adjacency_csv, hp,
                        gcn_weighted_json);
      if (cfg.compare) {
        stages::train_gcn(train_csv, canon, nullptr, adjacency_csv, hp, gcn_plain_json);
      }
    });
    run_stage("predict", [&] {
      stages::predict(gcn_weighted_json, test_csv, canon, &weights_test_csv, pred_weighted_csv);
      if (cfg.compare) {
        stages::predict(gcn_plain_json, test_csv, canon, nullptr, pred_plain_csv);
      }
    });
    run_stage("evaluate", [&] {
      std::vector<stages::LabeledPrediction> preds;
      preds.push_back({"weighted", pred_weighted_csv, curve_weighted_csv});
      if (cfg.compare) preds.push_back({"plain", pred_plain_csv, curve_plain_csv});
      stages::evaluate(test_csv, canon, preds, report_json);
    });
  } catch (const std::exception& e) {
    error_text = e.what();
    write_manifest();
    throw;
  }
  write_manifest();
}

}  // namespace uplift
