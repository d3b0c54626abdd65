#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "uplift/csv.hpp"
#include "uplift/dataset.hpp"
#include "uplift/pipeline.hpp"

namespace fs = std::filesystem;
using namespace uplift;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "uplift_pipeline_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small end-to-end configuration: big enough to exercise every stage, small
// enough to run in well under a second.
std::string tiny_config_json() {
  return R"({
  "seed": 21,
  "dataset": {"synthetic": {"n": 160, "d": 5, "sigma": 0.6}, "train_frac": 0.7},
  "gcn": {"epochs": 5}
})";
}

const std::vector<std::string>& shared_artifacts() {
  static const std::vector<std::string> names{
      "dataset.csv",        "train.csv",
      "test.csv",           "teacher.json",
      "soft_labels_train.csv", "cate_model.json",
      "weights_train.csv",  "weights_test.csv",
      "cate_summary.json",  "dag.json",
      "dag_edges.txt",      "gcn_adjacency.csv",
      "gcn_weighted.json",  "gcn_plain.json",
      "predictions_weighted.csv", "predictions_plain.csv",
      "curve_weighted.csv", "curve_plain.csv",
      "report.json"};
  return names;
}

}  // namespace

TEST_CASE("fnv1a matches the published test vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("config parsing fills defaults and echoes the document") {
  const PipelineConfig cfg = parse_pipeline_config(tiny_config_json());
  CHECK(cfg.seed == 21);
  CHECK(cfg.synthetic);
  CHECK(cfg.synth.n == 160);
  CHECK(cfg.synth.d == 5);
  CHECK(cfg.synth.sigma == 0.6);
  CHECK(cfg.synth.eta == 0.1);
  CHECK(cfg.train_frac == 0.7);
  CHECK(cfg.gcn.epochs == 5);
  CHECK(cfg.gcn.hidden == 16);       // untouched default
  CHECK(cfg.dml.n_folds == 2);       // untouched default
  CHECK(cfg.compare);
  CHECK(!cfg.config_echo.empty());
  CHECK(json::parse(cfg.config_echo)["seed"] == 21);
}

TEST_CASE("config validation rejects malformed documents") {
  CHECK_THROWS_AS(parse_pipeline_config("not json"), config_error);
  CHECK_THROWS_AS(parse_pipeline_config("{}"), config_error);  // no seed
  CHECK_THROWS_AS(parse_pipeline_config(R"({"seed": 1})"), config_error);  // no dataset
  CHECK_THROWS_AS(parse_pipeline_config(R"({"seed": -3, "dataset": {"synthetic": {}}})"),
                  config_error);
  // Unknown keys anywhere are hard errors, top level and nested alike.
  CHECK_THROWS_AS(
      parse_pipeline_config(R"({"seed": 1, "dataset": {"synthetic": {}}, "extra": 1})"),
      config_error);
  CHECK_THROWS_AS(
      parse_pipeline_config(R"({"seed": 1, "dataset": {"synthetic": {"rows": 10}}})"),
      config_error);
  CHECK_THROWS_AS(
      parse_pipeline_config(R"({"seed": 1, "dataset": {"synthetic": {}, "csv": {"path": "x"}}})"),
      config_error);  // two sources
  CHECK_THROWS_AS(parse_pipeline_config(R"({"seed": 1, "dataset": {}})"), config_error);
  // Referenced files must exist at validation time.
  CHECK_THROWS_AS(
      parse_pipeline_config(R"({"seed": 1, "dataset": {"csv": {"path": "/no/such/file.csv"}}})"),
      config_error);
}

TEST_CASE("adjacency CSV round-trips and rejects asymmetry") {
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.5, 1.0;
  const fs::path dir = fresh_dir("adjacency");
  const fs::path p = dir / "a.csv";
  write_file_atomic(p, stages::adjacency_to_csv(a));
  const GcnAdjacency back = stages::read_adjacency_csv(p);
  CHECK(back.a_norm == a);

  Matrix bad(2, 2);
  bad << 1.0, 0.5, 0.2, 1.0;
  const fs::path pb = dir / "bad.csv";
  write_file_atomic(pb, stages::adjacency_to_csv(bad));
  CHECK_THROWS_AS(stages::read_adjacency_csv(pb), schema_error);
}

TEST_CASE("missing upstream artifacts are reported with their path") {
  const fs::path dir = fresh_dir("missing");
  const fs::path model = dir / "ghost_model.json";
  const fs::path data = dir / "data.csv";
  SyntheticConfig scfg;
  scfg.n = 30;
  scfg.d = 5;
  scfg.seed = 1;
  save_csv(generate_synthetic(scfg), data);
  try {
    stages::predict(model, data, ColumnMapping::canonical(), nullptr, dir / "pred.csv");
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find("ghost_model.json") != std::string::npos);
  }
}

TEST_CASE("prediction files are validated row by row") {
  const fs::path dir = fresh_dir("badpred");
  const fs::path data = dir / "data.csv";
  SyntheticConfig scfg;
  scfg.n = 10;
  scfg.d = 5;
  scfg.seed = 2;
  save_csv(generate_synthetic(scfg), data);
  // ids must run 0..n-1: break one.
  std::string pred = "id,mu0,mu1,tau_hat\n";
  for (int i = 0; i < 10; ++i) {
    pred += std::to_string(i == 3 ? 30 : i) + ",0.1,0.2,0.1\n";
  }
  const fs::path pp = dir / "pred.csv";
  write_file_atomic(pp, pred);
  CHECK_THROWS_AS(
      stages::evaluate(data, ColumnMapping::canonical(), {{"m", pp, fs::path{}}}, dir / "r.json"),
      schema_error);
}

TEST_CASE("the full pipeline emits every artifact and a consistent manifest") {
  const fs::path dir = fresh_dir("full");
  PipelineConfig cfg = parse_pipeline_config(tiny_config_json());
  cfg.out_dir = dir;
  run_pipeline(cfg);

  for (const std::string& name : shared_artifacts()) {
    CHECK(fs::exists(dir / name));
  }
  CHECK(!fs::exists(dir / ".lock"));  // released on success

  const json report = json::parse(read_file(dir / "report.json"));
  CHECK(report.at("format") == "report-v1");
  for (const std::string label : {"weighted", "plain"}) {
    const json& r = report.at("results").at(label);
    CHECK(r.at("mse_y").get<double>() > 0.0);
    CHECK(std::isfinite(r.at("abs_ite").get<double>()));
    CHECK(std::isfinite(r.at("auuc_raw").get<double>()));
    CHECK(r.at("group_sizes").size() == 2);
  }

  const json manifest = json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest.at("format") == "manifest-v1");
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("tool_version") == kToolVersion);
  // Every artifact hash matches an independent recomputation.
  for (const auto& [name, hash] : manifest.at("artifacts").items()) {
    CHECK(hash.get<std::string>() == fnv1a_hex(read_file(dir / name)));
  }
  CHECK(manifest.at("stage_seconds").contains("teacher"));
  CHECK(manifest.at("rng_algorithm") == "mt19937_64+u53+polar");
  CHECK(manifest.at("config").at("seed") == 21);
  CHECK(manifest.at("failed_stage").is_null());
}

TEST_CASE("identical configurations reproduce the report byte for byte") {
  PipelineConfig cfg = parse_pipeline_config(tiny_config_json());
  const fs::path dir1 = fresh_dir("repeat1");
  const fs::path dir2 = fresh_dir("repeat2");
  cfg.out_dir = dir1;
  run_pipeline(cfg);
  cfg.out_dir = dir2;
  run_pipeline(cfg);
  CHECK(read_file(dir1 / "report.json") == read_file(dir2 / "report.json"));

  const json m1 = json::parse(read_file(dir1 / "manifest.json"));
  const json m2 = json::parse(read_file(dir2 / "manifest.json"));
  CHECK(m1.at("artifacts") == m2.at("artifacts"));
}

TEST_CASE("a held lock blocks a second run") {
  const fs::path dir = fresh_dir("locked");
  write_file_atomic(dir / ".lock", "held\n");
  PipelineConfig cfg = parse_pipeline_config(tiny_config_json());
  cfg.out_dir = dir;
  CHECK_THROWS_AS(run_pipeline(cfg), data_error);
  CHECK(fs::exists(dir / ".lock"));  // a foreign lock is never deleted
}

TEST_CASE("a failing stage is recorded in the manifest before the error escapes") {
  const fs::path dir = fresh_dir("failing");
  const fs::path bad_csv = dir / "bad.csv";
  write_file_atomic(bad_csv, "f0,f1,treatment,conversion\n0.1,0.2,2,0\n0.3,0.4,1,1\n");
  const std::string config = std::string(R"({
  "seed": 4,
  "dataset": {"csv": {"path": ")") + bad_csv.string() + R"("}, "train_frac": 0.5}
})";
  PipelineConfig cfg = parse_pipeline_config(config);
  cfg.out_dir = dir;
  CHECK_THROWS_AS(run_pipeline(cfg), data_error);

  const json manifest = json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest.at("status") == "failed");
  CHECK(manifest.at("failed_stage") == "dataset");
  CHECK(manifest.at("error").get<std::string>().find("not binary") != std::string::npos);
  CHECK(!fs::exists(dir / ".lock"));
}

TEST_CASE("running the stages by hand reproduces the pipeline bytes") {
  PipelineConfig cfg = parse_pipeline_config(tiny_config_json());
  const fs::path adir = fresh_dir("auto");
  cfg.out_dir = adir;
  run_pipeline(cfg);

  // Manual re-run of the same stages in a second directory, using the
  // documented per-stage seed offsets (+1 split, +2 folds, +3 search, +4 net).
  const fs::path m = fresh_dir("manual");
  const ColumnMapping map = ColumnMapping::canonical();
  SyntheticConfig synth = cfg.synth;
  synth.seed = cfg.seed;
  const fs::path train = m / "train.csv", test = m / "test.csv";
  const fs::path dataset = m / "dataset.csv";
  stages::simulate(synth, dataset, &train, &test, cfg.train_frac, cfg.seed + 1);

  stages::distill(train, map, cfg.teacher, m / "teacher.json", m / "soft_labels_train.csv");

  DmlConfig dml = cfg.dml;
  dml.seed = cfg.seed + 2;
  const fs::path wtest = m / "weights_test.csv";
  stages::cate_fit(train, map, m / "soft_labels_train.csv", dml, m / "cate_model.json",
                   m / "weights_train.csv", m / "cate_summary.json", &test, &wtest);

  HillClimbOptions hc = cfg.structure;
  hc.seed = cfg.seed + 3;
  stages::learn_structure(train, map, hc, m / "dag.json", m / "dag_edges.txt",
                          m / "gcn_adjacency.csv");

  GcnHyperParams hp = cfg.gcn;
  hp.seed = cfg.seed + 4;
  const fs::path wtrain = m / "weights_train.csv";
  stages::train_gcn(train, map, &wtrain, m / "gcn_adjacency.csv", hp, m / "gcn_weighted.json");
  stages::train_gcn(train, map, nullptr, m / "gcn_adjacency.csv", hp, m / "gcn_plain.json");

  stages::predict(m / "gcn_weighted.json", test, map, &wtest, m / "predictions_weighted.csv");
  stages::predict(m / "gcn_plain.json", test, map, nullptr, m / "predictions_plain.csv");

  stages::evaluate(test, map,
                   {{"weighted", m / "predictions_weighted.csv", m / "curve_weighted.csv"},
                    {"plain", m / "predictions_plain.csv", m / "curve_plain.csv"}},
                   m / "report.json");

  for (const std::string& name : shared_artifacts()) {
    INFO(name);
    CHECK(read_file(adir / name) == read_file(m / name));
  }
}
