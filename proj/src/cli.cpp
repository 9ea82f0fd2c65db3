#include "cafp/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cafp/errors.hpp"
#include "cafp/harness.hpp"

namespace cafp {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string dataset;
  std::string schema;
  std::string model = "lr";
  std::vector<std::string> postprocs;
  int repeats = 0;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  double train_fraction = 0.7;
  std::string out_path;
  std::string csv_path;
  bool reproducible = false;

  std::string model_out;
  std::string model_in;

  std::size_t n = 10000;
  double a_coef = 1.5;
  double shift = 0.0;

  std::size_t batch = 1000;
  int trials = 20;
};

void add_data_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset, "Dataset CSV file")->required();
  cmd->add_option("--schema", o.schema, "Schema JSON file")->required();
}

void add_model_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--model", o.model, "Model family")
      ->check(CLI::IsMember(known_models()))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Base seed")->capture_default_str();
  cmd->add_option("--train-fraction", o.train_fraction, "Train share of each split")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
}

void add_output_flags(CLI::App* cmd, Options& o, bool with_csv) {
  cmd->add_option("--out", o.out_path, "Write JSON here instead of stdout");
  if (with_csv) cmd->add_option("--csv", o.csv_path, "Write plot-ready CSV here");
  cmd->add_flag("--reproducible", o.reproducible, "Omit timestamps so identical runs give identical output");
}

void add_repeats(CLI::App* cmd, Options& o, int default_repeats) {
  o.repeats = default_repeats;
  cmd->add_option("--repeats", o.repeats, "Number of repeated splits")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
}

void add_threshold(CLI::App* cmd, Options& o) {
  cmd->add_option("--threshold", o.threshold, "Decision threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Error(std::string(what) + " file not found: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << text;
  if (!f) throw Error("failed writing " + path);
}

void emit_json(const Json& doc, const Options& o, std::ostream& out) {
  const auto text = doc.dump(2) + "\n";
  if (o.out_path.empty()) {
    out << text;
  } else {
    write_text(o.out_path, text);
  }
}

ExperimentConfig make_config(const Options& o) {
  ExperimentConfig cfg;
  cfg.dataset_path = o.dataset;
  cfg.schema_path = o.schema;
  cfg.model = o.model;
  cfg.repeats = o.repeats;
  cfg.seed = o.seed;
  cfg.threshold = o.threshold;
  cfg.train_fraction = o.train_fraction;
  if (!o.postprocs.empty()) cfg.postprocs = o.postprocs;
  cfg.validate();
  return cfg;
}

Dataset load_inputs(const Options& o) {
  require_file(o.dataset, "dataset");
  require_file(o.schema, "schema");
  return load_dataset(o.dataset, o.schema);
}

int do_audit(const Options& o, std::ostream& out) {
  const auto cfg = make_config(o);
  const auto ds = load_inputs(o);
  const auto report = run_experiment(ds, cfg);
  emit_json(report.to_json(o.reproducible), o, out);
  if (!o.csv_path.empty()) write_text(o.csv_path, report.to_csv());
  return kExitOk;
}

int do_sweep(const Options& o, std::ostream& out) {
  const auto cfg = make_config(o);
  const auto ds = load_inputs(o);
  const auto res = threshold_sweep(ds, cfg);
  Json doc{{"config", cfg.to_json()}, {"dataset_id", ds.id}, {"sweep", res.to_json()}};
  emit_json(doc, o, out);
  if (!o.csv_path.empty()) write_text(o.csv_path, res.to_csv());
  return kExitOk;
}

int do_ablate(const Options& o, std::ostream& out) {
  const auto cfg = make_config(o);
  const auto ds = load_inputs(o);
  const auto res = ablation(ds, cfg);
  Json doc{{"config", cfg.to_json()}, {"dataset_id", ds.id}, {"ablation", res.to_json()}};
  emit_json(doc, o, out);
  if (!o.csv_path.empty()) write_text(o.csv_path, res.to_csv());
  return kExitOk;
}

Json standardizer_json(const Standardizer& s) {
  return Json{{"mean", s.mean}, {"scale", s.scale}, {"active", s.active}};
}

Standardizer standardizer_from_json(const Json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  s.active = j.at("active").get<std::vector<bool>>();
  return s;
}

int do_certify(const Options& o, std::ostream& out) {
  auto cfg = make_config(o);
  cfg.repeats = 1;
  const auto ds = load_inputs(o);

  // Same split and validation carve-out as repeat 0 of an audit.
  Split outer = split(ds, SplitPlan{cfg.seed, cfg.train_fraction, 0});
  std::unique_ptr<ProbClassifier> model;
  Standardizer st;
  if (!o.model_in.empty()) {
    require_file(o.model_in, "model");
    std::ifstream f(o.model_in);
    Json doc;
    try {
      doc = Json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("model file " + o.model_in + " is not valid JSON: " + e.what());
    }
    model = load_model(doc);
    if (doc.value("schema_hash", std::string{}) != ds.schema_hash) {
      throw Error("model file " + o.model_in + " was trained under a different schema");
    }
    st = standardizer_from_json(doc.at("standardizer"));
  } else {
    auto run = prepare_run(ds, cfg, 0);
    model = std::move(run.model);
    st = std::move(run.standardizer);
  }
  const Dataset test = apply_standardizer(st, outer.test);
  if (model->n_features() != test.d()) throw ShapeError("model feature count does not match the dataset");

  const auto triples = cafp_batch(*model, test);
  const auto cert = eo_bound_certificate(triples, test.y);
  std::vector<double> avg(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) avg[i] = triples[i].p_avg;

  Json doc = cert.to_json();
  doc["model_id"] = model_id(*model);
  doc["dataset_id"] = ds.id;
  doc["schema_hash"] = ds.schema_hash;
  doc["score_eod"] = score_eod(avg, test.y, test.a);
  doc["identity_error"] = max_identity_error(triples);
  doc["n_test"] = test.n();
  emit_json(doc, o, out);

  if (!o.model_out.empty()) {
    Json saved = save_model(*model, ds.feature_names, ds.schema_hash);
    saved["standardizer"] = standardizer_json(st);
    write_text(o.model_out, saved.dump() + "\n");
  }
  return kExitOk;
}

int do_synthcheck(const Options& o, std::ostream& out) {
  SyntheticConfig cfg;
  cfg.seed = o.seed;
  cfg.n = o.n;
  cfg.a_coefficient = o.a_coef;
  cfg.feature_shift = o.shift;
  const auto ledger = synthetic_theorem_suite(cfg);
  emit_json(ledger.to_json(), o, out);
  return ledger.all_passed() ? kExitOk : kExitFailure;
}

int do_latency(const Options& o, std::ostream& out) {
  auto cfg = make_config(o);
  const auto ds = load_inputs(o);
  auto run = prepare_run(ds, cfg, 0);
  const auto res = latency_probe(*run.model, run.test.X, run.test.a, o.batch, o.trials);
  Json doc{{"model", cfg.model}, {"dataset_id", ds.id}, {"latency", res.to_json()}};
  emit_json(doc, o, out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Counterfactual averaging fairness toolkit", "cafp"};
  app.require_subcommand(1);
  Options o;

  auto* audit = app.add_subcommand("audit", "Repeated-split fairness report for one model and its post-processors");
  add_data_flags(audit, o);
  add_model_flags(audit, o);
  audit->add_option("--postproc", o.postprocs, "Post-processor (repeatable); default: none and cafp")
      ->check(CLI::IsMember(known_postprocs()))
      ->take_all();
  add_repeats(audit, o, 100);
  add_threshold(audit, o);
  add_output_flags(audit, o, true);

  auto* sweep = app.add_subcommand("sweep", "Balanced accuracy and DPD over 25 decision thresholds");
  add_data_flags(sweep, o);
  add_model_flags(sweep, o);
  add_repeats(sweep, o, 20);
  add_output_flags(sweep, o, true);

  auto* ablate = app.add_subcommand("ablate", "Factual vs counterfactual vs averaged scores");
  add_data_flags(ablate, o);
  add_model_flags(ablate, o);
  add_repeats(ablate, o, 20);
  add_threshold(ablate, o);
  add_output_flags(ablate, o, true);

  auto* certify = app.add_subcommand("certify", "Equalized-odds bound certificate on the test split");
  add_data_flags(certify, o);
  add_model_flags(certify, o);
  certify->add_option("--model-out", o.model_out, "Save the trained model (with its standardizer) here");
  certify->add_option("--model-in", o.model_in, "Certify a previously saved model instead of training");
  add_output_flags(certify, o, false);

  auto* synth = app.add_subcommand("synthcheck", "Theorem checks on synthetic data; exit 1 if a check fails");
  synth->add_option("--seed", o.seed, "Seed")->capture_default_str();
  synth->add_option("--n", o.n, "Sample size")->check(CLI::Range(1000, 100000000))->capture_default_str();
  synth->add_option("--a-coef", o.a_coef, "Direct effect of A on the label logit")->capture_default_str();
  synth->add_option("--shift", o.shift, "Mean shift of feature 0 for a=1 (breaks X independent of A)")
      ->capture_default_str();
  add_output_flags(synth, o, false);

  auto* latency = app.add_subcommand("latency", "Median scoring time, factual vs CAFP");
  add_data_flags(latency, o);
  add_model_flags(latency, o);
  latency->add_option("--batch", o.batch, "Rows per timed batch")->check(CLI::PositiveNumber)->capture_default_str();
  latency->add_option("--trials", o.trials, "Timed trials")->check(CLI::Range(20, 100000))->capture_default_str();
  add_output_flags(latency, o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*audit) return do_audit(o, out);
    if (*sweep) return do_sweep(o, out);
    if (*ablate) return do_ablate(o, out);
    if (*certify) return do_certify(o, out);
    if (*synth) return do_synthcheck(o, out);
    if (*latency) return do_latency(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cafp
