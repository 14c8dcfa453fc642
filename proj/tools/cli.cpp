#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "jvcqma/bandwidth.hpp"
#include "jvcqma/data_io.hpp"
#include "jvcqma/errors.hpp"
#include "jvcqma/evaluation.hpp"
#include "jvcqma/hashing.hpp"
#include "jvcqma/model_average.hpp"
#include "jvcqma/sim_suite.hpp"

#ifndef JVCQMA_VERSION
#define JVCQMA_VERSION "0.0.0"
#endif

namespace jvcqma::cli {
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what, int code)
      : std::runtime_error(stage + ": " + what), exit_code(code) {}
  int exit_code;
};

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const StaleModel& e) {
    throw StageError(name, e.what(), kExitStale);
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), kExitFailure);
  }
}

struct Common {
  std::vector<double> taus;
  std::string kernel = "gauss";
  std::string grid;
  int threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_grid = true) {
  cmd->add_option("--tau", c.taus, "Quantile level (repeatable)");
  if (with_grid) {
    cmd->add_option("--kernel", c.kernel, "gauss or epanechnikov")->capture_default_str();
    cmd->add_option("--bandwidth-grid", c.grid, "Pilot grid min:max:count (geometric)");
  }
  cmd->add_option("--threads", c.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Output directory")->required();
}

std::vector<double> parse_grid(const std::string& text) {
  if (text.empty()) return {};
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string piece; std::getline(ss, piece, ':');) parts.push_back(piece);
  if (parts.size() != 3) throw InvalidArgument("--bandwidth-grid expects min:max:count, got '" + text + "'");
  try {
    return geometric_grid(std::stod(parts[0]), std::stod(parts[1]), std::stoi(parts[2]));
  } catch (const std::logic_error&) {
    throw InvalidArgument("--bandwidth-grid expects numbers, got '" + text + "'");
  }
}

std::vector<double> paper_tau_grid() {
  std::vector<double> taus;
  for (int k = 1; k <= 9; ++k) taus.push_back(k / 10.0);
  return taus;
}

std::string absolute_path(const std::string& path) {
  return fs::absolute(fs::path(path)).lexically_normal().string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw DataError("cannot write " + path.string());
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw DataError("cannot create output directory " + dir);
  return out;
}

// First column is the response, every other column a continuous covariate.
io::Schema infer_schema(const std::string& path) {
  std::ifstream in(path);
  std::string header;
  if (!in || !std::getline(in, header)) throw DataError(path + ": empty file (a header row is required)");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  io::Schema schema;
  std::stringstream ss(header);
  for (std::string name; std::getline(ss, name, ',');) {
    schema.push_back({name, schema.empty() ? io::ColumnRole::Response : io::ColumnRole::Continuous, false});
  }
  io::validate_schema(schema);
  return schema;
}

struct Input {
  std::string role;
  std::string path;
  std::string sha256;
};

Json provenance(const std::string& command, Json config, const std::vector<Input>& inputs) {
  Json files = Json::array();
  for (const auto& in : inputs) files.push_back({{"role", in.role}, {"path", in.path}, {"sha256", in.sha256}});
  return {{"tool", "jvcqma"},
          {"version", JVCQMA_VERSION},
          {"command", command},
          {"config", std::move(config)},
          {"inputs", std::move(files)}};
}

class Meta {
 public:
  explicit Meta(std::string command)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    started_ = buf;
  }

  Json finish(int threads, Json extra = Json::object()) const {
    Json doc{{"command", command_},
             {"started_utc", started_},
             {"wall_seconds",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()},
             {"threads", threads}};
    for (auto& [k, v] : extra.items()) doc[k] = v;
    return doc;
  }

 private:
  std::string command_;
  std::string started_;
  std::chrono::steady_clock::time_point start_;
};

struct LoadedData {
  io::Schema schema;
  Dataset raw;
  Dataset data;
  io::StandardizationRecord record;
  std::string path;
  std::string sha256;
  std::vector<Input> inputs;
};

LoadedData load_data(const std::string& data_path, const std::string& schema_path) {
  LoadedData out;
  out.path = absolute_path(data_path);
  out.schema = stage("load schema", [&] {
    return schema_path.empty() ? infer_schema(data_path) : io::load_schema(schema_path);
  });
  out.raw = stage("load data", [&] { return io::load_csv(data_path, out.schema); });
  out.sha256 = stage("hash inputs", [&] { return sha256_file(data_path); });
  out.inputs.push_back({"data", out.path, out.sha256});
  if (!schema_path.empty()) {
    out.inputs.push_back({"schema", absolute_path(schema_path), stage("hash inputs", [&] {
                            return sha256_file(schema_path);
                          })});
  }
  std::tie(out.data, out.record) = stage("standardize", [&] { return io::standardize(out.raw, out.schema); });
  return out;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  Common common;
  std::string data;
  std::string schema;
  std::string scheme = "loocv";
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  Meta meta("fit");
  const std::vector<double> taus = a.common.taus.empty() ? std::vector<double>{0.5} : a.common.taus;
  const auto [kind, scheme, grid] = stage("configure", [&] {
    for (double t : taus) QuantileLevel{t};
    return std::tuple{parse_kernel(a.common.kernel), parse_scheme(a.scheme), parse_grid(a.common.grid)};
  });
  LoadedData loaded = load_data(a.data, a.schema);
  auto data = std::make_shared<const Dataset>(loaded.data);
  stage("validate", [&] { data->require_fittable(); });
  const PilotBandwidths pilots =
      stage("bandwidth", [&] { return select_pilots(*data, grid, kind, a.common.threads); });

  Json models = Json::array();
  for (double t : taus) {
    AveragedModel model = stage("weights", [&] {
      return fit_averaged_model(data, QuantileLevel(t), pilots, scheme, kind, a.common.threads);
    });
    model.data_ref = {loaded.path, loaded.sha256};
    models.push_back(model_to_json(model));
    out << "tau " << io::format_double(t) << ":";
    for (Eigen::Index s = 0; s < model.weights.size(); ++s) out << ' ' << io::format_double(model.weights[s]);
    out << '\n';
  }

  Json config{{"data", loaded.path},
              {"schema", a.schema.empty() ? Json(nullptr) : Json(absolute_path(a.schema))},
              {"taus", taus},
              {"scheme", scheme_name(scheme)},
              {"kernel", kernel_name(kind)},
              {"bandwidth_grid", a.common.grid}};
  Json doc{{"format", "jvcqma-model"},
           {"format_version", 1},
           {"schema", io::schema_to_json(loaded.schema)},
           {"standardization", io::record_to_json(loaded.record)},
           {"training_data", {{"path", loaded.path}, {"sha256", loaded.sha256}}},
           {"models", std::move(models)},
           {"provenance", provenance("fit", std::move(config), loaded.inputs)}};
  stage("write outputs", [&] {
    const fs::path dir = prepare_out(a.common.out);
    write_json(dir / "model.json", doc);
    write_json(dir / "meta.json", meta.finish(a.common.threads));
  });
  return kExitOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string model;
  std::string queries;
  std::string data;
  int threads = 1;
  std::string out;
};

int cmd_predict(const PredictArgs& a, std::ostream&) {
  Meta meta("predict");
  const Json doc = stage("load model", [&] {
    Json d = read_json(a.model);
    if (d.value("format", "") != "jvcqma-model") throw DataError(a.model + " is not a jvcqma model document");
    return d;
  });
  const std::string expected = doc.at("training_data").at("sha256").get<std::string>();
  const std::string data_path = a.data.empty() ? doc.at("training_data").at("path").get<std::string>() : a.data;
  const std::string actual = stage("verify training data", [&] {
    const std::string h = sha256_file(data_path);
    if (h != expected) {
      throw StaleModel("training data " + data_path + " changed since the model was fitted (sha256 " + h +
                       ", model expects " + expected + ")");
    }
    return h;
  });
  const io::Schema schema = stage("load schema", [&] { return io::schema_from_json(doc.at("schema")); });
  const io::StandardizationRecord record =
      stage("load model", [&] { return io::record_from_json(doc.at("standardization")); });
  const Dataset raw = stage("load data", [&] { return io::load_csv(data_path, schema); });
  auto data = std::make_shared<const Dataset>(
      stage("standardize", [&] { return io::apply_standardization(raw, record); }));
  const Eigen::MatrixXd queries = stage("load queries", [&] {
    return Eigen::MatrixXd(io::apply_standardization(io::load_queries(a.queries, raw), record));
  });

  std::vector<double> taus;
  std::vector<Eigen::VectorXd> preds;
  for (const auto& m : doc.at("models")) {
    const AveragedModel model = stage("load model", [&] { return model_from_json(m, data); });
    taus.push_back(model.tau.value());
    preds.push_back(stage("predict", [&] { return predict_averaged(model, queries, a.threads); }));
  }

  std::ostringstream csv;
  for (std::size_t k = 0; k < taus.size(); ++k) csv << (k ? "," : "") << "tau_" << io::format_double(taus[k]);
  csv << '\n';
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    for (std::size_t k = 0; k < preds.size(); ++k) csv << (k ? "," : "") << io::format_double(preds[k][i]);
    csv << '\n';
  }
  Json config{{"model", absolute_path(a.model)}, {"queries", absolute_path(a.queries)}, {"data", data_path}};
  std::vector<Input> inputs{{"model", absolute_path(a.model), stage("hash inputs", [&] { return sha256_file(a.model); })},
                            {"queries", absolute_path(a.queries),
                             stage("hash inputs", [&] { return sha256_file(a.queries); })},
                            {"data", data_path, actual}};
  stage("write outputs", [&] {
    const fs::path dir = prepare_out(a.out);
    write_text(dir / "predictions.csv", csv.str());
    write_json(dir / "provenance.json", provenance("predict", std::move(config), inputs));
    write_json(dir / "meta.json", meta.finish(a.threads));
  });
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimArgs {
  int example = 1;
  int error_case = 1;
  int n = 200;
  int p = 5;
  int n_test = 100;
  std::uint64_t seed = 1;
  bool any_pairing = false;
};

void add_sim_options(CLI::App* cmd, SimArgs& s) {
  cmd->add_option("--example", s.example, "Simulation example 1-4")->capture_default_str();
  cmd->add_option("--case", s.error_case, "Error case 1-6")->capture_default_str();
  cmd->add_option("--n", s.n, "Training size")->capture_default_str();
  cmd->add_option("--p", s.p, "Covariates for examples 1 and 2")->capture_default_str();
  cmd->add_option("--n-test", s.n_test, "Test size")->capture_default_str();
  cmd->add_flag("--allow-any-pairing", s.any_pairing, "Accept any example/error-case pairing");
}

sim::SimDesign make_design(const SimArgs& s, std::uint64_t seed) {
  sim::SimDesign d;
  d.example = sim::parse_example(std::to_string(s.example));
  d.error_case = sim::parse_error_case(std::to_string(s.error_case));
  d.n = s.n;
  d.p = s.p;
  d.n_test = s.n_test;
  d.seed = seed;
  d.allow_any_pairing = s.any_pairing;
  d.validate();
  return d;
}

Json design_json(const SimArgs& s) {
  return {{"example", s.example}, {"error_case", s.error_case}, {"n", s.n},
          {"p", s.p},             {"n_test", s.n_test},         {"allow_any_pairing", s.any_pairing}};
}

int cmd_simulate(const SimArgs& s, const std::string& out_dir, std::ostream& out) {
  Meta meta("simulate");
  const sim::SimDesign design = stage("configure", [&] { return make_design(s, s.seed); });
  const sim::GeneratedSample sample = stage("simulate", [&] { return sim::generate(design); });
  Json config = design_json(s);
  config["seed"] = s.seed;
  stage("write outputs", [&] {
    const fs::path dir = prepare_out(out_dir);
    io::save_csv(dir / "train.csv", sample.train);
    io::save_csv(dir / "test.csv", sample.test);
    io::save_schema(dir / "schema.json", io::schema_for(sample.train));
    write_json(dir / "provenance.json", provenance("simulate", std::move(config), {}));
    write_json(dir / "meta.json", meta.finish(1));
  });
  out << "wrote " << sample.train.rows() << " training and " << sample.test.rows() << " test rows to "
      << out_dir << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvalArgs {
  Common common;
  SimArgs sim;
  std::string data;
  std::string schema;
  std::vector<std::string> methods;
  int reps = 50;
  std::uint64_t seed = 1;
  double max_failure_share = 0.10;
};

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  Meta meta("evaluate");
  const std::vector<double> taus = a.common.taus.empty() ? paper_tau_grid() : a.common.taus;
  eval::EvalOptions options = stage("configure", [&] {
    eval::EvalOptions o;
    o.kernel = parse_kernel(a.common.kernel);
    o.grid = parse_grid(a.common.grid);
    o.threads = a.common.threads;
    o.max_failure_share = a.max_failure_share;
    return o;
  });

  Json config{{"taus", taus},
              {"reps", a.reps},
              {"seed", a.seed},
              {"kernel", kernel_name(options.kernel)},
              {"bandwidth_grid", a.common.grid},
              {"max_failure_share", a.max_failure_share}};
  std::vector<Input> inputs;
  eval::RunResult result;
  if (a.data.empty()) {
    const sim::SimDesign design = stage("configure", [&] { return make_design(a.sim, a.seed); });
    const Dataset like = stage("simulate", [&] { return sim::generate(design).train; });
    const auto methods = stage("configure", [&] {
      std::vector<eval::Method> m;
      for (const auto& name : a.methods) m.push_back(eval::Method::parse(name));
      return m.empty() ? eval::all_methods(like) : m;
    });
    config["mode"] = "simulation";
    config["design"] = design_json(a.sim);
    result = stage("evaluate", [&] {
      return eval::run_replications(design, taus, methods, a.reps, a.seed, options);
    });
  } else {
    LoadedData loaded = load_data(a.data, a.schema);
    inputs = loaded.inputs;
    const auto methods = stage("configure", [&] {
      std::vector<eval::Method> m;
      for (const auto& name : a.methods) m.push_back(eval::Method::parse(name));
      return m.empty() ? eval::all_methods(loaded.data) : m;
    });
    config["mode"] = "split";
    config["data"] = loaded.path;
    config["n_test"] = a.sim.n_test;
    result = stage("evaluate", [&] {
      return eval::run_split_replications(loaded.data, a.sim.n_test, taus, methods, a.reps, a.seed, options);
    });
  }

  Json report = eval::report_to_json(result.report);
  report["provenance"] = provenance("evaluate", config, inputs);
  Json weights = eval::weights_to_json(result.weights);
  weights["provenance"] = provenance("evaluate", config, inputs);
  const std::string tsv = eval::report_to_tsv(result.report);
  stage("write outputs", [&] {
    const fs::path dir = prepare_out(a.common.out);
    write_json(dir / "report.json", report);
    write_text(dir / "report.tsv", tsv);
    write_json(dir / "weights.json", weights);
    write_text(dir / "weights.tsv", eval::weights_to_tsv(result.weights));
    write_json(dir / "meta.json",
               meta.finish(a.common.threads, {{"seconds_per_replication", result.report.seconds_per_replication}}));
  });
  out << tsv;
  return kExitOk;
}

// ---------------------------------------------------------------- bootstrap-weights

struct BootArgs {
  Common common;
  std::string data;
  std::string schema;
  int resamples = 200;
  std::uint64_t seed = 1;
  bool fixed_bandwidth = false;
  double max_failure_share = 0.10;
};

int cmd_bootstrap(const BootArgs& a, std::ostream& out) {
  Meta meta("bootstrap-weights");
  const std::vector<double> taus = a.common.taus.empty() ? std::vector<double>{0.5} : a.common.taus;
  const eval::BootstrapOptions options = stage("configure", [&] {
    eval::BootstrapOptions o;
    o.kernel = parse_kernel(a.common.kernel);
    o.grid = parse_grid(a.common.grid);
    o.threads = a.common.threads;
    o.fixed_bandwidth = a.fixed_bandwidth;
    o.max_failure_share = a.max_failure_share;
    return o;
  });
  LoadedData loaded = load_data(a.data, a.schema);
  const eval::WeightSummary summary = stage("bootstrap", [&] {
    return eval::bootstrap_weight_intervals(loaded.data, taus, a.resamples, a.seed, options);
  });
  Json config{{"data", loaded.path},
              {"taus", taus},
              {"resamples", a.resamples},
              {"seed", a.seed},
              {"kernel", kernel_name(options.kernel)},
              {"bandwidth_grid", a.common.grid},
              {"fixed_bandwidth", a.fixed_bandwidth},
              {"max_failure_share", a.max_failure_share}};
  Json report = eval::weights_to_json(summary);
  report["provenance"] = provenance("bootstrap-weights", std::move(config), loaded.inputs);
  const std::string tsv = eval::weights_to_tsv(summary);
  stage("write outputs", [&] {
    const fs::path dir = prepare_out(a.common.out);
    write_json(dir / "report.json", report);
    write_text(dir / "report.tsv", tsv);
    write_json(dir / "meta.json", meta.finish(a.common.threads));
  });
  out << tsv;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Jackknife varying-coefficient quantile model averaging"};
  app.name(args.empty() ? "jvcqma" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);
  app.set_version_flag("--version", JVCQMA_VERSION);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit averaged quantile models and write model.json");
  add_common(fit_cmd, fit.common);
  fit_cmd->add_option("--data", fit.data, "Training CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--schema", fit.schema, "Schema JSON")->check(CLI::ExistingFile);
  fit_cmd->add_option("--scheme", fit.scheme, "loocv, equal or bic")->capture_default_str();

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Predict query rows with a fitted model");
  pred_cmd->add_option("--model", pred.model, "model.json from fit")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--queries", pred.queries, "Query CSV")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--data", pred.data, "Override the training data path stored in the model");
  pred_cmd->add_option("--threads", pred.threads, "Worker threads")->check(CLI::PositiveNumber);
  pred_cmd->add_option("--out", pred.out, "Output directory")->required();

  SimArgs sim;
  std::string sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "Write a simulated train/test pair");
  add_sim_options(sim_cmd, sim);
  sim_cmd->add_option("--seed", sim.seed, "Seed")->capture_default_str();
  sim_cmd->add_option("--out", sim_out, "Output directory")->required();

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Replicated FPE comparison on simulated or real data");
  add_common(ev_cmd, ev.common);
  add_sim_options(ev_cmd, ev.sim);
  ev_cmd->add_option("--data", ev.data, "Real-data CSV (random train/test splits)")->check(CLI::ExistingFile);
  ev_cmd->add_option("--schema", ev.schema, "Schema JSON")->check(CLI::ExistingFile);
  ev_cmd->add_option("--methods", ev.methods, "Methods to compare (default: all)")->delimiter(',');
  ev_cmd->add_option("--reps", ev.reps, "Replications")->capture_default_str()->check(CLI::PositiveNumber);
  ev_cmd->add_option("--seed", ev.seed, "Master seed")->capture_default_str();
  ev_cmd->add_option("--max-failure-share", ev.max_failure_share, "Tolerated failed share")->capture_default_str();

  BootArgs boot;
  auto* boot_cmd = app.add_subcommand("bootstrap-weights", "Bootstrap intervals of the jackknife weights");
  add_common(boot_cmd, boot.common);
  boot_cmd->add_option("--data", boot.data, "Data CSV")->required()->check(CLI::ExistingFile);
  boot_cmd->add_option("--schema", boot.schema, "Schema JSON")->check(CLI::ExistingFile);
  boot_cmd->add_option("--reps", boot.resamples, "Bootstrap resamples")->capture_default_str();
  boot_cmd->add_option("--seed", boot.seed, "Master seed")->capture_default_str();
  boot_cmd->add_flag("--fixed-bandwidth", boot.fixed_bandwidth, "Reuse full-data pilot bandwidths");
  boot_cmd->add_option("--max-failure-share", boot.max_failure_share, "Tolerated failed share")
      ->capture_default_str();

  try {
    std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(rest.begin(), rest.end());
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit, out);
    if (pred_cmd->parsed()) return cmd_predict(pred, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim, sim_out, out);
    if (ev_cmd->parsed()) return cmd_evaluate(ev, out);
    if (boot_cmd->parsed()) return cmd_bootstrap(boot, out);
  } catch (const StageError& e) {
    err << app.get_name() << ": error in " << e.what() << '\n';
    return e.exit_code;
  } catch (const std::exception& e) {
    err << app.get_name() << ": error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace jvcqma::cli
