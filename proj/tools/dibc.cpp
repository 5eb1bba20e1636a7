#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "dibc/artifacts.hpp"
#include "dibc/error.hpp"
#include "dibc/evalgen.hpp"
#include "dibc/param_sampler.hpp"
#include "dibc/pipeline.hpp"
#include "dibc/transport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kIo = 3, kNumerical = 4, kTransport = 5 };

int exit_code(dibc::ErrorCategory c) {
  switch (c) {
    case dibc::ErrorCategory::kConfig:
    case dibc::ErrorCategory::kParameter:
      return kConfig;
    case dibc::ErrorCategory::kIo:
      return kIo;
    case dibc::ErrorCategory::kNumerical:
      return kNumerical;
    case dibc::ErrorCategory::kTransport:
      return kTransport;
    default:
      return 1;
  }
}

std::uint64_t effective_seed(std::uint64_t flag) {
  const char* env = std::getenv("DIBC_SEED");
  if (env == nullptr || *env == '\0') return flag;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw dibc::ConfigError(std::string("DIBC_SEED is not an unsigned integer: ") + env);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct DataOptions {
  std::string path;
  std::string label;
  std::string columns;
  std::string log_columns;

  // A column named "label" is taken as ground truth unless columns are given.
  void resolve_label() {
    if (!label.empty() || !columns.empty() || path.empty()) return;
    std::ifstream in(path);
    std::string header;
    if (!std::getline(in, header)) return;
    for (auto name : split_list(header)) {
      name.erase(0, name.find_first_not_of(" \t\"\r"));
      name.erase(name.find_last_not_of(" \t\"\r") + 1);
      if (name == "label") label = name;
    }
  }
  [[nodiscard]] dibc::CsvSchema schema() const {
    return {split_list(columns), label, split_list(log_columns)};
  }
  [[nodiscard]] json to_json() const {
    return {{"path", fs::absolute(path).string()},
            {"label", label},
            {"columns", split_list(columns)},
            {"log_columns", split_list(log_columns)}};
  }
  static DataOptions from_json(const json& j) {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
      return s;
    };
    return {j.at("path").get<std::string>(), j.value("label", std::string()),
            join(j.value("columns", std::vector<std::string>{})),
            join(j.value("log_columns", std::vector<std::string>{}))};
  }
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "Input CSV with a header row")->check(CLI::ExistingFile);
  cmd->add_option("--label", d.label, "Ground-truth label column");
  cmd->add_option("--columns", d.columns, "Comma-separated data columns (default: all but the label)");
  cmd->add_option("--log-columns", d.log_columns, "Comma-separated columns to log-transform");
}

// generate

struct GenerateOptions {
  int n = 12000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_generate(const GenerateOptions& o) {
  if (o.n < 1) throw dibc::ConfigError("--n must be positive");
  const auto pts = dibc::generate_synthetic(o.n, effective_seed(o.seed));
  dibc::write_points_csv(o.out, pts.points, pts.labels);
  return kOk;
}

// fit

struct FitOptions {
  DataOptions data;
  dibc::PipelineConfig cfg;
  std::string loss = "vi";
  std::string transport = "inproc";
  std::vector<std::string> endpoints;
  std::string out_dir = ".";
  std::string manifest;
  bool no_params = false;
};

void configure_fit(CLI::App* cmd, FitOptions& o) {
  auto& c = o.cfg;
  add_data_options(cmd, o.data);
  cmd->add_option("--workers", c.R, "Number of workers R")->capture_default_str();
  cmd->add_option("--k", c.K, "Clusters K")->capture_default_str();
  cmd->add_option("--l", c.L, "Subcomponents per cluster L")->capture_default_str();
  cmd->add_option("--iters", c.chain.n_iters, "Local chain sweeps")->capture_default_str();
  cmd->add_option("--burn-in", c.chain.burn_in, "Local chain burn-in")->capture_default_str();
  cmd->add_option("--record-every", c.chain.record_allocations_every,
                  "Stride between stored allocations (0 = spread refine-samples evenly)");
  cmd->add_option("--pilot-size", c.chain.pilot_size)->capture_default_str();
  cmd->add_option("--pilot-sweeps", c.chain.pilot_sweeps)->capture_default_str();
  cmd->add_option("--pilot-runs", c.chain.pilot_runs)->capture_default_str();
  cmd->add_option("--refine-samples", c.refine_samples, "Samples refined, |T|")->capture_default_str();
  cmd->add_option("--candidates", c.candidates, "Candidate samples scored, |M|")->capture_default_str();
  cmd->add_option("--phi-b", c.phi_B)->capture_default_str();
  cmd->add_option("--phi-w", c.phi_W)->capture_default_str();
  cmd->add_option("--param-iters", c.param_chain.iters)->capture_default_str();
  cmd->add_option("--param-burn-in", c.param_chain.burn_in)->capture_default_str();
  cmd->add_flag("--no-params", o.no_params, "Skip parameter sampling");
  cmd->add_option("--loss", o.loss)->check(CLI::IsMember({"vi", "binder"}))->capture_default_str();
  cmd->add_option("--seed", c.seed)->capture_default_str();
  cmd->add_option("--transport", o.transport)->check(CLI::IsMember({"inproc", "tcp"}))->capture_default_str();
  cmd->add_option("--worker-endpoints", o.endpoints, "host:port of running workers (tcp only)")->delimiter(',');
  cmd->add_option("--out-dir", o.out_dir)->capture_default_str();
  cmd->add_option("--manifest", o.manifest, "Re-run from a manifest.json written by fit")
      ->check(CLI::ExistingFile);
}

int cmd_fit(FitOptions o) {
  dibc::PipelineConfig cfg;
  DataOptions data = o.data;
  if (!o.manifest.empty()) {
    const auto m = dibc::read_json(o.manifest);
    if (m.value("format", std::string()) != "dibc-run") throw dibc::ConfigError(o.manifest + " is not a fit manifest");
    try {
      data = DataOptions::from_json(m.at("data"));
    } catch (const json::exception& e) {
      throw dibc::ConfigError(o.manifest + ": " + e.what());
    }
    cfg = dibc::config_from_json(m.at("config"));
  } else {
    if (data.path.empty()) throw dibc::ConfigError("--data or --manifest is required");
    data.resolve_label();
    cfg = o.cfg;
    cfg.sample_parameters = !o.no_params;
    cfg.loss = o.loss == "binder" ? dibc::LossKind::kBinder : dibc::LossKind::kVariationOfInformation;
    cfg.transport = o.transport == "tcp" ? dibc::TransportKind::kTcp : dibc::TransportKind::kInProcess;
  }
  cfg.seed = effective_seed(cfg.seed);
  if (!o.endpoints.empty()) {
    if (cfg.transport != dibc::TransportKind::kTcp) throw dibc::ConfigError("--worker-endpoints needs --transport tcp");
    if (static_cast<int>(o.endpoints.size()) != cfg.R) throw dibc::ConfigError("need one endpoint per worker");
  }
  cfg.validate();

  const auto pts = dibc::load_csv(data.path, data.schema());
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw dibc::IoError("cannot create " + o.out_dir + ": " + ec.message());

  dibc::PipelineResult result;
  if (!o.endpoints.empty()) {
    dibc::TcpTransport transport(o.endpoints);
    result = dibc::run_pipeline(cfg, pts.points, transport);
  } else {
    result = dibc::run_pipeline(cfg, pts.points);
  }

  const fs::path dir(o.out_dir);
  dibc::write_partition_csv((dir / "c_star.csv").string(), result.c_star, result.s_star);
  json artifacts = {{"partition", "c_star.csv"}, {"diagnostics", "diagnostics.json"}};
  if (cfg.sample_parameters) {
    dibc::save_draws(result.draws, (dir / "draws").string());
    artifacts["draws"] = "draws.json";
  }

  std::optional<dibc::MetricsReport> metrics;
  if (!data.label.empty()) {
    std::vector<int> pred(result.c_star.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = result.c_star[i] + 1;
    metrics = dibc::compute_metrics(pts.labels, pred);
  }
  dibc::write_json((dir / "diagnostics.json").string(), dibc::diagnostics_to_json(result, cfg, metrics));
  dibc::write_json((dir / "manifest.json").string(), {{"format", "dibc-run"},
                                                      {"version", 1},
                                                      {"seed", cfg.seed},
                                                      {"config", dibc::config_to_json(cfg)},
                                                      {"data", data.to_json()},
                                                      {"artifacts", artifacts}});
  for (const auto& w : result.diagnostics.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "clusters: " << std::set<int>(result.c_star.begin(), result.c_star.end()).size() << '\n';
  if (metrics) std::cout << "ari: " << metrics->ari << "  accuracy: " << metrics->accuracy << '\n';
  return kOk;
}

// evaluate

struct EvaluateOptions {
  std::string pred;
  std::string truth;
  std::string pred_column = "cluster";
  std::string truth_column = "label";
  std::string out;
};

int cmd_evaluate(const EvaluateOptions& o) {
  const auto pred = dibc::load_csv(o.pred, {{}, o.pred_column, {}});
  const auto truth = dibc::load_csv(o.truth, {{}, o.truth_column, {}});
  if (pred.labels.size() != truth.labels.size()) {
    throw dibc::ConfigError("length mismatch: " + std::to_string(pred.labels.size()) + " predicted vs " +
                            std::to_string(truth.labels.size()) + " true labels");
  }
  for (int v : pred.labels) {
    if (v == dibc::kUnlabeled) throw dibc::IoError(o.pred + ": missing predicted label");
  }
  const auto j = dibc::metrics_to_json(dibc::compute_metrics(truth.labels, pred.labels));
  if (o.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    dibc::write_json(o.out, j);
  }
  return kOk;
}

// classify / predict

struct ClassifyOptions {
  std::string draws;
  DataOptions data;
  std::string out;
};

int cmd_classify(ClassifyOptions o) {
  const auto draws = dibc::load_draws(o.draws);
  if (o.data.path.empty()) throw dibc::ConfigError("--data is required");
  o.data.resolve_label();
  const auto pts = dibc::load_csv(o.data.path, o.data.schema());
  if (!draws.draws.empty() && pts.points.rows() != draws.draws.front().dim()) {
    throw dibc::ConfigError("data has " + std::to_string(pts.points.rows()) + " columns, draws expect " +
                            std::to_string(draws.draws.front().dim()));
  }
  std::ofstream out(o.out);
  if (!out) throw dibc::IoError("cannot write " + o.out);
  out.precision(10);
  out << "row,cluster";
  for (int id : draws.cluster_ids) out << ",p" << id + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < pts.points.cols(); ++i) {
    const auto c = dibc::classify(pts.points.col(i), draws);
    out << i + 1 << ',' << draws.cluster_ids[c.label] + 1;
    for (Eigen::Index k = 0; k < c.probs.size(); ++k) out << ',' << c.probs[k];
    out << '\n';
  }
  if (!out) throw dibc::IoError("failed writing " + o.out);
  return kOk;
}

struct PredictOptions {
  std::string draws;
  int n = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_predict(const PredictOptions& o) {
  if (o.n < 1) throw dibc::ConfigError("--n must be positive");
  const auto draws = dibc::load_draws(o.draws);
  dibc::Rng rng(effective_seed(o.seed));
  const auto sample = dibc::posterior_predictive_sample(draws, o.n, rng);
  std::vector<int> labels(sample.tags.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = draws.cluster_ids[sample.tags[i]] + 1;
  dibc::write_points_csv(o.out, sample.points, labels);
  return kOk;
}

// worker

int cmd_worker(const std::string& listen) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw dibc::ConfigError("--listen expects host:port");
  int port = 0;
  try {
    port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw dibc::ConfigError("bad port in " + listen);
  }
  int bound = 0;
  const int fd = dibc::listen_tcp(listen.substr(0, colon), port, bound);
  std::cerr << "listening on " << listen.substr(0, colon) << ':' << bound << std::endl;
  dibc::serve_worker(fd);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Bayesian clustering"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write the four-cluster synthetic benchmark");
  g->add_option("--n", gen.n, "Rows")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out)->required();

  FitOptions fit;
  auto* f = app.add_subcommand("fit", "Run the distributed clustering pipeline");
  configure_fit(f, fit);

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "Compare a partition with ground truth");
  e->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  e->add_option("--truth", ev.truth)->required()->check(CLI::ExistingFile);
  e->add_option("--pred-column", ev.pred_column)->capture_default_str();
  e->add_option("--truth-column", ev.truth_column)->capture_default_str();
  e->add_option("--out", ev.out, "Metrics JSON (default: stdout)");

  ClassifyOptions cl;
  auto* c = app.add_subcommand("classify", "Assign new rows using saved posterior draws");
  c->add_option("--draws", cl.draws, "draws.json manifest")->required();
  add_data_options(c, cl.data);
  c->add_option("--out", cl.out)->required();

  PredictOptions pr;
  auto* p = app.add_subcommand("predict", "Simulate from the posterior predictive");
  p->add_option("--draws", pr.draws, "draws.json manifest")->required();
  p->add_option("--n", pr.n)->capture_default_str();
  p->add_option("--seed", pr.seed)->capture_default_str();
  p->add_option("--out", pr.out)->required();

  std::string listen;
  auto* w = app.add_subcommand("worker", "Serve one master over TCP");
  w->add_option("--listen", listen, "host:port (port 0 picks a free port)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (f->parsed()) return cmd_fit(fit);
    if (e->parsed()) return cmd_evaluate(ev);
    if (c->parsed()) return cmd_classify(cl);
    if (p->parsed()) return cmd_predict(pr);
    if (w->parsed()) return cmd_worker(listen);
  } catch (const dibc::PipelineError& err) {
    std::cerr << "error in step " << err.what() << '\n';
    return exit_code(err.category());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code(dibc::categorize(err));
  }
  return kOk;
}
