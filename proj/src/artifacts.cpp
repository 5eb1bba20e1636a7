#include "dibc/artifacts.hpp"

#include <fstream>
#include <set>

#include "dibc/error.hpp"

namespace dibc {

using nlohmann::json;

json config_to_json(const PipelineConfig& cfg) {
  json j = {
      {"workers", cfg.R},
      {"K", cfg.K},
      {"L", cfg.L},
      {"iters", cfg.chain.n_iters},
      {"burn_in", cfg.chain.burn_in},
      {"thin", cfg.chain.thin},
      {"record_every", cfg.chain.record_allocations_every},
      {"pilot_size", cfg.chain.pilot_size},
      {"pilot_sweeps", cfg.chain.pilot_sweeps},
      {"pilot_runs", cfg.chain.pilot_runs},
      {"refine_samples", cfg.refine_samples},
      {"candidates", cfg.candidates},
      {"phi_B", cfg.phi_B},
      {"phi_W", cfg.phi_W},
      {"param_iters", cfg.param_chain.iters},
      {"param_burn_in", cfg.param_chain.burn_in},
      {"sample_parameters", cfg.sample_parameters},
      {"loss", cfg.loss == LossKind::kBinder ? "binder" : "vi"},
      {"transport", cfg.transport == TransportKind::kTcp ? "tcp" : "inproc"},
      {"seed", cfg.seed},
  };
  if (cfg.refinement_prior) {
    const auto& p = *cfg.refinement_prior;
    std::vector<double> s0(p.S0.data(), p.S0.data() + p.S0.size());
    j["refinement_prior"] = {{"alpha0", p.alpha0}, {"nu0", p.nu0}, {"dim", p.S0.rows()}, {"S0", s0}};
  }
  return j;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig cfg;
  try {
    cfg.R = j.value("workers", cfg.R);
    cfg.K = j.value("K", cfg.K);
    cfg.L = j.value("L", cfg.L);
    cfg.chain.n_iters = j.value("iters", cfg.chain.n_iters);
    cfg.chain.burn_in = j.value("burn_in", cfg.chain.burn_in);
    cfg.chain.thin = j.value("thin", cfg.chain.thin);
    cfg.chain.record_allocations_every = j.value("record_every", cfg.chain.record_allocations_every);
    cfg.chain.pilot_size = j.value("pilot_size", cfg.chain.pilot_size);
    cfg.chain.pilot_sweeps = j.value("pilot_sweeps", cfg.chain.pilot_sweeps);
    cfg.chain.pilot_runs = j.value("pilot_runs", cfg.chain.pilot_runs);
    cfg.refine_samples = j.value("refine_samples", cfg.refine_samples);
    cfg.candidates = j.value("candidates", cfg.candidates);
    cfg.phi_B = j.value("phi_B", cfg.phi_B);
    cfg.phi_W = j.value("phi_W", cfg.phi_W);
    cfg.param_chain.iters = j.value("param_iters", cfg.param_chain.iters);
    cfg.param_chain.burn_in = j.value("param_burn_in", cfg.param_chain.burn_in);
    cfg.sample_parameters = j.value("sample_parameters", cfg.sample_parameters);
    const auto loss = j.value("loss", std::string("vi"));
    if (loss != "vi" && loss != "binder") throw ConfigError("loss must be vi or binder");
    cfg.loss = loss == "binder" ? LossKind::kBinder : LossKind::kVariationOfInformation;
    const auto transport = j.value("transport", std::string("inproc"));
    if (transport != "inproc" && transport != "tcp") throw ConfigError("transport must be inproc or tcp");
    cfg.transport = transport == "tcp" ? TransportKind::kTcp : TransportKind::kInProcess;
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("refinement_prior")) {
      const auto& p = j.at("refinement_prior");
      RefinementPrior prior;
      prior.alpha0 = p.at("alpha0").get<double>();
      prior.nu0 = p.at("nu0").get<double>();
      const int d = p.at("dim").get<int>();
      const auto s0 = p.at("S0").get<std::vector<double>>();
      if (static_cast<int>(s0.size()) != d * d) throw ConfigError("refinement prior S0 has the wrong size");
      prior.S0 = Eigen::Map<const Matrix>(s0.data(), d, d);
      cfg.refinement_prior = prior;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  return cfg;
}

json metrics_to_json(const MetricsReport& m) {
  json map = json::object();
  for (const auto& [pred, truth] : m.label_map.pred_to_truth) map[std::to_string(pred)] = truth;
  json unknown = json::array();
  for (std::size_t i = 0; i < m.label_map.unknown.size(); ++i) {
    map[std::to_string(m.label_map.unknown[i])] = mapped_label_name(-static_cast<int>(i) - 1);
  }
  return {
      {"accuracy", m.accuracy},
      {"ari", m.ari},
      {"f_measure", m.f_measure},
      {"precision", m.precision},
      {"recall", m.recall},
      {"pairs", {{"tp", m.pairs.tp}, {"fp", m.pairs.fp}, {"fn", m.pairs.fn}, {"tn", m.pairs.tn}}},
      {"label_map", map},
  };
}

json diagnostics_to_json(const PipelineResult& result, const PipelineConfig& cfg,
                         const std::optional<MetricsReport>& metrics) {
  const auto& d = result.diagnostics;
  json steps = json::array();
  for (const auto& s : d.steps) {
    steps.push_back({{"name", s.name},
                     {"seconds", s.seconds},
                     {"skipped", s.skipped},
                     {"bytes_to_workers", s.bytes_to_workers},
                     {"bytes_to_master", s.bytes_to_master}});
  }
  json traffic = json::object();
  for (int k = 1; k < wire::kNumKinds; ++k) {
    const auto kind = static_cast<wire::MessageKind>(k);
    traffic[wire::kind_name(kind)] = {{"bytes_to_workers", d.traffic.bytes_to_workers[k]},
                                      {"bytes_to_master", d.traffic.bytes_to_master[k]},
                                      {"messages_to_workers", d.traffic.messages_to_workers[k]},
                                      {"messages_to_master", d.traffic.messages_to_master[k]}};
  }
  json candidates = json::array();
  for (std::size_t i = 0; i < d.candidate_tags.size(); ++i) {
    candidates.push_back({{"sample", d.candidate_tags[i]}, {"score", d.candidate_scores[i]}});
  }
  std::set<int> clusters(result.c_star.begin(), result.c_star.end());
  json j = {
      {"workers", cfg.R},
      {"n", result.c_star.size()},
      {"config", config_to_json(cfg)},
      {"steps", steps},
      {"traffic", traffic},
      {"count_entries", d.count_entries},
      {"candidates", candidates},
      {"score_label", cfg.loss == LossKind::kBinder ? "expected Binder loss" : "VI score (offset)"},
      {"chosen_sample", d.chosen_tag},
      {"clusters", clusters.size()},
      {"dropped_samples", d.dropped_samples},
      {"references", d.references},
      {"warnings", d.warnings},
      {"occupied_clusters", d.occupied_traces},
  };
  if (metrics) j["metrics"] = metrics_to_json(*metrics);
  return j;
}

void write_partition_csv(const std::string& path, std::span<const int> c, std::span<const int> s) {
  if (c.size() != s.size()) throw ParameterError("cluster and subcomponent labels differ in length");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "row,cluster,subcomponent\n";
  for (std::size_t i = 0; i < c.size(); ++i) out << i + 1 << ',' << c[i] + 1 << ',' << s[i] + 1 << '\n';
  if (!out) throw IoError("failed writing " + path);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace dibc
