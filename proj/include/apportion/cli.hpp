#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "apportion/estimator.hpp"
#include "apportion/evaluation.hpp"
#include "apportion/io.hpp"
#include "apportion/synthgen.hpp"

namespace apportion::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kWorkersEnv = "APPORTION_WORKERS";

struct RunConfig {
  std::string command;  // simulate | estimate | evaluate | convergence-study

  std::string input;          // estimate: concentrations CSV
  std::string output_dir = ".";
  std::string truth;          // estimate/evaluate: true phi CSV
  std::string estimate_path;  // evaluate: estimated phi CSV

  EstimatorConfig estimator;

  synth::Process process = synth::Process::AR1;
  Index n = 300;
  Index J = 8;
  Index K = 3;
  std::uint64_t seed = 1;
  Index replicate = 0;
  bool plant_corners = false;
  Index n_candidates = 0;

  std::vector<Index> n_grid{100, 300, 1500, 10000};
  Index replicates = 50;
  Index workers = 0;  // 0: $APPORTION_WORKERS, else 1
};

inline Index default_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return Index(v);
  }
  return 1;
}

inline SearchMode parse_search(const std::string& s) {
  if (s == "greedy") return SearchMode::Greedy;
  if (s == "exhaustive") return SearchMode::Exhaustive;
  if (s == "auto") return SearchMode::Auto;
  throw Error(ErrorCode::InvalidArgument, "unknown search mode '" + s + "'");
}

inline MeanMethod parse_mean_method(const std::string& s) {
  if (s == "proposition") return MeanMethod::Proposition;
  if (s == "algorithmS2") return MeanMethod::AlgorithmS2;
  throw Error(ErrorCode::InvalidArgument, "unknown mean method '" + s + "'");
}

inline synth::Process parse_process(const std::string& s) {
  if (s == "ar1") return synth::Process::AR1;
  if (s == "mixture") return synth::Process::Mixture;
  throw Error(ErrorCode::InvalidArgument, "unknown process '" + s + "'");
}

namespace detail {

inline json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline json warnings_json(const Warnings& ws) {
  json arr = json::array();
  for (const auto& w : ws) arr.push_back({{"code", std::string(to_string(w.code))}, {"message", w.message}});
  return arr;
}

inline json estimator_json(const EstimatorConfig& c) {
  return {{"K", c.K},
          {"search", to_string(c.search)},
          {"prune", c.prune},
          {"cluster_count", c.effective_cluster_count()},
          {"epsilon_clip", c.epsilon_clip},
          {"rank_cap", c.effective_rank_cap()},
          {"exhaustive_budget", c.exhaustive_budget},
          {"max_sweeps", c.max_sweeps},
          {"mean_method", to_string(c.mean_method)},
          {"zero_row_policy", c.zero_row_policy == ZeroRowPolicy::Drop ? "drop" : "error"},
          {"prune_seed", c.prune_seed}};
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

inline void write_vector(const fs::path& path, const std::string& name, const Vector& v) {
  io::write_table(path.string(), {name}, Matrix(v));
}

inline fs::path prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoError, "cannot create output directory " + dir);
  return fs::path(dir);
}

inline json params_json(const synth::GroundTruth& gt) {
  if (const auto* p = std::get_if<synth::LogAR1Params>(&gt.params)) {
    json s = json::array();
    for (Index k = 0; k < p->phi.size(); ++k)
      s.push_back({{"phi", p->phi(k)}, {"mu_g", p->mu_g(k)}, {"sigma_eps", p->sigma_eps(k)}});
    return s;
  }
  const auto& m = std::get<synth::LognormalMixtureParams>(gt.params);
  json s = json::array();
  for (const auto& comps : m.sources) {
    json c = json::array();
    for (const auto& comp : comps) c.push_back({{"weight", comp.weight}, {"mu", comp.mu}, {"sigma", comp.sigma}});
    s.push_back(c);
  }
  return s;
}

inline std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct Metrics {
  double nrmse;
  double nfd;
  eval::AlignmentResult alignment;
};

inline Metrics score(const Matrix& truth, const Matrix& estimate) {
  const auto al = eval::align_rows(truth, estimate);
  const Matrix aligned = eval::apply_alignment(estimate, al.permutation);
  return {eval::nrmse(truth, aligned), eval::nfd(truth, aligned), al};
}

inline void write_metrics(const fs::path& path, const Metrics& m) {
  std::ostringstream os;
  os << "nrmse,nfd,total_sq_distance";
  for (size_t k = 0; k < m.alignment.permutation.size(); ++k) os << ",perm_" << k + 1;
  os << '\n' << io::format_double(m.nrmse) << ',' << io::format_double(m.nfd) << ','
     << io::format_double(m.alignment.total_sq_distance);
  // 1-based row of the estimate placed at each true row.
  for (Index p : m.alignment.permutation) os << ',' << p + 1;
  os << '\n';
  write_text(path, os.str());
}

}  // namespace detail

inline void run_simulate(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = detail::prepare_output(cfg.output_dir);
  synth::GroundTruthOptions opts;
  opts.plant_corners = cfg.plant_corners;
  opts.n_candidates = cfg.n_candidates;
  const RngSpec rng{cfg.seed, std::uint64_t(cfg.replicate) * RngSpec::replicate_stride};
  const auto [y, gt] = synth::make_ground_truth(cfg.n, cfg.J, cfg.K, cfg.process, rng, opts);

  const auto sources = io::numbered("source", cfg.K);
  io::write_table((dir / "Y.csv").string(), y.pollutant_names, y.values);
  io::write_table((dir / "W.csv").string(), sources, gt.W);
  io::write_table((dir / "H.csv").string(), y.pollutant_names, gt.H);
  detail::write_vector(dir / "mu.csv", "mu", gt.mu);
  io::write_table((dir / "phi_true.csv").string(), y.pollutant_names, gt.phi_true.values);
  io::write_table((dir / "phi_sample.csv").string(), y.pollutant_names, synth::sample_phi(gt).values);

  json truth = {{"process", synth::to_string(cfg.process)},
                {"n", cfg.n},
                {"J", cfg.J},
                {"K", cfg.K},
                {"seed", cfg.seed},
                {"replicate", cfg.replicate},
                {"plant_corners", cfg.plant_corners},
                {"rows", y.n()},
                {"params", detail::params_json(gt)}};
  detail::write_text(dir / "truth.json", truth.dump(2) + "\n");
  out << "wrote " << y.n() << "x" << y.J() << " concentrations to " << (dir / "Y.csv").string() << "\n";
}

inline void run_estimate(const RunConfig& cfg, std::ostream& out) {
  const ConcentrationMatrix y =
      apportion::detail::staged("load_concentrations", [&] { return io::load_concentrations(cfg.input); });
  const ApportionmentEstimate est = apportion(y, cfg.estimator);
  const fs::path dir = detail::prepare_output(cfg.output_dir);

  io::write_table((dir / "phi_hat.csv").string(), y.pollutant_names, est.phi_hat.values);
  io::write_table((dir / "h_star_hat.csv").string(), y.pollutant_names, est.H_star_hat);
  detail::write_vector(dir / "m_tilde.csv", "m_tilde", est.m_tilde);

  const Diagnostics& d = est.diagnostics;
  json diag = {{"n", y.n()},
               {"J", y.J()},
               {"r_B", d.r_B},
               {"n_hull_vertices", d.n_hull_vertices},
               {"n_candidates_after_prune", d.n_candidates_after_prune},
               {"log_volume", detail::number(d.log_volume)},
               {"search_used", to_string(d.search_used)},
               {"selected_rows", d.selected_rows},
               {"dropped_rows", d.dropped_rows},
               {"warnings", detail::warnings_json(d.warnings)},
               {"config", detail::estimator_json(cfg.estimator)}};
  detail::write_text(dir / "diagnostics.json", diag.dump(2) + "\n");

  // Plot-ready scatter of the row-normalized data with the selected vertices.
  {
    const RowNormalizedData data = row_normalize(y, cfg.estimator.zero_row_policy);
    Matrix scatter(data.ystar.rows(), data.ystar.cols() + 2);
    scatter.col(0) = Eigen::Map<const Eigen::Matrix<Index, Eigen::Dynamic, 1>>(data.kept_rows.data(),
                                                                               Index(data.kept_rows.size()))
                         .cast<double>();
    scatter.middleCols(1, data.ystar.cols()) = data.ystar;
    scatter.col(data.ystar.cols() + 1).setZero();
    for (size_t k = 0; k < d.selected_rows.size(); ++k)
      for (Index r = 0; r < scatter.rows(); ++r)
        if (Index(scatter(r, 0)) == d.selected_rows[k]) scatter(r, data.ystar.cols() + 1) = double(k + 1);
    std::vector<std::string> header{"row"};
    for (const auto& name : y.pollutant_names) header.push_back(name);
    header.push_back("selected_source");
    io::write_table((dir / "hull_scatter.csv").string(), header, scatter);
  }

  if (!cfg.truth.empty()) {
    const io::Table truth = io::read_table(cfg.truth);
    detail::write_metrics(dir / "metrics.csv", detail::score(truth.values, est.phi_hat.values));
  }
  out << "estimated " << est.phi_hat.values.rows() << " sources; results in " << dir.string() << "\n";
}

inline void run_evaluate(const RunConfig& cfg, std::ostream& out) {
  const io::Table truth = io::read_table(cfg.truth);
  const io::Table estimate = io::read_table(cfg.estimate_path);
  const detail::Metrics m = detail::score(truth.values, estimate.values);
  const fs::path dir = detail::prepare_output(cfg.output_dir);
  detail::write_metrics(dir / "metrics.csv", m);
  io::write_table((dir / "phi_aligned.csv").string(), estimate.header,
                  eval::apply_alignment(estimate.values, m.alignment.permutation));
  out << "nrmse=" << io::format_double(m.nrmse) << " nfd=" << io::format_double(m.nfd) << "\n";
}

inline void run_study(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = detail::prepare_output(cfg.output_dir);
  eval::StudyDesign design;
  design.process = cfg.process;
  design.J = cfg.J;
  design.K = cfg.K;
  design.n_grid = cfg.n_grid;
  design.replicates = cfg.replicates;
  design.search = cfg.estimator.search;
  design.master_seed = cfg.seed;
  design.workers = cfg.workers > 0 ? cfg.workers : default_workers();
  design.estimator = cfg.estimator;
  design.n_candidates = cfg.n_candidates;

  const auto records = eval::convergence_study(design);

  std::ostringstream metrics, failures;
  metrics << "n,replicate,nrmse,nfd,runtime_seconds,search_used\n";
  Index failed = 0;
  for (const auto& r : records) {
    metrics << r.n << ',' << r.replicate << ',' << io::format_double(r.nrmse) << ',' << io::format_double(r.nfd)
            << ',' << io::format_double(r.runtime_seconds) << ','
            << (r.ok() ? r.search_used : "failed:" + r.error_stage) << '\n';
    if (!r.ok()) {
      ++failed;
      failures << r.n << ',' << r.replicate << ',' << r.error_stage << ",\"" << r.error << "\"\n";
    }
  }
  detail::write_text(dir / "metrics.csv", metrics.str());
  if (failed > 0) detail::write_text(dir / "failures.csv", "n,replicate,stage,error\n" + failures.str());

  std::ostringstream summary;
  summary << "n,ok,failed,nrmse_q1,nrmse_median,nrmse_q3,nfd_q1,nfd_median,nfd_q3\n";
  for (const auto& s : eval::summarize(records))
    summary << s.n << ',' << s.ok << ',' << s.failed << ',' << io::format_double(s.nrmse_q1) << ','
            << io::format_double(s.nrmse_median) << ',' << io::format_double(s.nrmse_q3) << ','
            << io::format_double(s.nfd_q1) << ',' << io::format_double(s.nfd_median) << ','
            << io::format_double(s.nfd_q3) << '\n';
  detail::write_text(dir / "summary.csv", summary.str());

  json manifest = {{"command", "convergence-study"},
                   {"design",
                    {{"process", synth::to_string(design.process)},
                     {"J", design.J},
                     {"K", design.K},
                     {"n_grid", design.n_grid},
                     {"replicates", design.replicates},
                     {"search", to_string(design.search)},
                     {"master_seed", design.master_seed},
                     {"n_candidates", design.n_candidates},
                     {"stream_layout", "(grid_index * replicates + replicate) * 65536 + source"}}},
                   {"estimator", detail::estimator_json(design.estimator)},
                   {"workers", design.workers},
                   {"records", records.size()},
                   {"failed", failed},
                   {"created_at", detail::timestamp()}};
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  out << records.size() << " records (" << failed << " failed) written to " << (dir / "metrics.csv").string()
      << "\n";
}

/// Runs one command. Returns the process exit status; on failure prints
/// `error=<Category> stage=<stage>` on `out` and a human-readable message on
/// `err`.
inline int run(const RunConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (cfg.command == "simulate")
      run_simulate(cfg, out);
    else if (cfg.command == "estimate")
      run_estimate(cfg, out);
    else if (cfg.command == "evaluate")
      run_evaluate(cfg, out);
    else if (cfg.command == "convergence-study")
      run_study(cfg, out);
    else
      throw Error(ErrorCode::InvalidArgument, "unknown command '" + cfg.command + "'");
    return 0;
  } catch (const Error& e) {
    out << "error=" << to_string(e.code()) << " stage=" << (e.stage().empty() ? cfg.command : e.stage()) << "\n";
    err << "apportion: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    out << "error=Internal stage=" << cfg.command << "\n";
    err << "apportion: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace apportion::cli
