#include <CLI11.hpp>

#include "apportion/cli.hpp"

namespace {

using apportion::cli::RunConfig;

void add_estimator_flags(CLI::App* app, RunConfig& cfg, std::string& search, std::string& mean_method,
                         std::string& zero_rows) {
  auto& e = cfg.estimator;
  app->add_option("--search", search, "greedy | exhaustive | auto");
  app->add_flag("--prune", e.prune, "k-means pruning of hull vertices");
  app->add_option("--clusters", e.cluster_count, "pruning cluster count (default 4K)");
  app->add_option("--epsilon", e.epsilon_clip, "clip level for algorithmS2 weights");
  app->add_option("--rank-cap", e.rank_cap, "maximum intrinsic rank (default K-1)");
  app->add_option("--budget", e.exhaustive_budget, "largest subset count searched exhaustively");
  app->add_option("--max-sweeps", e.max_sweeps, "greedy swap sweeps");
  app->add_option("--mean-method", mean_method, "proposition | algorithmS2");
  app->add_option("--zero-rows", zero_rows, "drop | error");
  app->add_option("--prune-seed", e.prune_seed, "seed for k-means++ initialization");
}

void add_design_flags(CLI::App* app, RunConfig& cfg, std::string& process) {
  app->add_option("--process", process, "ar1 | mixture");
  app->add_option("--J", cfg.J, "pollutant count");
  app->add_option("--seed", cfg.seed, "master seed");
  app->add_option("--n-candidates", cfg.n_candidates, "profile candidates (default max(100, 10K))");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  std::string process = "ar1", search, mean_method = "proposition", zero_rows = "drop";

  CLI::App app{"Source apportionment by convex-hull vertex extraction"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "draw a synthetic concentration matrix with ground truth");
  add_design_flags(sim, cfg, process);
  sim->add_option("--n", cfg.n, "records");
  sim->add_option("--K", cfg.K, "sources");
  sim->add_option("--replicate", cfg.replicate, "replicate index (selects the RNG stream block)");
  sim->add_flag("--plant-corners", cfg.plant_corners, "append one pure-source record per source");
  sim->add_option("--out", cfg.output_dir, "output directory");

  auto* est = app.add_subcommand("estimate", "estimate the attribution matrix from a concentration CSV");
  est->add_option("--input", cfg.input, "concentration CSV")->required()->check(CLI::ExistingFile);
  est->add_option("--K", cfg.estimator.K, "sources")->required();
  est->add_option("--truth", cfg.truth, "true attribution CSV; adds metrics.csv")->check(CLI::ExistingFile);
  est->add_option("--out", cfg.output_dir, "output directory");
  add_estimator_flags(est, cfg, search, mean_method, zero_rows);

  auto* ev = app.add_subcommand("evaluate", "score an estimated attribution matrix against the truth");
  ev->add_option("--truth", cfg.truth, "true attribution CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--estimate", cfg.estimate_path, "estimated attribution CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", cfg.output_dir, "output directory");

  auto* study = app.add_subcommand("convergence-study", "Monte Carlo study over a grid of sample sizes");
  add_design_flags(study, cfg, process);
  study->add_option("--K", cfg.K, "sources");
  study->add_option("--n-grid", cfg.n_grid, "sample sizes")->delimiter(',');
  study->add_option("--replicates", cfg.replicates, "replicates per sample size");
  study->add_option("--workers", cfg.workers, "worker threads (default $APPORTION_WORKERS or 1)");
  study->add_option("--out", cfg.output_dir, "output directory");
  add_estimator_flags(study, cfg, search, mean_method, zero_rows);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << "error=UsageError stage=parse\n";
    return app.exit(e);
  }

  cfg.command = app.get_subcommands().front()->get_name();
  try {
    cfg.process = apportion::cli::parse_process(process);
    if (search.empty()) search = cfg.command == "convergence-study" ? "greedy" : "auto";
    cfg.estimator.search = apportion::cli::parse_search(search);
    cfg.estimator.mean_method = apportion::cli::parse_mean_method(mean_method);
    if (zero_rows != "drop" && zero_rows != "error")
      throw apportion::Error(apportion::ErrorCode::InvalidArgument, "unknown zero-row policy '" + zero_rows + "'");
    cfg.estimator.zero_row_policy =
        zero_rows == "drop" ? apportion::ZeroRowPolicy::Drop : apportion::ZeroRowPolicy::Error;
    if (cfg.command == "convergence-study") cfg.estimator.K = cfg.K;
  } catch (const apportion::Error& e) {
    std::cout << "error=" << apportion::to_string(e.code()) << " stage=parse\n";
    std::cerr << "apportion: " << e.what() << "\n";
    return 2;
  }
  return apportion::cli::run(cfg);
}
