#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "apportion/cli.hpp"
#include "apportion/io.hpp"

using namespace apportion;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("apportion_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Error parse_error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    io::parse_concentrations(in);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected a parse failure for: " << text;
  return Error(ErrorCode::IoError, "none");
}

cli::RunConfig simulate_config(const fs::path& out) {
  cli::RunConfig c;
  c.command = "simulate";
  c.n = 300;
  c.J = 8;
  c.K = 3;
  c.seed = 7;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST(LoadConcentrations, SmallFile) {
  std::istringstream in("a,b\n1,2\n3,4\n");
  const auto y = io::parse_concentrations(in);
  EXPECT_EQ(y.values, (Matrix(2, 2) << 1, 2, 3, 4).finished());
  EXPECT_EQ(y.pollutant_names, (std::vector<std::string>{"a", "b"}));
}

TEST(LoadConcentrations, CrlfBomAndQuotedHeader) {
  std::istringstream in("\xEF\xBB\xBF\"so2\",no2\r\n1.5,2e-3\r\n\r\n");
  const auto y = io::parse_concentrations(in);
  EXPECT_EQ(y.pollutant_names, (std::vector<std::string>{"so2", "no2"}));
  EXPECT_DOUBLE_EQ(y.values(0, 1), 2e-3);
}

TEST(LoadConcentrations, ErrorsCarryCoordinates) {
  Error e = parse_error_of("a,b\n1,2\n3,-1\n");
  EXPECT_EQ(e.code(), ErrorCode::NegativeValue);
  EXPECT_NE(std::string(e.what()).find("line 3, column 2"), std::string::npos) << e.what();

  e = parse_error_of("a,b\n1,inf\n");
  EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  EXPECT_NE(std::string(e.what()).find("line 2, column 2"), std::string::npos) << e.what();

  e = parse_error_of("a,b\n1,x\n");
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_NE(std::string(e.what()).find("line 2, column 2"), std::string::npos) << e.what();

  e = parse_error_of("a,b\n1,2\n1,2,3\n");
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();

  EXPECT_EQ(parse_error_of("a,b\n").code(), ErrorCode::EmptyData);
  EXPECT_EQ(parse_error_of("").code(), ErrorCode::ParseError);
}

TEST(LoadConcentrations, RoundTripIsLossless) {
  auto [y, gt] = synth::make_ground_truth(200, 8, 3, synth::Process::AR1, {2, 0});
  const fs::path dir = fresh_dir("roundtrip");
  io::write_table((dir / "y.csv").string(), y.pollutant_names, y.values);
  const auto back = io::load_concentrations((dir / "y.csv").string());
  EXPECT_EQ(back.pollutant_names, y.pollutant_names);
  EXPECT_LE(((back.values - y.values).array().abs() / y.values.array().abs()).maxCoeff(), 1e-12);
  EXPECT_EQ(back.values, y.values);
  EXPECT_EQ(slurp(dir / "y.csv").find('\r'), std::string::npos);
}

TEST(FormatDouble, SeventeenSignificantDigits) {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -2.5}) {
    const std::string s = io::format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
  }
}

TEST(Cli, SimulateIsByteIdentical) {
  const fs::path a = fresh_dir("sim_a"), b = fresh_dir("sim_b");
  std::ostringstream out, err;
  ASSERT_EQ(cli::run(simulate_config(a), out, err), 0) << err.str();
  ASSERT_EQ(cli::run(simulate_config(b), out, err), 0) << err.str();
  for (const char* f : {"Y.csv", "W.csv", "H.csv", "mu.csv", "phi_true.csv", "phi_sample.csv", "truth.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Cli, EstimateThenEvaluateMatchesInProcessRun) {
  const fs::path sim = fresh_dir("e2e_sim"), est = fresh_dir("e2e_est"), ev = fresh_dir("e2e_eval");
  std::ostringstream out, err;
  ASSERT_EQ(cli::run(simulate_config(sim), out, err), 0) << err.str();

  cli::RunConfig e;
  e.command = "estimate";
  e.input = (sim / "Y.csv").string();
  e.output_dir = est.string();
  e.estimator.K = 3;
  ASSERT_EQ(cli::run(e, out, err), 0) << err.str();
  for (const char* f : {"phi_hat.csv", "h_star_hat.csv", "m_tilde.csv", "diagnostics.json", "hull_scatter.csv"})
    EXPECT_TRUE(fs::exists(est / f)) << f;
  EXPECT_FALSE(fs::exists(est / "metrics.csv"));

  cli::RunConfig v;
  v.command = "evaluate";
  v.truth = (sim / "phi_true.csv").string();
  v.estimate_path = (est / "phi_hat.csv").string();
  v.output_dir = ev.string();
  ASSERT_EQ(cli::run(v, out, err), 0) << err.str();

  auto [y, gt] = synth::make_ground_truth(300, 8, 3, synth::Process::AR1, {7, 0});
  EstimatorConfig cfg;
  cfg.K = 3;
  const auto in_proc = apportion::apportion(y, cfg);
  const auto al = eval::align_rows(gt.phi_true.values, in_proc.phi_hat.values);
  const Matrix aligned = eval::apply_alignment(in_proc.phi_hat.values, al.permutation);

  const auto metrics = io::read_table((ev / "metrics.csv").string());
  EXPECT_EQ(metrics.header[0], "nrmse");
  EXPECT_EQ(metrics.values(0, 0), eval::nrmse(gt.phi_true.values, aligned));
  EXPECT_EQ(metrics.values(0, 1), eval::nfd(gt.phi_true.values, aligned));
  const auto written = io::read_table((ev / "phi_aligned.csv").string());
  EXPECT_EQ(written.values, aligned);
}

TEST(Cli, EstimateWithTruthWritesMetrics) {
  const fs::path sim = fresh_dir("truth_sim"), est = fresh_dir("truth_est");
  std::ostringstream out, err;
  ASSERT_EQ(cli::run(simulate_config(sim), out, err), 0);
  cli::RunConfig e;
  e.command = "estimate";
  e.input = (sim / "Y.csv").string();
  e.truth = (sim / "phi_true.csv").string();
  e.output_dir = est.string();
  e.estimator.K = 3;
  ASSERT_EQ(cli::run(e, out, err), 0) << err.str();
  EXPECT_TRUE(fs::exists(est / "metrics.csv"));
  const auto diag = nlohmann::json::parse(slurp(est / "diagnostics.json"));
  EXPECT_EQ(diag["r_B"], 2);
  EXPECT_EQ(diag["selected_rows"].size(), 3u);
}

TEST(Cli, ConvergenceStudyWritesOneRowPerReplicate) {
  const fs::path dir = fresh_dir("study");
  cli::RunConfig c;
  c.command = "convergence-study";
  c.n_grid = {100, 300};
  c.replicates = 50;
  c.seed = 3;
  c.K = 3;
  c.estimator.K = 3;
  c.estimator.search = SearchMode::Greedy;
  c.output_dir = dir.string();
  std::ostringstream out, err;
  ASSERT_EQ(cli::run(c, out, err), 0) << err.str();
  const std::string csv = slurp(dir / "metrics.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,replicate,nrmse,nfd,runtime_seconds,search_used");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 101);
  EXPECT_TRUE(fs::exists(dir / "summary.csv"));
  EXPECT_FALSE(fs::exists(dir / "failures.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["design"]["master_seed"], 3);
  EXPECT_EQ(manifest["records"], 100);
  EXPECT_TRUE(manifest.contains("created_at"));
}

TEST(Cli, ConvergenceStudyRepeatsExceptRuntime) {
  auto run_with = [](const std::string& name, int workers) {
    const fs::path dir = fresh_dir(name);
    cli::RunConfig c;
    c.command = "convergence-study";
    c.n_grid = {100, 300};
    c.replicates = 6;
    c.seed = 11;
    c.K = 3;
    c.estimator.K = 3;
    c.estimator.search = SearchMode::Greedy;
    c.workers = workers;
    c.output_dir = dir.string();
    std::ostringstream out, err;
    EXPECT_EQ(cli::run(c, out, err), 0) << err.str();
    return dir;
  };
  // Drops the runtime_seconds field (fifth column) from every line.
  auto without_runtime = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line, kept;
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ls(line);
      for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
      f.erase(f.begin() + 4);
      for (size_t i = 0; i < f.size(); ++i) kept += (i ? "," : "") + f[i];
      kept += '\n';
    }
    return kept;
  };
  const fs::path a = run_with("study_a", 1);
  const fs::path b = run_with("study_b", 3);
  EXPECT_EQ(without_runtime(slurp(a / "metrics.csv")), without_runtime(slurp(b / "metrics.csv")));
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
}

TEST(Cli, ErrorsPrintOneMachineReadableLine) {
  const fs::path dir = fresh_dir("errors");
  {
    std::ofstream f(dir / "bad.csv");
    f << "a,b,c\n1,2,3\n4,-5,6\n";
  }
  cli::RunConfig e;
  e.command = "estimate";
  e.input = (dir / "bad.csv").string();
  e.output_dir = (dir / "out").string();
  e.estimator.K = 2;
  std::ostringstream out, err;
  EXPECT_NE(cli::run(e, out, err), 0);
  EXPECT_EQ(out.str(), "error=NegativeValue stage=load_concentrations\n");
  EXPECT_NE(err.str().find("line 3, column 2"), std::string::npos);

  {
    std::ofstream f(dir / "flat.csv");
    f << "a,b,c\n1,1,1\n2,2,2\n3,3,3\n4,4,4\n";
  }
  e.input = (dir / "flat.csv").string();
  out.str("");
  EXPECT_NE(cli::run(e, out, err), 0);
  EXPECT_EQ(out.str(), "error=DegenerateCloud stage=extract_candidates\n");
}

#ifdef APPORTION_CLI_PATH
TEST(Cli, BinaryExitStatusAndWorkersEnvironment) {
  const fs::path dir = fresh_dir("binary");
  const std::string exe = APPORTION_CLI_PATH;
  const std::string sim = exe + " simulate --n 120 --seed 4 --out " + (dir / "s").string() + " > /dev/null";
  EXPECT_EQ(std::system(sim.c_str()), 0);
  const std::string bad = exe + " estimate --input " + (dir / "missing.csv").string() + " --K 3 > " +
                          (dir / "stdout.txt").string() + " 2> /dev/null";
  EXPECT_NE(std::system(bad.c_str()), 0);
  EXPECT_EQ(slurp(dir / "stdout.txt").rfind("error=", 0), 0u);
  const std::string k = exe + " estimate --input " + (dir / "s" / "Y.csv").string() + " --K 9 --out " +
                        (dir / "e").string() + " > " + (dir / "k.txt").string() + " 2> /dev/null";
  EXPECT_NE(std::system(k.c_str()), 0);
  EXPECT_EQ(slurp(dir / "k.txt"), "error=InvalidArgument stage=input\n");

  const std::string study = "APPORTION_WORKERS=2 " + exe + " convergence-study --n-grid 100 --replicates 2 --out " +
                            (dir / "st").string() + " > /dev/null";
  EXPECT_EQ(std::system(study.c_str()), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "st" / "manifest.json"))["workers"], 2);
  const std::string flag = "APPORTION_WORKERS=2 " + exe +
                           " convergence-study --n-grid 100 --replicates 2 --workers 1 --out " +
                           (dir / "st1").string() + " > /dev/null";
  EXPECT_EQ(std::system(flag.c_str()), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "st1" / "manifest.json"))["workers"], 1);
}
#endif
