// Simulate one log-AR(1) dataset, estimate the attribution matrix and score it.
#include <iostream>

#include "apportion/apportion.hpp"

int main() {
  using namespace apportion;

  const RngSpec rng{7, 0};
  auto [y, truth] = synth::make_ground_truth(1500, 8, 3, synth::Process::AR1, rng);

  EstimatorConfig cfg;
  cfg.K = 3;
  const ApportionmentEstimate est = apportion::apportion(y, cfg);

  const auto al = eval::align_rows(truth.phi_true.values, est.phi_hat.values);
  const Matrix aligned = eval::apply_alignment(est.phi_hat.values, al.permutation);

  const Eigen::IOFormat fmt(4, 0, "  ", "\n", "  ");
  std::cout << "true phi:\n" << truth.phi_true.values.format(fmt) << "\n\n";
  std::cout << "estimated phi (aligned):\n" << aligned.format(fmt) << "\n\n";
  std::cout << "hull vertices: " << est.diagnostics.n_hull_vertices
            << "  search: " << to_string(est.diagnostics.search_used) << "\n";
  std::cout << "nrmse " << eval::nrmse(truth.phi_true.values, aligned) << "  nfd "
            << eval::nfd(truth.phi_true.values, aligned) << "\n";
  for (const auto& w : est.diagnostics.warnings) std::cout << "warning: " << to_string(w.code) << " " << w.message << "\n";
}
