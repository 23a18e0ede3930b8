#pragma once

#include <concepts>
#include <vector>

#include "vbl/linalg.hpp"

namespace vbl {

// Free energy split into the data term and the parameter KL (Occam) term.
struct FreeEnergyReport {
  double likelihood_term = 0.0;
  double kl_term = 0.0;
  double total = 0.0;
  std::vector<double> trace;

  static FreeEnergyReport from_terms(double likelihood, double kl) { return {likelihood, kl, likelihood - kl, {}}; }
};

struct StructureEntry {
  int m;
  double free_energy;
  double log_prior;
  double log_posterior;
};

// Posterior over structure indices, ordered by increasing m.
struct StructurePosterior {
  std::vector<StructureEntry> entries;

  const StructureEntry* find(int m) const;
  double probability(int m) const;
};

// log q(m) = F_m + log p(m) - log sum exp(F + log p), with structure indices 1..n.
// Throws InvalidArgument on empty or mismatched input.
StructurePosterior structure_log_posterior(const std::vector<double>& free_energies,
                                           const std::vector<double>& log_priors);

// Same with explicit structure indices; used when some structures failed to fit.
StructurePosterior structure_log_posterior(const std::vector<int>& structures,
                                           const std::vector<double>& free_energies,
                                           const std::vector<double>& log_priors);

// Flat prior log(1/K) for K structures.
std::vector<double> flat_log_prior(int K, std::size_t count);

// n_params/2 log N - log p(theta_0). Throws InvalidArgument when N = 0.
double bic_penalty(long n_params, long n_data, double log_prior_at_ml);

// Structure with the largest log posterior; ties go to the smaller m.
int map_structure(const StructurePosterior& sp);

struct RefitConfig {
  int max_iter = 200;
  double tol = 1e-8;
  // Skip the refit and return the new point's contribution to F at the fitted posterior.
  bool fast = false;
};

// A fitted model that can be refit on its training set plus one extra point.
template <class M>
concept Refittable = requires(const M& model, const Vector& y, const RefitConfig& cfg) {
  { model.free_energy() } -> std::convertible_to<double>;
  { model.augmented_free_energy(y, cfg) } -> std::convertible_to<double>;
  { model.point_free_energy(y) } -> std::convertible_to<double>;
};

// log p(y | Y) ~ F(Y u {y}) - F(Y), warm-started from the fitted posterior. Failed refits
// propagate as exceptions.
template <Refittable M>
double predictive_log_density(const M& fitted, const Vector& y_new, const RefitConfig& cfg = {}) {
  if (cfg.fast) return fitted.point_free_energy(y_new);
  return fitted.augmented_free_energy(y_new, cfg) - fitted.free_energy();
}

}  // namespace vbl
