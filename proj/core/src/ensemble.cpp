#include "vbl/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vbl/error.hpp"

namespace vbl {

const StructureEntry* StructurePosterior::find(int m) const {
  for (const auto& e : entries) {
    if (e.m == m) return &e;
  }
  return nullptr;
}

double StructurePosterior::probability(int m) const {
  const auto* e = find(m);
  return e ? std::exp(e->log_posterior) : 0.0;
}

StructurePosterior structure_log_posterior(const std::vector<int>& structures,
                                           const std::vector<double>& free_energies,
                                           const std::vector<double>& log_priors) {
  if (free_energies.empty()) throw InvalidArgument("structure_log_posterior: empty input");
  if (free_energies.size() != log_priors.size() || structures.size() != free_energies.size()) {
    throw InvalidArgument("structure_log_posterior: length mismatch");
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < free_energies.size(); ++k) {
    const double s = free_energies[k] + log_priors[k];
    if (std::isnan(s)) throw InvalidArgument("structure_log_posterior: NaN score");
    shift = std::max(shift, s);
  }
  if (!std::isfinite(shift)) throw InvalidArgument("structure_log_posterior: no finite score");
  double sum = 0.0;
  for (std::size_t k = 0; k < free_energies.size(); ++k) sum += std::exp(free_energies[k] + log_priors[k] - shift);
  const double log_z = shift + std::log(sum);

  StructurePosterior out;
  out.entries.reserve(free_energies.size());
  for (std::size_t k = 0; k < free_energies.size(); ++k) {
    out.entries.push_back({structures[k], free_energies[k], log_priors[k], free_energies[k] + log_priors[k] - log_z});
  }
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const StructureEntry& a, const StructureEntry& b) { return a.m < b.m; });
  return out;
}

StructurePosterior structure_log_posterior(const std::vector<double>& free_energies,
                                           const std::vector<double>& log_priors) {
  std::vector<int> ms(free_energies.size());
  for (std::size_t k = 0; k < ms.size(); ++k) ms[k] = static_cast<int>(k) + 1;
  return structure_log_posterior(ms, free_energies, log_priors);
}

std::vector<double> flat_log_prior(int K, std::size_t count) {
  if (K < 1) throw InvalidArgument("flat_log_prior: K must be >= 1");
  return std::vector<double>(count, -std::log(static_cast<double>(K)));
}

double bic_penalty(long n_params, long n_data, double log_prior_at_ml) {
  if (n_data < 1) throw InvalidArgument("bic_penalty: N must be >= 1");
  if (n_params < 0) throw InvalidArgument("bic_penalty: parameter count must be >= 0");
  return static_cast<double>(n_params) / 2.0 * std::log(static_cast<double>(n_data)) - log_prior_at_ml;
}

int map_structure(const StructurePosterior& sp) {
  if (sp.entries.empty()) throw InvalidArgument("map_structure: empty posterior");
  const StructureEntry* best = &sp.entries.front();
  for (const auto& e : sp.entries) {
    if (e.log_posterior > best->log_posterior || (e.log_posterior == best->log_posterior && e.m < best->m)) best = &e;
  }
  return best->m;
}

}  // namespace vbl
