#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vbl/dataset.hpp"
#include "vbl/distributions.hpp"
#include "vbl/ensemble.hpp"

namespace vbl::gmm {

// Parameter reference measure used by the free energy:
//   weights    Dirichlet(1, ..., 1)
//   means      uniform on the data bounding box widened by `mean_box_margin` of its range per side
//   precisions |G|^-(d+1)/2 on the set of G whose whitened form L^T G L (L L^T = data
//              covariance) has every eigenvalue in [precision_eig_min, precision_eig_max]
// Only the normalizing constants of the last two enter F. The precision bounds are also
// enforced in the M-step; they bind only for components collapsing onto <= d points.
struct PriorConfig {
  double mean_box_margin = 0.1;
  double precision_eig_min = 1e-4;
  double precision_eig_max = 1e6;
};

struct PrecisionBounds {
  Matrix whitener;  // lower Cholesky factor of the data covariance
  double lo;
  double hi;
};

struct Prior {
  double log_mean_volume = 0.0;
  double log_precision_volume = 0.0;
  PrecisionBounds bounds;

  static Prior from_data(const Dataset& data, const PriorConfig& cfg = {});
};

// log of the integral of |G|^-(d+1)/2 over {G : eigenvalues in [lo, hi]}.
double precision_region_log_volume(int d, double lo, double hi);

struct SuffStats {
  Vector pi_bar;
  std::vector<Vector> mu_bar;
  std::vector<Matrix> gamma_bar;  // precisions
  std::vector<char> alive;

  int components() const { return static_cast<int>(pi_bar.size()); }
  int dim() const { return mu_bar.empty() ? 0 : static_cast<int>(mu_bar.front().size()); }
  int alive_count() const;
};

// N x m, row-stochastic; dead components have zero columns.
using Responsibilities = Matrix;

struct ComponentPosterior {
  dist::NormalParams mean;         // mu_bar, precision N pi_bar gamma_bar
  dist::WishartParams precision;   // a = N pi_bar / 2, B = a gamma_bar^-1
};

struct Posterior {
  std::vector<std::optional<ComponentPosterior>> components;
  dist::DirichletParams weights;   // N pi_bar + 1
  Vector expected_weights;         // (N pi_bar + 1) / (N + m)
};

Posterior posterior(const SuffStats& stats, Eigen::Index n_data);

// Unnormalized log responsibilities of one point; -inf for dead components.
Vector log_responsibility_terms(const Eigen::Ref<const Vector>& y, const SuffStats& stats, Eigen::Index n_data);

// Throws ModelCollapse when no component is alive.
Responsibilities e_step(const Dataset& data, const SuffStats& stats, Eigen::Index n_data);

// Weighted averages from responsibilities. Components with N pi_bar <= 1 are marked dead.
// With `bounds`, whitened precision eigenvalues are clamped into [lo, hi]; this is the exact
// constrained maximizer of F and leaves the unconstrained formula untouched when inside.
SuffStats m_step(const Dataset& data, const Responsibilities& resp, const PrecisionBounds* bounds = nullptr);

// Marks components with pi_bar <= 1/N dead, zeroes their columns, renormalizes rows and the
// surviving weights. Throws ModelCollapse if every component would die.
std::pair<SuffStats, Responsibilities> prune(const SuffStats& stats, const Responsibilities& resp, Eigen::Index n_data);

FreeEnergyReport free_energy(const Dataset& data, const SuffStats& stats, const Responsibilities& resp,
                             const Prior& prior);

// Degrees of freedom nu of the textbook Wishart whose E log|G| exceeds log|E G| by
// d (psi(a) - log a). Equals 2a for d = 1.
double matched_degrees_of_freedom(double a, int d);

// Wishart with mean `gamma_bar` and E log|G| = d psi(a) - log|a gamma_bar^-1|.
dist::WishartParams matched_precision_posterior(const Matrix& gamma_bar, double a);

// Shape correction added to the precision KL for d > 1:
//   integral_a^upper (nu(x)/2 - x) d/dx[d (psi(x) - log x)] dx  >= 0,
// with nu(x) = matched_degrees_of_freedom(x, d). It makes a = N pi_bar / 2 the exact maximizer
// of F under the single-digamma E-step. Zero for d = 1 or a >= upper.
double shape_correction(double a, double upper, int d);

struct FitConfig {
  int max_iter = 500;
  double tol = 1e-8;
  double monotone_tol = 1e-8;
  std::uint64_t seed = 0;
  int restarts = 1;
  PriorConfig prior;
  bool parallel = true;
};

// An iteration that removed components. Pruning is not a coordinate-ascent move, so F may drop.
struct PruneEvent {
  int iteration = 0;
  int removed = 0;
  double delta_f = 0.0;
};

struct FitResult {
  SuffStats stats;
  Responsibilities resp;
  FreeEnergyReport energy;
  int requested_components = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<PruneEvent> prune_events;

  Posterior posterior(Eigen::Index n_data) const { return gmm::posterior(stats, n_data); }
};

// pi_bar = 1/m, means by k-means++ seeding, precisions = inverse data covariance.
SuffStats initialize(const Dataset& data, int m, std::uint64_t seed);

FitResult fit(const Dataset& data, int m, const FitConfig& cfg = {});

// Runs the iteration from `init` against a fixed prior.
FitResult fit_from(const Dataset& data, SuffStats init, const Prior& prior, const FitConfig& cfg);

struct FitWarning {
  int m;
  std::string message;
};

struct FitAllResult {
  StructurePosterior posterior;
  std::vector<std::optional<FitResult>> fits;  // index m-1
  std::vector<FitWarning> warnings;
};

FitAllResult fit_all(const Dataset& data, int K, const FitConfig& cfg = {});

// Index of the largest responsibility at y; ties go to the lower index.
int classify(const SuffStats& stats, Eigen::Index n_data, const Eigen::Ref<const Vector>& y);

// Fitted model bundled with its training data and prior, for predictive queries.
class Model {
public:
  Model(Dataset data, FitResult result, FitConfig cfg);
  Model(Dataset data, FitResult result, FitConfig cfg, Prior prior);

  const Dataset& data() const { return data_; }
  const FitResult& result() const { return result_; }
  const FitConfig& config() const { return cfg_; }
  const Prior& prior() const { return prior_; }

  double free_energy() const { return result_.energy.total; }
  double augmented_free_energy(const Vector& y, const RefitConfig& rc) const;
  double point_free_energy(const Vector& y) const;
  int classify(const Vector& y) const;

private:
  Dataset data_;
  FitResult result_;
  FitConfig cfg_;
  Prior prior_;
};

}  // namespace vbl::gmm
