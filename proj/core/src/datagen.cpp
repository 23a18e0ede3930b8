#include "vbl/datagen.hpp"

#include <cmath>
#include <numbers>

#include "vbl/error.hpp"

namespace vbl::datagen {

double Rng::uniform_open() {
  for (;;) {
    const double u = uniform();
    if (u > 0.0) return u;
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

double Rng::logistic() {
  const double u = uniform_open();
  return std::log(u / (1.0 - u));
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw InvalidArgument("Rng::index: empty range");
  const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

std::size_t Rng::categorical(const Eigen::Ref<const Vector>& weights) {
  const double total = weights.sum();
  const double u = uniform() * total;
  double acc = 0.0;
  for (Eigen::Index s = 0; s < weights.size(); ++s) {
    acc += weights(s);
    if (u < acc) return static_cast<std::size_t>(s);
  }
  for (Eigen::Index s = weights.size() - 1; s >= 0; --s) {
    if (weights(s) > 0.0) return static_cast<std::size_t>(s);
  }
  return 0;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void GmmSpec::validate() const {
  const auto m = weights.size();
  if (m < 1) throw InvalidArgument("gmm spec: at least one component required");
  if (static_cast<Eigen::Index>(means.size()) != m || static_cast<Eigen::Index>(covariances.size()) != m) {
    throw InvalidArgument("gmm spec: weights, means and covariances must have equal length");
  }
  if ((weights.array() < 0.0).any() || std::abs(weights.sum() - 1.0) > 1e-9) {
    throw InvalidArgument("gmm spec: weights must be nonnegative and sum to 1");
  }
  if (n < 1) throw InvalidArgument("gmm spec: n must be >= 1");
  const auto d = means.front().size();
  for (Eigen::Index s = 0; s < m; ++s) {
    if (means[s].size() != d || covariances[s].rows() != d || covariances[s].cols() != d) {
      throw InvalidArgument("gmm spec: inconsistent dimensions");
    }
    if (!linalg::is_spd(covariances[s])) throw InvalidArgument("gmm spec: covariance not positive definite");
  }
}

void SpiralSpec::validate() const {
  if (n < 1) throw InvalidArgument("spiral spec: n must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw InvalidArgument("spiral spec: noise must be finite and >= 0");
  if (!(t_max > t_min)) throw InvalidArgument("spiral spec: t_max must exceed t_min");
  if (!(pitch != 0.0) || !std::isfinite(pitch)) throw InvalidArgument("spiral spec: pitch must be finite and nonzero");
}

void MixSpec::validate() const {
  if (n < 1 || d < 1 || m < 1) throw InvalidArgument("mix spec: n, d and m must be >= 1");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw InvalidArgument("mix spec: snr_db must be finite or +inf");
  }
}

LabeledDataset sample_gmm(const GmmSpec& spec) {
  spec.validate();
  const auto d = spec.means.front().size();
  std::vector<Matrix> chol;
  for (const auto& c : spec.covariances) chol.emplace_back(Eigen::LLT<Matrix>(c).matrixL());

  Rng rng(spec.seed);
  LabeledDataset out;
  out.data = Dataset(Matrix(spec.n, d));
  out.labels.resize(static_cast<std::size_t>(spec.n));
  Vector z(d);
  for (Eigen::Index n = 0; n < spec.n; ++n) {
    const auto s = rng.categorical(spec.weights);
    for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.normal();
    out.data.values.row(n) = (spec.means[s] + chol[s] * z).transpose();
    out.labels[static_cast<std::size_t>(n)] = static_cast<int>(s);
  }
  return out;
}

Dataset sample_spiral(const SpiralSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Matrix y(spec.n, 3);
  for (Eigen::Index n = 0; n < spec.n; ++n) {
    const double t = spec.t_min + (spec.t_max - spec.t_min) * rng.uniform();
    y(n, 0) = t * std::cos(t);
    y(n, 1) = t * std::sin(t);
    y(n, 2) = spec.pitch * t;
  }
  if (spec.noise > 0.0) {
    for (Eigen::Index n = 0; n < spec.n; ++n) {
      for (int j = 0; j < 3; ++j) y(n, j) += spec.noise * rng.normal();
    }
  }
  return Dataset(std::move(y));
}

Matrix sample_logistic_sources(Eigen::Index n, int m, std::uint64_t seed) {
  if (n < 1 || m < 1) throw InvalidArgument("sample_logistic_sources: N and m must be >= 1");
  Rng rng(seed);
  Matrix x(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) x(i, j) = rng.logistic();
  }
  return x;
}

MixResult mix_sources(const Matrix& sources, int d, double snr_db, std::uint64_t seed) {
  if (d < 1) throw InvalidArgument("mix_sources: d must be >= 1");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw InvalidArgument("mix_sources: snr_db must be finite or +inf");
  }
  const auto m = sources.cols();
  const auto n = sources.rows();
  Rng rng(seed);
  Matrix a(d, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (int i = 0; i < d; ++i) a(i, j) = rng.normal();
    a.col(j).normalize();
  }
  Matrix y = sources * a.transpose();
  Vector noise_var = Vector::Zero(d);
  if (std::isfinite(snr_db)) {
    const double ratio = std::pow(10.0, snr_db / 10.0);
    for (int i = 0; i < d; ++i) noise_var(i) = y.col(i).squaredNorm() / static_cast<double>(n) / ratio;
    for (Eigen::Index k = 0; k < n; ++k) {
      for (int i = 0; i < d; ++i) y(k, i) += std::sqrt(noise_var(i)) * rng.normal();
    }
  }
  return {Dataset(std::move(y), Dataset::default_columns(d, "y")), std::move(a), std::move(noise_var)};
}

BssSample sample_bss(const MixSpec& spec) {
  spec.validate();
  BssSample out;
  out.sources = sample_logistic_sources(spec.n, spec.m, derive_seed(spec.seed, 0));
  out.mix = mix_sources(out.sources, spec.d, spec.snr_db, derive_seed(spec.seed, 1));
  return out;
}

GmmSpec three_cluster_spec(std::uint64_t seed, Eigen::Index n) {
  GmmSpec spec;
  spec.weights = Vector{{0.3, 0.3, 0.4}};
  spec.means = {Vector{{-4.0, 0.0}}, Vector{{4.0, 0.0}}, Vector{{0.0, 5.0}}};
  spec.covariances = {Matrix{{1.0, 0.5}, {0.5, 1.0}}, Matrix{{1.0, -0.3}, {-0.3, 0.5}}, Matrix{{0.6, 0.0}, {0.0, 1.5}}};
  spec.n = n;
  spec.seed = seed;
  return spec;
}

}  // namespace vbl::datagen
