#include "commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "key_values.hpp"
#include "vbl/datagen.hpp"
#include "vbl/ensemble.hpp"
#include "vbl/error.hpp"
#include "vbl/model_io.hpp"
#include "vbl/vbbss.hpp"
#include "vbl/vbgmm.hpp"

namespace vbl::cli {

namespace {

namespace fs = std::filesystem;

// Runs an input-stage step and reports any failure as a usage error.
template <class F>
auto input_step(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(what + ": " + e.what());
  }
}

KeyValues load_config(const std::string& path) {
  if (path.empty()) {
    std::istringstream none;
    return KeyValues::parse(none, "command line");
  }
  return KeyValues::load(path);
}

void overlay(KeyValues& kv, const std::string& key, const std::string& value) {
  if (!value.empty()) kv.set(key, value);
}

template <class T>
T in_range(const KeyValues& kv, const std::string& key, T value, T lo, T hi) {
  if (value < lo || value > hi) {
    throw UsageError(kv.source() + ": key '" + key + "': value out of range [" + std::to_string(lo) + ", " +
                     std::to_string(hi) + "]");
  }
  return value;
}

int int_key(const KeyValues& kv, const std::string& key, int def, int lo, int hi) {
  const auto v = kv.integer(key);
  if (!v) return def;
  return static_cast<int>(in_range<long long>(kv, key, *v, lo, hi));
}

double positive_key(const KeyValues& kv, const std::string& key, double def) {
  const auto v = kv.real(key);
  if (!v) return def;
  if (!(*v > 0.0) || !std::isfinite(*v)) throw UsageError(kv.source() + ": key '" + key + "': must be positive");
  return *v;
}

std::uint64_t seed_key(const KeyValues& kv, std::uint64_t def) {
  const auto v = kv.integer("seed");
  if (!v) return def;
  if (*v < 0) throw UsageError(kv.source() + ": key 'seed': must be non-negative");
  return static_cast<std::uint64_t>(*v);
}

Dataset read_data(const fs::path& path, const std::string& role) {
  if (path.empty()) throw UsageError(role + " file is required");
  if (!fs::exists(path) || fs::is_directory(path)) throw UsageError(role + " file '" + path.string() + "' does not exist");
  return input_step(role + " '" + path.string() + "'", [&] { return csv::read(path); });
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory '" + dir.string() + "'");
  const fs::path probe = dir / ".vbl-write-probe";
  {
    std::ofstream p(probe);
    if (!p) throw UsageError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

void prepare_file(const fs::path& file) {
  if (file.empty()) throw UsageError("output file is required");
  const fs::path parent = file.has_parent_path() ? file.parent_path() : fs::path(".");
  prepare_dir(parent);
  if (fs::is_directory(file)) throw UsageError("output '" + file.string() + "' is a directory");
}

std::vector<std::string> names(const std::string& prefix, Eigen::Index count) {
  return Dataset::default_columns(static_cast<int>(count), prefix);
}

void write_posterior(const fs::path& path, const StructurePosterior& sp) {
  Matrix rows(static_cast<Eigen::Index>(sp.entries.size()), 5);
  for (std::size_t k = 0; k < sp.entries.size(); ++k) {
    const auto& e = sp.entries[k];
    rows.row(static_cast<Eigen::Index>(k)) << e.m, e.free_energy, e.log_prior + 0.0, e.log_posterior + 0.0, std::exp(e.log_posterior);
  }
  csv::write(path, rows, {"m", "free_energy", "log_prior", "log_posterior", "probability"});
}

void write_trace(const fs::path& path, const std::vector<double>& trace) {
  Matrix rows(static_cast<Eigen::Index>(trace.size()), 2);
  for (std::size_t k = 0; k < trace.size(); ++k) rows.row(static_cast<Eigen::Index>(k)) << static_cast<double>(k + 1), trace[k];
  csv::write(path, rows, {"iteration", "free_energy"});
}

template <class Warning>
void write_failures(const fs::path& path, const std::vector<Warning>& warnings) {
  std::ofstream out(path);
  out << "m,message\n";
  for (const auto& w : warnings) {
    std::string msg;
    for (char c : w.message) msg += c == '"' ? std::string("\"\"") : std::string(1, c);
    out << w.m << ",\"" << msg << "\"\n";
    spdlog::warn("m={} failed: {}", w.m, w.message);
  }
}

fs::path trace_path(const fs::path& dir, int m) { return dir / ("trace_m" + std::to_string(m) + ".csv"); }

// ---- gen -------------------------------------------------------------------------------

const std::vector<std::string> kCommonSpecKeys{"kind", "seed", "n"};

std::vector<std::string> with_common(std::vector<std::string> keys) {
  keys.insert(keys.end(), kCommonSpecKeys.begin(), kCommonSpecKeys.end());
  return keys;
}

Eigen::Index count_key(const KeyValues& kv, Eigen::Index def) {
  const auto v = kv.integer("n");
  if (!v) return def;
  return static_cast<Eigen::Index>(in_range<long long>(kv, "n", *v, 1, 100'000'000));
}

datagen::GmmSpec gmm_spec(const KeyValues& kv) {
  kv.reject_unknown(with_common({"preset", "weights", "means", "covariances"}));
  const std::uint64_t seed = seed_key(kv, 0);
  if (auto preset = kv.text("preset")) {
    if (*preset != "three-cluster") throw UsageError(kv.source() + ": key 'preset': unknown preset '" + *preset + "'");
    for (const char* k : {"weights", "means", "covariances"}) {
      if (kv.has(k)) throw UsageError(kv.source() + ": key '" + k + "': not allowed with a preset");
    }
    return datagen::three_cluster_spec(seed, count_key(kv, 600));
  }
  for (const char* k : {"weights", "means", "covariances"}) {
    if (!kv.has(k)) throw UsageError(kv.source() + ": key '" + k + "': required for kind = gmm");
  }
  const auto w = *kv.reals("weights");
  const auto means = *kv.groups("means");
  const auto covs = *kv.groups("covariances");
  const std::size_t k = w.size();
  if (means.size() != k) throw UsageError(kv.source() + ": key 'means': expected " + std::to_string(k) + " groups");
  if (covs.size() != k) throw UsageError(kv.source() + ": key 'covariances': expected " + std::to_string(k) + " groups");
  const std::size_t d = means.front().size();
  datagen::GmmSpec spec;
  spec.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(k));
  for (std::size_t s = 0; s < k; ++s) {
    if (means[s].size() != d) throw UsageError(kv.source() + ": key 'means': groups differ in length");
    if (covs[s].size() != d * d) {
      throw UsageError(kv.source() + ": key 'covariances': each group needs " + std::to_string(d * d) + " values");
    }
    spec.means.push_back(Eigen::Map<const Vector>(means[s].data(), static_cast<Eigen::Index>(d)));
    const auto e = static_cast<Eigen::Index>(d);
    spec.covariances.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        covs[s].data(), e, e));
  }
  spec.n = count_key(kv, 600);
  spec.seed = seed;
  input_step(kv.source(), [&] { spec.validate(); });
  return spec;
}

datagen::SpiralSpec spiral_spec(const KeyValues& kv) {
  kv.reject_unknown(with_common({"noise", "t_min", "t_max", "pitch"}));
  datagen::SpiralSpec spec;
  spec.n = count_key(kv, spec.n);
  spec.seed = seed_key(kv, 0);
  spec.noise = kv.real("noise").value_or(spec.noise);
  spec.t_min = kv.real("t_min").value_or(spec.t_min);
  spec.t_max = kv.real("t_max").value_or(spec.t_max);
  spec.pitch = kv.real("pitch").value_or(spec.pitch);
  input_step(kv.source(), [&] { spec.validate(); });
  return spec;
}

datagen::MixSpec mix_spec(const KeyValues& kv) {
  kv.reject_unknown(with_common({"d", "m", "snr_db"}));
  datagen::MixSpec spec;
  spec.n = count_key(kv, spec.n);
  spec.seed = seed_key(kv, 0);
  spec.d = int_key(kv, "d", spec.d, 1, 1 << 16);
  spec.m = int_key(kv, "m", spec.m, 1, 1 << 16);
  if (auto snr = kv.real("snr_db")) {
    if (std::isinf(*snr) && *snr < 0) throw UsageError(kv.source() + ": key 'snr_db': must not be -inf");
    spec.snr_db = *snr;
  }
  input_step(kv.source(), [&] { spec.validate(); });
  return spec;
}

datagen::GeneratorSpec generator_spec(const KeyValues& kv) {
  const auto kind = kv.text("kind");
  if (!kind) throw UsageError(kv.source() + ": key 'kind': required (gmm, spiral or bss-mix)");
  if (*kind == "gmm") return gmm_spec(kv);
  if (*kind == "spiral") return spiral_spec(kv);
  if (*kind == "bss-mix") return mix_spec(kv);
  throw UsageError(kv.source() + ": key 'kind': unknown kind '" + *kind + "'");
}

struct GenArgs {
  std::string spec;
  std::string out;
  std::string truth;
  std::string seed;
};

int cmd_gen(const GenArgs& a) {
  if (a.spec.empty()) throw UsageError("--spec is required");
  KeyValues kv = KeyValues::load(a.spec);
  overlay(kv, "seed", a.seed);
  const auto spec = generator_spec(kv);
  prepare_file(a.out);
  if (!a.truth.empty()) {
    if (std::holds_alternative<datagen::SpiralSpec>(spec)) throw UsageError("--truth is not available for kind = spiral");
    prepare_file(a.truth);
  }

  if (const auto* g = std::get_if<datagen::GmmSpec>(&spec)) {
    const auto sample = datagen::sample_gmm(*g);
    csv::write(a.out, sample.data);
    if (!a.truth.empty()) {
      Matrix labels(static_cast<Eigen::Index>(sample.labels.size()), 1);
      for (std::size_t n = 0; n < sample.labels.size(); ++n) labels(static_cast<Eigen::Index>(n), 0) = sample.labels[n];
      csv::write(a.truth, labels, {"label"});
    }
    spdlog::info("gen: {} gmm rows written to {}", sample.data.size(), a.out);
  } else if (const auto* s = std::get_if<datagen::SpiralSpec>(&spec)) {
    const auto data = datagen::sample_spiral(*s);
    csv::write(a.out, data);
    spdlog::info("gen: {} spiral rows written to {}", data.size(), a.out);
  } else {
    const auto sample = datagen::sample_bss(std::get<datagen::MixSpec>(spec));
    csv::write(a.out, sample.mix.data);
    if (!a.truth.empty()) csv::write(a.truth, sample.sources, names("s", sample.sources.cols()));
    spdlog::info("gen: {} mixture rows written to {}", sample.mix.data.size(), a.out);
  }
  return kSuccess;
}

// ---- fit-gmm ---------------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string out_dir;
  std::string config;
  std::string max_structures;
  std::string seed;
  std::string tol;
  std::string max_iter;
};

struct GmmArgs : FitArgs {};

struct BssArgs : FitArgs {
  std::string truth;
  std::string spec;
  std::vector<double> snr_sweep;
  bool lambda_update = false;
  std::string alpha_mode;
};

KeyValues fit_settings(const FitArgs& a) {
  KeyValues kv = load_config(a.config);
  overlay(kv, "max_structures", a.max_structures);
  overlay(kv, "seed", a.seed);
  overlay(kv, "tol", a.tol);
  overlay(kv, "max_iter", a.max_iter);
  return kv;
}

int cmd_fit_gmm(const GmmArgs& a, std::ostream& out) {
  const KeyValues kv = fit_settings(a);
  kv.reject_unknown({"max_structures", "seed", "tol", "max_iter", "monotone_tol", "restarts", "mean_box_margin",
                     "precision_eig_min", "precision_eig_max", "parallel"});
  const int K = int_key(kv, "max_structures", 10, 1, 1 << 16);
  gmm::FitConfig cfg;
  cfg.seed = seed_key(kv, cfg.seed);
  cfg.tol = positive_key(kv, "tol", cfg.tol);
  cfg.max_iter = int_key(kv, "max_iter", cfg.max_iter, 1, 1 << 30);
  cfg.monotone_tol = positive_key(kv, "monotone_tol", cfg.monotone_tol);
  cfg.restarts = int_key(kv, "restarts", cfg.restarts, 1, 1 << 16);
  cfg.prior.mean_box_margin = kv.real("mean_box_margin").value_or(cfg.prior.mean_box_margin);
  cfg.prior.precision_eig_min = positive_key(kv, "precision_eig_min", cfg.prior.precision_eig_min);
  cfg.prior.precision_eig_max = positive_key(kv, "precision_eig_max", cfg.prior.precision_eig_max);
  cfg.parallel = kv.boolean("parallel").value_or(cfg.parallel);
  if (cfg.prior.mean_box_margin < 0.0) throw UsageError(kv.source() + ": key 'mean_box_margin': must be >= 0");
  if (cfg.prior.precision_eig_min >= cfg.prior.precision_eig_max) {
    throw UsageError(kv.source() + ": precision_eig_min must be below precision_eig_max");
  }

  const Dataset data = read_data(a.data, "data");
  if (data.size() == 0) throw UsageError("data file '" + a.data + "' has no rows");
  if (a.out_dir.empty()) throw UsageError("--out-dir is required");
  prepare_dir(a.out_dir);
  const fs::path dir = a.out_dir;

  spdlog::info("fit-gmm: {} rows, d={}, K={}", data.size(), data.dim(), K);
  const auto result = gmm::fit_all(data, K, cfg);
  for (int m = 1; m <= K; ++m) {
    if (const auto& f = result.fits[m - 1]) {
      write_trace(trace_path(dir, m), f->energy.trace);
      spdlog::debug("m={} F={} iterations={} alive={}", m, f->energy.total, f->iterations, f->stats.alive_count());
    }
  }
  if (!result.warnings.empty()) write_failures(dir / "failures.csv", result.warnings);
  write_posterior(dir / "posterior.csv", result.posterior);
  const int best = map_structure(result.posterior);
  io::write_gmm_model(dir / "model.txt", gmm::Model(data, *result.fits[best - 1], cfg));
  out << "m=" << best << '\n';
  return kSuccess;
}

// ---- fit-bss ---------------------------------------------------------------------------

bss::BssConfig bss_config(const KeyValues& kv, const BssArgs& a) {
  kv.reject_unknown({"max_structures", "seed", "tol", "max_iter", "monotone_tol", "alpha_mode", "lambda_update",
                     "alpha_init", "init", "ica_max_iter", "fixed_point_tol", "fixed_point_max_iter", "parallel"});
  bss::BssConfig cfg;
  cfg.tol = positive_key(kv, "tol", cfg.tol);
  cfg.max_iter = int_key(kv, "max_iter", cfg.max_iter, 1, 1 << 30);
  cfg.monotone_tol = positive_key(kv, "monotone_tol", cfg.monotone_tol);
  cfg.alpha_init = positive_key(kv, "alpha_init", cfg.alpha_init);
  cfg.ica_max_iter = int_key(kv, "ica_max_iter", cfg.ica_max_iter, 1, 1 << 30);
  cfg.fixed_point.tol = positive_key(kv, "fixed_point_tol", cfg.fixed_point.tol);
  cfg.fixed_point.max_iter = int_key(kv, "fixed_point_max_iter", cfg.fixed_point.max_iter, 1, 1 << 30);
  cfg.parallel = kv.boolean("parallel").value_or(cfg.parallel);
  cfg.update_lambda = a.lambda_update || kv.boolean("lambda_update").value_or(false);
  const std::string mode = !a.alpha_mode.empty() ? a.alpha_mode : kv.text("alpha_mode").value_or("stationary");
  if (mode == "stationary") {
    cfg.alpha_mode = bss::AlphaMode::stationary;
  } else if (mode == "printed") {
    cfg.alpha_mode = bss::AlphaMode::printed;
  } else {
    throw UsageError(kv.source() + ": key 'alpha_mode': expected printed or stationary, got '" + mode + "'");
  }
  const std::string init = kv.text("init").value_or("ica");
  if (init == "ica") {
    cfg.init = bss::InitMode::ica;
  } else if (init == "pca") {
    cfg.init = bss::InitMode::pca;
  } else {
    throw UsageError(kv.source() + ": key 'init': expected ica or pca, got '" + init + "'");
  }
  return cfg;
}

void write_alignment(const fs::path& path, int m, const bss::Alignment& al) {
  Matrix row(1, 3);
  row << m, al.relative_error, std::log10(al.relative_error);
  csv::write(path, row, {"m", "relative_error", "log10_relative_error"});
}

int snr_sweep(const BssArgs& a, const KeyValues& kv, const bss::BssConfig& cfg) {
  if (!a.data.empty()) throw UsageError("--snr-sweep generates its own data; use --spec instead of --data");
  if (a.spec.empty()) throw UsageError("--snr-sweep requires --spec with kind = bss-mix");
  if (!a.truth.empty()) throw UsageError("--truth is not used with --snr-sweep");
  KeyValues spec_kv = KeyValues::load(a.spec);
  if (kv.has("seed")) spec_kv.set("seed", *kv.text("seed"));
  if (spec_kv.text("kind").value_or("") != "bss-mix") throw UsageError(a.spec + ": key 'kind': must be bss-mix");
  const datagen::MixSpec base = mix_spec(spec_kv);
  if (base.m > 9) throw UsageError(a.spec + ": key 'm': source alignment supports at most 9 sources");
  for (double snr : a.snr_sweep) {
    if (!std::isfinite(snr)) throw UsageError("--snr-sweep: levels must be finite");
  }
  if (a.out_dir.empty()) throw UsageError("--out-dir is required");
  prepare_dir(a.out_dir);
  const fs::path dir = a.out_dir;

  Matrix rows(static_cast<Eigen::Index>(a.snr_sweep.size()), 5);
  for (std::size_t k = 0; k < a.snr_sweep.size(); ++k) {
    datagen::MixSpec spec = base;
    spec.snr_db = a.snr_sweep[k];
    const auto sample = datagen::sample_bss(spec);
    const auto fitted = bss::fit(sample.mix.data, spec.m, cfg);
    const auto al = bss::align_sources(fitted.sources.rho, sample.sources);
    rows.row(static_cast<Eigen::Index>(k)) << spec.snr_db, al.relative_error, std::log10(al.relative_error),
        fitted.energy.total, fitted.iterations;
    spdlog::info("snr={} dB: log10 error {:.4f} after {} iterations", spec.snr_db, std::log10(al.relative_error),
                 fitted.iterations);
    csv::write(dir / "snr_sweep.csv", rows.topRows(static_cast<Eigen::Index>(k + 1)),
               {"snr_db", "relative_error", "log10_relative_error", "free_energy", "iterations"});
  }
  return kSuccess;
}

int cmd_fit_bss(const BssArgs& a, std::ostream& out) {
  const KeyValues kv = fit_settings(a);
  const bss::BssConfig cfg = bss_config(kv, a);
  const int K = int_key(kv, "max_structures", 8, 1, 1 << 16);
  if (!a.snr_sweep.empty()) return snr_sweep(a, kv, cfg);
  if (!a.spec.empty()) throw UsageError("--spec is only used with --snr-sweep");

  const Dataset data = read_data(a.data, "data");
  if (data.size() == 0) throw UsageError("data file '" + a.data + "' has no rows");
  std::optional<Dataset> truth;
  if (!a.truth.empty()) {
    truth = read_data(a.truth, "truth");
    if (truth->size() != data.size()) throw UsageError("truth and data row counts differ");
    if (truth->dim() > K) throw UsageError("truth has more sources than --max-structures");
    if (truth->dim() > 9) throw UsageError("source alignment supports at most 9 sources");
  }
  if (a.out_dir.empty()) throw UsageError("--out-dir is required");
  prepare_dir(a.out_dir);
  const fs::path dir = a.out_dir;

  spdlog::info("fit-bss: {} rows, d={}, K={}", data.size(), data.dim(), K);
  const auto result = bss::fit_all(data, K, cfg);
  for (int m = 1; m <= K; ++m) {
    if (const auto& f = result.fits[m - 1]) {
      write_trace(trace_path(dir, m), f->energy.trace);
      spdlog::debug("m={} F={} iterations={} converged={}", m, f->energy.total, f->iterations, f->converged);
    }
  }
  if (!result.warnings.empty()) write_failures(dir / "failures.csv", result.warnings);
  write_posterior(dir / "posterior.csv", result.posterior);
  const int best = map_structure(result.posterior);
  const auto& fitted = *result.fits[best - 1];
  io::write_bss_model(dir / "model.txt", fitted);
  const Matrix sources = bss::reconstruct_sources(fitted);
  csv::write(dir / "sources.csv", sources, names("s", sources.cols()));
  if (truth) {
    const int m = truth->dim();
    if (const auto& f = result.fits[m - 1]) {
      const auto al = bss::align_sources(f->sources.rho, truth->values);
      write_alignment(dir / "alignment.csv", m, al);
      spdlog::info("aligned relative error at m={}: {}", m, al.relative_error);
    } else {
      spdlog::warn("no fit at m={}, alignment skipped", m);
    }
  }
  out << "m=" << best << '\n';
  return kSuccess;
}

// ---- predict ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string query;
  std::string out;
  std::string max_iter;
  std::string tol;
  bool fast = false;
};

std::string model_kind(const fs::path& path) {
  std::ifstream in(path);
  std::string magic;
  in >> magic;
  return magic;
}

int cmd_predict(const PredictArgs& a) {
  if (a.model.empty()) throw UsageError("--model is required");
  if (!fs::exists(a.model) || fs::is_directory(a.model)) throw UsageError("model file '" + a.model + "' does not exist");
  std::istringstream none;
  KeyValues kv = KeyValues::parse(none, "command line");
  overlay(kv, "max_iter", a.max_iter);
  overlay(kv, "tol", a.tol);
  RefitConfig rc;
  rc.max_iter = int_key(kv, "max_iter", rc.max_iter, 1, 1 << 30);
  rc.tol = positive_key(kv, "tol", rc.tol);
  rc.fast = a.fast;

  const std::string kind = model_kind(a.model);
  const Dataset query = read_data(a.query, "query");
  prepare_file(a.out);

  if (kind == "vbl-gmm-model") {
    const auto model = input_step("model '" + a.model + "'", [&] { return io::read_gmm_model(fs::path(a.model)); });
    if (query.size() == 0) {
      std::ofstream(a.out, std::ios::trunc);
      return kSuccess;
    }
    if (query.dim() != model.data().dim()) {
      throw UsageError("query has " + std::to_string(query.dim()) + " columns, model expects " +
                       std::to_string(model.data().dim()));
    }
    Matrix dens(query.size(), 1);
    for (Eigen::Index n = 0; n < query.size(); ++n) dens(n, 0) = predictive_log_density(model, Vector(query.row(n)), rc);
    csv::write(a.out, dens, {"log_density"});
    return kSuccess;
  }
  if (kind == "vbl-bss-model") {
    const auto model = input_step("model '" + a.model + "'", [&] { return io::read_bss_model(fs::path(a.model)); });
    if (query.size() == 0) {
      std::ofstream(a.out, std::ios::trunc);
      return kSuccess;
    }
    if (query.dim() != model.state.sensors()) {
      throw UsageError("query has " + std::to_string(query.dim()) + " columns, model expects " +
                       std::to_string(model.state.sensors()));
    }
    bss::BssFit fitted;
    fitted.state = model.state;
    fitted.sources.gamma = model.gamma;
    const Matrix sources = bss::reconstruct_sources(fitted, query);
    csv::write(a.out, sources, names("s", sources.cols()));
    return kSuccess;
  }
  throw UsageError("model file '" + a.model + "' has an unknown schema");
}

}  // namespace

void configure_logging() {
  auto logger = std::make_shared<spdlog::logger>("vbl", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("VBL_LOG_LEVEL")) {
    const std::string name = env;
    const auto level = spdlog::level::from_str(name);
    if (level != spdlog::level::off || name == "off") {
      logger->set_level(level);
    } else {
      logger->warn("VBL_LOG_LEVEL: unknown level '{}', using warn", name);
    }
  }
  spdlog::set_default_logger(std::move(logger));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational Bayes mixtures and blind source separation", "vbl"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset from a key = value spec");
  gen_cmd->add_option("--spec", gen.spec, "Generator spec file")->required();
  gen_cmd->add_option("--out", gen.out, "Output CSV")->required();
  gen_cmd->add_option("--truth", gen.truth, "Ground truth CSV (labels or sources)");
  gen_cmd->add_option("--seed", gen.seed, "Overrides the spec seed");

  auto add_fit = [](CLI::App* cmd, FitArgs& f, const std::string& k_default) {
    cmd->add_option("--data", f.data, "Input CSV");
    cmd->add_option("--out-dir", f.out_dir, "Report directory")->required();
    cmd->add_option("--config", f.config, "key = value config file");
    cmd->add_option("-K,--max-structures", f.max_structures, "Largest structure fitted (default " + k_default + ")");
    cmd->add_option("--seed", f.seed, "Random seed");
    cmd->add_option("--tol", f.tol, "Relative free-energy tolerance");
    cmd->add_option("--max-iter", f.max_iter, "Iteration budget per fit");
  };

  GmmArgs gmm_args;
  auto* gmm_cmd = app.add_subcommand("fit-gmm", "Fit Gaussian mixtures with 1..K components");
  add_fit(gmm_cmd, gmm_args, "10");

  BssArgs bss_args;
  auto* bss_cmd = app.add_subcommand("fit-bss", "Fit noisy linear source separation with 1..K sources");
  add_fit(bss_cmd, bss_args, "8");
  bss_cmd->add_option("--truth", bss_args.truth, "True sources CSV for the aligned error");
  bss_cmd->add_option("--spec", bss_args.spec, "bss-mix generator spec (with --snr-sweep)");
  bss_cmd->add_option("--snr-sweep", bss_args.snr_sweep, "SNR levels in dB, comma separated")->delimiter(',');
  bss_cmd->add_flag("--lambda-update", bss_args.lambda_update, "Re-estimate the sensor noise precisions");
  bss_cmd->add_option("--alpha-mode", bss_args.alpha_mode, "printed or stationary")
      ->check(CLI::IsMember({"printed", "stationary"}));

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Evaluate a fitted model on query rows");
  pred_cmd->add_option("--model", pred.model, "Model file from fit-gmm or fit-bss")->required();
  pred_cmd->add_option("--query", pred.query, "Query CSV")->required();
  pred_cmd->add_option("--out", pred.out, "Output CSV")->required();
  pred_cmd->add_flag("--fast", pred.fast, "Skip the refit and use the point free energy");
  pred_cmd->add_option("--max-iter", pred.max_iter, "Refit iteration budget");
  pred_cmd->add_option("--tol", pred.tol, "Refit tolerance");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*gmm_cmd) return cmd_fit_gmm(gmm_args, out);
    if (*bss_cmd) return cmd_fit_bss(bss_args, out);
    return cmd_predict(pred);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kComputeFailure;
  }
}

}  // namespace vbl::cli
