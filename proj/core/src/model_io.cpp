#include "vbl/model_io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "vbl/error.hpp"

namespace vbl::io {

namespace {

class Writer {
public:
  explicit Writer(std::ostream& os) : os_(os) {}

  Writer& key(const std::string& k) {
    os_ << k;
    return *this;
  }
  Writer& num(double v) {
    os_ << ' ' << csv::format_double(v);
    return *this;
  }
  Writer& integer(long long v) {
    os_ << ' ' << v;
    return *this;
  }
  Writer& text(const std::string& v) {
    os_ << ' ' << v;
    return *this;
  }
  Writer& values(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) num(m(i, j));
    }
    return *this;
  }
  void end() { os_ << '\n'; }

private:
  std::ostream& os_;
};

class Reader {
public:
  explicit Reader(std::istream& is) : is_(is) {}

  // Reads the next non-empty line and checks its key.
  void expect(const std::string& k) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) break;
      line.clear();
    }
    if (line.empty()) fail("unexpected end of file, expected '" + k + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields_.clear();
    std::istringstream ss(line);
    std::string f;
    while (ss >> f) fields_.push_back(f);
    pos_ = 1;
    if (fields_.front() != k) fail("expected '" + k + "', found '" + fields_.front() + "'");
  }

  double num() {
    const std::string& f = next();
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(f.c_str(), &end);
    if (end == f.c_str() || *end != '\0' || errno == ERANGE) fail("invalid number '" + f + "'");
    return v;
  }

  long long integer() {
    const std::string& f = next();
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(f.c_str(), &end, 10);
    if (end == f.c_str() || *end != '\0' || errno == ERANGE) fail("invalid integer '" + f + "'");
    return v;
  }

  long long count(long long lo, long long hi) {
    const long long v = integer();
    if (v < lo || v > hi) fail("value " + std::to_string(v) + " out of range");
    return v;
  }

  std::string text() { return next(); }

  Matrix values(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = num();
    }
    return m;
  }

  void done() {
    if (pos_ != fields_.size()) fail("unexpected trailing fields");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InvalidArgument("model file line " + std::to_string(line_no_) + ": " + msg);
  }

private:
  const std::string& next() {
    if (pos_ >= fields_.size()) fail("missing field");
    return fields_[pos_++];
  }

  std::istream& is_;
  std::vector<std::string> fields_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

void check_header(Reader& r, const std::string& magic) {
  r.expect(magic);
  if (r.integer() != 1) r.fail("unsupported schema version");
  r.done();
}

}  // namespace

void write_gmm_model(std::ostream& os, const gmm::Model& model) {
  const auto& res = model.result();
  const auto& cfg = model.config();
  const auto& st = res.stats;
  const int d = model.data().dim();
  Writer w(os);
  w.key("vbl-gmm-model").integer(1).end();
  w.key("dim").integer(d).end();
  w.key("components").integer(st.components()).end();
  w.key("config").integer(cfg.max_iter).num(cfg.tol).num(cfg.monotone_tol).integer(static_cast<long long>(cfg.seed));
  w.integer(cfg.restarts).end();
  w.key("prior").num(cfg.prior.mean_box_margin).num(cfg.prior.precision_eig_min).num(cfg.prior.precision_eig_max).end();
  w.key("energy").num(res.energy.likelihood_term).num(res.energy.kl_term).num(res.energy.total).end();
  w.key("iterations").integer(res.iterations).integer(res.converged ? 1 : 0).end();
  for (int s = 0; s < st.components(); ++s) {
    w.key("component").integer(s).integer(st.alive[s] ? 1 : 0).num(st.pi_bar(s)).end();
    w.key("mean").values(st.mu_bar[s].transpose()).end();
    w.key("precision").values(st.gamma_bar[s]).end();
  }
  w.key("data").integer(model.data().size()).end();
  std::string names;
  for (std::size_t j = 0; j < model.data().columns.size(); ++j) names += (j ? "," : "") + model.data().columns[j];
  w.key("columns").text(names).end();
  for (Eigen::Index n = 0; n < model.data().size(); ++n) w.key("row").values(model.data().values.row(n)).end();
  w.key("end").end();
  if (!os) throw std::runtime_error("write_gmm_model: stream error");
}

void write_gmm_model(const std::filesystem::path& path, const gmm::Model& model) {
  auto out = open_out(path);
  write_gmm_model(out, model);
}

gmm::Model read_gmm_model(std::istream& is) {
  Reader r(is);
  check_header(r, "vbl-gmm-model");
  r.expect("dim");
  const int d = static_cast<int>(r.count(1, 1 << 20));
  r.done();
  r.expect("components");
  const int m = static_cast<int>(r.count(1, 1 << 20));
  r.done();

  gmm::FitConfig cfg;
  r.expect("config");
  cfg.max_iter = static_cast<int>(r.count(1, 1 << 30));
  cfg.tol = r.num();
  cfg.monotone_tol = r.num();
  cfg.seed = static_cast<std::uint64_t>(r.integer());
  cfg.restarts = static_cast<int>(r.count(1, 1 << 20));
  r.done();
  r.expect("prior");
  cfg.prior.mean_box_margin = r.num();
  cfg.prior.precision_eig_min = r.num();
  cfg.prior.precision_eig_max = r.num();
  r.done();

  gmm::FitResult res;
  res.requested_components = m;
  r.expect("energy");
  res.energy.likelihood_term = r.num();
  res.energy.kl_term = r.num();
  res.energy.total = r.num();
  r.done();
  r.expect("iterations");
  res.iterations = static_cast<int>(r.count(0, 1 << 30));
  res.converged = r.count(0, 1) == 1;
  r.done();

  auto& st = res.stats;
  st.pi_bar.resize(m);
  st.alive.assign(m, 0);
  for (int s = 0; s < m; ++s) {
    r.expect("component");
    if (r.integer() != s) r.fail("components out of order");
    st.alive[s] = static_cast<char>(r.count(0, 1));
    st.pi_bar(s) = r.num();
    r.done();
    r.expect("mean");
    st.mu_bar.push_back(r.values(d, 1));
    r.done();
    r.expect("precision");
    st.gamma_bar.push_back(r.values(d, d));
    r.done();
  }
  if (st.alive_count() == 0) r.fail("no alive component");

  r.expect("data");
  const auto rows = static_cast<Eigen::Index>(r.count(1, 1LL << 40));
  r.done();
  r.expect("columns");
  std::vector<std::string> names;
  {
    std::stringstream ss(r.text());
    std::string name;
    while (std::getline(ss, name, ',')) names.push_back(name);
  }
  r.done();
  if (static_cast<int>(names.size()) != d) r.fail("column count does not match dim");
  Matrix values(rows, d);
  for (Eigen::Index n = 0; n < rows; ++n) {
    r.expect("row");
    values.row(n) = r.values(1, d);
    r.done();
  }
  r.expect("end");
  r.done();
  return gmm::Model(Dataset(std::move(values), std::move(names)), std::move(res), cfg);
}

gmm::Model read_gmm_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_gmm_model(in);
}

void write_bss_model(std::ostream& os, const bss::BssFit& fitted) {
  const auto& st = fitted.state;
  Writer w(os);
  w.key("vbl-bss-model").integer(1).end();
  w.key("sensors").integer(st.sensors()).end();
  w.key("sources").integer(st.sources()).end();
  w.key("alpha").num(st.alpha).end();
  w.key("lambdas").values(st.lambdas.transpose()).end();
  w.key("mixing").values(st.a_bar).end();
  for (int i = 0; i < st.sensors(); ++i) w.key("sigma").integer(i).values(st.sigma_blocks[i]).end();
  w.key("gamma").values(fitted.sources.gamma).end();
  w.key("energy").num(fitted.energy.likelihood_term).num(fitted.energy.kl_term).num(fitted.energy.total).end();
  w.key("iterations").integer(fitted.iterations).integer(fitted.converged ? 1 : 0).end();
  w.key("end").end();
  if (!os) throw std::runtime_error("write_bss_model: stream error");
}

void write_bss_model(const std::filesystem::path& path, const bss::BssFit& fitted) {
  auto out = open_out(path);
  write_bss_model(out, fitted);
}

BssModel read_bss_model(std::istream& is) {
  Reader r(is);
  check_header(r, "vbl-bss-model");
  r.expect("sensors");
  const int d = static_cast<int>(r.count(1, 1 << 20));
  r.done();
  r.expect("sources");
  const int m = static_cast<int>(r.count(1, 1 << 20));
  r.done();
  BssModel out;
  r.expect("alpha");
  out.state.alpha = r.num();
  r.done();
  r.expect("lambdas");
  out.state.lambdas = r.values(d, 1);
  r.done();
  r.expect("mixing");
  out.state.a_bar = r.values(d, m);
  r.done();
  for (int i = 0; i < d; ++i) {
    r.expect("sigma");
    if (r.integer() != i) r.fail("sigma blocks out of order");
    out.state.sigma_blocks.push_back(r.values(m, m));
    r.done();
  }
  r.expect("gamma");
  out.gamma = r.values(m, m);
  r.done();
  r.expect("energy");
  out.energy.likelihood_term = r.num();
  out.energy.kl_term = r.num();
  out.energy.total = r.num();
  r.done();
  r.expect("iterations");
  out.iterations = static_cast<int>(r.count(0, 1 << 30));
  out.converged = r.count(0, 1) == 1;
  r.done();
  r.expect("end");
  r.done();
  if (!(out.state.alpha > 0.0) || !(out.state.lambdas.array() > 0.0).all()) r.fail("non-positive hyperparameter");
  return out;
}

BssModel read_bss_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_bss_model(in);
}

}  // namespace vbl::io
