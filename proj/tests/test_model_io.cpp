#include <gtest/gtest.h>

#include <sstream>

#include "vbl/datagen.hpp"
#include "vbl/error.hpp"
#include "vbl/model_io.hpp"

namespace {

using namespace vbl;

gmm::Model small_gmm() {
  const Dataset data = datagen::sample_gmm(datagen::three_cluster_spec(0, 200)).data;
  gmm::FitConfig cfg;
  cfg.seed = 3;
  return gmm::Model(data, gmm::fit(data, 4, cfg), cfg);
}

bss::BssFit small_bss() {
  datagen::MixSpec spec;
  spec.n = 200;
  spec.d = 3;
  spec.m = 2;
  return bss::fit(datagen::sample_bss(spec).mix.data, 2);
}

TEST(ModelIo, GmmRoundTripIsExact) {
  const auto model = small_gmm();
  std::stringstream ss;
  io::write_gmm_model(ss, model);
  const auto back = io::read_gmm_model(ss);
  EXPECT_TRUE(back.data().values == model.data().values);
  EXPECT_EQ(back.data().columns, model.data().columns);
  EXPECT_EQ(back.free_energy(), model.free_energy());
  EXPECT_EQ(back.result().iterations, model.result().iterations);
  EXPECT_EQ(back.config().seed, model.config().seed);
  const auto& a = model.result().stats;
  const auto& b = back.result().stats;
  ASSERT_EQ(a.components(), b.components());
  EXPECT_EQ(a.alive, b.alive);
  for (int s = 0; s < a.components(); ++s) {
    EXPECT_EQ(a.pi_bar(s), b.pi_bar(s));
    if (!a.alive[s]) continue;
    EXPECT_TRUE(a.mu_bar[s] == b.mu_bar[s]);
    EXPECT_TRUE(a.gamma_bar[s] == b.gamma_bar[s]);
  }
  const Vector q = Vector::Constant(2, 0.5);
  EXPECT_EQ(back.point_free_energy(q), model.point_free_energy(q));
}

TEST(ModelIo, BssRoundTripIsExact) {
  const auto fitted = small_bss();
  std::stringstream ss;
  io::write_bss_model(ss, fitted);
  const auto back = io::read_bss_model(ss);
  EXPECT_TRUE(back.state.a_bar == fitted.state.a_bar);
  EXPECT_EQ(back.state.alpha, fitted.state.alpha);
  EXPECT_TRUE(back.state.lambdas == fitted.state.lambdas);
  ASSERT_EQ(back.state.sigma_blocks.size(), fitted.state.sigma_blocks.size());
  for (std::size_t i = 0; i < back.state.sigma_blocks.size(); ++i) {
    EXPECT_TRUE(back.state.sigma_blocks[i] == fitted.state.sigma_blocks[i]);
  }
  EXPECT_TRUE(back.gamma == fitted.sources.gamma);
  EXPECT_EQ(back.energy.total, fitted.energy.total);
  EXPECT_EQ(back.iterations, fitted.iterations);
  EXPECT_EQ(back.converged, fitted.converged);
}

TEST(ModelIo, MalformedLineIsReported) {
  const auto model = small_gmm();
  std::stringstream ss;
  io::write_gmm_model(ss, model);
  std::string text = ss.str();
  const auto pos = text.find("mean ");
  text.replace(pos, 5, "maen ");
  std::istringstream in(text);
  try {
    io::read_gmm_model(in);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
  }
}

TEST(ModelIo, VersionAndKindAreChecked) {
  std::istringstream future("vbl-gmm-model 2\n");
  EXPECT_THROW(io::read_gmm_model(future), InvalidArgument);
  std::stringstream ss;
  io::write_bss_model(ss, small_bss());
  EXPECT_THROW(io::read_gmm_model(ss), InvalidArgument);
  std::istringstream truncated("vbl-bss-model 1\nsensors 3\n");
  EXPECT_THROW(io::read_bss_model(truncated), InvalidArgument);
}

}  // namespace
