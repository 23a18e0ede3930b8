#pragma once

#include <filesystem>
#include <iosfwd>

#include "vbl/vbbss.hpp"
#include "vbl/vbgmm.hpp"

// Plain-text model files. One record per line, `key value...`, numbers with 17 significant
// digits. Matrices are written row-major on one line.
//
//   vbl-gmm-model 1
//   dim <d>
//   components <m>
//   config <max_iter> <tol> <monotone_tol> <seed> <restarts>
//   prior <mean_box_margin> <precision_eig_min> <precision_eig_max>
//   energy <likelihood_term> <kl_term> <total>
//   iterations <count> <converged 0|1>
//   component <index> <alive 0|1> <pi_bar>
//   mean <d values>
//   precision <d*d values>
//   ... (one component/mean/precision triple per component)
//   data <rows>
//   columns <comma-separated names>
//   row <d values>                (one per training instance)
//   end
//
//   vbl-bss-model 1
//   sensors <d>
//   sources <m>
//   alpha <alpha>
//   lambdas <d values>
//   mixing <d*m values>
//   sigma <i> <m*m values>        (one per sensor)
//   gamma <m*m values>
//   energy <likelihood_term> <kl_term> <total>
//   iterations <count> <converged 0|1>
//   end
//
// Readers raise InvalidArgument naming the line on any schema mismatch.

namespace vbl::io {

void write_gmm_model(std::ostream& os, const gmm::Model& model);
void write_gmm_model(const std::filesystem::path& path, const gmm::Model& model);
gmm::Model read_gmm_model(std::istream& is);
gmm::Model read_gmm_model(const std::filesystem::path& path);

struct BssModel {
  bss::BssState state;
  Matrix gamma;
  FreeEnergyReport energy;
  int iterations = 0;
  bool converged = false;
};

void write_bss_model(std::ostream& os, const bss::BssFit& fitted);
void write_bss_model(const std::filesystem::path& path, const bss::BssFit& fitted);
BssModel read_bss_model(std::istream& is);
BssModel read_bss_model(const std::filesystem::path& path);

}  // namespace vbl::io
