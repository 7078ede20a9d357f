#pragma once

#include <filesystem>

#include "blco/mttkrp.hpp"

namespace blco {

struct CpAlsOptions {
  std::size_t rank = 32;
  int max_iters = 50;
  double tol = 1e-5;          // minimum fit improvement per iteration
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::Auto;
};

struct CpModel {
  FactorMatrices factors;           // unit-norm columns after each iteration
  std::vector<double> lambda;       // absorbed column weights
  std::vector<double> fit_history;  // one fit value per completed iteration
  std::uint64_t seed = 0;

  double final_fit() const { return fit_history.empty() ? 0.0 : fit_history.back(); }
};

// Divergence (non-finite fit) aborts with the history attached.
class CpAlsError : public Error {
 public:
  CpAlsError(const std::string& msg, std::vector<double> history)
      : Error(msg), fit_history(std::move(history)) {}
  std::vector<double> fit_history;
};

// Alternating least squares over BLCO MTTKRP: per mode, the Hadamard product
// of the other Gram matrices forms the normal equations, the MTTKRP result
// is solved against them, and columns are renormalized. Stops when the fit
// improvement drops below tol or max_iters is reached.
CpModel cp_als(const BlcoTensor& t, const CpAlsOptions& opts, const ExecConfig& config = {});

// 1 - |X - Xhat|_F / |X|_F without materializing the reconstruction: the
// reconstruction norm comes from the Gram/weight identity and the inner
// product reuses a last-mode MTTKRP.
double fit(const BlcoTensor& t, const CpModel& model, const ExecConfig& config = {});

// Per-mode factor `.tsv` files plus lambda.tsv and a manifest.json carrying
// seed, fit history and the run configuration.
void export_model(const CpModel& model, const std::filesystem::path& dir,
                  const CpAlsOptions& opts, const ExecConfig& config);

}  // namespace blco
