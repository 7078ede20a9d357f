#include "blco/cpals.hpp"

#include <cmath>
#include <fstream>

#include "blco/dense_kernels.hpp"
#include "blco/tensor_io.hpp"

#include "json.hpp"

namespace blco {

namespace {

double tensor_norm_squared(const BlcoTensor& t) {
  double s = 0;
  for (const BlcoBlock& b : t.blocks)
    for (double v : b.values) s += v * v;
  return s;
}

// |Xhat|^2 = sum_{r,s} (hadamard of all Grams)[r,s] * lambda_r * lambda_s.
double reconstruction_norm_squared(const std::vector<DenseMatrix>& grams,
                                   std::span<const double> lambda) {
  const std::size_t rank = lambda.size();
  DenseMatrix full(rank, rank);
  std::fill(full.data.begin(), full.data.end(), 1.0);
  for (const DenseMatrix& g : grams) hadamard_accumulate(full, g);
  double s = 0;
  for (std::size_t r = 0; r < rank; ++r)
    for (std::size_t c = 0; c < rank; ++c) s += full(r, c) * lambda[r] * lambda[c];
  return s;
}

// <X, Xhat> = sum_{i,r} M_last[i,r] * lambda_r * A_last[i,r], with M_last the
// target-mode MTTKRP under the current factors.
double inner_product(const DenseMatrix& m_last, const DenseMatrix& a_last,
                     std::span<const double> lambda) {
  double s = 0;
  for (std::size_t i = 0; i < m_last.rows; ++i)
    for (std::size_t r = 0; r < m_last.cols; ++r)
      s += m_last(i, r) * lambda[r] * a_last(i, r);
  return s;
}

double fit_value(double xnormsq, double inner, double hatnormsq) {
  const double residsq = std::max(0.0, xnormsq - 2.0 * inner + hatnormsq);
  return 1.0 - std::sqrt(residsq) / std::sqrt(xnormsq);
}

void normalize_columns(DenseMatrix& a, std::vector<double>& lambda) {
  const std::size_t rank = a.cols;
  lambda.assign(rank, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t r = 0; r < rank; ++r) lambda[r] += a(i, r) * a(i, r);
  for (std::size_t r = 0; r < rank; ++r) {
    lambda[r] = std::sqrt(lambda[r]);
    if (lambda[r] == 0.0) lambda[r] = 1.0;  // keep zero columns representable
  }
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t r = 0; r < rank; ++r) a(i, r) /= lambda[r];
}

}  // namespace

CpModel cp_als(const BlcoTensor& t, const CpAlsOptions& opts, const ExecConfig& config) {
  if (opts.rank < 1) throw FormatError("cp_als: rank must be >= 1");
  if (opts.max_iters < 0) throw FormatError("cp_als: max_iters must be >= 0");
  const int order = t.order();

  CpModel model;
  model.seed = opts.seed;
  model.factors = FactorMatrices::random(t.dims(), opts.rank, opts.seed);
  model.lambda.assign(opts.rank, 1.0);
  if (opts.max_iters == 0) return model;

  const double xnormsq = tensor_norm_squared(t);
  if (xnormsq == 0.0) throw FormatError("cp_als: zero-norm tensor");

  std::vector<DenseMatrix> grams(order);
  for (int n = 0; n < order; ++n) grams[n] = gram(model.factors.factors[n]);

  double prev_fit = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    DenseMatrix m_last;
    for (int n = 0; n < order; ++n) {
      DenseMatrix v(opts.rank, opts.rank);
      std::fill(v.data.begin(), v.data.end(), 1.0);
      for (int m = 0; m < order; ++m)
        if (m != n) hadamard_accumulate(v, grams[m]);

      DenseMatrix mt = mttkrp(t, model.factors, n, config, opts.strategy);
      DenseMatrix a = solve_normal(mt, v);
      normalize_columns(a, model.lambda);
      model.factors.factors[n] = std::move(a);
      grams[n] = gram(model.factors.factors[n]);
      if (n == order - 1) m_last = std::move(mt);
    }

    const double f = fit_value(
        xnormsq, inner_product(m_last, model.factors.factors[order - 1], model.lambda),
        reconstruction_norm_squared(grams, model.lambda));
    model.fit_history.push_back(f);
    if (!std::isfinite(f))
      throw CpAlsError("cp_als: non-finite fit at iteration " + std::to_string(it + 1),
                       model.fit_history);
    if (it > 0 && f - prev_fit < opts.tol) break;
    prev_fit = f;
  }
  return model;
}

double fit(const BlcoTensor& t, const CpModel& model, const ExecConfig& config) {
  model.factors.validate(t.dims());
  if (model.lambda.size() != model.factors.rank)
    throw FormatError("fit: lambda length does not match rank");
  const double xnormsq = tensor_norm_squared(t);
  if (xnormsq == 0.0) throw FormatError("fit: zero-norm tensor");
  const int last = t.order() - 1;

  std::vector<DenseMatrix> grams;
  grams.reserve(t.order());
  for (const DenseMatrix& a : model.factors.factors) grams.push_back(gram(a));

  DenseMatrix m_last = mttkrp(t, model.factors, last, config);
  return fit_value(xnormsq,
                   inner_product(m_last, model.factors.factors[last], model.lambda),
                   reconstruction_norm_squared(grams, model.lambda));
}

void export_model(const CpModel& model, const std::filesystem::path& dir,
                  const CpAlsOptions& opts, const ExecConfig& config) {
  std::filesystem::create_directories(dir);

  auto write_matrix = [&](const DenseMatrix& a, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < a.rows; ++i) {
      for (std::size_t r = 0; r < a.cols; ++r)
        out << (r ? "\t" : "") << format_double(a(i, r));
      out << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
  };

  nlohmann::json manifest;
  manifest["rank"] = model.factors.rank;
  manifest["seed"] = model.seed;
  manifest["iterations_run"] = model.fit_history.size();
  manifest["fit_history"] = model.fit_history;
  manifest["final_fit"] = model.final_fit();
  manifest["lambda"] = model.lambda;
  manifest["tolerance"] = opts.tol;
  manifest["max_iters"] = opts.max_iters;
  manifest["strategy"] = strategy_name(opts.strategy);
  manifest["config"] = {{"workgroup_size", config.workgroup_size},
                        {"tile_size", config.tile_size},
                        {"coarsening", config.coarsening},
                        {"num_compute_units", config.num_compute_units},
                        {"num_factor_copies", config.num_factor_copies},
                        {"stash_slots", config.stash_slots},
                        {"deterministic", config.deterministic},
                        {"num_threads", config.num_threads}};

  std::vector<std::string> files;
  for (int n = 0; n < model.factors.order(); ++n) {
    std::string name = "mode" + std::to_string(n + 1) + ".tsv";
    write_matrix(model.factors.factors[n], dir / name);
    files.push_back(name);
  }
  manifest["factor_files"] = files;

  {
    DenseMatrix lam(1, model.lambda.size());
    lam.data = model.lambda;
    write_matrix(lam, dir / "lambda.tsv");
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot open manifest.json for writing");
  out << manifest.dump(2) << '\n';
}

}  // namespace blco
