#include "simt/info_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace simt {

namespace {

constexpr double kInfoEps = 1e-6;

double clamp_info(double x) { return std::clamp(x, kInfoEps, 2.0 - kInfoEps); }

}  // namespace

InfoQuantizer::InfoQuantizer(const std::string& prefix, int d, std::mt19937_64& rng)
    : w1(prefix + ".w1", xavier_uniform(d, d, rng)),
      b1(prefix + ".b1", Matrix::Zero(1, d)),
      w2(prefix + ".w2", xavier_uniform(d, d, rng)),
      b2(prefix + ".b2", Matrix::Zero(1, d)),
      w3(prefix + ".w3", xavier_uniform(d, 1, rng)),
      b3(prefix + ".b3", Matrix::Zero(1, 1)) {}

InfoQuantizer::InfoQuantizer(const std::string& prefix, int d)
    : w1(prefix + ".w1", Matrix::Zero(d, d)),
      b1(prefix + ".b1", Matrix::Zero(1, d)),
      w2(prefix + ".w2", Matrix::Zero(d, d)),
      b2(prefix + ".b2", Matrix::Zero(1, d)),
      w3(prefix + ".w3", Matrix::Zero(d, 1)),
      b3(prefix + ".b3", Matrix::Zero(1, 1)) {}

Tensor InfoQuantizer::infos(Tape& t, const Tensor& embeddings) {
  if (embeddings.rows() < 1 || embeddings.cols() != w1.value.rows())
    throw std::invalid_argument("quantizer: embeddings do not match layer width");
  Tensor h1 = relu(add_rowvec(matmul(embeddings, t.use(w1)), t.use(b1)));
  Tensor h2 = relu(add_rowvec(matmul(h1, t.use(w2)), t.use(b2)));
  Tensor out = add_rowvec(matmul(h2, t.use(w3)), t.use(b3));
  // The clamp keeps saturated sigmoids off the exact endpoints, where the
  // cross-attention consistency weight 2 - |dI| could reach zero.
  return clamp(scale(sigmoid(out), 2.0), kInfoEps, 2.0 - kInfoEps);
}

std::vector<Parameter*> InfoQuantizer::params() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }

namespace {

Tensor masked_sum(const Tensor& col, const std::vector<double>& keep) {
  if (col.cols() != 1 || static_cast<std::size_t>(col.rows()) != keep.size())
    throw std::invalid_argument("info_sum_loss: keep mask does not match info vector");
  if (std::none_of(keep.begin(), keep.end(), [](double k) { return k > 0; }))
    throw std::invalid_argument("info_sum_loss: keep mask selects nothing");
  Matrix k(keep.size(), 1);
  for (std::size_t i = 0; i < keep.size(); ++i) k(i, 0) = keep[i];
  return sum_all(mul(col, col.tape->constant(std::move(k))));
}

}  // namespace

Tensor info_sum_loss(const Tensor& I_src, const std::vector<double>& keep_src,
                     const Tensor& I_tgt, const std::vector<double>& keep_tgt,
                     double zeta) {
  if (zeta <= 0) throw std::invalid_argument("info_sum_loss: zeta must be positive");
  if (I_src.rows() < 1 || I_tgt.rows() < 1)
    throw std::invalid_argument("info_sum_loss: empty info vector");
  Tensor ds = abs(add_scalar(masked_sum(I_src, keep_src), -zeta));
  Tensor dt = abs(add_scalar(masked_sum(I_tgt, keep_tgt), -zeta));
  return add(ds, dt);
}

Tensor total_loss(const Tensor& ce, const Tensor& sum, double lambda) {
  if (lambda < 0) throw std::invalid_argument("total_loss: lambda must be >= 0");
  return add(ce, scale(sum, lambda));
}

std::vector<double> frequency_info_table(const std::vector<long long>& counts) {
  long long total = 0;
  for (long long c : counts) {
    if (c < 0) throw std::invalid_argument("frequency_info_table: negative count");
    total += c;
  }
  if (total == 0) throw std::invalid_argument("frequency_info_table: empty corpus");

  auto info_at = [&](long long count, double b) {
    const double f = double(std::max(count, 1LL)) / double(total);
    return clamp_info(2.0 / (1.0 + std::exp(-(-std::log(f) + b))));
  };
  auto mean_at = [&](double b) {
    double acc = 0.0;
    for (long long c : counts)
      if (c > 0) acc += double(c) * info_at(c, b);
    return acc / double(total);
  };

  // Occurrence-weighted mean info is nondecreasing in b; bisect to 1.
  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_at(mid) < 1.0 ? lo : hi) = mid;
  }
  const double b = 0.5 * (lo + hi);

  std::vector<double> table(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) table[i] = info_at(counts[i], b);
  return table;
}

std::vector<double> norm_info_table(const Matrix& embeddings) {
  const Eigen::Index v = embeddings.rows();
  if (v < 1) throw std::invalid_argument("norm_info_table: empty table");
  Eigen::VectorXd norms(v);
  for (Eigen::Index i = 0; i < v; ++i) norms(i) = embeddings.row(i).norm();
  const double mean = norms.mean();
  if (mean <= 0) throw std::invalid_argument("norm_info_table: all-zero embeddings");
  std::vector<double> table(v);
  for (Eigen::Index i = 0; i < v; ++i) table[i] = clamp_info(norms(i) / mean);
  return table;
}

}  // namespace simt
