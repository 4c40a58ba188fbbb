// Per-token info: the learned quantizer, the info-sum loss, and the
// frequency/embedding-norm heuristic providers.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "simt/tensor.hpp"

namespace simt {

// 3-layer feed-forward net d -> d -> d -> 1 with relu between layers;
// info = 2 * sigmoid(output), so every entry lies strictly inside (0, 2).
struct InfoQuantizer {
  Parameter w1, b1, w2, b2, w3, b3;

  InfoQuantizer(const std::string& prefix, int d, std::mt19937_64& rng);
  // Zero-weight placeholder, reassigned before use.
  InfoQuantizer(const std::string& prefix, int d);
  // L x d embeddings -> L x 1 infos; differentiable in embeddings and params.
  Tensor infos(Tape& t, const Tensor& embeddings);
  std::vector<Parameter*> params();
};

// |sum I_src - zeta| + |sum I_tgt - zeta|. The keep vectors select which
// entries count (sequence markers carry info but are excluded from the sums,
// so zeta refers to sentence lengths).
Tensor info_sum_loss(const Tensor& I_src, const std::vector<double>& keep_src,
                     const Tensor& I_tgt, const std::vector<double>& keep_tgt,
                     double zeta);

struct LossBreakdown {
  double ce = 0, sum = 0, total = 0, lambda = 0, zeta = 0;
};

// ce + lambda * sum, as a graph node.
Tensor total_loss(const Tensor& ce, const Tensor& sum, double lambda);

// Per-vocab info from corpus counts: 2*sigmoid(-log f + b) clamped to
// [eps, 2 - eps], with b bisected so the occurrence-weighted mean info is
// 1 +- 0.01. Ids with count 0 are priced as count 1 but do not influence the
// calibration.
std::vector<double> frequency_info_table(const std::vector<long long>& counts);

// Per-vocab info from embedding norms: |e_t| / mean |e|, clamped likewise.
std::vector<double> norm_info_table(const Matrix& embeddings);

}  // namespace simt
