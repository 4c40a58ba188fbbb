#include "simt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace simt {

namespace {

// Keyed on the n-gram itself; std::map keeps iteration deterministic.
using NgramCounts = std::map<std::vector<int>, long long>;

NgramCounts count_ngrams(const std::vector<int>& s, int order) {
  NgramCounts c;
  if (static_cast<int>(s.size()) >= order)
    for (std::size_t i = 0; i + order <= s.size(); ++i)
      ++c[std::vector<int>(s.begin() + i, s.begin() + i + order)];
  return c;
}

}  // namespace

double bleu(const std::vector<std::vector<int>>& hypotheses,
            const std::vector<std::vector<int>>& references, int max_order) {
  if (hypotheses.empty()) throw std::invalid_argument("bleu: empty corpus");
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu: hypothesis/reference count mismatch");
  if (max_order < 1) throw std::invalid_argument("bleu: max_order must be >= 1");

  std::vector<long long> matches(max_order, 0), totals(max_order, 0);
  long long hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& hyp = hypotheses[s];
    const auto& ref = references[s];
    hyp_len += static_cast<long long>(hyp.size());
    ref_len += static_cast<long long>(ref.size());
    for (int o = 1; o <= max_order; ++o) {
      NgramCounts hc = count_ngrams(hyp, o);
      NgramCounts rc = count_ngrams(ref, o);
      for (const auto& [gram, n] : hc) {
        totals[o - 1] += n;
        auto it = rc.find(gram);
        if (it != rc.end()) matches[o - 1] += std::min(n, it->second);
      }
    }
  }

  double log_sum = 0.0;
  int used_orders = 0;
  for (int o = 1; o <= max_order; ++o) {
    if (totals[o - 1] == 0) continue;
    double p;
    if (matches[o - 1] > 0)
      p = double(matches[o - 1]) / double(totals[o - 1]);
    else if (o >= 2)
      p = 1.0 / double(totals[o - 1] + 1);
    else
      return 0.0;
    log_sum += std::log(p);
    ++used_orders;
  }
  if (used_orders == 0 || hyp_len == 0) return 0.0;

  double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - double(ref_len) / double(hyp_len));
  return 100.0 * bp * std::exp(log_sum / used_orders);
}

}  // namespace simt
