// Corpus-level BLEU over token-id sequences.
#pragma once

#include <vector>

namespace simt {

// Geometric mean of clipped n-gram precisions (orders 1..max_order) times the
// brevity penalty, scaled to [0, 100]. Orders with zero candidate n-grams are
// skipped; orders >= 2 with zero matches get add-one smoothing. Order 1 is
// never smoothed, so an all-miss hypothesis scores 0.
double bleu(const std::vector<std::vector<int>>& hypotheses,
            const std::vector<std::vector<int>>& references, int max_order = 4);

}  // namespace simt
