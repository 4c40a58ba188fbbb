// READ/WRITE schedules: wait-k, catch-up, and the info-threshold policy.
#pragma once

#include <string>
#include <vector>

namespace simt {

// g[i-1] is g(i): source tokens read before emitting target token i (1-based,
// g(0) := 0 by convention). Lengths n and m count every streamed token,
// end-of-sequence included.
struct Schedule {
  std::vector<int> g;
  int n = 0;

  int m() const { return static_cast<int>(g.size()); }
};

void validate_schedule(const Schedule& s);

// min{k + i - 1, n}
int wait_k_g(int k, int i, int n);
// min{k + i - 1 + (i-1)/c, n}; c = INT_MAX disables the extra reads.
int catchup_g(int k, int c, int i, int n);
// Smallest j with sum_{l<=j} I_src[l] >= tgt_cum + K, else n. Ties take the
// smallest j; prefix sums accumulate left to right.
int wait_info_g(const std::vector<double>& I_src, double tgt_cum, double K);

Schedule wait_k_schedule(int k, int n, int m);
Schedule catchup_schedule(int k, int c, int n, int m);
// Literal READ/WRITE loop: the first source token is read up front, then each
// step WRITEs when the info condition holds or the source is exhausted, else
// READs. The target sum through step i includes I_tgt[i-1] itself.
Schedule wait_info_schedule(const std::vector<double>& I_src,
                            const std::vector<double>& I_tgt, double K);

// True iff the final WRITE happened before the whole source was read.
bool detect_early_stop(const Schedule& s);
double early_stop_proportion(const std::vector<Schedule>& corpus);

struct Action {
  char kind;  // 'R' or 'W'
  int token;
  double src_sum = 0.0, tgt_sum = 0.0;  // info sums at decision time, WRITE only
};

struct ActionTrace {
  std::vector<Action> actions;
  bool hit_cap = false;  // emission cap reached before end-of-sequence
};

// n is the full source length; the trace may have read fewer tokens.
Schedule trace_to_schedule(const ActionTrace& t, int n);

// One line per action: R<TAB>token or W<TAB>token<TAB>src_sum<TAB>tgt_sum (4dp).
std::string format_trace(const ActionTrace& t);

}  // namespace simt
