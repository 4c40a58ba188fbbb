#include "simt/policy.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "simt/corpus.hpp"

namespace simt {

void validate_schedule(const Schedule& s) {
  if (s.g.empty() || s.n < 1) throw std::invalid_argument("schedule: empty");
  int prev = 0;
  for (int gi : s.g) {
    if (gi < 1 || gi > s.n || gi < prev)
      throw std::invalid_argument("schedule: g must be nondecreasing within [1, n]");
    prev = gi;
  }
}

int wait_k_g(int k, int i, int n) {
  if (k < 1 || i < 1 || n < 1) throw std::invalid_argument("wait_k_g: arguments must be >= 1");
  return std::min(k + i - 1, n);
}

int catchup_g(int k, int c, int i, int n) {
  if (c < 1) throw std::invalid_argument("catchup_g: c must be >= 1");
  if (k < 1 || i < 1 || n < 1) throw std::invalid_argument("catchup_g: arguments must be >= 1");
  return std::min(k + i - 1 + (i - 1) / c, n);
}

int wait_info_g(const std::vector<double>& I_src, double tgt_cum, double K) {
  const int n = static_cast<int>(I_src.size());
  if (n < 1) throw std::invalid_argument("wait_info_g: empty source info");
  double src_cum = 0.0;
  for (int j = 1; j <= n; ++j) {
    src_cum += I_src[j - 1];
    if (src_cum >= tgt_cum + K) return j;
  }
  return n;
}

Schedule wait_k_schedule(int k, int n, int m) {
  Schedule s;
  s.n = n;
  for (int i = 1; i <= m; ++i) s.g.push_back(wait_k_g(k, i, n));
  return s;
}

Schedule catchup_schedule(int k, int c, int n, int m) {
  Schedule s;
  s.n = n;
  for (int i = 1; i <= m; ++i) s.g.push_back(catchup_g(k, c, i, n));
  return s;
}

Schedule wait_info_schedule(const std::vector<double>& I_src,
                            const std::vector<double>& I_tgt, double K) {
  const int n = static_cast<int>(I_src.size());
  const int m = static_cast<int>(I_tgt.size());
  if (n < 1 || m < 1) throw std::invalid_argument("wait_info_schedule: empty side");
  Schedule s;
  s.n = n;
  int j = 1;  // first source token is read before any decision
  double src_sum = I_src[0];
  double tgt_sum = 0.0;
  for (int i = 1; i <= m; ++i) {
    const double tgt_through_i = tgt_sum + I_tgt[i - 1];
    while (j < n && src_sum < tgt_through_i + K) {
      ++j;
      src_sum += I_src[j - 1];
    }
    s.g.push_back(j);
    tgt_sum = tgt_through_i;
  }
  return s;
}

bool detect_early_stop(const Schedule& s) {
  validate_schedule(s);
  return s.g.back() < s.n;
}

double early_stop_proportion(const std::vector<Schedule>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("early_stop_proportion: empty corpus");
  int stops = 0;
  for (const Schedule& s : corpus) stops += detect_early_stop(s) ? 1 : 0;
  return double(stops) / double(corpus.size());
}

Schedule trace_to_schedule(const ActionTrace& t, int n) {
  Schedule s;
  s.n = n;
  int j = 0;
  for (const Action& a : t.actions) {
    if (a.kind == 'R') {
      ++j;
    } else if (a.kind == 'W') {
      s.g.push_back(j);
    } else {
      throw std::invalid_argument("trace_to_schedule: bad action kind");
    }
  }
  if (j > n) throw std::invalid_argument("trace_to_schedule: more reads than source tokens");
  validate_schedule(s);
  return s;
}

std::string format_trace(const ActionTrace& t) {
  std::string out;
  char buf[64];
  for (const Action& a : t.actions) {
    if (a.kind == 'R') {
      out += "R\t" + token_name(a.token) + "\n";
    } else {
      std::snprintf(buf, sizeof buf, "\t%.4f\t%.4f\n", a.src_sum, a.tgt_sum);
      out += "W\t" + token_name(a.token) + buf;
    }
  }
  return out;
}

}  // namespace simt
