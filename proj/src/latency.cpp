#include "simt/latency.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace simt {

double average_lagging(const Schedule& s) {
  validate_schedule(s);
  const int m = s.m();
  int tau = m;
  for (int i = 1; i <= m; ++i) {
    if (s.g[i - 1] == s.n) {
      tau = i;
      break;
    }
  }
  const double rate = double(s.n) / double(m);
  double sum = 0.0;
  for (int i = 1; i <= tau; ++i) sum += s.g[i - 1] - (i - 1) * rate;
  return sum / tau;
}

double consecutive_wait(const Schedule& s) {
  validate_schedule(s);
  int positive = 0, prev = 0;
  for (int gi : s.g) {
    if (gi > prev) ++positive;
    prev = gi;
  }
  if (positive == 0) throw std::invalid_argument("consecutive_wait: no READ before any WRITE");
  return double(s.g.back()) / double(positive);
}

double average_proportion(const Schedule& s) {
  validate_schedule(s);
  double sum = 0.0;
  for (int gi : s.g) sum += gi;
  return sum / (double(s.n) * double(s.m()));
}

double differentiable_average_lagging(const Schedule& s) {
  validate_schedule(s);
  const int m = s.m();
  const double rate = double(s.n) / double(m);
  double gp = 0.0, sum = 0.0;
  for (int i = 1; i <= m; ++i) {
    gp = i == 1 ? double(s.g[0]) : std::max(double(s.g[i - 1]), gp + rate);
    sum += gp - (i - 1) * rate;
  }
  return sum / m;
}

LatencyReport sentence_report(const Schedule& s) {
  LatencyReport r;
  r.al = average_lagging(s);
  r.cw = consecutive_wait(s);
  r.ap = average_proportion(s);
  r.dal = differentiable_average_lagging(s);
  r.early_stop = detect_early_stop(s);
  r.n = s.n;
  r.m = s.m();
  return r;
}

CorpusLatency corpus_report(const std::vector<LatencyReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("corpus_report: empty input");
  CorpusLatency c;
  int stops = 0;
  for (const LatencyReport& r : reports) {
    c.al += r.al;
    c.cw += r.cw;
    c.ap += r.ap;
    c.dal += r.dal;
    stops += r.early_stop ? 1 : 0;
  }
  c.count = static_cast<int>(reports.size());
  c.al /= c.count;
  c.cw /= c.count;
  c.ap /= c.count;
  c.dal /= c.count;
  c.early_stop_pct = 100.0 * stops / c.count;
  return c;
}

std::string csv_header() { return "policy,param,BLEU,AL,CW,AP,DAL,early_stop_pct"; }

std::string csv_row(const std::string& policy, const std::string& param, double bleu,
                    const CorpusLatency& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.2f,%.2f,%.2f,%.2f,%.2f,%.2f", bleu, c.al, c.cw, c.ap,
                c.dal, c.early_stop_pct);
  return policy + "," + param + "," + buf;
}

}  // namespace simt
