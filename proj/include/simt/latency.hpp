// Latency metrics over READ/WRITE schedules: AL, CW, AP, DAL.
#pragma once

#include <string>
#include <vector>

#include "simt/policy.hpp"

namespace simt {

struct LatencyReport {
  double al = 0, cw = 0, ap = 0, dal = 0;
  bool early_stop = false;
  int n = 0, m = 0;
};

// AL = (1/tau) sum_{i<=tau} [g(i) - (i-1) n/m], tau the FIRST i with g(i) = n.
// Early-stopped schedules never reach n; tau falls back to m.
double average_lagging(const Schedule& s);
// CW = g(m) / #{i : g(i) > g(i-1)} with g(0) := 0.
double consecutive_wait(const Schedule& s);
// AP = sum g(i) / (n m).
double average_proportion(const Schedule& s);
// g'(1) = g(1), g'(i) = max(g(i), g'(i-1) + n/m); DAL = mean of g'(i) - (i-1) n/m.
double differentiable_average_lagging(const Schedule& s);

LatencyReport sentence_report(const Schedule& s);

struct CorpusLatency {
  double al = 0, cw = 0, ap = 0, dal = 0;
  double early_stop_pct = 0;  // percent in [0, 100]
  int count = 0;
};

CorpusLatency corpus_report(const std::vector<LatencyReport>& reports);

// policy,param,BLEU,AL,CW,AP,DAL,early_stop_pct with 2-decimal numbers.
std::string csv_header();
std::string csv_row(const std::string& policy, const std::string& param, double bleu,
                    const CorpusLatency& c);

}  // namespace simt
