// Acceptance gate: ten end-to-end checks covering metric oracles, policy
// closed forms, attention identities, gradient integrity, and desk-scale
// training behaviour. Prints one pass/fail line per criterion; the exit
// status is the number of failures. Tolerances and budgets are pinned here.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "simt/bleu.hpp"
#include "simt/latency.hpp"
#include "simt/policy.hpp"
#include "simt/train.hpp"
#include "simt/transformer.hpp"

using namespace simt;

namespace {

int failures = 0;

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void report(int id, const char* title, bool ok, double sec, double budget_sec,
            const std::string& detail) {
  const bool in_budget = sec < budget_sec;
  if (!ok || !in_budget) ++failures;
  std::printf("criterion %2d  %-32s %s  %7.1fs / %4.0fs  %s\n", id, title,
              !ok ? "FAIL" : (in_budget ? "PASS" : "FAIL (budget)"), sec, budget_sec,
              detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, ap);
  va_end(ap);
  return buf;
}

// Brute-force latency evaluator, transcribed from the metric definitions
// independently of the library implementation.
struct OracleOut {
  double al, cw, ap, dal;
};

OracleOut oracle_metrics(const std::vector<int>& g, int n) {
  const int m = int(g.size());
  const double rate = double(n) / double(m);
  int tau = m;
  for (int i = 1; i <= m; ++i)
    if (g[i - 1] == n) {
      tau = i;
      break;
    }
  double al = 0;
  for (int i = 1; i <= tau; ++i) al += double(g[i - 1]) - double(i - 1) * rate;
  al /= double(tau);
  int rises = 0;
  for (int i = 0; i < m; ++i)
    if (g[i] > (i == 0 ? 0 : g[i - 1])) ++rises;
  const double cw = double(g[m - 1]) / double(rises);
  double area = 0;
  for (int gi : g) area += double(gi);
  const double ap = area / (double(n) * double(m));
  double gp = 0, dal = 0;
  for (int i = 1; i <= m; ++i) {
    gp = i == 1 ? double(g[0]) : std::max(double(g[i - 1]), gp + rate);
    dal += gp - double(i - 1) * rate;
  }
  dal /= double(m);
  return {al, cw, ap, dal};
}

void criterion_1() {
  Stopwatch sw;
  std::mt19937_64 rng(11);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 15)(rng);
    const int m = std::uniform_int_distribution<int>(1, 15)(rng);
    Schedule s;
    s.n = n;
    s.g.resize(m);
    std::uniform_int_distribution<int> col(1, n);
    for (int& gi : s.g) gi = col(rng);
    std::sort(s.g.begin(), s.g.end());
    const OracleOut o = oracle_metrics(s.g, n);
    worst = std::max(worst, std::fabs(average_lagging(s) - o.al));
    worst = std::max(worst, std::fabs(consecutive_wait(s) - o.cw));
    worst = std::max(worst, std::fabs(average_proportion(s) - o.ap));
    worst = std::max(worst, std::fabs(differentiable_average_lagging(s) - o.dal));
  }
  report(1, "metric oracle equivalence", worst <= 1e-9, sw.seconds(), 10,
         fmt("1000 random schedules, max |diff| %.1e (tol 1e-9)", worst));
}

void criterion_2() {
  Stopwatch sw;
  bool ok = true;
  for (int n = 1; n <= 12; ++n) {
    for (int k = 1; k <= n; ++k)
      ok = ok && average_lagging(wait_k_schedule(k, n, n)) == double(k);
    Schedule full;
    full.n = n;
    full.g.assign(n, n);
    ok = ok && average_lagging(full) == double(n);
  }
  report(2, "closed-form wait-k AL", ok, sw.seconds(), 1,
         ok ? "AL = k and full-read AL = n exact for all n <= 12"
            : "exact AL equality violated");
}

void criterion_3() {
  Stopwatch sw;
  bool ok = true;
  for (int K = 1; K <= 3; ++K)
    for (int n = 1; n <= 8; ++n)
      for (int m = 1; m <= 8; ++m) {
        const Schedule s = wait_info_schedule(std::vector<double>(n, 1.0),
                                              std::vector<double>(m, 1.0), K);
        ok = ok && s.n == n && s.m() == m;
        for (int i = 1; i <= m; ++i) ok = ok && s.g[i - 1] == std::min(i + K, n);
      }
  report(3, "unit-info reduction", ok, sw.seconds(), 5,
         ok ? "g(i) = min{i+K, n} for K in {1,2,3}, all n, m <= 8"
            : "closed form violated");
}

void criterion_4() {
  Stopwatch sw;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> info(0.1, 1.9);
  std::vector<Schedule> balanced;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 15)(rng);
    const int m = std::uniform_int_distribution<int>(1, 15)(rng);
    std::vector<double> src(n), tgt(m);
    double ssum = 0, tsum = 0;
    for (double& v : src) ssum += v = info(rng);
    for (double& v : tgt) tsum += v = info(rng);
    for (double& v : tgt) v *= ssum / tsum;  // equal total info
    const double K = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    balanced.push_back(wait_info_schedule(src, tgt, K));
  }
  const double es_balanced = early_stop_proportion(balanced);

  std::vector<Schedule> shrunk;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 15)(rng);
    const int m = std::uniform_int_distribution<int>(1, n - 1)(rng);
    shrunk.push_back(wait_k_schedule(1, n, m));
  }
  const double es_shrunk = early_stop_proportion(shrunk);

  report(4, "balanced infos never early-stop",
         es_balanced == 0.0 && es_shrunk == 1.0, sw.seconds(), 10,
         fmt("equal sums: %.2f%%, wait-1 on n > m: %.0f%%", 100 * es_balanced,
             100 * es_shrunk));
}

void criterion_5() {
  Stopwatch sw;
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(2, 7), tok(kFirstContent, kVocabSize - 1);
  bool ok = true;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    ModelConfig cfg;
    cfg.d_model = trial % 2 ? 16 : 8;
    cfg.heads = 1 << (trial % 3);
    cfg.enc_layers = 1 + trial % 2;
    cfg.dec_layers = 1 + (trial / 2) % 2;
    cfg.ffn = 2 * cfg.d_model;
    cfg.max_len = 32;
    cfg.fix_src_info_one = true;
    cfg.fix_tgt_info_one = true;

    ModelConfig plain = cfg;
    plain.info_aware_self_attn = false;
    plain.info_consistent_cross_attn = false;

    Model with(cfg, 1000 + trial), without(plain, 1000 + trial);

    std::vector<int> src(len(rng)), dec{kBos};
    for (int& v : src) v = tok(rng);
    src.push_back(kEos);
    for (int i = len(rng); i > 0; --i) dec.push_back(tok(rng));

    Matrix keep = Matrix::Zero(int(dec.size()), int(src.size()));
    for (int i = 0; i < keep.rows(); ++i)
      for (int j = 0; j <= std::min<int>(i + 1, int(keep.cols()) - 1); ++j)
        keep(i, j) = 1.0;

    const Matrix* masks[] = {nullptr, &keep};
    for (const Matrix* mask : masks) {
      ForwardOptions opt;
      opt.cross_keep = mask;
      Tape ta, tb;
      const Matrix& a = forward_pass(ta, with, src, dec, dec, opt).logits.value();
      const Matrix& b = forward_pass(tb, without, src, dec, dec, opt).logits.value();
      ok = ok && (a.array() == b.array()).all();
    }
  }
  report(5, "attention identity ablation", ok, sw.seconds(), 10,
         ok ? "bit-identical logits on 100 random models, masked and unmasked"
            : "logits differ with unit infos");
}

void criterion_6() {
  Stopwatch sw;
  ModelConfig mc;
  mc.d_model = 8;
  mc.heads = 2;
  mc.enc_layers = 2;
  mc.dec_layers = 2;
  mc.ffn = 16;
  mc.dropout = 0.0;  // finite differences need a deterministic loss
  mc.max_len = 32;
  Model model(mc, 29);
  TrainConfig tc;
  SentencePair ex;
  ex.src = {7, 23, 11, 38, 5, 16};
  ex.tgt = {7, 23, 11, 38, 5, 16};
  const double K = 2.5;

  // The visibility mask is rebuilt from detached infos at every evaluation.
  // Verify every READ/WRITE threshold sits far from its decision boundary so
  // +-h parameter nudges cannot flip the mask under the difference quotient.
  std::vector<int> src = ex.src, gold = ex.tgt;
  src.push_back(kEos);
  gold.push_back(kEos);
  const std::vector<double> is = token_info_values(model, src, 's');
  const std::vector<double> it = token_info_values(model, gold, 't');
  double margin = 1e300, tgt_cum = 0;
  for (double ti : it) {
    tgt_cum += ti;
    double src_cum = 0;
    for (double si : is)
      margin = std::min(margin, std::fabs((src_cum += si) - (tgt_cum + K)));
  }

  auto loss_value = [&]() {
    Tape t;
    return training_loss(t, model, ex, K, tc, nullptr).total.scalar();
  };

  model.zero_grads();
  std::vector<Matrix> grads;
  {
    Tape t;
    LossTensors lt = training_loss(t, model, ex, K, tc, nullptr);
    t.backward(lt.total);
  }
  const std::vector<Parameter*> ps = model.params();
  for (const Parameter* p : ps) grads.push_back(p->grad);

  const double h = 1e-5;
  double worst = 0;
  long checked = 0;
  for (std::size_t pi = 0; pi < ps.size(); ++pi) {
    Matrix& w = ps[pi]->value;
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double saved = w(r, c);
        w(r, c) = saved + h;
        const double up = loss_value();
        w(r, c) = saved - h;
        const double down = loss_value();
        w(r, c) = saved;
        const double fd = (up - down) / (2 * h);
        const double got = grads[pi](r, c);
        // 1e-6 guard: central differences bottom out near |loss|*eps/h.
        const double rel =
            std::fabs(got - fd) / std::max({1e-6, std::fabs(got), std::fabs(fd)});
        worst = std::max(worst, rel);
        ++checked;
      }
  }
  report(6, "gradient integrity", worst < 1e-3 && margin > 1e-2, sw.seconds(), 120,
         fmt("%ld params, max rel err %.1e (tol 1e-3), mask margin %.2f", checked,
             worst, margin));
}

// Criteria 7 and 8 share one training run: the default configuration on the
// copy task, evaluated on a held-out corpus.
void criteria_7_8() {
  Stopwatch sw;
  TrainConfig tc;
  const auto eval = generate_corpus(tc.task, tc.eval_size, tc.seed + 1000);
  Model model = train_model(tc, nullptr);
  const double acc = teacher_forced_accuracy(model, eval);

  struct Point {
    double bleu_score, al;
  };
  std::vector<Point> pts;
  for (int k = 1; k <= 9; ++k) {
    std::vector<std::vector<int>> hyps, refs;
    std::vector<LatencyReport> reports;
    for (const SentencePair& ex : eval) {
      SimResult r = simulate(model, ex.src, double(k));
      std::vector<int> hyp = r.emitted;
      if (!hyp.empty() && hyp.back() == kEos) hyp.pop_back();
      hyps.push_back(std::move(hyp));
      refs.push_back(ex.tgt);
      reports.push_back(sentence_report(r.schedule));
    }
    pts.push_back({bleu(hyps, refs), corpus_report(reports).al});
  }

  std::string curve = "        K:";
  for (int k = 1; k <= 9; ++k)
    curve += fmt(" %d(AL %.2f, BLEU %.2f)", k, pts[k - 1].al, pts[k - 1].bleu_score);
  std::printf("%s\n", curve.c_str());

  bool al_up = true;
  for (int i = 1; i < 9; ++i) al_up = al_up && pts[i].al > pts[i - 1].al;

  // Trade-off shape: BLEU may not dip on the climb (small slack for
  // simulation noise) and must hold within a band of the maximum once the
  // plateau is reached.
  const double kPlateauBand = 2.0, kClimbSlack = 0.3;
  double best = 0;
  for (const Point& p : pts) best = std::max(best, p.bleu_score);
  int plateau_start = 0;
  while (pts[plateau_start].bleu_score < best - kPlateauBand) ++plateau_start;
  bool bleu_shape = true;
  for (int i = 0; i < plateau_start; ++i)
    bleu_shape = bleu_shape && pts[i + 1].bleu_score >= pts[i].bleu_score - kClimbSlack;
  for (int i = plateau_start; i < 9; ++i)
    bleu_shape = bleu_shape && pts[i].bleu_score >= best - kPlateauBand;

  report(7, "desk-scale training", acc >= 0.99 && al_up && bleu_shape, sw.seconds(),
         900,
         fmt("accuracy %.2f%% (need 99%%), AL %s, BLEU plateau from K=%d",
             100 * acc, al_up ? "strictly increasing" : "NOT increasing",
             plateau_start + 1));

  // Criterion 8 reuses the model: per-sentence info sums against the target
  // total, markers excluded, mirroring the training loss convention.
  Stopwatch sw8;
  double rel_src = 0, rel_tgt = 0;
  for (const SentencePair& ex : eval) {
    std::vector<int> s = ex.src, g = ex.tgt;
    s.push_back(kEos);
    g.push_back(kEos);
    const std::vector<double> is = token_info_values(model, s, 's');
    const std::vector<double> it = token_info_values(model, g, 't');
    double ssum = 0, tsum = 0;
    for (std::size_t i = 0; i + 1 < is.size(); ++i) ssum += is[i];
    for (std::size_t i = 0; i + 1 < it.size(); ++i) tsum += it[i];
    const double zeta = 0.5 * double(ex.src.size() + ex.tgt.size());
    rel_src += std::fabs(ssum - zeta) / zeta;
    rel_tgt += std::fabs(tsum - zeta) / zeta;
  }
  rel_src /= double(eval.size());
  rel_tgt /= double(eval.size());
  report(8, "info-sum convergence", rel_src < 0.1 && rel_tgt < 0.1, sw8.seconds(),
         900, fmt("mean |sum - zeta|/zeta: src %.4f, tgt %.4f (need < 0.1)", rel_src,
                  rel_tgt));
}

// Criteria 9 and 10 share the skewed-copy runs: five seeds for the info
// separation, with the first seed's model reused for the policy comparison.
void criteria_9_10() {
  Stopwatch sw;
  int separated = 0;
  std::optional<Model> first;
  std::string per_seed;
  for (unsigned long long seed = 1; seed <= 5; ++seed) {
    TrainConfig tc;
    tc.task = "skewed-copy";
    tc.steps = 800;
    tc.batch = 16;
    tc.seed = seed;
    Model m = train_model(tc, nullptr);
    const auto eval = generate_corpus("skewed-copy", 100, seed + 1000);
    const auto stats = info_class_stats(m, eval);
    const double c = stats.at('C').mean, f = stats.at('F').mean;
    separated += c > f ? 1 : 0;
    per_seed += fmt(" %.2f/%.2f", c, f);
    if (seed == 1) first.emplace(std::move(m));
  }
  report(9, "info separability", separated >= 4, sw.seconds(), 1800,
         fmt("content/filler mean info per seed:%s (%d of 5 separated)",
             per_seed.c_str(), separated));

  Stopwatch sw10;
  const auto eval = generate_corpus("skewed-copy", 100, 1001);
  std::vector<Schedule> wi, wk, cu;
  for (const SentencePair& ex : eval) {
    wi.push_back(simulate(*first, ex.src, 3.0).schedule);
    const int n = int(ex.src.size()) + 1, m = int(ex.tgt.size()) + 1;
    wk.push_back(wait_k_schedule(1, n, m));
    cu.push_back(catchup_schedule(1, 2, n, m));
  }
  const double es_wk = early_stop_proportion(wk);
  const double es_cu = early_stop_proportion(cu);
  const double es_wi = early_stop_proportion(wi);
  report(10, "early-stop policy ordering",
         es_wk > es_cu && es_cu > es_wi && es_wi == 0.0, sw10.seconds(), 300,
         fmt("wait-1 %.0f%% > catch-up %.0f%% > wait-info %.0f%%", 100 * es_wk,
             100 * es_cu, 100 * es_wi));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criteria_7_8();
  criteria_9_10();
  if (failures == 0)
    std::printf("acceptance: all 10 criteria pass\n");
  else
    std::printf("acceptance: %d criterion(s) failed\n", failures);
  return failures;
}
