// Training harness: Adam over the info-aware model with per-example sampled
// prefix masks, plus evaluation sweeps and per-class info statistics.
#pragma once

#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/latency.hpp"
#include "simt/transformer.hpp"

namespace simt {

struct TrainConfig {
  std::string task = "copy";  // copy | reverse | skewed-copy
  int corpus_size = 2000;
  int eval_size = 200;
  int steps = 3000;
  int batch = 64;
  double lr = 1e-3;
  double grad_clip = 1.0;
  double lambda = 0.3;  // weight of the info-sum term
  double label_smoothing = 0.0;
  std::string zeta_mode = "avg";  // avg | src | tgt sentence length
  std::vector<double> k_set = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  double full_prob = 0.1;  // chance of an unmasked (K = inf) example
  bool strict_encoder_mask = false;
  unsigned long long seed = 1;
  int log_every = 50;
  ModelConfig model;
};

void validate_train_config(const TrainConfig& tc);
// One key=value assignment; throws on unknown keys or unparsable values.
void apply_config_kv(TrainConfig& tc, const std::string& key, const std::string& value);
// key=value lines, '#' comments, blank lines ignored. Errors cite path:line.
TrainConfig parse_config_file(const std::string& path);

struct Adam {
  double lr;
  double beta1 = 0.9, beta2 = 0.98, eps = 1e-9;
  explicit Adam(double lr_in) : lr(lr_in) {}
  void step(const std::vector<Parameter*>& ps);

 private:
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

double global_grad_norm(const std::vector<Parameter*>& ps);
// Scales all gradients down so the global norm is at most max_norm.
void clip_global_norm(const std::vector<Parameter*>& ps, double max_norm);

// Infinity with probability full_prob, else a uniform draw from k_set.
double sample_K(const TrainConfig& tc, std::mt19937_64& rng);

struct LossTensors {
  Tensor ce, sum, total;
  double zeta = 0;
  double mean_src_info = 0, mean_tgt_info = 0;
};

// Builds the full graph for one example: markers appended, gold tokens feed
// the target infos, the visibility mask follows the policy under K, and the
// info-sum term prices sentence lengths (markers excluded).
LossTensors training_loss(Tape& t, Model& m, const SentencePair& ex, double K,
                          const TrainConfig& tc, std::mt19937_64* dropout_rng);

// Full run: corpus generation, frequency-table calibration when configured,
// the step loop with clipping and divergence detection. Progress goes to
// `log` as JSON lines when non-null.
Model train_model(const TrainConfig& tc, std::ostream* log);

// Fraction of gold positions the model gets right under teacher forcing.
double teacher_forced_accuracy(Model& m, const std::vector<SentencePair>& corpus);

// One CSV row per K: live simulation of every sentence, corpus BLEU against
// the references, and aggregate latency. Includes the header line.
std::string sweep_csv(Model& m, const std::vector<SentencePair>& eval,
                      const std::vector<double>& ks);

struct InfoStats {
  int count = 0;
  double mean = 0, q1 = 0, median = 0, q3 = 0;
};

// Source-token infos grouped by the corpus class tags ('C'/'F').
std::map<char, InfoStats> info_class_stats(Model& m,
                                           const std::vector<SentencePair>& corpus);
std::string info_class_report(Model& m, const std::vector<SentencePair>& corpus);

}  // namespace simt
