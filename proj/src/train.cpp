#include "simt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "simt/bleu.hpp"
#include "simt/info_model.hpp"

namespace simt {

void validate_train_config(const TrainConfig& tc) {
  if (tc.task != "copy" && tc.task != "reverse" && tc.task != "skewed-copy")
    throw std::invalid_argument("config: unknown task '" + tc.task + "'");
  if (tc.corpus_size < 1 || tc.eval_size < 1 || tc.steps < 1 || tc.batch < 1 ||
      tc.log_every < 1)
    throw std::invalid_argument("config: sizes and steps must be positive");
  if (tc.lr <= 0 || tc.grad_clip <= 0)
    throw std::invalid_argument("config: lr and grad_clip must be positive");
  if (tc.lambda < 0) throw std::invalid_argument("config: lambda must be >= 0");
  if (tc.label_smoothing < 0 || tc.label_smoothing >= 1)
    throw std::invalid_argument("config: label_smoothing must be in [0, 1)");
  if (tc.zeta_mode != "avg" && tc.zeta_mode != "src" && tc.zeta_mode != "tgt")
    throw std::invalid_argument("config: zeta_mode must be avg, src, or tgt");
  if (tc.full_prob < 0 || tc.full_prob > 1)
    throw std::invalid_argument("config: full_prob must be in [0, 1]");
  if (tc.k_set.empty()) throw std::invalid_argument("config: k_set is empty");
  for (double k : tc.k_set)
    if (!(k > 0)) throw std::invalid_argument("config: k_set entries must be positive");
  validate_config(tc.model);
}

namespace {

long long parse_int(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
  }
  if (value.empty() || used != value.size())
    throw std::invalid_argument("config: bad integer for " + key + ": '" + value + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  if (value == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
  }
  if (value.empty() || used != value.size())
    throw std::invalid_argument("config: bad number for " + key + ": '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw std::invalid_argument("config: bad flag for " + key + ": '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

void apply_config_kv(TrainConfig& tc, const std::string& key, const std::string& value) {
  if (key == "task") tc.task = value;
  else if (key == "corpus_size") tc.corpus_size = static_cast<int>(parse_int(key, value));
  else if (key == "eval_size") tc.eval_size = static_cast<int>(parse_int(key, value));
  else if (key == "steps") tc.steps = static_cast<int>(parse_int(key, value));
  else if (key == "batch") tc.batch = static_cast<int>(parse_int(key, value));
  else if (key == "lr") tc.lr = parse_real(key, value);
  else if (key == "grad_clip") tc.grad_clip = parse_real(key, value);
  else if (key == "lambda") tc.lambda = parse_real(key, value);
  else if (key == "label_smoothing") tc.label_smoothing = parse_real(key, value);
  else if (key == "zeta_mode") tc.zeta_mode = value;
  else if (key == "full_prob") tc.full_prob = parse_real(key, value);
  else if (key == "strict_encoder_mask") tc.strict_encoder_mask = parse_bool(key, value);
  else if (key == "seed") tc.seed = static_cast<unsigned long long>(parse_int(key, value));
  else if (key == "log_every") tc.log_every = static_cast<int>(parse_int(key, value));
  else if (key == "k_set") {
    std::vector<double> ks;
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) ks.push_back(parse_real(key, trim(item)));
    if (ks.empty()) throw std::invalid_argument("config: k_set is empty");
    tc.k_set = ks;
  } else if (key == "d_model") tc.model.d_model = static_cast<int>(parse_int(key, value));
  else if (key == "heads") tc.model.heads = static_cast<int>(parse_int(key, value));
  else if (key == "enc_layers") tc.model.enc_layers = static_cast<int>(parse_int(key, value));
  else if (key == "dec_layers") tc.model.dec_layers = static_cast<int>(parse_int(key, value));
  else if (key == "ffn") tc.model.ffn = static_cast<int>(parse_int(key, value));
  else if (key == "dropout") tc.model.dropout = parse_real(key, value);
  else if (key == "max_len") tc.model.max_len = static_cast<int>(parse_int(key, value));
  else if (key == "info_provider") tc.model.info_provider = value;
  else if (key == "fix_src_info_one") tc.model.fix_src_info_one = parse_bool(key, value);
  else if (key == "fix_tgt_info_one") tc.model.fix_tgt_info_one = parse_bool(key, value);
  else if (key == "info_aware_self_attn")
    tc.model.info_aware_self_attn = parse_bool(key, value);
  else if (key == "info_consistent_cross_attn")
    tc.model.info_consistent_cross_attn = parse_bool(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  TrainConfig tc;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    try {
      apply_config_kv(tc, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return tc;
}

void Adam::step(const std::vector<Parameter*>& ps) {
  if (m_.empty()) {
    m_.reserve(ps.size());
    v_.reserve(ps.size());
    for (const Parameter* p : ps) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != ps.size())
    throw std::invalid_argument("adam: parameter list changed size");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, t_);
  const double bc2 = 1.0 - std::pow(beta2, t_);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Matrix& g = ps[i]->grad;
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * g.cwiseProduct(g);
    ps[i]->value -=
        lr * ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + eps)).matrix();
  }
}

double global_grad_norm(const std::vector<Parameter*>& ps) {
  double sq = 0.0;
  for (const Parameter* p : ps) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void clip_global_norm(const std::vector<Parameter*>& ps, double max_norm) {
  if (max_norm <= 0) throw std::invalid_argument("clip: max_norm must be positive");
  const double norm = global_grad_norm(ps);
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (Parameter* p : ps) p->grad *= s;
}

double sample_K(const TrainConfig& tc, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < tc.full_prob) return std::numeric_limits<double>::infinity();
  std::uniform_int_distribution<std::size_t> pick(0, tc.k_set.size() - 1);
  return tc.k_set[pick(rng)];
}

LossTensors training_loss(Tape& t, Model& m, const SentencePair& ex, double K,
                          const TrainConfig& tc, std::mt19937_64* dropout_rng) {
  if (ex.src.empty() || ex.tgt.empty())
    throw std::invalid_argument("training_loss: empty sentence");
  std::vector<int> src = ex.src;
  src.push_back(kEos);
  std::vector<int> dec_in;
  dec_in.reserve(ex.tgt.size() + 1);
  dec_in.push_back(kBos);
  dec_in.insert(dec_in.end(), ex.tgt.begin(), ex.tgt.end());
  std::vector<int> gold = ex.tgt;
  gold.push_back(kEos);

  ForwardOptions opt;
  opt.strict_encoder_mask = tc.strict_encoder_mask;
  opt.dropout_rng = dropout_rng;
  Matrix keep;
  if (std::isfinite(K)) {
    keep = build_simt_mask(token_info_values(m, src, 's'),
                           token_info_values(m, gold, 't'), K);
    opt.cross_keep = &keep;
  }
  ForwardOut out = forward_pass(t, m, src, dec_in, gold, opt);

  LossTensors lt;
  lt.ce = cross_entropy_mean(out.logits, gold, tc.label_smoothing);
  std::vector<double> keep_src(src.size(), 1.0);
  keep_src.back() = 0.0;
  std::vector<double> keep_tgt(gold.size(), 1.0);
  keep_tgt.back() = 0.0;
  if (tc.zeta_mode == "avg")
    lt.zeta = 0.5 * double(ex.src.size() + ex.tgt.size());
  else if (tc.zeta_mode == "src")
    lt.zeta = double(ex.src.size());
  else
    lt.zeta = double(ex.tgt.size());
  lt.sum = info_sum_loss(out.I_src, keep_src, out.I_tgt, keep_tgt, lt.zeta);
  lt.total = total_loss(lt.ce, lt.sum, tc.lambda);
  lt.mean_src_info = out.I_src.value().mean();
  lt.mean_tgt_info = out.I_tgt.value().mean();
  return lt;
}

namespace {

void calibrate_frequency_tables(Model& model, const std::vector<SentencePair>& corpus) {
  std::vector<long long> src_counts(model.cfg.src_vocab, 0);
  std::vector<long long> tgt_counts(model.cfg.tgt_vocab, 0);
  for (const SentencePair& ex : corpus) {
    for (int tok : ex.src) ++src_counts[tok];
    ++src_counts[kEos];
    ++tgt_counts[kBos];
    for (int tok : ex.tgt) ++tgt_counts[tok];
    ++tgt_counts[kEos];
  }
  const auto st = frequency_info_table(src_counts);
  const auto tt = frequency_info_table(tgt_counts);
  for (std::size_t i = 0; i < st.size(); ++i) model.src_info_table(i, 0) = st[i];
  for (std::size_t i = 0; i < tt.size(); ++i) model.tgt_info_table(i, 0) = tt[i];
}

}  // namespace

Model train_model(const TrainConfig& tc, std::ostream* log) {
  validate_train_config(tc);
  const auto corpus = generate_corpus(tc.task, tc.corpus_size, tc.seed);
  Model model(tc.model, tc.seed + 1);
  if (tc.model.info_provider == "frequency") calibrate_frequency_tables(model, corpus);

  std::mt19937_64 rng(tc.seed + 2);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  Adam opt(tc.lr);
  const auto params = model.params();

  for (int step = 1; step <= tc.steps; ++step) {
    model.zero_grads();
    double ce = 0, sum = 0, total = 0, src_info = 0, tgt_info = 0;
    for (int b = 0; b < tc.batch; ++b) {
      const SentencePair& ex = corpus[pick(rng)];
      const double K = sample_K(tc, rng);
      Tape t;
      LossTensors lt = training_loss(t, model, ex, K, tc, &rng);
      ce += lt.ce.scalar();
      sum += lt.sum.scalar();
      total += lt.total.scalar();
      src_info += lt.mean_src_info;
      tgt_info += lt.mean_tgt_info;
      t.backward(scale(lt.total, 1.0 / tc.batch));
    }
    if (!std::isfinite(total))
      throw std::runtime_error("train: loss diverged at step " + std::to_string(step));
    clip_global_norm(params, tc.grad_clip);
    opt.step(params);

    if (log && (step == 1 || step == tc.steps || step % tc.log_every == 0)) {
      nlohmann::ordered_json row;
      row["step"] = step;
      row["ce"] = ce / tc.batch;
      row["sum"] = sum / tc.batch;
      row["total"] = total / tc.batch;
      row["mean_src_info"] = src_info / tc.batch;
      row["mean_tgt_info"] = tgt_info / tc.batch;
      *log << row.dump() << "\n";
    }
  }
  return model;
}

double teacher_forced_accuracy(Model& m, const std::vector<SentencePair>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("accuracy: empty corpus");
  long long hit = 0, total = 0;
  for (const SentencePair& ex : corpus) {
    std::vector<int> src = ex.src;
    src.push_back(kEos);
    std::vector<int> dec_in;
    dec_in.push_back(kBos);
    dec_in.insert(dec_in.end(), ex.tgt.begin(), ex.tgt.end());
    std::vector<int> gold = ex.tgt;
    gold.push_back(kEos);
    Tape t;
    ForwardOptions opt;
    const Matrix logits = forward_pass(t, m, src, dec_in, dec_in, opt).logits.value();
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      hit += argmax_row(logits.row(i)) == gold[i];
      ++total;
    }
  }
  return double(hit) / double(total);
}

std::string sweep_csv(Model& m, const std::vector<SentencePair>& eval,
                      const std::vector<double>& ks) {
  if (eval.empty()) throw std::invalid_argument("sweep: empty evaluation corpus");
  if (ks.empty()) throw std::invalid_argument("sweep: no K values");
  std::string out = csv_header() + "\n";
  for (double K : ks) {
    std::vector<std::vector<int>> hyps, refs;
    std::vector<LatencyReport> reports;
    for (const SentencePair& ex : eval) {
      SimResult r = simulate(m, ex.src, K);
      std::vector<int> hyp = r.emitted;
      if (!hyp.empty() && hyp.back() == kEos) hyp.pop_back();
      hyps.push_back(std::move(hyp));
      refs.push_back(ex.tgt);
      reports.push_back(sentence_report(r.schedule));
    }
    char param[32];
    std::snprintf(param, sizeof param, "%.2f", K);
    out += csv_row("wait-info", param, bleu(hyps, refs), corpus_report(reports)) + "\n";
  }
  return out;
}

namespace {

double quantile(const std::vector<double>& sorted, double p) {
  const double idx = p * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(idx);
  const double frac = idx - double(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

std::map<char, InfoStats> info_class_stats(Model& m,
                                           const std::vector<SentencePair>& corpus) {
  std::map<char, std::vector<double>> grouped;
  for (const SentencePair& ex : corpus) {
    if (ex.cls.empty()) continue;
    const auto vals = token_info_values(m, ex.src, 's');
    for (std::size_t i = 0; i < ex.src.size(); ++i) grouped[ex.cls[i]].push_back(vals[i]);
  }
  if (grouped.empty())
    throw std::invalid_argument("info_class_stats: corpus carries no class tags");
  std::map<char, InfoStats> out;
  for (auto& [cls, vals] : grouped) {
    std::sort(vals.begin(), vals.end());
    InfoStats st;
    st.count = static_cast<int>(vals.size());
    for (double v : vals) st.mean += v;
    st.mean /= double(vals.size());
    st.q1 = quantile(vals, 0.25);
    st.median = quantile(vals, 0.5);
    st.q3 = quantile(vals, 0.75);
    out.emplace(cls, st);
  }
  return out;
}

std::string info_class_report(Model& m, const std::vector<SentencePair>& corpus) {
  std::string out;
  for (const auto& [cls, st] : info_class_stats(m, corpus)) {
    char line[160];
    std::snprintf(line, sizeof line,
                  "class %c: count=%d mean=%.4f q1=%.4f median=%.4f q3=%.4f\n", cls,
                  st.count, st.mean, st.q1, st.median, st.q3);
    out += line;
  }
  return out;
}

}  // namespace simt
