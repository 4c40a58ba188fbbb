#include "simt/transformer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace simt {

void validate_config(const ModelConfig& cfg) {
  if (cfg.d_model < 1 || cfg.heads < 1 || cfg.d_model % cfg.heads != 0)
    throw std::invalid_argument("config: d_model must be a positive multiple of heads");
  if (cfg.src_vocab < 1 || cfg.tgt_vocab < 1 || cfg.enc_layers < 1 || cfg.dec_layers < 1 ||
      cfg.ffn < 1 || cfg.max_len < 2)
    throw std::invalid_argument("config: sizes must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw std::invalid_argument("config: dropout must be in [0, 1)");
  if (cfg.info_provider != "attention" && cfg.info_provider != "frequency" &&
      cfg.info_provider != "norm")
    throw std::invalid_argument("config: unknown info provider '" + cfg.info_provider + "'");
}

AttnBlock::AttnBlock(const std::string& p, int d, std::mt19937_64& rng)
    : wq(p + ".wq", xavier_uniform(d, d, rng)),
      bq(p + ".bq", Matrix::Zero(1, d)),
      wk(p + ".wk", xavier_uniform(d, d, rng)),
      bk(p + ".bk", Matrix::Zero(1, d)),
      wv(p + ".wv", xavier_uniform(d, d, rng)),
      bv(p + ".bv", Matrix::Zero(1, d)),
      wo(p + ".wo", xavier_uniform(d, d, rng)),
      bo(p + ".bo", Matrix::Zero(1, d)) {}

FfnBlock::FfnBlock(const std::string& p, int d, int hidden, std::mt19937_64& rng)
    : w1(p + ".w1", xavier_uniform(d, hidden, rng)),
      b1(p + ".b1", Matrix::Zero(1, hidden)),
      w2(p + ".w2", xavier_uniform(hidden, d, rng)),
      b2(p + ".b2", Matrix::Zero(1, d)) {}

NormBlock::NormBlock(const std::string& p, int d)
    : gain(p + ".gain", Matrix::Ones(1, d)), bias(p + ".bias", Matrix::Zero(1, d)) {}

EncLayer::EncLayer(const std::string& p, const ModelConfig& cfg, std::mt19937_64& rng)
    : self(p + ".self", cfg.d_model, rng),
      ln1(p + ".ln1", cfg.d_model),
      ff(p + ".ff", cfg.d_model, cfg.ffn, rng),
      ln2(p + ".ln2", cfg.d_model) {}

DecLayer::DecLayer(const std::string& p, const ModelConfig& cfg, std::mt19937_64& rng)
    : self(p + ".self", cfg.d_model, rng),
      ln1(p + ".ln1", cfg.d_model),
      cross(p + ".cross", cfg.d_model, rng),
      ln2(p + ".ln2", cfg.d_model),
      ff(p + ".ff", cfg.d_model, cfg.ffn, rng),
      ln3(p + ".ln3", cfg.d_model) {}

namespace {

Matrix sinusoidal_pe(int max_len, int d) {
  Matrix pe(max_len, d);
  for (int pos = 0; pos < max_len; ++pos)
    for (int i = 0; i < d; ++i) {
      const double angle = pos / std::pow(10000.0, double(2 * (i / 2)) / d);
      pe(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return pe;
}

}  // namespace

Model::Model(const ModelConfig& c, unsigned long long seed)
    : cfg((validate_config(c), c)),
      src_embed("src_embed", Matrix::Zero(c.src_vocab, c.d_model)),
      tgt_embed("tgt_embed", Matrix::Zero(c.tgt_vocab, c.d_model)),
      out_w("out.w", Matrix::Zero(c.d_model, c.tgt_vocab)),
      out_b("out.b", Matrix::Zero(1, c.tgt_vocab)),
      src_quant("src_quant", c.d_model),
      tgt_quant("tgt_quant", c.d_model),
      src_info_table(Matrix::Ones(c.src_vocab, 1)),
      tgt_info_table(Matrix::Ones(c.tgt_vocab, 1)),
      pe(sinusoidal_pe(c.max_len, c.d_model)) {
  // Single generator, fixed consumption order.
  std::mt19937_64 rng(seed);
  src_embed.value = xavier_uniform(cfg.src_vocab, cfg.d_model, rng);
  tgt_embed.value = xavier_uniform(cfg.tgt_vocab, cfg.d_model, rng);
  enc.reserve(cfg.enc_layers);
  for (int l = 0; l < cfg.enc_layers; ++l)
    enc.emplace_back("enc" + std::to_string(l), cfg, rng);
  dec.reserve(cfg.dec_layers);
  for (int l = 0; l < cfg.dec_layers; ++l)
    dec.emplace_back("dec" + std::to_string(l), cfg, rng);
  out_w.value = xavier_uniform(cfg.d_model, cfg.tgt_vocab, rng);
  src_quant = InfoQuantizer("src_quant", cfg.d_model, rng);
  tgt_quant = InfoQuantizer("tgt_quant", cfg.d_model, rng);
}

std::vector<Parameter*> Model::params() {
  std::vector<Parameter*> ps = {&src_embed, &tgt_embed};
  for (EncLayer& l : enc) {
    for (Parameter* p : {&l.self.wq, &l.self.bq, &l.self.wk, &l.self.bk, &l.self.wv,
                         &l.self.bv, &l.self.wo, &l.self.bo})
      ps.push_back(p);
    ps.push_back(&l.ln1.gain);
    ps.push_back(&l.ln1.bias);
    for (Parameter* p : {&l.ff.w1, &l.ff.b1, &l.ff.w2, &l.ff.b2}) ps.push_back(p);
    ps.push_back(&l.ln2.gain);
    ps.push_back(&l.ln2.bias);
  }
  for (DecLayer& l : dec) {
    for (Parameter* p : {&l.self.wq, &l.self.bq, &l.self.wk, &l.self.bk, &l.self.wv,
                         &l.self.bv, &l.self.wo, &l.self.bo})
      ps.push_back(p);
    ps.push_back(&l.ln1.gain);
    ps.push_back(&l.ln1.bias);
    for (Parameter* p : {&l.cross.wq, &l.cross.bq, &l.cross.wk, &l.cross.bk, &l.cross.wv,
                         &l.cross.bv, &l.cross.wo, &l.cross.bo})
      ps.push_back(p);
    ps.push_back(&l.ln2.gain);
    ps.push_back(&l.ln2.bias);
    for (Parameter* p : {&l.ff.w1, &l.ff.b1, &l.ff.w2, &l.ff.b2}) ps.push_back(p);
    ps.push_back(&l.ln3.gain);
    ps.push_back(&l.ln3.bias);
  }
  ps.push_back(&out_w);
  ps.push_back(&out_b);
  for (Parameter* p : src_quant.params()) ps.push_back(p);
  for (Parameter* p : tgt_quant.params()) ps.push_back(p);
  return ps;
}

void Model::zero_grads() {
  for (Parameter* p : params()) p->zero_grad();
}

namespace {

Tensor apply_dropout(Tape& t, const Tensor& x, double p, std::mt19937_64* rng) {
  if (!rng || p <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = keep(*rng) ? 1.0 / (1.0 - p) : 0.0;
  return mul(x, t.constant(std::move(mask)));
}

// Infos for `tokens` given their raw embedding rows (used only by the learned
// provider; the heuristic providers and fix flags yield detached constants).
Tensor infos_from(Tape& t, Model& m, const Tensor& raw, const std::vector<int>& tokens,
                  char side) {
  const bool fix = side == 's' ? m.cfg.fix_src_info_one : m.cfg.fix_tgt_info_one;
  if (fix) return t.constant(Matrix::Ones(static_cast<Eigen::Index>(tokens.size()), 1));
  if (m.cfg.info_provider == "attention")
    return (side == 's' ? m.src_quant : m.tgt_quant).infos(t, raw);
  Matrix col(static_cast<Eigen::Index>(tokens.size()), 1);
  if (m.cfg.info_provider == "frequency") {
    const Matrix& table = side == 's' ? m.src_info_table : m.tgt_info_table;
    for (std::size_t i = 0; i < tokens.size(); ++i) col(i, 0) = table(tokens[i], 0);
  } else {
    const auto table =
        norm_info_table(side == 's' ? m.src_embed.value : m.tgt_embed.value);
    for (std::size_t i = 0; i < tokens.size(); ++i) col(i, 0) = table[tokens[i]];
  }
  return t.constant(std::move(col));
}

Matrix causal_keep(Eigen::Index l) {
  Matrix k = Matrix::Zero(l, l);
  for (Eigen::Index i = 0; i < l; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = 1.0;
  return k;
}

// Multi-head attention. diag biases the self scores (q and kv must agree);
// cross_w reweights the softmax per element and keep masks visibility.
Tensor attention(Tape& t, AttnBlock& a, int heads, const Tensor& q_in, const Tensor& kv_in,
                 const Tensor* diag, bool causal, const Matrix* keep,
                 const Tensor* cross_w) {
  const Eigen::Index d = q_in.cols();
  const Eigen::Index dk = d / heads;
  Tensor q = add_rowvec(matmul(q_in, t.use(a.wq)), t.use(a.bq));
  Tensor k = add_rowvec(matmul(kv_in, t.use(a.wk)), t.use(a.bk));
  Tensor v = add_rowvec(matmul(kv_in, t.use(a.wv)), t.use(a.bv));
  Matrix causal_mask;
  if (causal) causal_mask = causal_keep(q_in.rows());
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dk, dk);
    Tensor kh = slice_cols(k, h * dk, dk);
    Tensor vh = slice_cols(v, h * dk, dk);
    Tensor s = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dk)));
    if (diag) s = add_diag(s, *diag);
    if (causal) s = masked_fill(s, causal_mask);
    if (keep) s = masked_fill(s, *keep);
    Tensor att = cross_w ? weighted_softmax_rows(s, *cross_w) : softmax_rows(s);
    outs.push_back(matmul(att, vh));
  }
  return add_rowvec(matmul(concat_cols(outs), t.use(a.wo)), t.use(a.bo));
}

Tensor ffn_block(Tape& t, FfnBlock& f, const Tensor& x) {
  Tensor h = relu(add_rowvec(matmul(x, t.use(f.w1)), t.use(f.b1)));
  return add_rowvec(matmul(h, t.use(f.w2)), t.use(f.b2));
}

Tensor sublayer_norm(Tape& t, NormBlock& n, const Tensor& x, const Tensor& sub, double p,
                     std::mt19937_64* rng) {
  return layer_norm_rows(add(x, apply_dropout(t, sub, p, rng)), t.use(n.gain), t.use(n.bias));
}

// C_ij = 2 - |I_tgt_i - I_src_j|, strictly positive because infos stay
// inside (0, 2).
Tensor info_consistency(const Tensor& I_tgt, const Tensor& I_src) {
  Tensor tt = tile_cols(I_tgt, I_src.rows());
  Tensor ss = transpose(tile_cols(I_src, I_tgt.rows()));
  return add_scalar(scale(abs(sub(tt, ss)), -1.0), 2.0);
}

Tensor rows_of(const Tensor& x, Eigen::Index begin, Eigen::Index len) {
  return transpose(slice_cols(transpose(x), begin, len));
}

Tensor embed_in(Tape& t, Model& m, const Tensor& raw, std::mt19937_64* rng) {
  const Eigen::Index n = raw.rows();
  Tensor x = add(scale(raw, std::sqrt(double(m.cfg.d_model))),
                 t.constant(Matrix(m.pe.topRows(n))));
  return apply_dropout(t, x, m.cfg.dropout, rng);
}

}  // namespace

Tensor token_infos(Tape& t, Model& m, const std::vector<int>& tokens, char side) {
  if (tokens.empty()) throw std::invalid_argument("token_infos: no tokens");
  Tensor raw;
  const bool fix = side == 's' ? m.cfg.fix_src_info_one : m.cfg.fix_tgt_info_one;
  if (!fix && m.cfg.info_provider == "attention")
    raw = embedding_rows(t.use(side == 's' ? m.src_embed : m.tgt_embed), tokens);
  return infos_from(t, m, raw, tokens, side);
}

std::vector<double> token_info_values(Model& m, const std::vector<int>& tokens, char side) {
  Tape t;
  const Matrix& col = token_infos(t, m, tokens, side).value();
  std::vector<double> out(col.rows());
  for (Eigen::Index i = 0; i < col.rows(); ++i) out[i] = col(i, 0);
  return out;
}

Encoded encode_block(Tape& t, Model& m, const std::vector<int>& src_tokens,
                     const ForwardOptions& opt) {
  if (src_tokens.empty()) throw std::invalid_argument("encode: empty source");
  if (static_cast<int>(src_tokens.size()) > m.cfg.max_len)
    throw std::invalid_argument("encode: source longer than max_len");
  std::mt19937_64* rng = opt.dropout_rng;
  Tensor raw = embedding_rows(t.use(m.src_embed), src_tokens);
  Tensor info = infos_from(t, m, raw, src_tokens, 's');
  Tensor x = embed_in(t, m, raw, rng);
  Tensor bias;
  if (m.cfg.info_aware_self_attn) bias = add_scalar(info, -1.0);
  for (EncLayer& l : m.enc) {
    Tensor a = attention(t, l.self, m.cfg.heads, x, x,
                         m.cfg.info_aware_self_attn ? &bias : nullptr, false, nullptr,
                         nullptr);
    x = sublayer_norm(t, l.ln1, x, a, m.cfg.dropout, rng);
    x = sublayer_norm(t, l.ln2, x, ffn_block(t, l.ff, x), m.cfg.dropout, rng);
  }
  return {x, info};
}

namespace {

// Decoder over a single encoded source, optionally masked per row.
Tensor decode_block(Tape& t, Model& m, const std::vector<int>& dec_input,
                    const std::vector<int>& dec_info_tokens, const Tensor& enc_states,
                    const Tensor& enc_info, const Matrix* cross_keep,
                    std::mt19937_64* rng, Tensor* info_out) {
  Tensor raw = embedding_rows(t.use(m.tgt_embed), dec_input);
  Tensor info_raw = embedding_rows(t.use(m.tgt_embed), dec_info_tokens);
  Tensor info = infos_from(t, m, info_raw, dec_info_tokens, 't');
  if (info_out) *info_out = info;
  Tensor x = embed_in(t, m, raw, rng);
  Tensor bias;
  if (m.cfg.info_aware_self_attn) bias = add_scalar(info, -1.0);
  Tensor consistency;
  if (m.cfg.info_consistent_cross_attn) consistency = info_consistency(info, enc_info);
  for (DecLayer& l : m.dec) {
    Tensor a = attention(t, l.self, m.cfg.heads, x, x,
                         m.cfg.info_aware_self_attn ? &bias : nullptr, true, nullptr,
                         nullptr);
    x = sublayer_norm(t, l.ln1, x, a, m.cfg.dropout, rng);
    Tensor c = attention(t, l.cross, m.cfg.heads, x, enc_states, nullptr, false, cross_keep,
                         m.cfg.info_consistent_cross_attn ? &consistency : nullptr);
    x = sublayer_norm(t, l.ln2, x, c, m.cfg.dropout, rng);
    x = sublayer_norm(t, l.ln3, x, ffn_block(t, l.ff, x), m.cfg.dropout, rng);
  }
  return add_rowvec(matmul(x, t.use(m.out_w)), t.use(m.out_b));
}

// Strict variant: every decoder row cross-attends into its own re-encoded
// source prefix, so no information can leak from beyond the prefix.
Tensor decode_block_strict(Tape& t, Model& m, const std::vector<int>& src_tokens,
                           const std::vector<int>& dec_input,
                           const std::vector<int>& dec_info_tokens,
                           const std::vector<int>& prefix_of_row, const ForwardOptions& opt,
                           Tensor* info_out) {
  std::mt19937_64* rng = opt.dropout_rng;
  std::map<int, Encoded> prefixes;
  for (int j : prefix_of_row)
    if (!prefixes.count(j)) {
      std::vector<int> head(src_tokens.begin(), src_tokens.begin() + j);
      prefixes.emplace(j, encode_block(t, m, head, opt));
    }

  const Eigen::Index rows = static_cast<Eigen::Index>(dec_input.size());
  Tensor raw = embedding_rows(t.use(m.tgt_embed), dec_input);
  Tensor info_raw = embedding_rows(t.use(m.tgt_embed), dec_info_tokens);
  Tensor info = infos_from(t, m, info_raw, dec_info_tokens, 't');
  if (info_out) *info_out = info;
  Tensor x = embed_in(t, m, raw, rng);
  Tensor bias;
  if (m.cfg.info_aware_self_attn) bias = add_scalar(info, -1.0);
  const int heads = m.cfg.heads;
  const Eigen::Index d = m.cfg.d_model;
  const Eigen::Index dk = d / heads;

  for (DecLayer& l : m.dec) {
    Tensor a = attention(t, l.self, heads, x, x,
                         m.cfg.info_aware_self_attn ? &bias : nullptr, true, nullptr,
                         nullptr);
    x = sublayer_norm(t, l.ln1, x, a, m.cfg.dropout, rng);

    Tensor q = add_rowvec(matmul(x, t.use(l.cross.wq)), t.use(l.cross.bq));
    std::map<int, std::pair<Tensor, Tensor>> kv;
    for (auto& [j, encd] : prefixes)
      kv.emplace(j, std::make_pair(
                        add_rowvec(matmul(encd.states, t.use(l.cross.wk)), t.use(l.cross.bk)),
                        add_rowvec(matmul(encd.states, t.use(l.cross.wv)), t.use(l.cross.bv))));

    std::vector<Tensor> row_cols;  // each d x 1, transposed row outputs
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Encoded& encd = prefixes.at(prefix_of_row[r]);
      auto& [kf, vf] = kv.at(prefix_of_row[r]);
      Tensor qr = rows_of(q, r, 1);
      Tensor cons;
      if (m.cfg.info_consistent_cross_attn)
        cons = info_consistency(rows_of(info, r, 1), encd.I_src);
      std::vector<Tensor> outs;
      outs.reserve(heads);
      for (int h = 0; h < heads; ++h) {
        Tensor s = scale(matmul(slice_cols(qr, h * dk, dk),
                                transpose(slice_cols(kf, h * dk, dk))),
                         1.0 / std::sqrt(double(dk)));
        Tensor att = m.cfg.info_consistent_cross_attn ? weighted_softmax_rows(s, cons)
                                                      : softmax_rows(s);
        outs.push_back(matmul(att, slice_cols(vf, h * dk, dk)));
      }
      row_cols.push_back(transpose(concat_cols(outs)));
    }
    Tensor c = add_rowvec(matmul(transpose(concat_cols(row_cols)), t.use(l.cross.wo)),
                          t.use(l.cross.bo));
    x = sublayer_norm(t, l.ln2, x, c, m.cfg.dropout, rng);
    x = sublayer_norm(t, l.ln3, x, ffn_block(t, l.ff, x), m.cfg.dropout, rng);
  }
  return add_rowvec(matmul(x, t.use(m.out_w)), t.use(m.out_b));
}

}  // namespace

ForwardOut forward_pass(Tape& t, Model& m, const std::vector<int>& src_tokens,
                        const std::vector<int>& dec_input,
                        const std::vector<int>& dec_info_tokens,
                        const ForwardOptions& opt) {
  if (dec_input.empty() || dec_input[0] != kBos)
    throw std::invalid_argument("forward: decoder input must start with <bos>");
  if (dec_info_tokens.size() != dec_input.size())
    throw std::invalid_argument("forward: info tokens must align with decoder input");
  if (static_cast<int>(dec_input.size()) > m.cfg.max_len)
    throw std::invalid_argument("forward: target longer than max_len");
  if (opt.cross_keep) {
    if (opt.cross_keep->rows() != static_cast<Eigen::Index>(dec_input.size()) ||
        opt.cross_keep->cols() != static_cast<Eigen::Index>(src_tokens.size()))
      throw std::invalid_argument("forward: cross mask shape mismatch");
    for (Eigen::Index i = 0; i < opt.cross_keep->rows(); ++i)
      if (opt.cross_keep->row(i).maxCoeff() <= 0.0)
        throw std::invalid_argument("forward: cross mask row keeps nothing");
  }

  ForwardOut out;
  if (opt.cross_keep && opt.strict_encoder_mask) {
    std::vector<int> prefix_of_row(dec_input.size());
    for (std::size_t i = 0; i < dec_input.size(); ++i) {
      int g = static_cast<int>(opt.cross_keep->row(i).sum() + 0.5);
      if (g > static_cast<int>(src_tokens.size()))
        throw std::invalid_argument("forward: mask row wider than the source");
      prefix_of_row[i] = g;
    }
    out.I_src = token_infos(t, m, src_tokens, 's');
    out.logits = decode_block_strict(t, m, src_tokens, dec_input, dec_info_tokens,
                                     prefix_of_row, opt, &out.I_tgt);
  } else {
    Encoded enc = encode_block(t, m, src_tokens, opt);
    out.I_src = enc.I_src;
    out.logits = decode_block(t, m, dec_input, dec_info_tokens, enc.states, enc.I_src,
                              opt.cross_keep, opt.dropout_rng, &out.I_tgt);
  }
  return out;
}

Matrix build_simt_mask(const std::vector<double>& I_src, const std::vector<double>& I_tgt,
                       double K) {
  const int n = static_cast<int>(I_src.size());
  const int m = static_cast<int>(I_tgt.size());
  if (n < 1 || m < 1) throw std::invalid_argument("build_simt_mask: empty side");
  Matrix keep = Matrix::Zero(m, n);
  double tgt_cum = 0.0;
  for (int i = 1; i <= m; ++i) {
    tgt_cum += I_tgt[i - 1];
    const int g = wait_info_g(I_src, tgt_cum, K);
    for (int j = 0; j < g; ++j) keep(i - 1, j) = 1.0;
  }
  return keep;
}

SimResult simulate(Model& m, const std::vector<int>& src_sentence, double K,
                   const SimOptions& opt) {
  if (src_sentence.empty()) throw std::invalid_argument("simulate: empty source");
  std::vector<int> stream = src_sentence;
  stream.push_back(kEos);
  const int n = static_cast<int>(stream.size());
  if (n > m.cfg.max_len) throw std::invalid_argument("simulate: source longer than max_len");
  const int cap = std::min(2 * n + opt.cap_extra, m.cfg.max_len - 1);

  SimResult res;
  auto info_of = [&](int token, char side) {
    return token_info_values(m, {token}, side)[0];
  };

  int j = 1;
  res.trace.actions.push_back({'R', stream[0], 0, 0});
  double src_sum = info_of(stream[0], 's');
  std::vector<int> dec_input = {kBos};
  double tgt_sum = info_of(kBos, 't');

  int enc_j = -1;
  Matrix enc_states, enc_infos;
  ForwardOptions eval_opt;

  while (true) {
    if (static_cast<int>(res.emitted.size()) >= cap) {
      res.trace.hit_cap = true;
      break;
    }
    if (j == n || src_sum >= tgt_sum + K) {
      if (enc_j != j) {
        Tape t;
        std::vector<int> prefix(stream.begin(), stream.begin() + j);
        Encoded e = encode_block(t, m, prefix, eval_opt);
        enc_states = e.states.value();
        enc_infos = e.I_src.value();
        enc_j = j;
      }
      Tape t;
      Tensor logits = decode_block(t, m, dec_input, dec_input, t.constant(enc_states),
                                   t.constant(enc_infos), nullptr, nullptr, nullptr);
      const int y = static_cast<int>(argmax_row(logits.value().row(logits.rows() - 1)));
      res.trace.actions.push_back({'W', y, src_sum, tgt_sum});
      res.emitted.push_back(y);
      if (y == kEos) break;
      dec_input.push_back(y);
      tgt_sum += info_of(y, 't');
    } else {
      res.trace.actions.push_back({'R', stream[j], 0, 0});
      src_sum += info_of(stream[j], 's');
      ++j;
    }
  }
  res.schedule = trace_to_schedule(res.trace, n);
  return res;
}

namespace {

void put_matrix(std::ostream& os, const Matrix& v) {
  char b[8];
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint64_t>(v(i, j));
      for (int k = 0; k < 8; ++k) b[k] = static_cast<char>(bits >> (8 * k));
      os.write(b, 8);
    }
}

void get_matrix(std::istream& is, Matrix& v, const std::string& what) {
  char b[8];
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      if (!is.read(b, 8))
        throw std::runtime_error("checkpoint: truncated while reading " + what);
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k)
        bits |= std::uint64_t(static_cast<unsigned char>(b[k])) << (8 * k);
      v(i, j) = std::bit_cast<double>(bits);
    }
}

}  // namespace

void save_checkpoint(Model& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  std::size_t doubles = m.src_info_table.size() + m.tgt_info_table.size();
  for (Parameter* p : m.params()) doubles += p->value.size();
  char drop[32];
  std::snprintf(drop, sizeof drop, "%.17g", m.cfg.dropout);
  f << "simtckpt 1\n"
    << "src_vocab " << m.cfg.src_vocab << "\n"
    << "tgt_vocab " << m.cfg.tgt_vocab << "\n"
    << "d_model " << m.cfg.d_model << "\n"
    << "heads " << m.cfg.heads << "\n"
    << "enc_layers " << m.cfg.enc_layers << "\n"
    << "dec_layers " << m.cfg.dec_layers << "\n"
    << "ffn " << m.cfg.ffn << "\n"
    << "dropout " << drop << "\n"
    << "max_len " << m.cfg.max_len << "\n"
    << "info_provider " << m.cfg.info_provider << "\n"
    << "fix_src_info_one " << int(m.cfg.fix_src_info_one) << "\n"
    << "fix_tgt_info_one " << int(m.cfg.fix_tgt_info_one) << "\n"
    << "info_aware_self_attn " << int(m.cfg.info_aware_self_attn) << "\n"
    << "info_consistent_cross_attn " << int(m.cfg.info_consistent_cross_attn) << "\n"
    << "param_doubles " << doubles << "\n"
    << "end_header\n";
  for (Parameter* p : m.params()) put_matrix(f, p->value);
  put_matrix(f, m.src_info_table);
  put_matrix(f, m.tgt_info_table);
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "simtckpt 1")
    throw std::runtime_error("checkpoint: unsupported version header '" + line + "'");

  ModelConfig cfg;
  std::size_t doubles = 0;
  bool saw_end = false;
  while (std::getline(f, line)) {
    if (line == "end_header") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "src_vocab") ls >> cfg.src_vocab;
    else if (key == "tgt_vocab") ls >> cfg.tgt_vocab;
    else if (key == "d_model") ls >> cfg.d_model;
    else if (key == "heads") ls >> cfg.heads;
    else if (key == "enc_layers") ls >> cfg.enc_layers;
    else if (key == "dec_layers") ls >> cfg.dec_layers;
    else if (key == "ffn") ls >> cfg.ffn;
    else if (key == "dropout") ls >> cfg.dropout;
    else if (key == "max_len") ls >> cfg.max_len;
    else if (key == "info_provider") ls >> cfg.info_provider;
    else if (key == "fix_src_info_one") { int v; ls >> v; cfg.fix_src_info_one = v; }
    else if (key == "fix_tgt_info_one") { int v; ls >> v; cfg.fix_tgt_info_one = v; }
    else if (key == "info_aware_self_attn") { int v; ls >> v; cfg.info_aware_self_attn = v; }
    else if (key == "info_consistent_cross_attn") { int v; ls >> v; cfg.info_consistent_cross_attn = v; }
    else if (key == "param_doubles") ls >> doubles;
    else throw std::runtime_error("checkpoint: unknown header key '" + key + "'");
    if (!ls) throw std::runtime_error("checkpoint: malformed header line '" + line + "'");
  }
  if (!saw_end) throw std::runtime_error("checkpoint: missing end_header");

  Model m(cfg, 0);
  std::size_t expect = m.src_info_table.size() + m.tgt_info_table.size();
  for (Parameter* p : m.params()) expect += p->value.size();
  if (doubles != expect)
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (Parameter* p : m.params()) get_matrix(f, p->value, p->name);
  get_matrix(f, m.src_info_table, "src_info_table");
  get_matrix(f, m.tgt_info_table, "tgt_info_table");
  f.peek();
  if (!f.eof()) throw std::runtime_error("checkpoint: trailing bytes");
  return m;
}

}  // namespace simt
