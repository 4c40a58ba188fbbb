// Info-aware Transformer: encoder/decoder with a diagonal info bias in every
// self-attention and info-consistency reweighting in every cross-attention,
// plus prefix-masked training, incremental simulation, and checkpointing.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "simt/corpus.hpp"
#include "simt/info_model.hpp"
#include "simt/policy.hpp"
#include "simt/tensor.hpp"

namespace simt {

struct ModelConfig {
  int src_vocab = kVocabSize;
  int tgt_vocab = kVocabSize;
  int d_model = 64;
  int heads = 4;
  int enc_layers = 2;
  int dec_layers = 2;
  int ffn = 128;
  double dropout = 0.1;
  int max_len = 64;
  std::string info_provider = "attention";  // attention | frequency | norm
  bool fix_src_info_one = false;            // force I_src = 1 (ablation)
  bool fix_tgt_info_one = false;            // force I_tgt = 1 (ablation)
  bool info_aware_self_attn = true;
  bool info_consistent_cross_attn = true;
};

void validate_config(const ModelConfig& cfg);

struct AttnBlock {
  Parameter wq, bq, wk, bk, wv, bv, wo, bo;
  AttnBlock(const std::string& prefix, int d, std::mt19937_64& rng);
};

struct FfnBlock {
  Parameter w1, b1, w2, b2;
  FfnBlock(const std::string& prefix, int d, int hidden, std::mt19937_64& rng);
};

struct NormBlock {
  Parameter gain, bias;
  NormBlock(const std::string& prefix, int d);
};

struct EncLayer {
  AttnBlock self;
  NormBlock ln1;
  FfnBlock ff;
  NormBlock ln2;
  EncLayer(const std::string& prefix, const ModelConfig& cfg, std::mt19937_64& rng);
};

struct DecLayer {
  AttnBlock self;
  NormBlock ln1;
  AttnBlock cross;
  NormBlock ln2;
  FfnBlock ff;
  NormBlock ln3;
  DecLayer(const std::string& prefix, const ModelConfig& cfg, std::mt19937_64& rng);
};

struct Model {
  ModelConfig cfg;
  Parameter src_embed, tgt_embed;
  std::vector<EncLayer> enc;
  std::vector<DecLayer> dec;
  Parameter out_w, out_b;
  InfoQuantizer src_quant, tgt_quant;
  // Per-vocab infos for the frequency provider; neutral 1.0 until calibrated.
  Matrix src_info_table, tgt_info_table;
  Matrix pe;  // max_len x d sinusoidal positions

  Model(const ModelConfig& cfg, unsigned long long seed);
  std::vector<Parameter*> params();  // fixed serialization order
  void zero_grads();
};

// Info column for `tokens` under the configured provider and fix flags.
// side is 's' or 't'. Differentiable only for the learned provider.
Tensor token_infos(Tape& t, Model& m, const std::vector<int>& tokens, char side);
// Plain values of the above, for policy decisions and mask construction.
std::vector<double> token_info_values(Model& m, const std::vector<int>& tokens, char side);

struct ForwardOptions {
  const Matrix* cross_keep = nullptr;      // dec_len x n visibility; null = full
  bool strict_encoder_mask = false;        // re-encode each visible prefix
  std::mt19937_64* dropout_rng = nullptr;  // null = evaluation mode
};

struct Encoded {
  Tensor states;  // n x d final encoder output
  Tensor I_src;   // n x 1
};

Encoded encode_block(Tape& t, Model& m, const std::vector<int>& src_tokens,
                     const ForwardOptions& opt);

struct ForwardOut {
  Tensor logits;  // dec_len x tgt_vocab
  Tensor I_src;   // n x 1, markers included
  Tensor I_tgt;   // dec_len x 1, aligned with dec_info_tokens
};

// dec_info_tokens supply the target-side infos: gold tokens during training,
// the decoder inputs themselves at inference.
ForwardOut forward_pass(Tape& t, Model& m, const std::vector<int>& src_tokens,
                        const std::vector<int>& dec_input,
                        const std::vector<int>& dec_info_tokens,
                        const ForwardOptions& opt);

// m x n visibility from cumulative infos: row i sees columns j <= g_K(i).
// Rows are nested and never empty. An infinite K yields full visibility.
Matrix build_simt_mask(const std::vector<double>& I_src,
                       const std::vector<double>& I_tgt, double K);

struct SimOptions {
  int cap_extra = 10;  // emission cap 2n + cap_extra
};

struct SimResult {
  std::vector<int> emitted;  // ends with <eos> unless the cap was hit
  ActionTrace trace;
  Schedule schedule;
};

// Live READ/WRITE loop over a raw source sentence (markers added inside).
// The first source token is read before any decision; WRITE happens when the
// info condition holds or the whole source is read; the source prefix is
// re-encoded after each READ.
SimResult simulate(Model& m, const std::vector<int>& src_sentence, double K,
                   const SimOptions& opt = {});

// Versioned container: text header with the config, then raw little-endian
// doubles for every parameter in params() order, then the two info tables.
void save_checkpoint(Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace simt
