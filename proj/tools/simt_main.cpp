// Command-line front end: train, simulate, sweep, metrics, inspect-info,
// gen-corpus. Exit codes: 0 success, 1 usage error, 2 runtime failure.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "simt/bleu.hpp"
#include "simt/corpus.hpp"
#include "simt/info_model.hpp"
#include "simt/latency.hpp"
#include "simt/train.hpp"
#include "simt/transformer.hpp"

namespace {

using namespace simt;

int token_from_string(const std::string& s) {
  for (int id = 0; id < kVocabSize; ++id)
    if (token_name(id) == s) return id;
  std::size_t used = 0;
  int id = -1;
  try {
    id = std::stoi(s, &used);
  } catch (const std::exception&) {
  }
  if (s.empty() || used != s.size() || id < 0 || id >= kVocabSize)
    throw std::invalid_argument("unknown token '" + s + "'");
  return id;
}

std::vector<int> parse_tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<int> out;
  std::string item;
  while (ss >> item) out.push_back(token_from_string(item));
  if (out.empty()) throw std::invalid_argument("no tokens given");
  return out;
}

std::string token_names(const std::vector<int>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += token_name(toks[i]);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

struct TrainArgs {
  std::string config_path, out_path, log_path;
  std::vector<std::string> sets;
};

int run_train(const TrainArgs& a) {
  TrainConfig tc;
  if (!a.config_path.empty()) tc = parse_config_file(a.config_path);
  for (const std::string& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_config_kv(tc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate_train_config(tc);

  std::ofstream log;
  std::ostream* log_stream = nullptr;
  if (!a.log_path.empty()) {
    log.open(a.log_path);
    if (!log) throw std::runtime_error("cannot open " + a.log_path + " for writing");
    log_stream = &log;
  }
  Model model = train_model(tc, log_stream);
  save_checkpoint(model, a.out_path);

  const auto eval = generate_corpus(tc.task, tc.eval_size, tc.seed + 1000);
  std::printf("checkpoint\t%s\n", a.out_path.c_str());
  std::printf("accuracy\t%.4f\n", teacher_forced_accuracy(model, eval));
  return 0;
}

struct SimulateArgs {
  std::string ckpt, src, corpus_path, trace_path;
  double k = 3.0;
};

std::string simulate_block(Model& model, const std::vector<int>& sentence, double k) {
  SimResult r = simulate(model, sentence, k);
  std::string out = format_trace(r.trace);
  out += "emitted\t" + token_names(r.emitted) + "\n";
  if (r.trace.hit_cap) out += "note\temission cap reached\n";
  return out;
}

int run_simulate(const SimulateArgs& a) {
  Model model = load_checkpoint(a.ckpt);
  std::string out;
  if (!a.src.empty()) {
    out = simulate_block(model, parse_tokens(a.src), a.k);
  } else {
    const auto corpus = load_corpus_jsonl(a.corpus_path);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      out += "sentence\t" + std::to_string(i) + "\n";
      out += simulate_block(model, corpus[i].src, a.k);
      out += "\n";
    }
  }
  if (a.trace_path.empty()) std::fputs(out.c_str(), stdout);
  else write_text(a.trace_path, out);
  return 0;
}

struct SweepArgs {
  std::string ckpt, corpus_path, task = "copy", ks = "1,2,3,4,5,6,7,8,9", out_path;
  int eval_size = 200;
  unsigned long long seed = 1001;
};

double parse_strict_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (s.empty() || used != s.size())
    throw std::invalid_argument("bad K value '" + s + "'");
  return v;
}

// "1..15" expands to consecutive integers; otherwise a comma list of reals.
std::vector<double> parse_k_list(const std::string& text) {
  std::vector<double> ks;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = int(parse_strict_real(text.substr(0, dots)));
    const int hi = int(parse_strict_real(text.substr(dots + 2)));
    if (lo > hi) throw std::invalid_argument("empty K range '" + text + "'");
    for (int k = lo; k <= hi; ++k) ks.push_back(k);
    return ks;
  }
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) ks.push_back(parse_strict_real(item));
  if (ks.empty()) throw std::invalid_argument("no K values given");
  return ks;
}

int run_sweep(const SweepArgs& a) {
  Model model = load_checkpoint(a.ckpt);
  const std::vector<double> ks = parse_k_list(a.ks);
  const auto eval = a.corpus_path.empty()
                        ? generate_corpus(a.task, a.eval_size, a.seed)
                        : load_corpus_jsonl(a.corpus_path);
  const std::string csv = sweep_csv(model, eval, ks);
  if (a.out_path.empty()) std::fputs(csv.c_str(), stdout);
  else write_text(a.out_path, csv);
  return 0;
}

struct MetricsArgs {
  std::string schedule_path;
  int n = 0;
};

int run_metrics(const MetricsArgs& a) {
  std::ifstream f(a.schedule_path);
  if (!f) throw std::runtime_error("cannot open " + a.schedule_path);
  Schedule s;
  s.n = a.n;
  int g = 0;
  while (f >> g) s.g.push_back(g);
  if (!f.eof()) throw std::runtime_error("schedule file holds non-integer data");
  const LatencyReport r = sentence_report(s);
  std::printf("AL\t%.2f\n", r.al);
  std::printf("CW\t%.2f\n", r.cw);
  std::printf("AP\t%.2f\n", r.ap);
  std::printf("DAL\t%.2f\n", r.dal);
  std::printf("early_stop\t%d\n", r.early_stop ? 1 : 0);
  return 0;
}

struct InspectArgs {
  std::string ckpt, tokens, task, corpus_path;
  int size = 200;
  unsigned long long seed = 1001;
};

int run_inspect(const InspectArgs& a) {
  Model model = load_checkpoint(a.ckpt);
  if (!a.tokens.empty()) {
    const std::vector<int> toks = parse_tokens(a.tokens);
    const auto vals = token_info_values(model, toks, 's');
    for (std::size_t i = 0; i < toks.size(); ++i)
      std::printf("%s\t%.4f\n", token_name(toks[i]).c_str(), vals[i]);
    return 0;
  }
  if (!a.corpus_path.empty()) {
    // Source-side infos of every distinct token in the corpus, ascending id.
    const auto corpus = load_corpus_jsonl(a.corpus_path);
    std::vector<char> seen(kVocabSize, 0);
    for (const SentencePair& ex : corpus)
      for (int t : ex.src) seen[t] = 1;
    std::vector<int> toks;
    for (int id = 0; id < kVocabSize; ++id)
      if (seen[id]) toks.push_back(id);
    if (toks.empty()) throw std::runtime_error("corpus has no source tokens");
    const auto vals = token_info_values(model, toks, 's');
    for (std::size_t i = 0; i < toks.size(); ++i)
      std::printf("%s\t%.4f\n", token_name(toks[i]).c_str(), vals[i]);
    return 0;
  }
  const auto corpus = generate_corpus(a.task, a.size, a.seed);
  std::fputs(info_class_report(model, corpus).c_str(), stdout);
  return 0;
}

struct GenArgs {
  std::string task = "copy", out_path;
  int count = 2000;
  unsigned long long seed = 1;
};

int run_gen(const GenArgs& a) {
  save_corpus_jsonl(a.out_path, generate_corpus(a.task, a.count, a.seed));
  std::printf("wrote\t%d\t%s\n", a.count, a.out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous-translation laboratory"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* cmd_train = app.add_subcommand("train", "Train a model and save a checkpoint");
  cmd_train->add_option("--config", train_args.config_path, "key=value config file");
  cmd_train->add_option("--set", train_args.sets, "override, e.g. --set steps=500");
  cmd_train->add_option("--out", train_args.out_path, "checkpoint path")->required();
  cmd_train->add_option("--log", train_args.log_path, "JSONL progress file");

  SimulateArgs sim_args;
  auto* cmd_sim = app.add_subcommand("simulate", "Stream sentences through the policy");
  cmd_sim->add_option("--ckpt", sim_args.ckpt, "checkpoint path")->required();
  auto* opt_sim_corpus =
      cmd_sim->add_option("--corpus", sim_args.corpus_path, "JSONL corpus to stream");
  auto* opt_sim_src =
      cmd_sim->add_option("--src", sim_args.src, "one source sentence, e.g. 'w10 w11'");
  cmd_sim->add_option("--K,--k", sim_args.k, "info threshold K");
  cmd_sim->add_option("--trace", sim_args.trace_path, "write traces here instead of stdout");
  opt_sim_src->excludes(opt_sim_corpus);

  SweepArgs sweep_args;
  auto* cmd_sweep = app.add_subcommand("sweep", "CSV of BLEU and latency across K");
  cmd_sweep->add_option("--ckpt", sweep_args.ckpt, "checkpoint path")->required();
  auto* opt_sw_corpus =
      cmd_sweep->add_option("--corpus", sweep_args.corpus_path, "JSONL evaluation corpus");
  auto* opt_sw_task = cmd_sweep->add_option("--task", sweep_args.task, "evaluation task");
  cmd_sweep->add_option("--K-list,--ks", sweep_args.ks,
                        "K values: '1..15' or comma list, 'inf' allowed");
  auto* opt_sw_size =
      cmd_sweep->add_option("--eval-size", sweep_args.eval_size, "sentences to evaluate");
  auto* opt_sw_seed =
      cmd_sweep->add_option("--seed", sweep_args.seed, "evaluation corpus seed");
  cmd_sweep->add_option("--csv,--out", sweep_args.out_path,
                        "write CSV here instead of stdout");
  opt_sw_corpus->excludes(opt_sw_task)->excludes(opt_sw_size)->excludes(opt_sw_seed);

  MetricsArgs met_args;
  auto* cmd_met = app.add_subcommand("metrics", "Latency metrics for a schedule file");
  cmd_met->add_option("--schedule", met_args.schedule_path, "whitespace-separated g values")
      ->required();
  cmd_met->add_option("--n", met_args.n, "full source length")->required();

  InspectArgs ins_args;
  auto* cmd_ins = app.add_subcommand("inspect-info", "Dump learned source-token infos");
  cmd_ins->add_option("--ckpt", ins_args.ckpt, "checkpoint path")->required();
  auto* opt_in_corpus = cmd_ins->add_option("--corpus", ins_args.corpus_path,
                                            "JSONL corpus: dump its distinct tokens");
  auto* opt_tokens = cmd_ins->add_option("--tokens", ins_args.tokens, "tokens to price");
  auto* opt_task = cmd_ins->add_option("--task", ins_args.task,
                                       "class report over a generated corpus");
  cmd_ins->add_option("--size", ins_args.size, "corpus size for the class report");
  cmd_ins->add_option("--seed", ins_args.seed, "corpus seed for the class report");
  opt_tokens->excludes(opt_task)->excludes(opt_in_corpus);
  opt_task->excludes(opt_in_corpus);

  GenArgs gen_args;
  auto* cmd_gen = app.add_subcommand("gen-corpus", "Write a synthetic corpus as JSONL");
  cmd_gen->add_option("--task", gen_args.task, "copy | reverse | skewed-copy");
  cmd_gen->add_option("--count", gen_args.count, "number of sentence pairs");
  cmd_gen->add_option("--seed", gen_args.seed, "generator seed");
  cmd_gen->add_option("--out", gen_args.out_path, "output JSONL path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  if (cmd_sim->parsed() && sim_args.src.empty() && sim_args.corpus_path.empty()) {
    std::cerr << "simulate needs --corpus or --src\n";
    return 1;
  }
  if (cmd_ins->parsed() && ins_args.tokens.empty() && ins_args.task.empty() &&
      ins_args.corpus_path.empty()) {
    std::cerr << "inspect-info needs --corpus, --tokens, or --task\n";
    return 1;
  }

  try {
    if (cmd_train->parsed()) return run_train(train_args);
    if (cmd_sim->parsed()) return run_simulate(sim_args);
    if (cmd_sweep->parsed()) return run_sweep(sweep_args);
    if (cmd_met->parsed()) return run_metrics(met_args);
    if (cmd_ins->parsed()) return run_inspect(ins_args);
    if (cmd_gen->parsed()) return run_gen(gen_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
