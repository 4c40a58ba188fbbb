#include "simt/corpus.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace simt {

std::string token_name(int id) {
  switch (id) {
    case kBos: return "<bos>";
    case kEos: return "<eos>";
    case kUnk: return "<unk>";
    case kFiller: return "<f>";
    default: break;
  }
  if (id < 0 || id >= kVocabSize)
    throw std::invalid_argument("token_name: id " + std::to_string(id) + " out of range");
  char buf[8];
  std::snprintf(buf, sizeof buf, "w%02d", id);
  return buf;
}

std::vector<SentencePair> generate_corpus(const std::string& task, int count,
                                          unsigned long long seed) {
  if (task != "copy" && task != "reverse" && task != "skewed-copy")
    throw std::invalid_argument("generate_corpus: unknown task '" + task + "'");
  if (count <= 0) throw std::invalid_argument("generate_corpus: count must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len_dist(4, 16);
  std::uniform_int_distribution<int> tok_dist(kFirstContent, kVocabSize - 1);

  std::vector<SentencePair> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    const int len = len_dist(rng);
    std::vector<int> content(len);
    for (int& t : content) t = tok_dist(rng);

    SentencePair pair;
    if (task == "copy") {
      pair.src = content;
      pair.tgt = content;
    } else if (task == "reverse") {
      pair.src = content;
      pair.tgt.assign(content.rbegin(), content.rend());
    } else {
      for (int p = 0; p < len; ++p) {
        if (p % 2 == 0) {
          pair.src.push_back(kFiller);
          pair.cls.push_back('F');
        }
        pair.src.push_back(content[p]);
        pair.cls.push_back('C');
      }
      pair.tgt = content;
    }
    out.push_back(std::move(pair));
  }
  return out;
}

void save_corpus_jsonl(const std::string& path, const std::vector<SentencePair>& pairs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_corpus_jsonl: cannot open " + path);
  for (const SentencePair& p : pairs) {
    nlohmann::ordered_json j;
    j["src"] = p.src;
    j["tgt"] = p.tgt;
    if (!p.cls.empty()) {
      std::vector<std::string> cls;
      cls.reserve(p.cls.size());
      for (char c : p.cls) cls.emplace_back(1, c);
      j["cls"] = cls;
    }
    f << j.dump() << "\n";
  }
}

std::vector<SentencePair> load_corpus_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_corpus_jsonl: cannot open " + path);
  std::vector<SentencePair> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    SentencePair p;
    p.src = j.at("src").get<std::vector<int>>();
    p.tgt = j.at("tgt").get<std::vector<int>>();
    if (j.contains("cls")) {
      for (const auto& c : j.at("cls")) {
        const std::string s = c.get<std::string>();
        if (s != "C" && s != "F")
          throw std::runtime_error(path + ":" + std::to_string(line_no) + ": bad class " + s);
        p.cls.push_back(s[0]);
      }
      if (p.cls.size() != p.src.size())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": class/src length mismatch");
    }
    if (p.src.empty() || p.tgt.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty sentence");
    for (int id : p.src)
      if (id < 0 || id >= kVocabSize)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": id out of range");
    for (int id : p.tgt)
      if (id < 0 || id >= kVocabSize)
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": id out of range");
    out.push_back(std::move(p));
  }
  if (out.empty()) throw std::runtime_error(path + ": empty corpus");
  return out;
}

}  // namespace simt
