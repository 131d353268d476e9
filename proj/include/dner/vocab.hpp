#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dner/corpus.hpp"
#include "dner/tensor.hpp"

namespace dner {

// Token inventory. Index 0 is always the unknown token; every other index
// is a training token in first-seen order.
class Vocab {
 public:
  static constexpr int kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocab() {
    ids_[kUnkToken] = 0;
    tokens_.push_back(kUnkToken);
    freq_.push_back(0);
  }

  static Vocab build(const std::vector<AnnotatedSentence>& corpus) {
    Vocab v;
    for (const auto& s : corpus)
      for (const auto& tok : s.tokens) v.observe(tok);
    return v;
  }

  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    if (tokens.empty() || tokens[0] != kUnkToken)
      throw std::invalid_argument("vocab list must start with " + std::string(kUnkToken));
    for (size_t i = 1; i < tokens.size(); ++i) {
      if (v.ids_.count(tokens[i])) throw std::invalid_argument("duplicate vocab token: " + tokens[i]);
      v.ids_[tokens[i]] = static_cast<int>(v.tokens_.size());
      v.tokens_.push_back(tokens[i]);
      v.freq_.push_back(0);
    }
    return v;
  }

  void observe(const std::string& tok) {
    auto it = ids_.find(tok);
    if (it == ids_.end()) {
      ids_[tok] = static_cast<int>(tokens_.size());
      tokens_.push_back(tok);
      freq_.push_back(1);
    } else {
      ++freq_[it->second];
    }
  }

  int id(const std::string& tok) const {
    auto it = ids_.find(tok);
    return it == ids_.end() ? kUnk : it->second;
  }
  const std::string& token(int id) const { return tokens_.at(id); }
  int64_t frequency(int id) const { return freq_.at(id); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> tokens_;
  std::vector<int64_t> freq_;
};

// Loads word vectors from a text file, one "token v1 .. vd" line each,
// into the rows of emb for tokens present in vocab. Rows for tokens the
// file does not cover keep their initialization. Returns the hit count.
template <typename Real>
int load_pretrained_embeddings(const std::string& path, const Vocab& vocab, TensorT<Real>& emb) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
  std::string line;
  int hits = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    int id = vocab.id(tok);
    if (id == Vocab::kUnk && tok != Vocab::kUnkToken) {
      continue;
    }
    std::vector<Real> vec;
    double x;
    while (ss >> x) vec.push_back(static_cast<Real>(x));
    if (static_cast<int>(vec.size()) != emb.cols)
      throw std::runtime_error("embeddings file line " + std::to_string(line_no) + ": expected " +
                               std::to_string(emb.cols) + " values, got " +
                               std::to_string(vec.size()));
    std::copy(vec.begin(), vec.end(), emb.value.begin() + static_cast<size_t>(id) * emb.cols);
    ++hits;
  }
  return hits;
}

}  // namespace dner
