#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hopchain/corpus.hpp"
#include "hopchain/rng.hpp"
#include "hopchain/tape.hpp"

// Model configuration, vocabulary, parameter initialization, and checkpoint
// persistence. The parameter store covers the encoder, the fusion projections,
// the recurrent selector, the sentence head, and the learned free vectors
// (mention stand-in, virtual end document, initial state).

namespace hopchain {

/// How mention and document embeddings combine into a hop encoding.
///   full:          attention-weighted mixture (softmax over two logits)
///   no_structured: w_m = 0, w_u = 1 (document embedding only)
///   no_weighting:  w_m = w_u = 1 (plain sum)
enum class FusionMode { full, no_structured, no_weighting };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::full: return "full";
    case FusionMode::no_structured: return "no_structured";
    case FusionMode::no_weighting: return "no_weighting";
  }
  throw contract_error("unreachable fusion mode");
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "full") return FusionMode::full;
  if (s == "no_structured") return FusionMode::no_structured;
  if (s == "no_weighting") return FusionMode::no_weighting;
  throw config_error("unknown fusion mode: " + s);
}

struct ModelConfig {
  int d_model = 64;
  int n_blocks = 2;
  int n_heads = 4;
  int d_ffn = 128;
  int max_len = 128;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  void validate() const {
    if (d_model <= 0 || n_blocks <= 0 || n_heads <= 0 || d_ffn <= 0 || max_len <= 0)
      throw config_error("model dimensions must be positive");
    if (d_model % n_heads != 0) throw config_error("d_model must be divisible by n_heads");
  }
};

/// Fixed special ids followed by the sorted unique tokens of corpus and
/// questions. Unknown tokens map to the padding id.
class Vocab {
 public:
  static constexpr int pad = 0;
  static constexpr int cls = 1;
  static constexpr int sep = 2;
  static constexpr int m_open = 3;
  static constexpr int m_close = 4;
  static constexpr int sm = 5;
  static constexpr int n_special = 6;

  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) { index(); }

  static Vocab build(const KnowledgeSource& ks, const std::vector<QAExample>& examples) {
    std::set<std::string> seen;
    for (const Document& d : ks.documents()) seen.insert(d.text.begin(), d.text.end());
    for (const QAExample& ex : examples) seen.insert(ex.question.begin(), ex.question.end());
    return Vocab(std::vector<std::string>(seen.begin(), seen.end()));
  }

  int id(const std::string& tok) const {
    auto it = index_.find(tok);
    return it == index_.end() ? pad : n_special + static_cast<int>(it->second);
  }

  int size() const { return n_special + static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void index() {
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = i;
  }
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> index_;
};

template <class Scalar>
struct ModelParams {
  ModelConfig config;
  Vocab vocab;
  ad::ParamStore<Scalar> store;
};

/// Weight matrices start Glorot-normal (std sqrt(2 / (fan_in + fan_out)));
/// embeddings and free vectors start normal(0, 0.02); biases start at zero
/// and layer-norm gains at one. Flat 0.02 everywhere leaves the attention
/// logits too close to uniform for matching heads to form within a desk-scale
/// step budget.
template <class Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, Vocab vocab, std::uint64_t seed) {
  cfg.validate();
  using M = ad::Mat<Scalar>;
  ModelParams<Scalar> p{cfg, std::move(vocab), {}};
  Rng rng(seed);
  auto normal = [&](Eigen::Index r, Eigen::Index c, double std) {
    M m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i)
        m(i, j) = static_cast<Scalar>(rng.normal(0.0, std));
    return m;
  };
  auto glorot = [&](Eigen::Index r, Eigen::Index c) {
    return normal(r, c, std::sqrt(2.0 / static_cast<double>(r + c)));
  };
  const int d = cfg.d_model;
  p.store.add("tok_emb", normal(p.vocab.size(), d, 0.02));
  p.store.add("pos_emb", normal(cfg.max_len, d, 0.02));
  for (int b = 0; b < cfg.n_blocks; ++b) {
    const std::string pre = "enc" + std::to_string(b) + ".";
    for (const char* w : {"wq", "wk", "wv", "wo"}) p.store.add(pre + w, glorot(d, d));
    for (const char* bn : {"bq", "bk", "bv", "bo"}) p.store.add(pre + bn, M::Zero(d, 1));
    p.store.add(pre + "ln1.g", M::Ones(d, 1));
    p.store.add(pre + "ln1.b", M::Zero(d, 1));
    p.store.add(pre + "ff.w1", glorot(d, cfg.d_ffn));
    p.store.add(pre + "ff.b1", M::Zero(cfg.d_ffn, 1));
    p.store.add(pre + "ff.w2", glorot(cfg.d_ffn, d));
    p.store.add(pre + "ff.b2", M::Zero(d, 1));
    p.store.add(pre + "ln2.g", M::Ones(d, 1));
    p.store.add(pre + "ln2.b", M::Zero(d, 1));
  }
  p.store.add("enc.final.g", M::Ones(d, 1));
  p.store.add("enc.final.b", M::Zero(d, 1));
  p.store.add("fuse.wk", glorot(d, d));
  p.store.add("fuse.wv", glorot(d, d));
  p.store.add("m_p", normal(d, 1, 0.02));
  p.store.add("u_e", normal(d, 1, 0.02));
  p.store.add("h_s", normal(d, 1, 0.02));
  for (const char* w : {"gru.wz", "gru.wr", "gru.wh"}) p.store.add(w, glorot(d, 2 * d));
  for (const char* bn : {"gru.bz", "gru.br", "gru.bh"}) p.store.add(bn, M::Zero(d, 1));
  p.store.add("w_s", glorot(d, d));
  return p;
}

// ---- checkpoint persistence --------------------------------------------------

namespace detail {

constexpr char kCkptMagic[4] = {'H', 'C', 'K', 'P'};
constexpr std::uint32_t kCkptVersion = 1;

template <class T>
void ck_write(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T ck_read(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw parse_error("truncated checkpoint: " + path);
  return v;
}

inline void ck_write_str(std::ofstream& out, const std::string& s) {
  ck_write(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ck_read_str(std::ifstream& in, const std::string& path) {
  const auto n = ck_read<std::uint32_t>(in, path);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw parse_error("truncated checkpoint: " + path);
  return s;
}

}  // namespace detail

template <class Scalar>
void save_checkpoint(const ModelParams<Scalar>& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write: " + path);
  out.write(detail::kCkptMagic, 4);
  detail::ck_write(out, detail::kCkptVersion);
  detail::ck_write(out, static_cast<std::uint32_t>(sizeof(Scalar)));
  const ModelConfig& c = params.config;
  for (int v : {c.d_model, c.n_blocks, c.n_heads, c.d_ffn, c.max_len})
    detail::ck_write(out, static_cast<std::int32_t>(v));
  detail::ck_write(out, static_cast<std::uint64_t>(params.vocab.tokens().size()));
  for (const auto& t : params.vocab.tokens()) detail::ck_write_str(out, t);
  detail::ck_write(out, static_cast<std::uint64_t>(params.store.size()));
  for (const auto& [name, m] : params.store.items()) {
    detail::ck_write_str(out, name);
    detail::ck_write(out, static_cast<std::uint64_t>(m.rows()));
    detail::ck_write(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(m.size())));
  }
  if (!out) throw io_error("write failed: " + path);
}

/// Scalar width (bytes) recorded in a checkpoint header, without loading it.
inline std::uint32_t checkpoint_precision(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, detail::kCkptMagic))
    throw parse_error("not a checkpoint file (bad magic): " + path);
  const auto version = detail::ck_read<std::uint32_t>(in, path);
  if (version != detail::kCkptVersion)
    throw parse_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  return detail::ck_read<std::uint32_t>(in, path);
}

template <class Scalar>
ModelParams<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, detail::kCkptMagic))
    throw parse_error("not a checkpoint file (bad magic): " + path);
  const auto version = detail::ck_read<std::uint32_t>(in, path);
  if (version != detail::kCkptVersion)
    throw parse_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  const auto prec = detail::ck_read<std::uint32_t>(in, path);
  if (prec != sizeof(Scalar))
    throw parse_error("checkpoint precision is " + std::to_string(prec * 8) +
                      "-bit, requested " + std::to_string(sizeof(Scalar) * 8) +
                      "-bit: refusing to cast");
  ModelConfig cfg;
  cfg.d_model = detail::ck_read<std::int32_t>(in, path);
  cfg.n_blocks = detail::ck_read<std::int32_t>(in, path);
  cfg.n_heads = detail::ck_read<std::int32_t>(in, path);
  cfg.d_ffn = detail::ck_read<std::int32_t>(in, path);
  cfg.max_len = detail::ck_read<std::int32_t>(in, path);
  const auto n_tokens = detail::ck_read<std::uint64_t>(in, path);
  std::vector<std::string> tokens;
  tokens.reserve(n_tokens);
  for (std::uint64_t i = 0; i < n_tokens; ++i) tokens.push_back(detail::ck_read_str(in, path));
  ModelParams<Scalar> params{cfg, Vocab(std::move(tokens)), {}};
  const auto n_params = detail::ck_read<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::string name = detail::ck_read_str(in, path);
    const auto rows = detail::ck_read<std::uint64_t>(in, path);
    const auto cols = detail::ck_read<std::uint64_t>(in, path);
    ad::Mat<Scalar> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * static_cast<std::size_t>(m.size())));
    if (!in) throw parse_error("truncated checkpoint: " + path);
    params.store.add(name, std::move(m));
  }
  return params;
}

}  // namespace hopchain
