#include "wt5/seq2seq.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include "wt5/random.h"

namespace wt5::seq2seq {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Vocabulary

namespace {

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

Vocabulary::Vocabulary() : tokens_{"<pad>", "</s>", "<unk>"} {}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (t.empty() || !v.index_.emplace(t, static_cast<int>(v.tokens_.size())).second) {
      throw DataError("vocabulary token '" + t + "' is empty or repeated");
    }
    v.tokens_.push_back(t);
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<FormattedPair>& pairs,
                             std::size_t min_count) {
  if (pairs.empty()) throw DataError("cannot build a vocabulary from no pairs");
  std::map<std::string, std::size_t, std::less<>> counts;
  for (const auto& p : pairs) {
    for (auto w : split_words(p.input_text)) ++counts[std::string(w)];
    for (auto w : split_words(p.target_text)) ++counts[std::string(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : counts) {
    if (c >= min_count) ranked.emplace_back(w, c);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [w, _] : ranked) tokens.push_back(w);
  return from_tokens(tokens);
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> out;
  for (auto w : split_words(text)) out.push_back(id(w));
  return out;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kEos) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

Params Params::zeros(std::size_t vocab, std::size_t dim) {
  const auto V = static_cast<Eigen::Index>(vocab);
  const auto d = static_cast<Eigen::Index>(dim);
  Params p;
  p.embedding = MatrixXd::Zero(V, d);
  for (auto* m : {&p.enc_fwd_wx, &p.enc_fwd_wh, &p.enc_bwd_wx, &p.enc_bwd_wh,
                  &p.dec_wx, &p.dec_wh}) {
    *m = MatrixXd::Zero(3 * d, d);
  }
  for (auto* b : {&p.enc_fwd_b, &p.enc_bwd_b, &p.dec_b}) *b = MatrixXd::Zero(3 * d, 1);
  p.attention = MatrixXd::Zero(d, 2 * d);
  p.combine_w = MatrixXd::Zero(d, 3 * d);
  p.combine_b = MatrixXd::Zero(d, 1);
  p.output_w = MatrixXd::Zero(V, d);
  p.output_b = MatrixXd::Zero(V, 1);
  return p;
}

bool Params::all_finite() const {
  bool ok = true;
  visit([&](const char*, const MatrixXd& m) { ok = ok && m.allFinite(); });
  return ok;
}

std::size_t Params::parameter_count() const {
  std::size_t n = 0;
  visit([&](const char*, const MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

// ---------------------------------------------------------------------------
// GRU cell
//
//   r = sigm(Wx_r x + Wh_r h + b_r)
//   z = sigm(Wx_z x + Wh_z h + b_z)
//   n = tanh(Wx_n x + b_n + r * (Wh_n h))
//   h' = (1 - z) * n + z * h

namespace {

struct GruRefs {
  const MatrixXd& wx;
  const MatrixXd& wh;
  const MatrixXd& b;
};

struct GruGrads {
  MatrixXd& wx;
  MatrixXd& wh;
  MatrixXd& b;
};

struct GruCache {
  VectorXd x, h, r, z, n, hn;  // hn = Wh_n h
};

VectorXd sigmoid(const VectorXd& v) {
  return (1.0 + (-v.array()).exp()).inverse().matrix();
}

VectorXd gru_forward(const GruRefs& w, const VectorXd& x, const VectorXd& h,
                     GruCache* cache) {
  const Eigen::Index d = h.size();
  VectorXd gx = w.wx * x + w.b.col(0);
  VectorXd gh = w.wh * h;
  VectorXd r = sigmoid(gx.head(d) + gh.head(d));
  VectorXd z = sigmoid(gx.segment(d, d) + gh.segment(d, d));
  VectorXd hn = gh.tail(d);
  VectorXd n = (gx.tail(d).array() + r.array() * hn.array()).tanh().matrix();
  VectorXd out = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
  if (cache) *cache = {x, h, std::move(r), std::move(z), std::move(n), std::move(hn)};
  return out;
}

// Accumulates parameter gradients; returns {dx, dh}.
std::pair<VectorXd, VectorXd> gru_backward(const GruRefs& w, GruGrads g,
                                           const GruCache& c,
                                           const VectorXd& dout) {
  const Eigen::Index d = c.h.size();
  VectorXd dn = (dout.array() * (1.0 - c.z.array())).matrix();
  VectorXd dz = (dout.array() * (c.h.array() - c.n.array())).matrix();
  VectorXd dh = (dout.array() * c.z.array()).matrix();
  VectorXd dan = (dn.array() * (1.0 - c.n.array().square())).matrix();
  VectorXd dar = (dan.array() * c.hn.array() * c.r.array() * (1.0 - c.r.array())).matrix();
  VectorXd daz = (dz.array() * c.z.array() * (1.0 - c.z.array())).matrix();
  VectorXd dgx(3 * d), dgh(3 * d);
  dgx << dar, daz, dan;
  dgh << dar, daz, (dan.array() * c.r.array()).matrix();
  g.wx.noalias() += dgx * c.x.transpose();
  g.b.col(0) += dgx;
  g.wh.noalias() += dgh * c.h.transpose();
  VectorXd dx = w.wx.transpose() * dgx;
  dh.noalias() += w.wh.transpose() * dgh;
  return {std::move(dx), std::move(dh)};
}

VectorXd softmax(const VectorXd& logits) {
  VectorXd e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

VectorXd log_softmax(const VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

}  // namespace

// ---------------------------------------------------------------------------
// Model

ToyModel::ToyModel(Vocabulary vocab, std::size_t dim, std::uint64_t seed)
    : vocab_(std::move(vocab)), dim_(dim) {
  if (dim == 0) throw std::invalid_argument("model width must be positive");
  params_ = Params::zeros(vocab_.size(), dim_);
  Rng rng(seed);
  params_.visit([&](const char*, MatrixXd& m) {
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-0.08, 0.08);
  });
}

ToyModel::ToyModel(Vocabulary vocab, Params params)
    : vocab_(std::move(vocab)),
      dim_(static_cast<std::size_t>(params.embedding.cols())),
      params_(std::move(params)) {
  Params shape = Params::zeros(vocab_.size(), dim_);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> want, got;
  shape.visit([&](const char*, const MatrixXd& m) { want.emplace_back(m.rows(), m.cols()); });
  params_.visit([&](const char*, const MatrixXd& m) { got.emplace_back(m.rows(), m.cols()); });
  if (want != got) throw DataError("model tensors have inconsistent shapes");
}

void ToyModel::check_ids(std::span<const int> ids) const {
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
      throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(vocab_.size()));
    }
  }
}

EncodedPair ToyModel::encode_pair(const FormattedPair& pair, std::size_t max_input,
                                  std::size_t max_target) const {
  EncodedPair e;
  e.input = vocab_.encode(pair.input_text);
  if (e.input.size() > max_input) e.input.resize(max_input);
  e.target = vocab_.encode(pair.target_text);
  if (e.target.size() > max_target) e.target.resize(max_target);
  e.target.push_back(kEos);
  return e;
}

ToyModel::Encoding ToyModel::encode(std::span<const int> input) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const auto T = static_cast<Eigen::Index>(input.size());
  const GruRefs fwd{params_.enc_fwd_wx, params_.enc_fwd_wh, params_.enc_fwd_b};
  const GruRefs bwd{params_.enc_bwd_wx, params_.enc_bwd_wh, params_.enc_bwd_b};
  Encoding enc;
  enc.memory = MatrixXd::Zero(2 * d, T);
  VectorXd h = VectorXd::Zero(d);
  for (Eigen::Index t = 0; t < T; ++t) {
    h = gru_forward(fwd, params_.embedding.row(input[t]).transpose(), h, nullptr);
    enc.memory.col(t).head(d) = h;
  }
  enc.initial = h;
  h = VectorXd::Zero(d);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    h = gru_forward(bwd, params_.embedding.row(input[t]).transpose(), h, nullptr);
    enc.memory.col(t).tail(d) = h;
  }
  enc.keys = params_.attention * enc.memory;
  return enc;
}

VectorXd ToyModel::step(const Encoding& enc, const VectorXd& state, int prev_token,
                        VectorXd& next_state) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const GruRefs dec{params_.dec_wx, params_.dec_wh, params_.dec_b};
  next_state = gru_forward(dec, params_.embedding.row(prev_token).transpose(), state, nullptr);
  VectorXd joined(3 * d);
  joined.head(d) = next_state;
  if (enc.memory.cols() > 0) {
    VectorXd alpha = softmax(enc.keys.transpose() * next_state);
    joined.tail(2 * d) = enc.memory * alpha;
  } else {
    joined.tail(2 * d).setZero();
  }
  VectorXd o = (params_.combine_w * joined + params_.combine_b.col(0)).array().tanh().matrix();
  return params_.output_w * o + params_.output_b.col(0);
}

double ToyModel::loss(std::span<const EncodedPair> batch) const {
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& ex : batch) {
    check_ids(ex.input);
    check_ids(ex.target);
    Encoding enc = encode(ex.input);
    VectorXd s = enc.initial;
    int prev = kPad;
    for (int y : ex.target) {
      VectorXd next;
      VectorXd logits = step(enc, s, prev, next);
      nll -= log_softmax(logits)[y];
      ++count;
      s = std::move(next);
      prev = y;
    }
  }
  if (count == 0) throw DataError("loss over a batch without target tokens");
  return nll / static_cast<double>(count);
}

double ToyModel::loss_and_gradient(std::span<const EncodedPair> batch, Params& grad) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  grad = Params::zeros(vocab_.size(), dim_);
  std::size_t count = 0;
  for (const auto& ex : batch) {
    check_ids(ex.input);
    check_ids(ex.target);
    count += ex.target.size();
  }
  if (count == 0) throw DataError("loss over a batch without target tokens");
  const double scale = 1.0 / static_cast<double>(count);

  const GruRefs fwd{params_.enc_fwd_wx, params_.enc_fwd_wh, params_.enc_fwd_b};
  const GruRefs bwd{params_.enc_bwd_wx, params_.enc_bwd_wh, params_.enc_bwd_b};
  const GruRefs dec{params_.dec_wx, params_.dec_wh, params_.dec_b};
  GruGrads gfwd{grad.enc_fwd_wx, grad.enc_fwd_wh, grad.enc_fwd_b};
  GruGrads gbwd{grad.enc_bwd_wx, grad.enc_bwd_wh, grad.enc_bwd_b};
  GruGrads gdec{grad.dec_wx, grad.dec_wh, grad.dec_b};

  double nll = 0.0;
  for (const auto& ex : batch) {
    const auto T = static_cast<Eigen::Index>(ex.input.size());
    const auto U = ex.target.size();

    // Encoder, caching every cell.
    std::vector<GruCache> fcache(static_cast<std::size_t>(T)), bcache(static_cast<std::size_t>(T));
    MatrixXd memory = MatrixXd::Zero(2 * d, T);
    VectorXd h = VectorXd::Zero(d);
    for (Eigen::Index t = 0; t < T; ++t) {
      h = gru_forward(fwd, params_.embedding.row(ex.input[t]).transpose(), h, &fcache[t]);
      memory.col(t).head(d) = h;
    }
    VectorXd s = h;
    h = VectorXd::Zero(d);
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      h = gru_forward(bwd, params_.embedding.row(ex.input[t]).transpose(), h, &bcache[t]);
      memory.col(t).tail(d) = h;
    }
    MatrixXd keys = params_.attention * memory;

    // Decoder forward.
    struct StepCache {
      GruCache cell;
      VectorXd state, alpha, joined, o, probs;
    };
    std::vector<StepCache> steps(U);
    int prev = kPad;
    for (std::size_t u = 0; u < U; ++u) {
      StepCache& c = steps[u];
      c.state = gru_forward(dec, params_.embedding.row(prev).transpose(), s, &c.cell);
      c.joined.resize(3 * d);
      c.joined.head(d) = c.state;
      if (T > 0) {
        c.alpha = softmax(keys.transpose() * c.state);
        c.joined.tail(2 * d) = memory * c.alpha;
      } else {
        c.joined.tail(2 * d).setZero();
      }
      c.o = (params_.combine_w * c.joined + params_.combine_b.col(0)).array().tanh().matrix();
      VectorXd logits = params_.output_w * c.o + params_.output_b.col(0);
      c.probs = softmax(logits);
      nll -= log_softmax(logits)[ex.target[u]];
      s = c.state;
      prev = ex.target[u];
    }

    // Decoder backward.
    MatrixXd dmemory = MatrixXd::Zero(2 * d, T);
    VectorXd ds_next = VectorXd::Zero(d);
    for (std::size_t u = U; u-- > 0;) {
      const StepCache& c = steps[u];
      VectorXd dlogits = c.probs * scale;
      dlogits[ex.target[u]] -= scale;
      grad.output_w.noalias() += dlogits * c.o.transpose();
      grad.output_b.col(0) += dlogits;
      VectorXd dao = ((params_.output_w.transpose() * dlogits).array() *
                      (1.0 - c.o.array().square())).matrix();
      grad.combine_w.noalias() += dao * c.joined.transpose();
      grad.combine_b.col(0) += dao;
      VectorXd djoined = params_.combine_w.transpose() * dao;
      VectorXd ds = djoined.head(d) + ds_next;
      if (T > 0) {
        VectorXd dctx = djoined.tail(2 * d);
        VectorXd dalpha = memory.transpose() * dctx;
        dmemory.noalias() += dctx * c.alpha.transpose();
        VectorXd de = (c.alpha.array() * (dalpha.array() - c.alpha.dot(dalpha))).matrix();
        ds.noalias() += keys * de;
        VectorXd weighted = memory * de;
        grad.attention.noalias() += c.state * weighted.transpose();
        dmemory.noalias() += (params_.attention.transpose() * c.state) * de.transpose();
      }
      auto [dx, dh] = gru_backward(dec, gdec, c.cell, ds);
      const int in_tok = u == 0 ? kPad : ex.target[u - 1];
      grad.embedding.row(in_tok) += dx.transpose();
      ds_next = std::move(dh);
    }

    // Encoder backward. The decoder's initial state is the final forward
    // encoder state.
    VectorXd carry = ds_next;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      VectorXd dout = dmemory.col(t).head(d) + carry;
      auto [dx, dh] = gru_backward(fwd, gfwd, fcache[t], dout);
      grad.embedding.row(ex.input[t]) += dx.transpose();
      carry = std::move(dh);
    }
    carry = VectorXd::Zero(d);
    for (Eigen::Index t = 0; t < T; ++t) {
      VectorXd dout = dmemory.col(t).tail(d) + carry;
      auto [dx, dh] = gru_backward(bwd, gbwd, bcache[t], dout);
      grad.embedding.row(ex.input[t]) += dx.transpose();
      carry = std::move(dh);
    }
  }
  return nll * scale;
}

std::vector<int> ToyModel::greedy_decode(std::span<const int> input, std::size_t max_len) const {
  check_ids(input);
  Encoding enc = encode(input);
  VectorXd s = enc.initial;
  int prev = kPad;
  std::vector<int> out;
  while (out.size() < max_len) {
    VectorXd next;
    VectorXd logits = step(enc, s, prev, next);
    Eigen::Index best = 0;
    for (Eigen::Index v = 1; v < logits.size(); ++v) {
      if (logits[v] > logits[best]) best = v;  // ties keep the lowest id
    }
    if (best == kEos) break;
    out.push_back(static_cast<int>(best));
    s = std::move(next);
    prev = static_cast<int>(best);
  }
  return out;
}

Hypothesis ToyModel::beam_search(std::span<const int> input, std::size_t beam,
                                 std::size_t max_len) const {
  check_ids(input);
  Encoding enc = encode(input);
  auto expand = [&](const VectorXd& state, int token) {
    VectorXd next;
    VectorXd logits = step(enc, state, token, next);
    return std::pair<VectorXd, VectorXd>(std::move(next), log_softmax(logits));
  };
  return seq2seq::beam_search<VectorXd>(enc.initial, kPad, expand, kEos, beam, max_len);
}

std::vector<int> ToyModel::beam_decode(std::span<const int> input, std::size_t beam,
                                       std::size_t max_len) const {
  return beam_search(input, beam, max_len).tokens;
}

VectorXd ToyModel::next_token_probs(std::span<const int> input,
                                    std::span<const int> prefix) const {
  check_ids(input);
  check_ids(prefix);
  Encoding enc = encode(input);
  VectorXd s = enc.initial;
  int prev = kPad;
  VectorXd logits;
  for (std::size_t i = 0; i <= prefix.size(); ++i) {
    VectorXd next;
    logits = step(enc, s, prev, next);
    s = std::move(next);
    if (i < prefix.size()) prev = prefix[i];
  }
  return softmax(logits);
}

std::string ToyModel::generate(std::string_view input_text, std::size_t beam,
                               std::size_t max_len) const {
  std::vector<int> ids = vocab_.encode(input_text);
  std::vector<int> out = beam <= 1 ? greedy_decode(ids, max_len) : beam_decode(ids, beam, max_len);
  return vocab_.decode(out);
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian throughout:
//   8 bytes  magic "WT5TOYM\0"
//   u32      format version (1)
//   u32      model width d
//   u32      vocabulary size V, then V entries of (u32 byte length, UTF-8)
//   u32      tensor count, then per tensor:
//            u32 name length, name, u32 rows, u32 cols,
//            rows*cols IEEE-754 binary64 values in row-major order

namespace {

constexpr char kMagic[8] = {'W', 'T', '5', 'T', 'O', 'Y', 'M', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::string get_str(std::istream& in) {
  std::uint32_t n = get_u32(in);
  if (n > (1u << 24)) throw DataError("checkpoint string too long");
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw DataError("checkpoint truncated");
  return s;
}

}  // namespace

void ToyModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(dim_));
  put_u32(out, static_cast<std::uint32_t>(vocab_.size()));
  for (const auto& t : vocab_.tokens()) put_str(out, t);
  std::uint32_t n = 0;
  params_.visit([&](const char*, const MatrixXd&) { ++n; });
  put_u32(out, n);
  params_.visit([&](const char* name, const MatrixXd& m) {
    put_str(out, name);
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
    }
  });
  if (!out) throw DataError("failed writing " + path.string());
}

ToyModel ToyModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(path.string() + " is not a toy model checkpoint");
  }
  if (std::uint32_t v = get_u32(in); v != kFormatVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(v));
  }
  const std::uint32_t dim = get_u32(in);
  const std::uint32_t vsize = get_u32(in);
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < vsize; ++i) tokens.push_back(get_str(in));
  if (vsize < kNumReserved) throw DataError("checkpoint vocabulary lacks reserved ids");
  Vocabulary vocab = Vocabulary::from_tokens(
      std::vector<std::string>(tokens.begin() + kNumReserved, tokens.end()));
  if (vocab.tokens() != tokens) throw DataError("checkpoint reserved tokens differ");

  std::map<std::string, MatrixXd> tensors;
  const std::uint32_t n = get_u32(in);
  for (std::uint32_t k = 0; k < n; ++k) {
    std::string name = get_str(in);
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) {
      throw DataError("checkpoint tensor too large");
    }
    MatrixXd m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = get_f64(in);
    }
    tensors[name] = std::move(m);
  }
  Params params = Params::zeros(vocab.size(), dim);
  params.visit([&](const char* name, MatrixXd& m) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError(std::string("checkpoint lacks tensor ") + name);
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw DataError(std::string("checkpoint tensor ") + name + " has the wrong shape");
    }
    m = it->second;
  });
  return ToyModel(std::move(vocab), std::move(params));
}

// ---------------------------------------------------------------------------
// Training

double train_step(ToyModel& model, std::span<const EncodedPair> batch, double lr) {
  Params grad;
  const double loss = model.loss_and_gradient(batch, grad);
  if (!std::isfinite(loss) || !grad.all_finite()) {
    throw DivergenceError("non-finite loss or gradient; training diverged");
  }
  if (lr != 0.0) {
    std::vector<MatrixXd*> g;
    grad.visit([&](const char*, MatrixXd& m) { g.push_back(&m); });
    std::size_t k = 0;
    model.params().visit([&](const char*, MatrixXd& m) { m.noalias() -= lr * *g[k++]; });
  }
  return loss;
}

void TrainConfig::validate() const {
  if (steps == 0 || batch_size == 0 || !(learning_rate > 0.0) || max_input_len == 0 ||
      max_target_len == 0) {
    throw DataError("training config values must all be positive");
  }
}

std::vector<double> train(ToyModel& model, const std::vector<EncodedPair>& data,
                          const TrainConfig& config,
                          const std::function<void(std::size_t, double)>& on_step) {
  config.validate();
  if (data.empty()) throw DataError("no training data");
  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t cursor = 0;
  std::vector<double> losses;
  losses.reserve(config.steps);
  std::vector<EncodedPair> batch;
  for (std::size_t step = 0; step < config.steps; ++step) {
    batch.clear();
    while (batch.size() < config.batch_size) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(data[order[cursor++]]);
    }
    double loss = train_step(model, batch, config.learning_rate);
    losses.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  return losses;
}

}  // namespace wt5::seq2seq
