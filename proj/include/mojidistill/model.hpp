#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mojidistill/errors.hpp"
#include "mojidistill/hash.hpp"

namespace moji {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Architecture : std::uint32_t {
  kDeepMoji = 0,         // embeddings -> 2 bi-recurrent layers -> attention over skips
  kBagOfEmbeddings = 1,  // mean of embeddings -> softmax (fastText-style baseline)
  kPlainStack = 2,       // same recurrent stack, final-state readout, no attention
};

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 256;
  int units = 512;  // recurrent units per direction; 2x per layer
  int class_count = 0;
  int max_seq_len = 80;
  Architecture arch = Architecture::kDeepMoji;

  bool has_recurrent() const { return arch != Architecture::kBagOfEmbeddings; }
  bool has_attention() const { return arch == Architecture::kDeepMoji; }
  // Attention input width: embedding plus both bidirectional layers.
  int channels() const { return embed_dim + 4 * units; }
  int softmax_inputs() const {
    switch (arch) {
      case Architecture::kDeepMoji: return channels();
      case Architecture::kBagOfEmbeddings: return embed_dim;
      case Architecture::kPlainStack: return 2 * units;
    }
    return 0;
  }
};

enum class LayerId : int {
  kEmbedding = 0,
  kRecurrent1 = 1,
  kRecurrent2 = 2,
  kAttention = 3,
  kSoftmax = 4,
};
inline constexpr int kLayerCount = 5;
using LayerMask = std::array<bool, kLayerCount>;

const char* layer_name(LayerId id);
std::vector<LayerId> model_layers(const ModelConfig& cfg);

inline bool layer_on(const LayerMask& m, LayerId id) {
  return m[static_cast<std::size_t>(id)];
}

template <typename T>
struct DirectionParamsT {
  // Gate rows stacked input/forget/candidate/output: w_x is 4U x in,
  // w_h is 4U x U, b is 4U x 1.
  MatX<T> w_x, w_h;
  VecX<T> b;
};

template <typename T>
struct BiLayerParamsT {
  DirectionParamsT<T> fw, bw;
};

template <typename T>
struct ModelParamsT {
  MatX<T> embedding;  // vocab_size x embed_dim
  BiLayerParamsT<T> lstm1, lstm2;
  VecX<T> attention_w;  // one scalar per stacked channel
  MatX<T> softmax_w;    // class_count x softmax_inputs
  VecX<T> softmax_b;
};

using ModelParams = ModelParamsT<float>;

template <typename T>
struct TensorRef {
  std::string name;
  LayerId layer;
  T* data;
  Eigen::Index rows, cols;
  Eigen::Index size() const { return rows * cols; }
  T& at(Eigen::Index r, Eigen::Index c) const { return data[c * rows + r]; }
};

namespace detail {

template <typename T, typename P>
void collect_refs(P& p, std::vector<TensorRef<T>>& out) {
  auto add = [&out](const std::string& name, LayerId layer, auto& m) {
    if (m.size() == 0) return;
    out.push_back({name, layer, const_cast<T*>(m.data()), m.rows(), m.cols()});
  };
  add("embedding", LayerId::kEmbedding, p.embedding);
  const char* dirs[2] = {"fw", "bw"};
  auto add_layer = [&](const char* prefix, LayerId layer, auto& bl) {
    auto* ds[2] = {&bl.fw, &bl.bw};
    for (int d = 0; d < 2; ++d) {
      add(std::string(prefix) + "." + dirs[d] + ".w_x", layer, ds[d]->w_x);
      add(std::string(prefix) + "." + dirs[d] + ".w_h", layer, ds[d]->w_h);
      add(std::string(prefix) + "." + dirs[d] + ".b", layer, ds[d]->b);
    }
  };
  add_layer("lstm1", LayerId::kRecurrent1, p.lstm1);
  add_layer("lstm2", LayerId::kRecurrent2, p.lstm2);
  add("attention.w", LayerId::kAttention, p.attention_w);
  add("softmax.w", LayerId::kSoftmax, p.softmax_w);
  add("softmax.b", LayerId::kSoftmax, p.softmax_b);
}

}  // namespace detail

template <typename T>
std::vector<TensorRef<T>> tensor_refs(ModelParamsT<T>& p) {
  std::vector<TensorRef<T>> out;
  detail::collect_refs<T>(p, out);
  return out;
}

template <typename T>
std::vector<TensorRef<const T>> tensor_refs(const ModelParamsT<T>& p) {
  std::vector<TensorRef<const T>> out;
  detail::collect_refs<const T>(p, out);
  return out;
}

template <typename T>
ModelParamsT<T> zeros_like(const ModelParamsT<T>& p) {
  ModelParamsT<T> z;
  z.embedding = MatX<T>::Zero(p.embedding.rows(), p.embedding.cols());
  auto zero_dir = [](const DirectionParamsT<T>& d, DirectionParamsT<T>& out) {
    out.w_x = MatX<T>::Zero(d.w_x.rows(), d.w_x.cols());
    out.w_h = MatX<T>::Zero(d.w_h.rows(), d.w_h.cols());
    out.b = VecX<T>::Zero(d.b.size());
  };
  zero_dir(p.lstm1.fw, z.lstm1.fw);
  zero_dir(p.lstm1.bw, z.lstm1.bw);
  zero_dir(p.lstm2.fw, z.lstm2.fw);
  zero_dir(p.lstm2.bw, z.lstm2.bw);
  z.attention_w = VecX<T>::Zero(p.attention_w.size());
  z.softmax_w = MatX<T>::Zero(p.softmax_w.rows(), p.softmax_w.cols());
  z.softmax_b = VecX<T>::Zero(p.softmax_b.size());
  return z;
}

template <typename T>
bool params_equal(const ModelParamsT<T>& a, const ModelParamsT<T>& b) {
  auto ra = tensor_refs(a);
  auto rb = tensor_refs(b);
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].rows != rb[i].rows || ra[i].cols != rb[i].cols) return false;
    for (Eigen::Index k = 0; k < ra[i].size(); ++k) {
      if (ra[i].data[k] != rb[i].data[k]) return false;
    }
  }
  return true;
}

template <typename T>
std::uint64_t params_hash(const ModelParamsT<T>& p) {
  Fnv1a h;
  for (const auto& ref : tensor_refs(p)) {
    h.update(ref.name);
    h.update(ref.data, static_cast<std::size_t>(ref.size()) * sizeof(T));
  }
  return h.digest();
}

std::int64_t param_count(const ModelConfig& cfg);

inline constexpr std::uint32_t kInitRecipeId = 1;

/// Recipe 1: Glorot-uniform dense weights, orthogonal per-gate recurrent
/// blocks, zero biases except forget-gate bias 1, embeddings uniform in
/// [-0.1, 0.1].
template <typename T>
ModelParamsT<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

struct DropoutSpec {
  double embed_rate = 0.0;        // whole-channel, shared across timesteps
  double penultimate_rate = 0.0;  // independent units on the summary vector
};

struct EncodedExample {
  std::vector<int> ids;
  int label = 0;
};

template <typename T>
struct ForwardCacheT {
  int len = 0;
  std::vector<int> tokens;
  MatX<T> embed_pre;   // embed_dim x len, tanh output before dropout
  VecX<T> embed_mask;  // per-channel keep scale
  MatX<T> x;           // embedding after channel dropout
  struct DirCache {
    MatX<T> i, f, g, o, c, ctanh, h;  // units x len
  };
  struct LayerCache {
    DirCache fw, bw;
    MatX<T> out;  // 2*units x len
  };
  LayerCache l1, l2;
  VecX<T> attn_e, attn_a;  // len
  VecX<T> summary;         // pooled representation before dropout
  VecX<T> summary_mask;
  VecX<T> summary_dropped;
  VecX<T> probs;
};

template <typename T>
struct AttentionOutputT {
  VecX<T> scores;   // e_t
  VecX<T> weights;  // a_t, zero at masked steps, sums to 1 over the rest
  VecX<T> summary;  // v
};

/// tanh-bounded embedding lookup; columns are timesteps.
template <typename T>
MatX<T> embed_forward(std::span<const int> tokens, const ModelParamsT<T>& params);

/// One bidirectional recurrent layer; output rows are [forward; backward].
template <typename T>
MatX<T> birnn_forward(const MatX<T>& input, const BiLayerParamsT<T>& layer);

template <typename T>
AttentionOutputT<T> attention_forward(const MatX<T>& stacked, const VecX<T>& attention_w,
                                      const std::vector<bool>& mask);

/// Class probabilities for one sequence. Trailing pad tokens (index 0) are
/// masked out; train mode draws dropout masks from `rng`.
template <typename T>
VecX<T> forward(std::span<const int> tokens, const ModelParamsT<T>& params,
                const ModelConfig& cfg, bool training = false, const DropoutSpec& drop = {},
                std::mt19937_64* rng = nullptr, ForwardCacheT<T>* cache = nullptr);

template <typename T>
VecX<T> model_forward(std::span<const int> tokens, const ModelParamsT<T>& params,
                      const ModelConfig& cfg, bool training = false, const DropoutSpec& drop = {},
                      std::mt19937_64* rng = nullptr);

template <typename T>
VecX<T> bag_of_embeddings_forward(std::span<const int> tokens, const ModelParamsT<T>& params,
                                  const ModelConfig& cfg);

template <typename T>
VecX<T> plain_stack_forward(std::span<const int> tokens, const ModelParamsT<T>& params,
                            const ModelConfig& cfg);

template <typename T>
struct LossAndGrads {
  T loss = 0;
  ModelParamsT<T> grads;
};

/// Mean cross-entropy over the batch plus l2_embed * ||embedding||^2.
/// Gradients are populated for every allocated tensor; freezing is the
/// optimizer's concern.
template <typename T>
LossAndGrads<T> loss_and_gradients(const std::vector<EncodedExample>& batch,
                                   const ModelParamsT<T>& params, const ModelConfig& cfg,
                                   const DropoutSpec& drop, std::mt19937_64* rng, T l2_embed);

// ---------------------------------------------------------------------------
// implementation

namespace detail {

template <typename T>
VecX<T> sigmoid(const VecX<T>& z) {
  return (T(1) / (T(1) + (-z.array()).exp())).matrix();
}

template <typename T>
VecX<T> channel_mask(Eigen::Index dim, double rate, std::mt19937_64* rng) {
  if (rate <= 0 || rng == nullptr) return VecX<T>::Ones(dim);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  VecX<T> mask(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    mask[i] = u(*rng) < rate ? T(0) : keep_scale;
  }
  return mask;
}

template <typename T>
int valid_length(std::span<const int> tokens) {
  int len = static_cast<int>(tokens.size());
  while (len > 0 && tokens[static_cast<std::size_t>(len - 1)] == 0) --len;
  return len;
}

template <typename T>
void lstm_direction_forward(const MatX<T>& input, const DirectionParamsT<T>& d, bool reverse,
                            typename ForwardCacheT<T>::DirCache& c) {
  const Eigen::Index units = d.w_h.cols();
  const Eigen::Index len = input.cols();
  if (d.w_x.cols() != input.rows()) {
    throw ShapeMismatch("recurrent input width " + std::to_string(input.rows()) +
                        " does not match weights expecting " + std::to_string(d.w_x.cols()));
  }
  c.i.resize(units, len);
  c.f.resize(units, len);
  c.g.resize(units, len);
  c.o.resize(units, len);
  c.c.resize(units, len);
  c.ctanh.resize(units, len);
  c.h.resize(units, len);
  VecX<T> h_prev = VecX<T>::Zero(units);
  VecX<T> c_prev = VecX<T>::Zero(units);
  for (Eigen::Index s = 0; s < len; ++s) {
    Eigen::Index t = reverse ? len - 1 - s : s;
    VecX<T> z = d.w_x * input.col(t) + d.w_h * h_prev + d.b;
    c.i.col(t) = sigmoid<T>(z.segment(0, units));
    c.f.col(t) = sigmoid<T>(z.segment(units, units));
    c.g.col(t) = z.segment(2 * units, units).array().tanh().matrix();
    c.o.col(t) = sigmoid<T>(z.segment(3 * units, units));
    c.c.col(t) = c.f.col(t).cwiseProduct(c_prev) + c.i.col(t).cwiseProduct(c.g.col(t));
    c.ctanh.col(t) = c.c.col(t).array().tanh().matrix();
    c.h.col(t) = c.o.col(t).cwiseProduct(c.ctanh.col(t));
    h_prev = c.h.col(t);
    c_prev = c.c.col(t);
  }
}

template <typename T>
void bilayer_forward(const MatX<T>& input, const BiLayerParamsT<T>& layer,
                     typename ForwardCacheT<T>::LayerCache& c) {
  lstm_direction_forward<T>(input, layer.fw, false, c.fw);
  lstm_direction_forward<T>(input, layer.bw, true, c.bw);
  const Eigen::Index units = layer.fw.w_h.cols();
  c.out.resize(2 * units, input.cols());
  c.out.topRows(units) = c.fw.h;
  c.out.bottomRows(units) = c.bw.h;
}

template <typename T>
struct DirectionGrads {
  MatX<T> w_x, w_h;
  VecX<T> b;
};

/// BPTT for one direction; adds parameter gradients into `dg` and input
/// gradients into `dinput`.
template <typename T>
void lstm_direction_backward(const MatX<T>& input, const DirectionParamsT<T>& d, bool reverse,
                             const typename ForwardCacheT<T>::DirCache& c, const MatX<T>& dh_ext,
                             DirectionParamsT<T>& dg, MatX<T>& dinput) {
  const Eigen::Index units = d.w_h.cols();
  const Eigen::Index len = input.cols();
  VecX<T> dh_carry = VecX<T>::Zero(units);
  VecX<T> dc_carry = VecX<T>::Zero(units);
  VecX<T> dz(4 * units);
  for (Eigen::Index s = len - 1; s >= 0; --s) {
    Eigen::Index t = reverse ? len - 1 - s : s;
    Eigen::Index t_prev = s > 0 ? (reverse ? len - s : s - 1) : Eigen::Index(-1);
    VecX<T> dh = dh_ext.col(t) + dh_carry;
    VecX<T> d_o = dh.cwiseProduct(c.ctanh.col(t));
    VecX<T> dc = dc_carry +
                 dh.cwiseProduct(c.o.col(t))
                     .cwiseProduct((T(1) - c.ctanh.col(t).array().square()).matrix());
    VecX<T> di = dc.cwiseProduct(c.g.col(t));
    VecX<T> dg_ = dc.cwiseProduct(c.i.col(t));
    VecX<T> df = t_prev >= 0 ? dc.cwiseProduct(c.c.col(t_prev)) : VecX<T>::Zero(units);
    dc_carry = dc.cwiseProduct(c.f.col(t));
    dz.segment(0, units) =
        di.cwiseProduct(c.i.col(t)).cwiseProduct((T(1) - c.i.col(t).array()).matrix());
    dz.segment(units, units) =
        df.cwiseProduct(c.f.col(t)).cwiseProduct((T(1) - c.f.col(t).array()).matrix());
    dz.segment(2 * units, units) =
        dg_.cwiseProduct((T(1) - c.g.col(t).array().square()).matrix());
    dz.segment(3 * units, units) =
        d_o.cwiseProduct(c.o.col(t)).cwiseProduct((T(1) - c.o.col(t).array()).matrix());
    dg.w_x.noalias() += dz * input.col(t).transpose();
    if (t_prev >= 0) dg.w_h.noalias() += dz * c.h.col(t_prev).transpose();
    dg.b += dz;
    dinput.col(t).noalias() += d.w_x.transpose() * dz;
    dh_carry.noalias() = d.w_h.transpose() * dz;
  }
}

template <typename T>
void bilayer_backward(const MatX<T>& input, const BiLayerParamsT<T>& layer,
                      const typename ForwardCacheT<T>::LayerCache& c, const MatX<T>& dh_ext,
                      BiLayerParamsT<T>& dg, MatX<T>& dinput) {
  const Eigen::Index units = layer.fw.w_h.cols();
  lstm_direction_backward<T>(input, layer.fw, false, c.fw, dh_ext.topRows(units), dg.fw, dinput);
  lstm_direction_backward<T>(input, layer.bw, true, c.bw, dh_ext.bottomRows(units), dg.bw,
                             dinput);
}

template <typename T>
VecX<T> stable_softmax(const VecX<T>& logits) {
  T m = logits.maxCoeff();
  VecX<T> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

}  // namespace detail

template <typename T>
MatX<T> embed_forward(std::span<const int> tokens, const ModelParamsT<T>& params) {
  const Eigen::Index vocab = params.embedding.rows();
  MatX<T> out(params.embedding.cols(), static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    int tok = tokens[t];
    if (tok < 0 || tok >= vocab) throw IndexOutOfVocab(tok, static_cast<int>(vocab));
    out.col(static_cast<Eigen::Index>(t)) =
        params.embedding.row(tok).transpose().array().tanh().matrix();
  }
  return out;
}

template <typename T>
MatX<T> birnn_forward(const MatX<T>& input, const BiLayerParamsT<T>& layer) {
  typename ForwardCacheT<T>::LayerCache c;
  detail::bilayer_forward<T>(input, layer, c);
  return c.out;
}

template <typename T>
AttentionOutputT<T> attention_forward(const MatX<T>& stacked, const VecX<T>& attention_w,
                                      const std::vector<bool>& mask) {
  if (stacked.rows() != attention_w.size()) {
    throw ShapeMismatch("attention weight length " + std::to_string(attention_w.size()) +
                        " does not match channel count " + std::to_string(stacked.rows()));
  }
  if (static_cast<Eigen::Index>(mask.size()) != stacked.cols()) {
    throw ShapeMismatch("padding mask length does not match timestep count");
  }
  const Eigen::Index len = stacked.cols();
  AttentionOutputT<T> out;
  out.scores = stacked.transpose() * attention_w;
  out.weights = VecX<T>::Zero(len);
  T max_score = std::numeric_limits<T>::lowest();
  bool any = false;
  for (Eigen::Index t = 0; t < len; ++t) {
    if (mask[static_cast<std::size_t>(t)]) {
      any = true;
      max_score = std::max(max_score, out.scores[t]);
    }
  }
  if (!any) throw AllTimestepsMasked();
  T denom = 0;
  for (Eigen::Index t = 0; t < len; ++t) {
    if (!mask[static_cast<std::size_t>(t)]) continue;
    out.weights[t] = std::exp(out.scores[t] - max_score);
    denom += out.weights[t];
  }
  out.weights /= denom;
  out.summary = stacked * out.weights;
  return out;
}

template <typename T>
VecX<T> forward(std::span<const int> tokens, const ModelParamsT<T>& params,
                const ModelConfig& cfg, bool training, const DropoutSpec& drop,
                std::mt19937_64* rng, ForwardCacheT<T>* cache) {
  ForwardCacheT<T> local;
  ForwardCacheT<T>& c = cache ? *cache : local;
  int len = detail::valid_length<T>(tokens);
  if (len == 0) throw AllTimestepsMasked();
  c.len = len;
  c.tokens.assign(tokens.begin(), tokens.begin() + len);
  std::span<const int> active(c.tokens.data(), static_cast<std::size_t>(len));

  c.embed_pre = embed_forward<T>(active, params);
  c.embed_mask = training ? detail::channel_mask<T>(cfg.embed_dim, drop.embed_rate, rng)
                          : VecX<T>::Ones(cfg.embed_dim);
  c.x = c.embed_mask.asDiagonal() * c.embed_pre;

  if (cfg.has_recurrent()) {
    detail::bilayer_forward<T>(c.x, params.lstm1, c.l1);
    detail::bilayer_forward<T>(c.l1.out, params.lstm2, c.l2);
  }

  switch (cfg.arch) {
    case Architecture::kDeepMoji: {
      MatX<T> stacked(cfg.channels(), len);
      stacked.topRows(cfg.embed_dim) = c.x;
      stacked.middleRows(cfg.embed_dim, 2 * cfg.units) = c.l1.out;
      stacked.bottomRows(2 * cfg.units) = c.l2.out;
      auto attn = attention_forward<T>(stacked, params.attention_w,
                                       std::vector<bool>(static_cast<std::size_t>(len), true));
      c.attn_e = std::move(attn.scores);
      c.attn_a = std::move(attn.weights);
      c.summary = std::move(attn.summary);
      break;
    }
    case Architecture::kBagOfEmbeddings:
      c.summary = c.x.rowwise().mean();
      break;
    case Architecture::kPlainStack: {
      const Eigen::Index units = cfg.units;
      c.summary.resize(2 * units);
      c.summary.head(units) = c.l2.fw.h.col(len - 1);
      c.summary.tail(units) = c.l2.bw.h.col(0);
      break;
    }
  }

  c.summary_mask = training
                       ? detail::channel_mask<T>(c.summary.size(), drop.penultimate_rate, rng)
                       : VecX<T>::Ones(c.summary.size());
  c.summary_dropped = c.summary.cwiseProduct(c.summary_mask);
  VecX<T> logits = params.softmax_w * c.summary_dropped + params.softmax_b;
  c.probs = detail::stable_softmax<T>(logits);
  return c.probs;
}

template <typename T>
VecX<T> model_forward(std::span<const int> tokens, const ModelParamsT<T>& params,
                      const ModelConfig& cfg, bool training, const DropoutSpec& drop,
                      std::mt19937_64* rng) {
  if (cfg.arch != Architecture::kDeepMoji) throw ShapeMismatch("config is not a DeepMoji model");
  return forward<T>(tokens, params, cfg, training, drop, rng, nullptr);
}

template <typename T>
VecX<T> bag_of_embeddings_forward(std::span<const int> tokens, const ModelParamsT<T>& params,
                                  const ModelConfig& cfg) {
  if (cfg.arch != Architecture::kBagOfEmbeddings) {
    throw ShapeMismatch("config is not a bag-of-embeddings model");
  }
  return forward<T>(tokens, params, cfg);
}

template <typename T>
VecX<T> plain_stack_forward(std::span<const int> tokens, const ModelParamsT<T>& params,
                            const ModelConfig& cfg) {
  if (cfg.arch != Architecture::kPlainStack) {
    throw ShapeMismatch("config is not a plain-stack model");
  }
  return forward<T>(tokens, params, cfg);
}

namespace detail {

/// Backward pass for one sequence; dlogits is (probs - onehot) already scaled
/// by the batch weight.
template <typename T>
void backward(const ForwardCacheT<T>& c, const ModelParamsT<T>& params, const ModelConfig& cfg,
              const VecX<T>& dlogits, ModelParamsT<T>& g) {
  const Eigen::Index len = c.len;
  g.softmax_w.noalias() += dlogits * c.summary_dropped.transpose();
  g.softmax_b += dlogits;
  VecX<T> dsummary =
      (params.softmax_w.transpose() * dlogits).cwiseProduct(c.summary_mask);

  MatX<T> dx = MatX<T>::Zero(cfg.embed_dim, len);
  switch (cfg.arch) {
    case Architecture::kDeepMoji: {
      MatX<T> stacked(cfg.channels(), len);
      stacked.topRows(cfg.embed_dim) = c.x;
      stacked.middleRows(cfg.embed_dim, 2 * cfg.units) = c.l1.out;
      stacked.bottomRows(2 * cfg.units) = c.l2.out;
      VecX<T> da = stacked.transpose() * dsummary;
      T inner = c.attn_a.dot(da);
      VecX<T> de = c.attn_a.cwiseProduct(da.array().matrix() - VecX<T>::Constant(len, inner));
      g.attention_w.noalias() += stacked * de;
      MatX<T> dstacked = dsummary * c.attn_a.transpose() + params.attention_w * de.transpose();
      MatX<T> dh2 = dstacked.bottomRows(2 * cfg.units);
      MatX<T> dh1 = dstacked.middleRows(cfg.embed_dim, 2 * cfg.units);
      dx += dstacked.topRows(cfg.embed_dim);
      MatX<T> dl1_in = MatX<T>::Zero(2 * cfg.units, len);
      bilayer_backward<T>(c.l1.out, params.lstm2, c.l2, dh2, g.lstm2, dl1_in);
      dh1 += dl1_in;
      bilayer_backward<T>(c.x, params.lstm1, c.l1, dh1, g.lstm1, dx);
      break;
    }
    case Architecture::kBagOfEmbeddings: {
      VecX<T> per_step = dsummary / static_cast<T>(len);
      for (Eigen::Index t = 0; t < len; ++t) dx.col(t) += per_step;
      break;
    }
    case Architecture::kPlainStack: {
      const Eigen::Index units = cfg.units;
      MatX<T> dh2 = MatX<T>::Zero(2 * units, len);
      dh2.col(len - 1).head(units) += dsummary.head(units);
      dh2.col(0).tail(units) += dsummary.tail(units);
      MatX<T> dl1_in = MatX<T>::Zero(2 * units, len);
      bilayer_backward<T>(c.l1.out, params.lstm2, c.l2, dh2, g.lstm2, dl1_in);
      bilayer_backward<T>(c.x, params.lstm1, c.l1, dl1_in, g.lstm1, dx);
      break;
    }
  }

  // Through the channel-dropout mask, then tanh, into the embedding rows.
  for (Eigen::Index t = 0; t < len; ++t) {
    VecX<T> dpre = dx.col(t).cwiseProduct(c.embed_mask);
    VecX<T> dtanh =
        dpre.cwiseProduct((T(1) - c.embed_pre.col(t).array().square()).matrix());
    g.embedding.row(c.tokens[static_cast<std::size_t>(t)]) += dtanh.transpose();
  }
}

}  // namespace detail

template <typename T>
LossAndGrads<T> loss_and_gradients(const std::vector<EncodedExample>& batch,
                                   const ModelParamsT<T>& params, const ModelConfig& cfg,
                                   const DropoutSpec& drop, std::mt19937_64* rng, T l2_embed) {
  LossAndGrads<T> out;
  out.grads = zeros_like(params);
  const T scale = T(1) / static_cast<T>(batch.size());
  ForwardCacheT<T> cache;
  for (const EncodedExample& ex : batch) {
    if (ex.label < 0 || ex.label >= cfg.class_count) {
      throw DataError("label " + std::to_string(ex.label) + " outside [0, " +
                      std::to_string(cfg.class_count) + ")");
    }
    forward<T>(ex.ids, params, cfg, true, drop, rng, &cache);
    T p = std::max(cache.probs[ex.label], std::numeric_limits<T>::min());
    out.loss -= scale * std::log(p);
    VecX<T> dlogits = cache.probs * scale;
    dlogits[ex.label] -= scale;
    detail::backward<T>(cache, params, cfg, dlogits, out.grads);
  }
  out.loss += l2_embed * params.embedding.squaredNorm();
  out.grads.embedding += T(2) * l2_embed * params.embedding;
  return out;
}

template <typename T>
ModelParamsT<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto glorot = [&rng, &unit](MatX<T>& m, Eigen::Index rows, Eigen::Index cols, double fan_in,
                              double fan_out) {
    m.resize(rows, cols);
    double bound = std::sqrt(6.0 / (fan_in + fan_out));
    // Row-major fill so layout changes never alter the draw order.
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<T>(unit(rng) * bound);
    }
  };

  auto orthogonal_block = [&rng, &normal](Eigen::Index n) {
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) a(r, c) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    }
    return q;
  };

  auto init_dir = [&](DirectionParamsT<T>& d, Eigen::Index in_dim) {
    const Eigen::Index u = cfg.units;
    glorot(d.w_x, 4 * u, in_dim, static_cast<double>(in_dim), static_cast<double>(u));
    d.w_h.resize(4 * u, u);
    for (int gate = 0; gate < 4; ++gate) {
      d.w_h.middleRows(gate * u, u) = orthogonal_block(u).cast<T>();
    }
    d.b = VecX<T>::Zero(4 * u);
    d.b.segment(u, u).setOnes();  // forget gate
  };

  ModelParamsT<T> p;
  p.embedding.resize(cfg.vocab_size, cfg.embed_dim);
  for (Eigen::Index r = 0; r < p.embedding.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.embedding.cols(); ++c) {
      p.embedding(r, c) = static_cast<T>(unit(rng) * 0.1);
    }
  }
  if (cfg.has_recurrent()) {
    init_dir(p.lstm1.fw, cfg.embed_dim);
    init_dir(p.lstm1.bw, cfg.embed_dim);
    init_dir(p.lstm2.fw, 2 * cfg.units);
    init_dir(p.lstm2.bw, 2 * cfg.units);
  }
  if (cfg.has_attention()) {
    double bound = std::sqrt(6.0 / (cfg.channels() + 1.0));
    p.attention_w.resize(cfg.channels());
    for (Eigen::Index i = 0; i < p.attention_w.size(); ++i) {
      p.attention_w[i] = static_cast<T>(unit(rng) * bound);
    }
  }
  glorot(p.softmax_w, cfg.class_count, cfg.softmax_inputs(),
         static_cast<double>(cfg.softmax_inputs()), static_cast<double>(cfg.class_count));
  p.softmax_b = VecX<T>::Zero(cfg.class_count);
  return p;
}

}  // namespace moji
