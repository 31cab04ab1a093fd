// Copyright 2026 The spanlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spanlm/model.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "spanlm/ops.hpp"
#include "spanlm/rng.hpp"

namespace spanlm {

void EncoderConfig::validate() const {
  if (layers == 0 || hidden == 0 || heads == 0 || ffn_dim == 0 || max_len == 0) {
    throw std::invalid_argument("encoder dimensions must be positive");
  }
  if (hidden % heads != 0) throw std::invalid_argument("hidden must be divisible by heads");
  if (vocab_size <= static_cast<std::size_t>(Specials::kCount)) throw std::invalid_argument("vocab_size too small");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
}

template <typename T>
std::vector<ParameterPtr<T>> EncoderParams<T>::parameters() const {
  std::vector<ParameterPtr<T>> out{token_embedding, position_embedding, emb_ln_gamma, emb_ln_beta};
  for (const LayerParams<T>& l : layers) {
    for (const auto& p : {l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo, l.bo, l.ln1_gamma, l.ln1_beta, l.w1, l.b1, l.w2,
                          l.b2, l.ln2_gamma, l.ln2_beta}) {
      out.push_back(p);
    }
  }
  return out;
}

namespace {

constexpr double kInitStd = 0.02;

template <typename T>
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(epoch_seed(seed ^ kInitStream, 0, 0)) {}

  ParameterPtr<T> normal(std::string name, Shape shape) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.storage()) v = static_cast<T>(rng_.normal() * kInitStd);
    return make_parameter(std::move(name), std::move(t));
  }
  ParameterPtr<T> constant(std::string name, Shape shape, T value) {
    return make_parameter(std::move(name), Tensor<T>(std::move(shape), value));
  }

 private:
  Rng rng_;
};

template <typename T>
std::shared_ptr<EncoderParams<T>> init_encoder(Initializer<T>& init, const EncoderConfig& c,
                                               const std::string& prefix) {
  auto e = std::make_shared<EncoderParams<T>>();
  const std::size_t h = c.hidden;
  e->token_embedding = init.normal(prefix + "token_embedding", {c.vocab_size, h});
  e->position_embedding = init.normal(prefix + "position_embedding", {c.max_len, h});
  e->emb_ln_gamma = init.constant(prefix + "embedding_ln.gamma", {h}, T(1));
  e->emb_ln_beta = init.constant(prefix + "embedding_ln.beta", {h}, T(0));
  for (std::size_t i = 0; i < c.layers; ++i) {
    const std::string p = prefix + "layer" + std::to_string(i) + ".";
    LayerParams<T> l;
    l.wq = init.normal(p + "attn.wq", {h, h});
    l.bq = init.constant(p + "attn.bq", {h}, T(0));
    l.wk = init.normal(p + "attn.wk", {h, h});
    l.bk = init.constant(p + "attn.bk", {h}, T(0));
    l.wv = init.normal(p + "attn.wv", {h, h});
    l.bv = init.constant(p + "attn.bv", {h}, T(0));
    l.wo = init.normal(p + "attn.wo", {h, h});
    l.bo = init.constant(p + "attn.bo", {h}, T(0));
    l.ln1_gamma = init.constant(p + "ln1.gamma", {h}, T(1));
    l.ln1_beta = init.constant(p + "ln1.beta", {h}, T(0));
    l.w1 = init.normal(p + "ffn.w1", {h, c.ffn_dim});
    l.b1 = init.constant(p + "ffn.b1", {c.ffn_dim}, T(0));
    l.w2 = init.normal(p + "ffn.w2", {c.ffn_dim, h});
    l.b2 = init.constant(p + "ffn.b2", {h}, T(0));
    l.ln2_gamma = init.constant(p + "ln2.gamma", {h}, T(1));
    l.ln2_beta = init.constant(p + "ln2.beta", {h}, T(0));
    e->layers.push_back(std::move(l));
  }
  return e;
}

template <typename To, typename From>
ParameterPtr<To> convert_param(const ParameterPtr<From>& p, const std::string& name,
                               std::unordered_map<const Parameter<From>*, ParameterPtr<To>>& seen) {
  auto it = seen.find(p.get());
  if (it != seen.end()) return it->second;
  auto q = make_parameter(name, p->value.template cast<To>());
  seen.emplace(p.get(), q);
  return q;
}

template <typename To, typename From>
std::shared_ptr<EncoderParams<To>> convert_encoder(const EncoderParams<From>& e,
                                                   std::unordered_map<const Parameter<From>*, ParameterPtr<To>>& seen) {
  auto c = [&seen](const ParameterPtr<From>& p) { return convert_param<To, From>(p, p->name, seen); };
  auto out = std::make_shared<EncoderParams<To>>();
  out->token_embedding = c(e.token_embedding);
  out->position_embedding = c(e.position_embedding);
  out->emb_ln_gamma = c(e.emb_ln_gamma);
  out->emb_ln_beta = c(e.emb_ln_beta);
  for (const LayerParams<From>& l : e.layers) {
    out->layers.push_back({c(l.wq), c(l.bq), c(l.wk), c(l.bk), c(l.wv), c(l.bv), c(l.wo), c(l.bo), c(l.ln1_gamma),
                           c(l.ln1_beta), c(l.w1), c(l.b1), c(l.w2), c(l.b2), c(l.ln2_gamma), c(l.ln2_beta)});
  }
  return out;
}

}  // namespace

template <typename T>
Model<T> Model<T>::create(const EncoderConfig& config, bool share_encoder, std::uint64_t seed) {
  config.validate();
  Initializer<T> init(seed);
  Model<T> m;
  m.config = config;
  m.gen_encoder = init_encoder(init, config, share_encoder ? "encoder." : "generator.");
  if (share_encoder) {
    m.disc_encoder = m.gen_encoder;
  } else {
    std::unordered_map<const Parameter<T>*, ParameterPtr<T>> seen;
    m.disc_encoder = convert_encoder<T, T>(*m.gen_encoder, seen);
    for (const auto& p : m.disc_encoder->parameters()) p->name.replace(0, 9, "discriminator");
  }
  const std::size_t h = config.hidden;
  m.mlm.bias = init.constant("mlm.bias", {config.vocab_size}, T(0));
  m.disc.W = init.normal("disc.W", {h, h});
  m.disc.w = init.normal("disc.w", {h, 1});
  m.qa.start_w = init.normal("qa.start_w", {h, 1});
  m.qa.start_b = init.constant("qa.start_b", {1}, T(0));
  m.qa.end_w = init.normal("qa.end_w", {h, 1});
  m.qa.end_b = init.constant("qa.end_b", {1}, T(0));
  return m;
}

template <typename T>
std::vector<ParameterPtr<T>> Model<T>::parameters() const {
  std::vector<ParameterPtr<T>> out = gen_encoder->parameters();
  if (!shared()) {
    for (auto& p : disc_encoder->parameters()) out.push_back(p);
  }
  for (const auto& p : {mlm.bias, disc.W, disc.w, qa.start_w, qa.start_b, qa.end_w, qa.end_b}) out.push_back(p);
  return out;
}

template <typename T>
Var<T> gather_rows(Var<T> x, std::span<const std::int32_t> rows) {
  return ops::embedding_lookup(x, rows);
}

template <typename T>
Var<T> encode(Tape<T>& tape, const EncoderParams<T>& params, const EncoderConfig& config,
              std::span<const TokenId> ids, const ForwardOptions& options) {
  const std::size_t n = ids.size();
  if (n == 0) throw std::invalid_argument("encode: empty sequence");
  if (n > config.max_len) {
    throw std::invalid_argument("encode: sequence of " + std::to_string(n) + " tokens exceeds max_len " +
                                std::to_string(config.max_len));
  }
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw std::invalid_argument("encode: token id " + std::to_string(id) + " outside the vocabulary");
    }
  }
  const bool use_dropout = options.train && config.dropout > 0.0;
  std::uint64_t dropout_site = 0;
  auto drop = [&](Var<T> x) {
    if (!use_dropout) return x;
    return ops::dropout(x, config.dropout, epoch_seed(options.dropout_seed ^ kDropoutStream, 0, dropout_site++));
  };
  auto p = [&tape](const ParameterPtr<T>& param) { return tape.parameter(param); };

  std::vector<std::int32_t> positions(n);
  for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<std::int32_t>(i);
  Var<T> x = ops::add(ops::embedding_lookup(p(params.token_embedding), ids),
                      ops::embedding_lookup(p(params.position_embedding), positions));
  x = drop(ops::layer_norm(x, p(params.emb_ln_gamma), p(params.emb_ln_beta)));

  const std::size_t head_dim = config.hidden / config.heads;
  const T inv_sqrt_d = T(1) / static_cast<T>(std::sqrt(static_cast<double>(head_dim)));
  for (const LayerParams<T>& l : params.layers) {
    Var<T> q = ops::add(ops::matmul(x, p(l.wq)), p(l.bq));
    Var<T> k = ops::add(ops::matmul(x, p(l.wk)), p(l.bk));
    Var<T> v = ops::add(ops::matmul(x, p(l.wv)), p(l.bv));
    std::vector<Var<T>> heads;
    heads.reserve(config.heads);
    for (std::size_t hd = 0; hd < config.heads; ++hd) {
      const std::size_t b = hd * head_dim, e = b + head_dim;
      Var<T> scores = ops::scale(ops::matmul_nt(ops::slice(q, 1, b, e), ops::slice(k, 1, b, e)), inv_sqrt_d);
      heads.push_back(ops::matmul(ops::softmax(scores, 1), ops::slice(v, 1, b, e)));
    }
    Var<T> attn = config.heads == 1 ? heads.front() : ops::concat_cols(heads);
    attn = drop(ops::add(ops::matmul(attn, p(l.wo)), p(l.bo)));
    x = ops::layer_norm(ops::add(x, attn), p(l.ln1_gamma), p(l.ln1_beta));
    Var<T> f = ops::gelu(ops::add(ops::matmul(x, p(l.w1)), p(l.b1)));
    f = drop(ops::add(ops::matmul(f, p(l.w2)), p(l.b2)));
    x = ops::layer_norm(ops::add(x, f), p(l.ln2_gamma), p(l.ln2_beta));
  }
  return x;
}

template <typename T>
Var<T> mlm_logits(Tape<T>& tape, const Model<T>& model, Var<T> hidden) {
  return ops::add(ops::matmul_nt(hidden, tape.parameter(model.gen_encoder->token_embedding)),
                  tape.parameter(model.mlm.bias));
}

template <typename T>
Var<T> disc_logits(Tape<T>& tape, const Model<T>& model, Var<T> hidden) {
  return ops::matmul(ops::gelu(ops::matmul(hidden, tape.parameter(model.disc.W))), tape.parameter(model.disc.w));
}

template <typename T>
Var<T> disc_prob(Tape<T>& tape, const Model<T>& model, Var<T> hidden) {
  return ops::sigmoid(disc_logits(tape, model, hidden));
}

template <typename T>
std::pair<Var<T>, Var<T>> qa_logits(Tape<T>& tape, const Model<T>& model, Var<T> hidden) {
  Var<T> s = ops::add(ops::matmul(hidden, tape.parameter(model.qa.start_w)), tape.parameter(model.qa.start_b));
  Var<T> e = ops::add(ops::matmul(hidden, tape.parameter(model.qa.end_w)), tape.parameter(model.qa.end_b));
  return {s, e};
}

template <typename To, typename From>
Model<To> convert_model(const Model<From>& model) {
  std::unordered_map<const Parameter<From>*, ParameterPtr<To>> seen;
  Model<To> out;
  out.config = model.config;
  out.gen_encoder = convert_encoder<To, From>(*model.gen_encoder, seen);
  out.disc_encoder = model.shared() ? out.gen_encoder : convert_encoder<To, From>(*model.disc_encoder, seen);
  auto c = [&seen](const ParameterPtr<From>& p) { return convert_param<To, From>(p, p->name, seen); };
  out.mlm.bias = c(model.mlm.bias);
  out.disc = {c(model.disc.W), c(model.disc.w)};
  out.qa = {c(model.qa.start_w), c(model.qa.start_b), c(model.qa.end_w), c(model.qa.end_b)};
  return out;
}

#define SPANLM_INSTANTIATE_MODEL(T)                                                                         \
  template struct EncoderParams<T>;                                                                         \
  template struct Model<T>;                                                                                 \
  template Var<T> gather_rows(Var<T>, std::span<const std::int32_t>);                                       \
  template Var<T> encode(Tape<T>&, const EncoderParams<T>&, const EncoderConfig&, std::span<const TokenId>, \
                         const ForwardOptions&);                                                            \
  template Var<T> mlm_logits(Tape<T>&, const Model<T>&, Var<T>);                                            \
  template Var<T> disc_logits(Tape<T>&, const Model<T>&, Var<T>);                                           \
  template Var<T> disc_prob(Tape<T>&, const Model<T>&, Var<T>);                                             \
  template std::pair<Var<T>, Var<T>> qa_logits(Tape<T>&, const Model<T>&, Var<T>);

SPANLM_INSTANTIATE_MODEL(float)
SPANLM_INSTANTIATE_MODEL(double)
#undef SPANLM_INSTANTIATE_MODEL

template Model<double> convert_model<double, float>(const Model<float>&);
template Model<float> convert_model<float, double>(const Model<double>&);
template Model<float> convert_model<float, float>(const Model<float>&);
template Model<double> convert_model<double, double>(const Model<double>&);

}  // namespace spanlm
