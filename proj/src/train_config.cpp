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

#include "spanlm/train_config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "spanlm/error.hpp"

namespace spanlm {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kTwoTower:
      return "two_tower";
    case Scheme::kPipeline:
      return "pipeline";
    case Scheme::kMlmBaseline:
      return "mlm_baseline";
  }
  return "pipeline";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "two_tower" || name == "two-tower") return Scheme::kTwoTower;
  if (name == "pipeline") return Scheme::kPipeline;
  if (name == "mlm_baseline" || name == "mlm-baseline") return Scheme::kMlmBaseline;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

std::string_view gen_decode_name(GenDecode d) {
  switch (d) {
    case GenDecode::kSample:
      return "sample";
    case GenDecode::kArgmax:
      return "argmax";
    case GenDecode::kOriginal:
      return "original";
  }
  return "sample";
}

GenDecode parse_gen_decode(std::string_view name) {
  if (name == "sample") return GenDecode::kSample;
  if (name == "argmax") return GenDecode::kArgmax;
  if (name == "original") return GenDecode::kOriginal;
  throw std::invalid_argument("unknown gen_decode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (no_gen && no_disc) throw std::invalid_argument("no_gen and no_disc cannot both be set");
  if (scheme == Scheme::kMlmBaseline && no_gen) throw std::invalid_argument("mlm_baseline has only the generative loss");
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  mask_config().validate();
  replace_config().validate();
  if (!(optimizer.lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw std::invalid_argument("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw std::invalid_argument("adam_eps must be > 0");
  if (!(optimizer.weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  EncoderConfig probe = encoder;
  probe.vocab_size = std::max<std::size_t>(probe.vocab_size, Specials::kCount + 1);
  probe.validate();
}

ordered_json TrainConfig::to_json() const {
  ordered_json j;
  j["scheme"] = scheme_name(scheme);
  j["lambda"] = lambda;
  j["share_params"] = share_params;
  j["no_k_replace"] = no_k_replace;
  j["no_gen"] = no_gen;
  j["no_disc"] = no_disc;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["mask_ratio"] = mask_ratio;
  j["replace_ratio"] = replace_ratio;
  j["span_choice_prob"] = span_choice_prob;
  j["gen_decode"] = gen_decode_name(gen_decode);
  j["lr"] = optimizer.lr;
  j["beta1"] = optimizer.beta1;
  j["beta2"] = optimizer.beta2;
  j["adam_eps"] = optimizer.eps;
  j["weight_decay"] = optimizer.weight_decay;
  j["non_finite"] = optimizer.non_finite == NonFinitePolicy::kAbort ? "abort" : "skip";
  j["layers"] = encoder.layers;
  j["hidden"] = encoder.hidden;
  j["heads"] = encoder.heads;
  j["ffn_dim"] = encoder.ffn_dim;
  j["max_len"] = encoder.max_len;
  j["dropout"] = encoder.dropout;
  j["annotated"] = annotated;
  j["vocab"] = vocab;
  j["output_dir"] = output_dir;
  j["keep_epoch_checkpoints"] = keep_epoch_checkpoints;
  return j;
}

namespace {

template <typename V>
V typed(const json& v, const std::string& key) {
  if constexpr (std::is_same_v<V, bool>) {
    if (!v.is_boolean()) throw std::invalid_argument("config key '" + key + "' must be a boolean");
  } else if constexpr (std::is_same_v<V, std::string>) {
    if (!v.is_string()) throw std::invalid_argument("config key '" + key + "' must be a string");
  } else if constexpr (std::is_floating_point_v<V>) {
    if (!v.is_number()) throw std::invalid_argument("config key '" + key + "' must be a number");
  } else {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw std::invalid_argument("config key '" + key + "' must be a non-negative integer");
    }
  }
  return v.get<V>();
}

}  // namespace

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a key/value object");
  TrainConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "scheme") c.scheme = parse_scheme(typed<std::string>(v, key));
    else if (key == "lambda") c.lambda = typed<double>(v, key);
    else if (key == "share_params") c.share_params = typed<bool>(v, key);
    else if (key == "no_k_replace") c.no_k_replace = typed<bool>(v, key);
    else if (key == "no_gen") c.no_gen = typed<bool>(v, key);
    else if (key == "no_disc") c.no_disc = typed<bool>(v, key);
    else if (key == "epochs") c.epochs = typed<std::size_t>(v, key);
    else if (key == "batch_size") c.batch_size = typed<std::size_t>(v, key);
    else if (key == "seed") c.seed = typed<std::uint64_t>(v, key);
    else if (key == "mask_ratio") c.mask_ratio = typed<double>(v, key);
    else if (key == "replace_ratio") c.replace_ratio = typed<double>(v, key);
    else if (key == "span_choice_prob") c.span_choice_prob = typed<double>(v, key);
    else if (key == "gen_decode") c.gen_decode = parse_gen_decode(typed<std::string>(v, key));
    else if (key == "lr") c.optimizer.lr = typed<double>(v, key);
    else if (key == "beta1") c.optimizer.beta1 = typed<double>(v, key);
    else if (key == "beta2") c.optimizer.beta2 = typed<double>(v, key);
    else if (key == "adam_eps") c.optimizer.eps = typed<double>(v, key);
    else if (key == "weight_decay") c.optimizer.weight_decay = typed<double>(v, key);
    else if (key == "non_finite") {
      const auto s = typed<std::string>(v, key);
      if (s == "abort") c.optimizer.non_finite = NonFinitePolicy::kAbort;
      else if (s == "skip") c.optimizer.non_finite = NonFinitePolicy::kSkipStep;
      else throw std::invalid_argument("non_finite must be \"abort\" or \"skip\"");
    }
    else if (key == "layers") c.encoder.layers = typed<std::size_t>(v, key);
    else if (key == "hidden") c.encoder.hidden = typed<std::size_t>(v, key);
    else if (key == "heads") c.encoder.heads = typed<std::size_t>(v, key);
    else if (key == "ffn_dim") c.encoder.ffn_dim = typed<std::size_t>(v, key);
    else if (key == "max_len") c.encoder.max_len = typed<std::size_t>(v, key);
    else if (key == "dropout") c.encoder.dropout = typed<double>(v, key);
    else if (key == "annotated") c.annotated = typed<std::string>(v, key);
    else if (key == "vocab") c.vocab = typed<std::string>(v, key);
    else if (key == "output_dir") c.output_dir = typed<std::string>(v, key);
    else if (key == "keep_epoch_checkpoints") c.keep_epoch_checkpoints = typed<bool>(v, key);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

json read_flat_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && content[first] == '{') {
    try {
      return json::parse(content);
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ": malformed JSON config: " + e.what());
    }
  }
  json out = json::object();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const auto nl = content.find('\n', pos);
    std::string line = content.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? content.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path.string(), line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw DataError(path.string(), line_no, "empty key");
    if (out.contains(key)) throw DataError(path.string(), line_no, "duplicate key '" + key + "'");
    json parsed = json::parse(value, nullptr, false);
    out[key] = parsed.is_discarded() || parsed.is_structured() ? json(value) : parsed;
  }
  return out;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  const json j = read_flat_config(path);
  TrainConfig c;
  try {
    c = TrainConfig::from_json(j);
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  for (std::string* p : {&c.annotated, &c.vocab, &c.output_dir}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return c;
}

}  // namespace spanlm
