// Copyright 2026 The lfgrec Authors.
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

#include "lfgrec/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>

#include <fmt/format.h>

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; add byte swapping for this target");

namespace lfgrec {
namespace {

constexpr char kMagic[4] = {'L', 'F', 'G', '1'};

enum Tag : std::uint32_t {
  kTagKind = 1,
  kTagCodec = 2,
  kTagItems = 3,
  kTagNet = 4,
  kTagItemFactors = 5,
  kTagItemBias = 6,
  kTagScalars = 7,
  kTagUserFactors = 8,
  kTagUserBias = 9,
};

enum LayerCode : std::uint32_t { kLinear = 1, kLeaky = 2, kBatchNorm = 3, kTanh = 4 };

class Writer {
 public:
  template <typename T>
  void Put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void PutString(std::string_view s) {
    Put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  template <typename Derived>
  void PutMatrix(const Eigen::MatrixBase<Derived>& m) {
    Put<std::uint64_t>(m.rows());
    Put<std::uint64_t>(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) Put<double>(m(r, c));
    }
  }
  void PutSection(std::uint32_t tag, const Writer& body) {
    Put(tag);
    Put<std::uint64_t>(body.buf_.size());
    buf_.insert(buf_.end(), body.buf_.begin(), body.buf_.end());
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string GetString() {
    const auto n = Get<std::uint32_t>();
    Need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Matrix GetMatrix() {
    const auto rows = Get<std::uint64_t>();
    const auto cols = Get<std::uint64_t>();
    if (cols != 0 && rows > (bytes_.size() - pos_) / 8 / cols) {
      throw FormatError("model file truncated (matrix payload)");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = Get<double>();
    return m;
  }
  std::span<const std::uint8_t> GetBytes(std::uint64_t n) {
    Need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError("model file truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Writer KindSection(ModelKind kind) {
  Writer w;
  w.Put(static_cast<std::uint32_t>(kind));
  return w;
}

Writer ItemsSection(const std::vector<std::int64_t>& ids) {
  Writer w;
  w.Put<std::uint64_t>(ids.size());
  for (const auto id : ids) w.Put(id);
  return w;
}

Writer NetSection(const nn::Network& net) {
  Writer w;
  w.Put<std::uint32_t>(net.input_dim());
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(net.layers().size()));
  for (const nn::Layer& layer : net.layers()) {
    if (const auto* lin = std::get_if<nn::Linear>(&layer)) {
      w.Put<std::uint32_t>(kLinear);
      w.PutMatrix(lin->weight);
      w.PutMatrix(lin->bias);
    } else if (const auto* leaky = std::get_if<nn::LeakyRelu>(&layer)) {
      w.Put<std::uint32_t>(kLeaky);
      w.Put(leaky->slope);
    } else if (const auto* bn = std::get_if<nn::BatchNorm>(&layer)) {
      w.Put<std::uint32_t>(kBatchNorm);
      w.Put(bn->eps);
      w.Put(bn->momentum);
      w.PutMatrix(bn->gamma);
      w.PutMatrix(bn->beta);
      w.PutMatrix(bn->running_mean);
      w.PutMatrix(bn->running_var);
    } else {
      w.Put<std::uint32_t>(kTanh);
    }
  }
  return w;
}

nn::Network ReadNet(Reader& r) {
  const auto input_dim = r.Get<std::uint32_t>();
  const auto count = r.Get<std::uint32_t>();
  std::vector<nn::Layer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    switch (r.Get<std::uint32_t>()) {
      case kLinear: {
        nn::Linear lin;
        lin.weight = r.GetMatrix();
        lin.bias = r.GetMatrix();
        layers.emplace_back(std::move(lin));
        break;
      }
      case kLeaky:
        layers.emplace_back(nn::LeakyRelu{r.Get<double>()});
        break;
      case kBatchNorm: {
        nn::BatchNorm bn;
        bn.eps = r.Get<double>();
        bn.momentum = r.Get<double>();
        bn.gamma = r.GetMatrix();
        bn.beta = r.GetMatrix();
        bn.running_mean = r.GetMatrix();
        bn.running_var = r.GetMatrix();
        layers.emplace_back(std::move(bn));
        break;
      }
      case kTanh:
        layers.emplace_back(nn::Tanh{});
        break;
      default:
        throw FormatError("unknown layer code in model file");
    }
  }
  try {
    nn::Network net(static_cast<int>(input_dim), std::move(layers));
    net.set_mode(nn::Mode::kInfer);
    return net;
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent network in model file: ") + e.what());
  }
}

std::vector<std::uint8_t> Finish(Writer& body) {
  Writer out;
  for (const char c : kMagic) out.Put(c);
  out.Put(kModelFormatVersion);
  auto& bytes = out.bytes();
  bytes.insert(bytes.end(), body.bytes().begin(), body.bytes().end());
  const std::uint64_t sum = Fnv1a64(bytes);
  out.Put(sum);
  return std::move(out.bytes());
}

const std::span<const std::uint8_t>& Require(
    const std::map<std::uint32_t, std::span<const std::uint8_t>>& sections, std::uint32_t tag) {
  const auto it = sections.find(tag);
  if (it == sections.end()) throw FormatError(fmt::format("model file lacks section {}", tag));
  return it->second;
}

}  // namespace

std::uint64_t Fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> SerializeModel(const LfgModel& model) {
  Writer body;
  body.PutSection(kTagKind, KindSection(ModelKind::kLfg));

  Writer codec;
  codec.Put(model.codec.age_min());
  codec.Put(model.codec.age_max());
  codec.Put<std::uint32_t>(static_cast<std::uint32_t>(model.codec.genders().size()));
  for (const auto& g : model.codec.genders()) codec.PutString(g);
  codec.Put<std::uint32_t>(static_cast<std::uint32_t>(model.codec.occupations().size()));
  for (const auto& o : model.codec.occupations()) codec.PutString(o);
  body.PutSection(kTagCodec, codec);

  body.PutSection(kTagItems, ItemsSection(model.item_ids));
  body.PutSection(kTagNet, NetSection(model.net));
  Writer factors;
  factors.PutMatrix(model.item_factors);
  body.PutSection(kTagItemFactors, factors);
  Writer bias;
  bias.PutMatrix(model.item_bias);
  body.PutSection(kTagItemBias, bias);
  Writer scalars;
  scalars.Put(model.mu);
  scalars.Put<std::uint32_t>(model.k);
  scalars.Put(model.mask_p);
  body.PutSection(kTagScalars, scalars);
  return Finish(body);
}

std::vector<std::uint8_t> SerializeModel(const BaselineModel& model) {
  Writer body;
  body.PutSection(kTagKind, KindSection(model.flavor == BaselineFlavor::kBiased
                                            ? ModelKind::kBiasSvd
                                            : ModelKind::kFunkSvd));
  body.PutSection(kTagItems, ItemsSection(model.item_ids));
  Writer users;
  users.PutMatrix(model.user_factors);
  body.PutSection(kTagUserFactors, users);
  Writer items;
  items.PutMatrix(model.item_factors);
  body.PutSection(kTagItemFactors, items);
  if (model.flavor == BaselineFlavor::kBiased) {
    Writer ub;
    ub.PutMatrix(model.user_bias);
    body.PutSection(kTagUserBias, ub);
    Writer ib;
    ib.PutMatrix(model.item_bias);
    body.PutSection(kTagItemBias, ib);
  }
  Writer scalars;
  scalars.Put(model.mu);
  body.PutSection(kTagScalars, scalars);
  return Finish(body);
}

AnyModel DeserializeModel(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = sizeof(kMagic) + sizeof(std::uint32_t);
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a model file (bad magic)");
  }
  if (bytes.size() < kHeader + sizeof(std::uint64_t)) throw FormatError("model file truncated");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kModelFormatVersion) {
    throw VersionError(fmt::format("model format version {} is not supported (expected {})",
                                   version, kModelFormatVersion));
  }
  const std::size_t payload = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + payload, sizeof(stored));
  if (Fnv1a64(bytes.first(payload)) != stored) {
    throw ChecksumError("model file checksum mismatch (corrupt or truncated)");
  }

  std::map<std::uint32_t, std::span<const std::uint8_t>> sections;
  Reader outer(bytes.subspan(kHeader, payload - kHeader));
  while (!outer.done()) {
    const auto tag = outer.Get<std::uint32_t>();
    const auto len = outer.Get<std::uint64_t>();
    sections[tag] = outer.GetBytes(len);
  }

  Reader kind_reader(Require(sections, kTagKind));
  const auto kind = static_cast<ModelKind>(kind_reader.Get<std::uint32_t>());
  std::vector<std::int64_t> item_ids;
  if (sections.contains(kTagItems)) {
    Reader r(sections[kTagItems]);
    const auto n = r.Get<std::uint64_t>();
    if (n > bytes.size() / sizeof(std::int64_t)) throw FormatError("model file truncated");
    item_ids.resize(n);
    for (auto& id : item_ids) id = r.Get<std::int64_t>();
  }
  auto matrix = [&](std::uint32_t tag) {
    Reader r(Require(sections, tag));
    return r.GetMatrix();
  };

  if (kind == ModelKind::kLfg) {
    LfgModel model;
    {
      Reader r(Require(sections, kTagCodec));
      const double age_min = r.Get<double>();
      const double age_max = r.Get<double>();
      std::vector<std::string> genders(r.Get<std::uint32_t>());
      for (auto& g : genders) g = r.GetString();
      std::vector<std::string> occupations(r.Get<std::uint32_t>());
      for (auto& o : occupations) o = r.GetString();
      model.codec = FeatureCodec(age_min, age_max, std::move(genders), std::move(occupations));
    }
    {
      Reader r(Require(sections, kTagNet));
      model.net = ReadNet(r);
    }
    model.item_factors = matrix(kTagItemFactors);
    const Matrix bias = matrix(kTagItemBias);
    {
      Reader r(Require(sections, kTagScalars));
      model.mu = r.Get<double>();
      model.k = static_cast<int>(r.Get<std::uint32_t>());
      model.mask_p = r.Get<double>();
    }
    if (bias.rows() != 1 || bias.cols() != model.item_factors.cols() ||
        model.item_factors.rows() != model.k ||
        model.net.input_dim() != model.codec.dim() + model.item_factors.cols() ||
        model.net.output_dim() != model.k + 1 ||
        (!item_ids.empty() && static_cast<Eigen::Index>(item_ids.size()) != bias.cols())) {
      throw FormatError("model file sections disagree on dimensions");
    }
    model.item_bias = bias;
    model.item_ids = std::move(item_ids);
    return model;
  }
  if (kind == ModelKind::kFunkSvd || kind == ModelKind::kBiasSvd) {
    BaselineModel model;
    model.flavor = kind == ModelKind::kBiasSvd ? BaselineFlavor::kBiased : BaselineFlavor::kPlain;
    model.user_factors = matrix(kTagUserFactors);
    model.item_factors = matrix(kTagItemFactors);
    if (model.flavor == BaselineFlavor::kBiased) {
      const Matrix ub = matrix(kTagUserBias);
      const Matrix ib = matrix(kTagItemBias);
      if (ub.cols() != 1 || ib.cols() != 1 || ub.rows() != model.user_factors.rows() ||
          ib.rows() != model.item_factors.rows()) {
        throw FormatError("model file bias sections have the wrong shape");
      }
      model.user_bias = ub.col(0);
      model.item_bias = ib.col(0);
    }
    Reader r(Require(sections, kTagScalars));
    model.mu = r.Get<double>();
    model.item_ids = std::move(item_ids);
    if (model.user_factors.cols() != model.item_factors.cols() ||
        (!model.item_ids.empty() &&
         static_cast<Eigen::Index>(model.item_ids.size()) != model.item_factors.rows())) {
      throw FormatError("model file sections disagree on dimensions");
    }
    return model;
  }
  throw FormatError(fmt::format("unknown model kind {}", static_cast<std::uint32_t>(kind)));
}

void SaveModel(const AnyModel& model, const std::filesystem::path& path) {
  const auto bytes = std::visit([](const auto& m) { return SerializeModel(m); }, model);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(fmt::format("write to {} failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

AnyModel LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open model file {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return DeserializeModel(bytes);
}

LfgModel LoadLfgModel(const std::filesystem::path& path) {
  AnyModel any = LoadModel(path);
  if (auto* lfg = std::get_if<LfgModel>(&any)) return std::move(*lfg);
  throw FormatError(fmt::format("{} holds a baseline model, not a generator", path.string()));
}

}  // namespace lfgrec
