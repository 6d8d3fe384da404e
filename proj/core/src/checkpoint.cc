/*
 * Copyright 2026 The xfdd Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "xfdd/checkpoint.h"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "xfdd/error.h"

namespace xfdd::nn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string FormatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

std::string LayerLine(const LayerSpec& layer) {
  return std::visit(
      Overloaded{
          [](const Conv1dSpec& c) {
            return "conv1d out=" + std::to_string(c.out_channels) +
                   " kernel=" + std::to_string(c.kernel) +
                   " stride=" + std::to_string(c.stride) +
                   " padding=" + std::to_string(c.padding);
          },
          [](const BatchNormSpec& b) {
            return "batchnorm1d eps=" + FormatDouble(b.eps) +
                   " momentum=" + FormatDouble(b.momentum);
          },
          [](const ReluSpec&) { return std::string("relu"); },
          [](const MaxPoolSpec& p) {
            return "maxpool1d kernel=" + std::to_string(p.kernel) +
                   " stride=" + std::to_string(p.stride);
          },
          [](const RecurrentSpec& r) {
            std::string kind = CellKindName(r.cell);
            for (auto& ch : kind) ch = static_cast<char>(std::tolower(ch));
            return kind + " hidden=" + std::to_string(r.hidden) +
                   " layers=" + std::to_string(r.layers);
          },
          [](const LinearSpec& l) {
            return "linear out=" + std::to_string(l.out_features);
          },
          [](const DropoutSpec& d) { return "dropout rate=" + FormatDouble(d.rate); },
      },
      layer);
}

std::string ShapeText(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

std::vector<std::string> SplitLines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> Tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::size_t ToSize(const std::string& text, const std::string& what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("checkpoint: bad integer '" + text + "' for " + what);
  }
  return v;
}

double ToDouble(const std::string& text, const std::string& what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("checkpoint: bad number '" + text + "' for " + what);
  }
  return v;
}

// Keyed fields of a "kind k=v k=v" layer line.
std::map<std::string, std::string> Fields(const std::vector<std::string>& toks) {
  std::map<std::string, std::string> out;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    auto eq = toks[i].find('=');
    if (eq == std::string::npos) {
      throw FormatError("checkpoint: malformed layer field '" + toks[i] + "'");
    }
    out[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
  }
  return out;
}

LayerSpec ParseLayer(const std::string& line) {
  auto toks = Tokens(line);
  if (toks.empty()) throw FormatError("checkpoint: empty layer line");
  auto f = Fields(toks);
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = f.find(key);
    if (it == f.end()) {
      throw FormatError("checkpoint: layer '" + line + "' lacks " + key);
    }
    return it->second;
  };
  const std::string& kind = toks[0];
  if (kind == "conv1d") {
    return Conv1dSpec{ToSize(get("out"), "out"), ToSize(get("kernel"), "kernel"),
                      ToSize(get("stride"), "stride"),
                      ToSize(get("padding"), "padding")};
  }
  if (kind == "batchnorm1d") {
    return BatchNormSpec{ToDouble(get("eps"), "eps"),
                         ToDouble(get("momentum"), "momentum")};
  }
  if (kind == "relu") return ReluSpec{};
  if (kind == "maxpool1d") {
    return MaxPoolSpec{ToSize(get("kernel"), "kernel"),
                       ToSize(get("stride"), "stride")};
  }
  if (kind == "gru" || kind == "rnn" || kind == "lstm") {
    return RecurrentSpec{ParseCellKind(kind), ToSize(get("hidden"), "hidden"),
                         ToSize(get("layers"), "layers")};
  }
  if (kind == "linear") return LinearSpec{ToSize(get("out"), "out")};
  if (kind == "dropout") return DropoutSpec{ToDouble(get("rate"), "rate")};
  throw FormatError("checkpoint: unknown layer kind '" + kind + "'");
}

struct Parsed {
  std::string manifest;
  std::size_t payload_offset = 0;
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::size_t payload_bytes = 0;
};

Parsed ParseHeader(std::span<const std::uint8_t> bytes) {
  static const std::string kEnd = "\nend\n";
  const char* begin = reinterpret_cast<const char*>(bytes.data());
  std::string_view view(begin, bytes.size());
  auto pos = view.find(kEnd);
  if (pos == std::string_view::npos) {
    throw FormatError("checkpoint: manifest terminator not found in " +
                      std::to_string(bytes.size()) + " bytes (truncated?)");
  }
  Parsed p;
  p.manifest = std::string(view.substr(0, pos + kEnd.size()));
  p.payload_offset = pos + kEnd.size();

  auto lines = SplitLines(p.manifest);
  std::size_t i = 0;
  auto next = [&](const std::string& key) {
    if (i >= lines.size()) throw FormatError("checkpoint: missing '" + key + "'");
    auto toks = Tokens(lines[i]);
    if (toks.size() != 2 || toks[0] != key) {
      throw FormatError("checkpoint: expected '" + key + " <value>' at line " +
                        std::to_string(i + 1) + ", found '" + lines[i] + "'");
    }
    ++i;
    return toks[1];
  };
  const std::string version = next("xfdd-checkpoint");
  if (version != std::to_string(kCheckpointVersion)) {
    throw FormatError(
        "checkpoint: version mismatch\n" +
        ManifestDiff("xfdd-checkpoint " + std::to_string(kCheckpointVersion) + "\n",
                     "xfdd-checkpoint " + version + "\n"));
  }
  p.spec.name = next("name");
  const std::string precision = next("precision");
  if (precision != "f32") {
    throw FormatError("checkpoint: unsupported precision '" + precision + "'");
  }
  p.seed = ToSize(next("seed"), "seed");
  p.spec.input_channels = ToSize(next("input_channels"), "input_channels");
  p.spec.window = ToSize(next("window"), "window");
  p.spec.classes = ToSize(next("classes"), "classes");
  const std::size_t n_layers = ToSize(next("layers"), "layers");
  for (std::size_t k = 0; k < n_layers; ++k, ++i) {
    if (i >= lines.size()) throw FormatError("checkpoint: layer list truncated");
    p.spec.layers.push_back(ParseLayer(lines[i]));
  }
  // Remaining lines are checked wholesale against the rebuilt manifest.
  for (; i < lines.size(); ++i) {
    auto toks = Tokens(lines[i]);
    if (toks.size() == 2 && toks[0] == "payload_bytes") {
      p.payload_bytes = ToSize(toks[1], "payload_bytes");
    }
  }
  return p;
}

void CheckPayload(const Parsed& p, std::size_t total) {
  const std::size_t have = total - p.payload_offset;
  if (have < p.payload_bytes) {
    throw FormatError("checkpoint truncated: payload needs " +
                      std::to_string(p.payload_bytes) + " bytes, found " +
                      std::to_string(have) + " (missing " +
                      std::to_string(p.payload_bytes - have) + " bytes)");
  }
  if (have > p.payload_bytes) {
    throw FormatError("checkpoint has " + std::to_string(have - p.payload_bytes) +
                      " trailing bytes after the payload");
  }
}

void ReadPayload(std::span<const std::uint8_t> bytes, const Parsed& p,
                 Model<float>& model) {
  std::size_t off = p.payload_offset;
  for (auto& t : model.tensors()) {
    const std::size_t n = t.size() * sizeof(float);
    std::memcpy(t.raw(), bytes.data() + off, n);
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : t.vec()) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        u = __builtin_bswap32(u);
        std::memcpy(&v, &u, 4);
      }
    }
    off += n;
  }
}

std::string WithoutSeed(const std::string& manifest) {
  std::string out;
  for (const auto& line : SplitLines(manifest)) {
    if (line.rfind("seed ", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::string ManifestDiff(const std::string& expected, const std::string& found) {
  auto a = SplitLines(expected);
  auto b = SplitLines(found);
  std::string out;
  const std::size_t n = std::max(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string* x = i < a.size() ? &a[i] : nullptr;
    const std::string* y = i < b.size() ? &b[i] : nullptr;
    if (x && y && *x == *y) continue;
    if (x) out += "- " + *x + "\n";
    if (y) out += "+ " + *y + "\n";
  }
  return out;
}

std::string CheckpointManifest(const Model<float>& model) {
  const ModelSpec& spec = model.spec();
  std::ostringstream out;
  out << "xfdd-checkpoint " << kCheckpointVersion << "\n"
      << "name " << spec.name << "\n"
      << "precision f32\n"
      << "seed " << model.seed() << "\n"
      << "input_channels " << spec.input_channels << "\n"
      << "window " << spec.window << "\n"
      << "classes " << spec.classes << "\n"
      << "layers " << spec.layers.size() << "\n";
  for (const auto& layer : spec.layers) out << LayerLine(layer) << "\n";
  out << "tensors " << model.tensors().size() << "\n";
  std::size_t bytes = 0;
  for (std::size_t i = 0; i < model.tensors().size(); ++i) {
    out << model.tensor_info()[i].name << " "
        << ShapeText(model.tensors()[i].shape()) << "\n";
    bytes += model.tensors()[i].size() * sizeof(float);
  }
  out << "payload_bytes " << bytes << "\n"
      << "end\n";
  return out.str();
}

std::vector<std::uint8_t> Serialize(const Model<float>& model) {
  const std::string manifest = CheckpointManifest(model);
  std::vector<std::uint8_t> out(manifest.begin(), manifest.end());
  for (const auto& t : model.tensors()) {
    const std::size_t off = out.size();
    out.resize(off + t.size() * sizeof(float));
    std::memcpy(out.data() + off, t.raw(), t.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = off; i < out.size(); i += 4) {
        std::swap(out[i], out[i + 3]);
        std::swap(out[i + 1], out[i + 2]);
      }
    }
  }
  return out;
}

Model<float> Deserialize(std::span<const std::uint8_t> bytes) {
  Parsed p = ParseHeader(bytes);
  Model<float> model = [&] {
    try {
      return Model<float>(p.spec, p.seed);
    } catch (const ShapeError& e) {
      throw FormatError(std::string("checkpoint describes an invalid model: ") +
                        e.what());
    }
  }();
  const std::string expected = CheckpointManifest(model);
  if (expected != p.manifest) {
    throw FormatError("checkpoint manifest does not match its layer spec\n" +
                      ManifestDiff(expected, p.manifest));
  }
  CheckPayload(p, bytes.size());
  ReadPayload(bytes, p, model);
  return model;
}

void DeserializeInto(std::span<const std::uint8_t> bytes, Model<float>& model) {
  Parsed p = ParseHeader(bytes);
  const std::string expected = WithoutSeed(CheckpointManifest(model));
  const std::string found = WithoutSeed(p.manifest);
  if (expected != found) {
    throw FormatError("checkpoint does not fit the target model\n" +
                      ManifestDiff(expected, found));
  }
  CheckPayload(p, bytes.size());
  ReadPayload(bytes, p, model);
}

void SaveCheckpoint(const Model<float>& model, const std::filesystem::path& path) {
  auto bytes = Serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Model<float> LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return Deserialize(bytes);
}

}  // namespace xfdd::nn
