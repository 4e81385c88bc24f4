#include "cosmic/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <map>

#include "cosmic/binary_io.hpp"

namespace cosmic {

std::vector<std::uint8_t> encode_checkpoint(const CosmicParams& params) {
  binary::Writer w;
  w.bytes(std::string_view(kCheckpointMagic, sizeof kCheckpointMagic));
  w.u32(kCheckpointVersion);
  const auto named = params.named_parameters();
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t->rows()));
    w.u32(static_cast<std::uint32_t>(t->cols()));
    for (double v : t->data()) w.f64(v);
  }
  return std::move(w.buffer());
}

CosmicParams decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  binary::Reader r(bytes.data(), bytes.size());
  if (r.bytes(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw ParseError("not a checkpoint: bad magic");
  }
  if (const auto version = r.u32(); version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.str();
    const std::size_t rows = r.u32();
    const std::size_t cols = r.u32();
    std::vector<double> data(rows * cols);
    for (double& v : data) v = r.f64();
    if (!tensors.emplace(name, Tensor({rows, cols}, std::move(data))).second) {
      throw ValidationError("duplicate tensor '" + name + "' in checkpoint");
    }
  }
  if (!r.at_end()) throw ParseError("trailing bytes after checkpoint payload");

  const auto find = [&](const std::string& name) -> const Tensor& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ValidationError("checkpoint is missing '" + name + "'");
    return it->second;
  };
  ModelDims dims;
  dims.hidden = find("gru_c.hidden_weights").cols();
  dims.utterance = find("attn_proj.weight").rows();
  const std::size_t q_in = find("gru_q.input_weights").cols();
  if (q_in <= dims.hidden) throw ValidationError("gru_q.input_weights too narrow for hidden size");
  dims.commonsense = q_in - dims.hidden;
  dims.classes = find("classifier.weight").rows();
  const Mode mode = tensors.contains("backward.gru_c.hidden_weights") ? Mode::bidirectional : Mode::unidirectional;

  CosmicParams params(dims, mode);
  auto named = params.named_parameters();
  if (named.size() != tensors.size()) {
    throw ValidationError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                          std::to_string(named.size()));
  }
  for (auto& [name, slot] : named) {
    const Tensor& src = find(name);
    if (src.shape() != slot->shape()) {
      throw ValidationError(name + " has shape " + to_string(src.shape()) + ", expected " +
                            to_string(slot->shape()));
    }
    *slot = src;
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const CosmicParams& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

CosmicParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace cosmic
