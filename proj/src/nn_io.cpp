#include "graphsolver/nn.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace graphsolver::nn {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'N', 'N'};

template <typename T>
void put(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof(T))) throw FormatError("truncated parameter container");
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string get_string(std::istream& in, std::uint32_t limit) {
  const auto len = get<std::uint32_t>(in);
  if (len > limit) throw FormatError("parameter container string too long");
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw FormatError("truncated parameter container");
  return s;
}

bool is_buffer(const std::string& name) {
  return name.rfind("norm.", 0) == 0 || name.find(".running_") != std::string::npos;
}

}  // namespace

void save_params(std::ostream& out, const ParamSet& params, const ModelConfig& cfg) {
  check_compatible(params, cfg);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kContainerVersion);
  const std::string config = cfg.to_json();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config.size()));
  out.write(config.data(), static_cast<std::streamsize>(config.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
}

std::pair<ParamSet, ModelConfig> load_params(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a GraphSolver parameter container");
  const auto version = get<std::uint32_t>(in);
  if (version != kContainerVersion) {
    throw FormatError("parameter container version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kContainerVersion) + ")");
  }
  const ModelConfig cfg = ModelConfig::from_json(get_string(in, 1u << 16));
  const auto count = get<std::uint32_t>(in);
  if (count > 100000) throw FormatError("parameter container declares too many tensors");
  ParamSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, 4096);
    const auto rank = get<std::uint32_t>(in);
    if (rank < 1 || rank > 2) throw FormatError("tensor '" + name + "' has unsupported rank");
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get<std::uint64_t>(in));
      if (d == 0 || d > (1u << 28)) throw FormatError("tensor '" + name + "' has an implausible dimension");
      total *= d;
      if (total > (std::size_t{1} << 30)) throw FormatError("tensor '" + name + "' is too large");
    }
    if (params.contains(name)) throw FormatError("duplicate tensor '" + name + "'");
    auto& t = params.add(name, shape, !is_buffer(name));
    if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(total * sizeof(double)))) {
      throw FormatError("truncated tensor '" + name + "'");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after parameter container");
  try {
    check_compatible(params, cfg);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("container tensors do not match its config: ") + e.what());
  }
  if (auto bad = params.first_non_finite()) throw FormatError("tensor '" + *bad + "' holds non-finite values");
  return {std::move(params), cfg};
}

void save_params_file(const std::string& path, const ParamSet& params, const ModelConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  save_params(out, params, cfg);
  if (!out) throw FormatError("failed writing '" + path + "'");
}

std::pair<ParamSet, ModelConfig> load_params_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return load_params(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

ParamSet load_params_for(std::istream& in, const ModelConfig& expected) {
  auto [params, cfg] = load_params(in);
  if (!(cfg == expected)) {
    throw InvalidArgument("stored model config " + cfg.to_json() + " does not match expected " + expected.to_json());
  }
  return std::move(params);
}

}  // namespace graphsolver::nn
