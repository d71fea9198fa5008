#include "leaf/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace leaf {

namespace {

constexpr char kMagic[5] = {'L', 'E', 'A', 'F', '1'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    T out;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
    return out;
  }
}

template <typename T>
void write_one(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_one(std::istream& in, T& v) {
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) return false;
  v = to_little(v);
  return true;
}

void write_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  write_one(out, bits);
}

bool read_f64(std::istream& in, double& v) {
  uint64_t bits;
  if (!read_one(in, bits)) return false;
  std::memcpy(&v, &bits, sizeof(bits));
  return true;
}

}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  for (const auto& [name, tensor] : tensors) {
    write_one(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_one(out, static_cast<uint32_t>(tensor->rank()));
    for (int64_t i = 0; i < tensor->rank(); ++i)
      write_one(out, static_cast<uint64_t>(tensor->dim(i)));
    for (int64_t i = 0; i < tensor->numel(); ++i) write_f64(out, (*tensor)[i]);
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path + " is not a LEAF1 tensor file");

  std::vector<std::pair<std::string, Tensor>> out;
  while (true) {
    uint32_t name_len;
    if (!read_one(in, name_len)) break;  // clean end of file
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      throw std::runtime_error(path + ": truncated record name");
    uint32_t rank;
    if (!read_one(in, rank)) throw std::runtime_error(path + ": truncated rank");
    std::vector<int64_t> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) {
      uint64_t d;
      if (!read_one(in, d)) throw std::runtime_error(path + ": truncated dims");
      shape[i] = static_cast<int64_t>(d);
    }
    Tensor t(shape);
    for (int64_t i = 0; i < t.numel(); ++i)
      if (!read_f64(in, t[i]))
        throw std::runtime_error(path + ": truncated payload for '" + name + "'");
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void save_checkpoint(const std::string& path, PredictorParams& params,
                     const nlohmann::json& config) {
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (Parameter* p : params.parameters()) tensors.emplace_back(p->name, &p->value);
  save_tensors(path, tensors);
  std::ofstream cfg(path + ".json");
  if (!cfg) throw std::runtime_error("cannot write " + path + ".json");
  cfg << config.dump(2) << "\n";
}

void load_checkpoint(const std::string& path, PredictorParams& params) {
  auto tensors = load_tensors(path);
  std::unordered_map<std::string, Tensor*> by_name;
  for (auto& [name, tensor] : tensors) by_name[name] = &tensor;
  for (Parameter* p : params.parameters()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end())
      throw std::runtime_error(path + ": missing parameter '" + p->name + "'");
    if (it->second->shape() != p->value.shape())
      throw std::runtime_error(path + ": shape mismatch for '" + p->name +
                               "' (" + it->second->shape_str() + " vs " +
                               p->value.shape_str() + ")");
    p->value = std::move(*it->second);
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw std::runtime_error(path + ": unexpected extra parameter '" +
                             by_name.begin()->first + "'");
}

}  // namespace leaf
