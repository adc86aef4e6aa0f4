#include "barcodelm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <ostream>

#include "barcodelm/errors.hpp"

namespace barcodelm {

namespace {

constexpr char kMagic[8] = {'B', 'L', 'M', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename U>
void write_raw(std::ostream& out, const U& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U read_raw(std::istream& in) {
  U value;
  in.read(reinterpret_cast<char*>(&value), sizeof(U));
  if (!in) throw DataError("checkpoint: unexpected end of file");
  return value;
}

}  // namespace

void save_checkpoint(std::ostream& out, const NamedTensors<double>& tensors) {
  out.write(kMagic, sizeof(kMagic));
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint64_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_raw(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::int64_t d : tensor.shape) write_raw(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(tensor.v.data()),
              static_cast<std::streamsize>(tensor.v.size() * sizeof(double)));
  }
  if (!out) throw DataError("checkpoint: write failed");
}

NamedTensors<double> load_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: bad magic (not a checkpoint file)");
  }
  const std::uint32_t version = read_raw<std::uint32_t>(in);
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint64_t count = read_raw<std::uint64_t>(in);
  NamedTensors<double> tensors;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_raw<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError("checkpoint: unexpected end of file in name");
    const std::uint32_t rank = read_raw<std::uint32_t>(in);
    if (rank > 8) throw DataError("checkpoint: implausible rank " + std::to_string(rank));
    std::vector<std::int64_t> shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::int64_t>(read_raw<std::uint64_t>(in));
    }
    TensorData<double> tensor(shape);
    in.read(reinterpret_cast<char*>(tensor.v.data()),
            static_cast<std::streamsize>(tensor.v.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint: unexpected end of file in tensor '" + name + "'");
    if (!tensors.emplace(std::move(name), std::move(tensor)).second) {
      throw DataError("checkpoint: duplicate tensor name");
    }
  }
  return tensors;
}

void save_checkpoint_file(const std::string& path, const NamedTensors<double>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  save_checkpoint(out, tensors);
}

NamedTensors<double> load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_checkpoint(in);
}

void write_manifest(std::ostream& out, const NamedTensors<double>& tensors) {
  for (const auto& [name, tensor] : tensors) {
    out << name << '\t';
    if (tensor.shape.empty()) {
      out << "scalar";
    } else {
      for (std::size_t i = 0; i < tensor.shape.size(); ++i) {
        out << (i ? "x" : "") << tensor.shape[i];
      }
    }
    out << '\n';
  }
}

}  // namespace barcodelm
