#pragma once

#include <iosfwd>
#include <string>

#include "barcodelm/autodiff.hpp"
#include "barcodelm/tensor.hpp"

namespace barcodelm {

// Binary container of named tensors. Layout (little-endian):
//   8-byte magic "BLMCKPT\n", u32 version, u64 tensor count, then per tensor:
//   u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values.
// Values are always stored as 64-bit IEEE-754; float tensors round-trip
// exactly through the widening.
void save_checkpoint(std::ostream& out, const NamedTensors<double>& tensors);
NamedTensors<double> load_checkpoint(std::istream& in);

void save_checkpoint_file(const std::string& path, const NamedTensors<double>& tensors);
NamedTensors<double> load_checkpoint_file(const std::string& path);

// `name<TAB>d0xd1x...` lines.
void write_manifest(std::ostream& out, const NamedTensors<double>& tensors);

}  // namespace barcodelm
