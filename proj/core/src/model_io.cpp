#include "barcodelm/model_io.hpp"

#include <fstream>

#include "barcodelm/checkpoint.hpp"
#include "barcodelm/errors.hpp"

namespace barcodelm {

bool is_buffer_name(const std::string& name) {
  return name.find(".running_") != std::string::npos;
}

void ModelParameters::save(const std::string& path) const {
  save_checkpoint_file(path, tensors);
  {
    std::ofstream manifest(path + ".manifest");
    if (!manifest) throw DataError("cannot open '" + path + ".manifest' for writing");
    write_manifest(manifest, tensors);
  }
  KvMap full = config;
  full.set("architecture", architecture);
  full.write_file(path + ".config");
}

ModelParameters ModelParameters::load(const std::string& path) {
  ModelParameters model;
  model.tensors = load_checkpoint_file(path);
  model.config = KvMap::read_file(path + ".config");
  model.architecture = model.config.get("architecture");
  return model;
}

}  // namespace barcodelm
