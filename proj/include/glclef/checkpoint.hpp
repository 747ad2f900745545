#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "glclef/encoder.hpp"

namespace glclef {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON checkpoint holding dims, vocabulary, label sets and every parameter
// array. Doubles are written in shortest round-trip form, so
// load(save(m)) reproduces m bit for bit.
std::string checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace glclef
