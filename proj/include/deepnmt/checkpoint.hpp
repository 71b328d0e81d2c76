#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>

#include "deepnmt/optimizer.hpp"

namespace deepnmt {

/// Malformed or incompatible checkpoint data.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointBundle {
  ModelConfig config;
  Parameters params;
  std::optional<OptimizerState> optimizer;
  std::uint64_t step = 0;

  Model model() const { return Model{config, params}; }
};

// Binary layout, all integers little-endian, reals as IEEE-754 binary64
// little-endian:
//
//   "DNMTCKPT"  u32 version(=1)  u64 step
//   u32 n_config  { str key  str value }*
//   u32 n_params  { str name  u8 kind
//                   kind 0: u8 policy u64 layer f64 bound f64 stddev tensor
//                   kind 1: str target }*
//   u8 has_optimizer  [ u64 step  u32 n  { str name  tensor m  tensor v }* ]
//
//   str    = u32 length, bytes
//   tensor = u32 rank, u64 extents[rank], f64 values[product]
void write_checkpoint(std::ostream& os, const CheckpointBundle& bundle);
CheckpointBundle read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const CheckpointBundle& bundle);
CheckpointBundle load_checkpoint(const std::filesystem::path& path);

/// Element-wise mean of the parameters of `bundles`; optimizer state is
/// dropped. All bundles must have the same names, aliases and shapes.
Parameters average_checkpoints(std::span<const CheckpointBundle> bundles);

}  // namespace deepnmt
