#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cora/extraction.hpp"
#include "cora/matrix.hpp"
#include "cora/model.hpp"

namespace cora {

// On-disk container: "CORA" magic, u32 format version, a length-prefixed
// JSON header, then named f64 blocks until end of file. All integers are
// little-endian u32; block payloads are row-major doubles.
struct Checkpoint {
    std::string header_json = "{}";
    std::vector<std::pair<std::string, Matrix>> blocks;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Serialized byte image (exactly what save_checkpoint writes).
std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin);

// Writes via a temp file and rename so readers never see partial files.
void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint model_to_checkpoint(const ToyTransformer& model, const std::string& label = "");
ToyTransformer model_from_checkpoint(const Checkpoint& c);

Checkpoint basis_to_checkpoint(const CommonBasis& basis, const std::string& label = "");
CommonBasis basis_from_checkpoint(const Checkpoint& c);

// Plain-text interop dump: header line then one row per entry
// (block,row,col,value).
std::string checkpoint_csv(const Checkpoint& c);

}  // namespace cora
