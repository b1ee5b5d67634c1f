#ifndef TRANSSENT_NN_TENSOR_IO_HPP
#define TRANSSENT_NN_TENSOR_IO_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "transsent/nn/matrix.hpp"
#include "transsent/nn/params.hpp"

namespace transsent::nn {

// Binary blob of named tensors. Little-endian, checksummed, versioned.
// Writing the same tensors twice produces byte-identical files.

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Matrix*>>& tensors);

// Throws DataError on missing, truncated, corrupt, or version-mismatched files.
std::map<std::string, Matrix> load_tensors(const std::string& path);

// Store helpers. with_optimizer_state also writes/reads adam_m / adam_v per
// parameter plus the shared step counter.
void save_param_store(const std::string& path, const ParamStore& store,
                      bool with_optimizer_state, std::int64_t adam_t = 0);
// Returns the stored adam step counter (0 when the blob has no optimizer state).
std::int64_t load_param_store(const std::string& path, ParamStore& store,
                              bool with_optimizer_state);

std::uint64_t fnv1a_file(const std::string& path);  // content hash, DataError if unreadable

}  // namespace transsent::nn

#endif  // TRANSSENT_NN_TENSOR_IO_HPP
