#pragma once

// KTN1 binary tensors and small CSV helpers.
//
// KTN1 layout, all integers little-endian:
//   "KTN1" | u32 version (=1) | u8 order N | N x u64 dims | prod(dims) x f64 payload
// The payload is in the row-major lexicographic order of DenseTensor.

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kronsolve/errors.hpp"
#include "kronsolve/tensor.hpp"

namespace kronsolve {

class TensorIoError : public Error {
 public:
  enum class Code { open_failed, bad_magic, bad_version, truncated, dimension_overflow, trailing_data, write_failed,
                    parse_error };

  TensorIoError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const Tensor& x);
void write_tensor(const std::filesystem::path& path, const Tensor& x);
/// `source` names the stream in error messages.
Tensor read_tensor(std::istream& in, const std::string& source = "<stream>");
Tensor read_tensor(const std::filesystem::path& path);

/// Numeric CSV without header; every row must have the same number of fields.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

/// Shortest round-trippable text for a double (17 significant digits).
std::string format_number(double v);

/// Header row plus data rows, ',' separated.
void write_results_csv(std::ostream& out, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);
void write_results_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);

}  // namespace kronsolve
