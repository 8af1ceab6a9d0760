#include "kronsolve/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace kronsolve {

namespace {

constexpr std::array<char, 4> kMagic{'K', 'T', 'N', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& source, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw TensorIoError(TensorIoError::Code::truncated, source + ": truncated while reading " + what);
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(bytes[i]) << (8 * i));
  return value;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& x) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  if (x.order() > 255) throw InvalidInput("KTN1 stores at most 255 modes");
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(x.order()));
  for (Index d : x.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  for (Index i = 0; i < x.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x.data()(i)));
  if (!out) throw TensorIoError(TensorIoError::Code::write_failed, "failed writing tensor data");
}

void write_tensor(const std::filesystem::path& path, const Tensor& x) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TensorIoError(TensorIoError::Code::open_failed, "cannot open " + path.string() + " for writing");
  write_tensor(out, x);
  out.flush();
  if (!out) throw TensorIoError(TensorIoError::Code::write_failed, "failed writing " + path.string());
}

Tensor read_tensor(std::istream& in, const std::string& source) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size())) {
    throw TensorIoError(TensorIoError::Code::truncated, source + ": file too short for the KTN1 header");
  }
  if (magic != kMagic) throw TensorIoError(TensorIoError::Code::bad_magic, source + ": not a KTN1 tensor file");
  const auto version = get_le<std::uint32_t>(in, source, "version");
  if (version != kTensorFormatVersion) {
    throw TensorIoError(TensorIoError::Code::bad_version,
                        source + ": unsupported KTN1 version " + std::to_string(version));
  }
  const auto order = get_le<std::uint8_t>(in, source, "order");
  if (order == 0) throw TensorIoError(TensorIoError::Code::dimension_overflow, source + ": tensor order is zero");
  Shape shape;
  std::uint64_t total = 1;
  for (unsigned k = 0; k < order; ++k) {
    const auto d = get_le<std::uint64_t>(in, source, "dimensions");
    if (d == 0 || d > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()) ||
        total > static_cast<std::uint64_t>(std::numeric_limits<Index>::max()) / 8 / d) {
      throw TensorIoError(TensorIoError::Code::dimension_overflow,
                          source + ": dimension " + std::to_string(k) + " = " + std::to_string(d) + " is invalid");
    }
    total *= d;
    shape.push_back(static_cast<Index>(d));
  }
  Eigen::VectorXd data(static_cast<Index>(total));
  for (Index i = 0; i < data.size(); ++i) {
    data(i) = std::bit_cast<double>(get_le<std::uint64_t>(in, source, "payload"));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw TensorIoError(TensorIoError::Code::trailing_data, source + ": unexpected bytes after the payload");
  }
  try {
    return Tensor(std::move(shape), std::move(data));
  } catch (const InvalidInput& e) {
    throw TensorIoError(TensorIoError::Code::parse_error, source + ": " + e.what());
  }
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorIoError(TensorIoError::Code::open_failed, "cannot open " + path.string());
  return read_tensor(in, path.string());
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TensorIoError(TensorIoError::Code::open_failed, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || field.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw TensorIoError(TensorIoError::Code::parse_error,
                            path.string() + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw TensorIoError(TensorIoError::Code::parse_error,
                          path.string() + ":" + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw TensorIoError(TensorIoError::Code::parse_error, path.string() + ": no data");
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_results_csv(std::ostream& out, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  const auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out << ',';
      out << fields[i];
    }
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw InvalidInput("CSV row width does not match the header");
    line(r);
  }
}

void write_results_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TensorIoError(TensorIoError::Code::open_failed, "cannot open " + path.string() + " for writing");
  write_results_csv(out, header, rows);
  if (!out) throw TensorIoError(TensorIoError::Code::write_failed, "failed writing " + path.string());
}

}  // namespace kronsolve
