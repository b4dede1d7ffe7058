#ifndef TENSORDEC_IO_HPP
#define TENSORDEC_IO_HPP

// File formats. Tensors use TNSR v1: one JSON header line
// {"order":l,"shape":[n1,...]} followed by '\n' and the entries as
// little-endian float64 in row-major order. Decompositions and reports are JSON.

#include "tensordec/jennrich.hpp"
#include "tensordec/tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>

namespace tensordec {

void write_tnsr(std::ostream& out, const DenseTensor& t);
DenseTensor read_tnsr(std::istream& in);
DenseTensor read_tnsr(const std::filesystem::path& path);

/// {"order","rank","shape","weights","factors"}; factors[mode][term] is a column.
nlohmann::json to_json(const CpDecomposition& d);
CpDecomposition decomposition_from_json(const nlohmann::json& j);
CpDecomposition read_decomposition(const std::filesystem::path& path);

nlohmann::json to_json(const RecoveryReport& r);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);  ///< list of columns
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows);

}  // namespace tensordec

#endif  // TENSORDEC_IO_HPP
