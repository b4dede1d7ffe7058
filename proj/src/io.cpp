#include "tensordec/io.hpp"

#include "tensordec/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace tensordec {

namespace {

std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
        return r;
    }
    return v;
}

}  // namespace

void write_tnsr(std::ostream& out, const DenseTensor& t) {
    const nlohmann::json header = {{"order", t.order()}, {"shape", t.shape()}};
    out << header.dump() << '\n';
    for (double x : t.data()) {
        const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(x));
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!out) throw std::runtime_error("failed writing tensor data");
}

DenseTensor read_tnsr(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("TNSR: missing header line");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("TNSR: header is not JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("order") || !header.contains("shape") ||
        !header["shape"].is_array() || !header["order"].is_number_unsigned())
        throw FormatError("TNSR: header needs unsigned \"order\" and array \"shape\"");
    Shape shape;
    for (const auto& d : header["shape"]) {
        if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw FormatError("TNSR: shape entries must be positive");
        shape.push_back(d.get<std::size_t>());
    }
    if (shape.size() != header["order"].get<std::size_t>() || shape.empty())
        throw FormatError("TNSR: order does not match the shape length");
    std::size_t count = 1;
    for (std::size_t d : shape) count *= d;
    std::vector<double> data(count);
    for (double& x : data) {
        std::uint64_t bits = 0;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw FormatError("TNSR: truncated data");
        x = std::bit_cast<double>(to_little_endian(bits));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("TNSR: trailing bytes after data");
    try {
        return DenseTensor(std::move(shape), std::move(data));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("TNSR: ") + e.what());
    }
}

DenseTensor read_tnsr(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open " + path.string());
    return read_tnsr(in);
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json cols = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const Eigen::VectorXd c = m.col(j);
        cols.push_back(std::vector<double>(c.data(), c.data() + c.size()));
    }
    return cols;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows) {
    if (!j.is_array()) throw FormatError("matrix must be a list of columns");
    Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) {
        const auto& col = j[c];
        if (!col.is_array() || static_cast<Eigen::Index>(col.size()) != rows)
            throw FormatError("matrix column " + std::to_string(c) + " has the wrong length");
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (!col[static_cast<std::size_t>(r)].is_number()) throw FormatError("matrix entries must be numbers");
            m(r, static_cast<Eigen::Index>(c)) = col[static_cast<std::size_t>(r)].get<double>();
        }
    }
    return m;
}

nlohmann::json to_json(const CpDecomposition& d) {
    nlohmann::json factors = nlohmann::json::array();
    for (const auto& f : d.factors()) factors.push_back(matrix_to_json(f));
    const Eigen::VectorXd& w = d.weights();
    return {{"order", d.order()},
            {"rank", d.rank()},
            {"shape", d.shape()},
            {"weights", std::vector<double>(w.data(), w.data() + w.size())},
            {"factors", factors}};
}

CpDecomposition decomposition_from_json(const nlohmann::json& j) {
    try {
        const auto order = j.at("order").get<std::size_t>();
        const auto rank = j.at("rank").get<std::size_t>();
        const auto weights = j.at("weights").get<std::vector<double>>();
        const auto& factors = j.at("factors");
        if (weights.size() != rank || factors.size() != order) throw FormatError("decomposition: inconsistent sizes");
        Shape shape;
        if (j.contains("shape")) {
            shape = j["shape"].get<Shape>();
        } else {
            for (const auto& f : factors) {
                if (f.empty()) throw FormatError("decomposition: rank 0 needs an explicit shape");
                shape.push_back(f[0].size());
            }
        }
        if (shape.size() != order) throw FormatError("decomposition: shape length differs from order");
        std::vector<FactorMatrix> mats;
        for (std::size_t m = 0; m < order; ++m) {
            FactorMatrix f = matrix_from_json(factors[m], static_cast<Eigen::Index>(shape[m]));
            if (static_cast<std::size_t>(f.cols()) != rank) throw FormatError("decomposition: factor column count");
            mats.push_back(std::move(f));
        }
        return CpDecomposition(std::move(mats), Eigen::Map<const Eigen::VectorXd>(
                                                    weights.data(), static_cast<Eigen::Index>(weights.size())));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("decomposition: ") + e.what());
    } catch (const ShapeError& e) {
        throw FormatError(std::string("decomposition: ") + e.what());
    }
}

CpDecomposition read_decomposition(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return decomposition_from_json(j);
}

nlohmann::json to_json(const RecoveryReport& r) {
    nlohmann::json j = {{"attempts", r.attempts},
                        {"eigenvalue_separation", r.eigenvalue_separation},
                        {"eigenvalue_magnitude", r.eigenvalue_magnitude},
                        {"max_imaginary", r.max_imaginary},
                        {"max_pairing_defect", r.max_pairing_defect},
                        {"condition_numbers", r.condition_numbers}};
    if (!r.unflatten_residuals.empty()) {
        j["unflatten_residuals"] = r.unflatten_residuals;
        j["suspect_terms"] = r.suspect_terms;
    }
    if (!r.permutation.empty()) {
        j["permutation"] = r.permutation;
        j["term_errors"] = r.term_errors;
        j["max_error"] = r.max_error;
        j["truth_norm"] = r.truth_norm;
        j["relative_max_error"] = r.truth_norm > 0 ? r.max_error / r.truth_norm : r.max_error;
    }
    return j;
}

}  // namespace tensordec
