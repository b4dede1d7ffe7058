#ifndef TENSORDEC_OVERCOMPLETE_HPP
#define TENSORDEC_OVERCOMPLETE_HPP

// Decomposition of order-l tensors by flattening to order 3, running
// Jennrich's algorithm on the flattening, and splitting each grouped factor
// back into per-mode vectors.

#include "tensordec/jennrich.hpp"
#include "tensordec/tensor.hpp"

#include <span>
#include <vector>

namespace tensordec {

/// Terms whose grouped factors are further than this from rank one are marked suspect.
inline constexpr double kSuspectResidual = 1e-3;

struct FlatteningPlan {
    ModeGroups groups;
};

/// First floor((l-1)/2) modes, the next floor((l-1)/2), then the rest. For
/// unequal mode sizes a contiguous split with a larger min(|group 1|, |group 2|)
/// replaces it when one exists.
FlatteningPlan default_plan(const Shape& shape);

/// Parses "1,2/3,4/5" (one-based mode lists) into a plan.
FlatteningPlan parse_plan(const std::string& text);

JennrichResult overcomplete_decompose(const DenseTensor& t, const FlatteningPlan& plan, const JennrichConfig& cfg);

struct RankOneFit {
    std::vector<Eigen::VectorXd> factors;  ///< unit vectors, one per mode
    double scale = 0.0;                    ///< signed, fit = scale * factors[0] (x) ...
    double residual = 0.0;                 ///< ||v - fit|| / ||v||, 0 for v = 0
};

/// Best rank-one approximation of v reshaped (row-major) to mode_sizes, by
/// alternating rank-one fits started from the leading singular vectors.
RankOneFit unflatten_rank_one(const Eigen::VectorXd& v, std::span<const std::size_t> mode_sizes);

}  // namespace tensordec

#endif  // TENSORDEC_OVERCOMPLETE_HPP
