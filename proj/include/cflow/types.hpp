#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cflow {

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VecX<double>;
using Mat = MatX<double>;
using Vec2 = Eigen::Vector2d;
using Index = Eigen::Index;

enum class ErrorCode {
    SingularTime,
    EmptyPrior,
    InvalidPrior,
    DivergedIntegration,
    InvalidResidual,
    InvalidGainOrdering,
    ShapeError,
    QPFailure,
    CemDiverged,
    RefinementFailed,
    InvalidArgument,
    IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Contiguous slice of a gradient over a longer vector. Most constraint
/// gradients touch one or two adjacent blocks of the trajectory.
struct Segment {
    Index offset = 0;
    Vec values;

    void add_to(Eigen::Ref<Vec> dense, double scale = 1.0) const
    {
        dense.segment(offset, values.size()) += scale * values;
    }
    Vec to_dense(Index dim) const
    {
        Vec out = Vec::Zero(dim);
        add_to(out);
        return out;
    }
};

} // namespace cflow
