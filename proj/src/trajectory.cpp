#include "cflow/trajectory.hpp"

#include <utility>

namespace cflow {

const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::SingularTime: return "SingularTime";
    case ErrorCode::EmptyPrior: return "EmptyPrior";
    case ErrorCode::InvalidPrior: return "InvalidPrior";
    case ErrorCode::DivergedIntegration: return "DivergedIntegration";
    case ErrorCode::InvalidResidual: return "InvalidResidual";
    case ErrorCode::InvalidGainOrdering: return "InvalidGainOrdering";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::QPFailure: return "QPFailure";
    case ErrorCode::CemDiverged: return "CemDiverged";
    case ErrorCode::RefinementFailed: return "RefinementFailed";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Trajectory::Trajectory(const Layout& l, Vec x) : layout(l), data(std::move(x))
{
    if (data.size() != layout.dim())
        throw Error(ErrorCode::ShapeError, "trajectory length " + std::to_string(data.size()) + " != "
                                               + std::to_string(layout.dim()));
}

Mat Trajectory::states() const
{
    Mat out(layout.H + 1, layout.ds);
    for (int k = 0; k <= layout.H; ++k)
        out.row(k) = state(k).transpose();
    return out;
}

Mat Trajectory::actions() const
{
    Mat out(layout.H, layout.da);
    for (int k = 0; k < layout.H; ++k)
        out.row(k) = action(k).transpose();
    return out;
}

Trajectory Trajectory::from_parts(const Mat& states, const Mat& actions)
{
    if (states.rows() != actions.rows() + 1)
        throw Error(ErrorCode::ShapeError, "need H+1 state rows for H action rows");
    Trajectory t(Layout{int(actions.rows()), int(states.cols()), int(actions.cols())});
    for (int k = 0; k <= t.H(); ++k)
        t.state(k) = states.row(k).transpose();
    for (int k = 0; k < t.H(); ++k)
        t.action(k) = actions.row(k).transpose();
    return t;
}

Vec pack_states(const Layout& l, const Vec& x)
{
    Vec out(l.states_dim());
    for (int k = 0; k <= l.H; ++k)
        out.segment(Index(k) * l.ds, l.ds) = state_block(l, x, k);
    return out;
}

Vec pack_actions(const Layout& l, const Vec& x)
{
    Vec out(l.actions_dim());
    for (int k = 0; k < l.H; ++k)
        out.segment(Index(k) * l.da, l.da) = action_block(l, x, k);
    return out;
}

Vec interleave(const Layout& l, const Vec& states, const Vec& actions)
{
    if (states.size() != l.states_dim() || actions.size() != l.actions_dim())
        throw Error(ErrorCode::ShapeError, "interleave: block sizes do not match layout");
    Vec x(l.dim());
    for (int k = 0; k <= l.H; ++k)
        state_block(l, x, k) = states.segment(Index(k) * l.ds, l.ds);
    for (int k = 0; k < l.H; ++k)
        action_block(l, x, k) = actions.segment(Index(k) * l.da, l.da);
    return x;
}

} // namespace cflow
