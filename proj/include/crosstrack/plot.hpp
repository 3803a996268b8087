#pragma once

#include <iosfwd>
#include <vector>

#include "crosstrack/datamodel.hpp"
#include "crosstrack/simulator.hpp"

namespace crosstrack {

/// Static SVG of predicted trajectories (solid, colored by track id) over
/// ground-truth trajectories (dashed gray). Canvas spans the bounding box
/// of everything drawn.
void plot_tracks_svg(const std::vector<Track>& tracks, const GroundTruth& gt, std::ostream& out);

}  // namespace crosstrack
