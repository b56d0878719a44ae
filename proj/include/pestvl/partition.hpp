#pragma once

#include "pestvl/types.hpp"

#include <vector>

namespace pestvl::partition {

// Permutations map sequence slots to row-major token indices of an
// rows x cols feature grid. Both granularities share slot ranges: coarse
// window q owns slots [q*T/g^2, (q+1)*T/g^2), and the fine layout keeps each
// quadrant's tokens inside that same range (sub-windows row-major within the
// quadrant, tokens row-major within each sub-window).

// Row-major g x g windows, tokens row-major inside each window.
std::vector<Index> windowPermutation(Index rows, Index cols, Index g);

// Quadrant-grouped fine layout nested inside the coarse one.
std::vector<Index> nestedPermutation(Index rows, Index cols, Index gCoarse,
                                     Index gFine);

std::vector<Index> inversePermutation(const std::vector<Index>& perm);

struct PartitionPlan {
  Index rows = 0;
  Index cols = 0;
  Index coarseG = 2;
  Index fineG = 4;
  std::vector<Index> coarsePerm;  // slot -> token index
  std::vector<Index> finePerm;    // slot -> token index
  Index quadrantCount() const { return coarseG * coarseG; }
  Index tokenCount() const { return rows * cols; }
  Index slotsPerQuadrant() const { return tokenCount() / quadrantCount(); }
};

// Grids smaller than 4x4 fall back to fineG == coarseG (fine == coarse).
PartitionPlan makePlan(Index rows, Index cols);

// Per-quadrant sums of a saliency map given at feature resolution,
// row-major quadrant order.
Vectord quadrantEnergy(const Matrixd& saliency, Index g);

// Indices of the k largest scores; ties resolve to the lowest index.
std::vector<Index> topkSelect(const Vectord& scores, Index k);

Index argmaxIndex(const Vectord& scores);

// softmax((scores + noise) / tau); the straight-through estimator lives in
// the autograd op, this is the reference soft path.
Vectord gumbelSoftmax(const Vectord& scores, const Vectord& noise, double tau);

// Per-quadrant weights -> per-slot weights (each quadrant's weight repeated
// over its slot range).
Vectord slotBroadcast(const Vectord& quadrantWeights, Index tokenCount);

struct Segment {
  Index begin = 0;
  Index length = 0;
};

// Scan segments in slot order: an unselected quadrant is one segment, a
// selected quadrant splits into its fine sub-windows.
std::vector<Segment> segmentsForSelection(const PartitionPlan& plan,
                                          const std::vector<bool>& selected);

// Provenance of each slot under a hard selection: finePerm for selected
// quadrants, coarsePerm elsewhere. Inverting it scatters a processed
// sequence back to row-major token order.
std::vector<Index> blendedPermutation(const PartitionPlan& plan,
                                      const std::vector<bool>& selected);

}  // namespace pestvl::partition
