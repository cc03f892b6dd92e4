#pragma once

// Parameter totals published for the reference MFConvTr configurations.
// The params command reports this build's counts next to them so any
// deviation from the published accounting is visible, not silently absorbed.

namespace mfconvtr::reference {

// Proposed model (4-way split backbone + 2 encoder layers, 8 heads).
inline constexpr long long kPublishedTotalProposed = 521801;

// Backbone-only variant of the proposed model.
inline constexpr long long kPublishedTotalBackboneOnly = 256841;

// Increment per additional encoder layer at d_model 128, d_ff 256.
inline constexpr long long kPublishedPerEncoderLayer = 132480;

// Two-layer encoder contribution implied by the published totals.
inline constexpr long long kPublishedEncoderContribution =
    kPublishedTotalProposed - kPublishedTotalBackboneOnly;

}  // namespace mfconvtr::reference
