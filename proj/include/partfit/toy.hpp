#pragma once

#include <cstdint>

#include "partfit/shape_model.hpp"

namespace partfit {

// Canvas the toy layout is designed for.
inline constexpr int kToyImageWidth = 128;
inline constexpr int kToyImageHeight = 128;

// Fixed toy camera: orthographic, 48 px per model unit, centered.
Camera toy_camera();

struct ToyModel {
  BlendshapeModel model;
  ShapeParams ground_truth;
};

// Deterministic face-like toy: eight elliptical part clusters sampled on a
// jittered grid, smooth global identity fields and part-localized expression
// fields, plus a sampled ground-truth parameter vector. At default sizes the
// layout guarantees intra-part vertex spacing > sqrt(2) px and inter-part
// gaps wide enough that splat-rasterized parts stay disjoint, which makes
// k=1 annotation transfer an exact round trip at neutral parameters.
// Ground-truth z-translation is zero (unobservable under the orthographic
// toy camera).
ToyModel gen_toy_model(std::uint64_t seed, int n_vertices = 600,
                       int k_id = 8, int k_exp = 6);

}  // namespace partfit
