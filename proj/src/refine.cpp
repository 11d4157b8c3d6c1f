#include "dewedge/refine.hpp"

namespace dewedge {

namespace {

Volume refine_branch(const std::function<Volume(const Volume&)>& apply, const Volume& r,
                     const RefineConfig& cfg) {
    const Volume normed = normalize_tomogram(r, cfg.target_stats);
    const auto pz = grid_positions(normed.dims.d, cfg.cube_size, cfg.overlap);
    const auto py = grid_positions(normed.dims.h, cfg.cube_size, cfg.overlap);
    const auto px = grid_positions(normed.dims.w, cfg.cube_size, cfg.overlap);

    std::vector<std::array<std::int64_t, 3>> locations;
    for (std::int64_t z : pz)
        for (std::int64_t y : py)
            for (std::int64_t x : px) locations.push_back({z, y, x});

    std::vector<Volume> outputs(locations.size());
    parallel_chunks(static_cast<std::int64_t>(locations.size()), 0,
                    [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const auto& loc = locations[static_cast<std::size_t>(i)];
            Volume cube = extract_cube(normed, loc, cfg.cube_size);
            outputs[static_cast<std::size_t>(i)] = apply(standardize(cube, cfg.fit_stats));
        }
    });
    return reassemble(outputs, locations, normed.dims);
}

}  // namespace

Volume refine_with(const std::function<Volume(const Volume&)>& apply, const Volume& r0,
                   const Volume& r1, const RefineConfig& cfg) {
    if (r0.dims != r1.dims) throw invalid_input("refine: half-reconstructions differ in shape");
    Volume a = refine_branch(apply, r0, cfg);
    Volume b = refine_branch(apply, r1, cfg);
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = 0.5 * (a.data[i] + b.data[i]);
    return a;
}

Volume refine(const Model& m, const Volume& r0, const Volume& r1, const RefineConfig& cfg) {
    return refine_with([&m](const Volume& cube) { return forward(m, cube, /*train_mode=*/false); },
                       r0, r1, cfg);
}

}  // namespace dewedge
