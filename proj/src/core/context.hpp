#pragma once

#include <memory>
#include <span>

#include "core/decomposition.hpp"
#include "core/grid.hpp"

namespace dds {

// Geometric side of a Schwarz method: decomposition, transfer operators and
// the skeleton of a sparsity pattern. The grid must outlive the context.
// The decomposition is heap-held so the context can move without invalidating
// the transfer operators.
struct SchwarzContext {
    const CartesianGrid* grid = nullptr;
    std::unique_ptr<Decomposition> decomp;
    TransferOps transfer;
    Skeleton skeleton;
    int threads = 1;

    const Decomposition& decomposition() const { return *decomp; }
    int subdomains() const { return decomp->subdomain_count; }
    index_t volume_size() const { return grid->size(); }
    index_t skeleton_size() const { return skeleton.size(); }
};

inline SchwarzContext build_schwarz_context(const CartesianGrid& grid,
                                            std::span<const index_t> counts, int overlap_layers,
                                            const Pattern& pattern, int threads = 1) {
    SchwarzContext ctx;
    ctx.grid = &grid;
    ctx.decomp = std::make_unique<Decomposition>(
        partition_overlapping(grid, counts, overlap_layers));
    ctx.transfer = TransferOps(*ctx.decomp);
    ctx.skeleton = compute_skeleton(*ctx.decomp, pattern);
    ctx.threads = threads;
    return ctx;
}

inline SchwarzContext context_from_decomposition(const CartesianGrid& grid, Decomposition d,
                                                 const Pattern& pattern, int threads = 1) {
    SchwarzContext ctx;
    ctx.grid = &grid;
    ctx.decomp = std::make_unique<Decomposition>(std::move(d));
    ctx.transfer = TransferOps(*ctx.decomp);
    ctx.skeleton = compute_skeleton(*ctx.decomp, pattern);
    ctx.threads = threads;
    return ctx;
}

} // namespace dds
