#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "core/csr.hpp"
#include "core/grid.hpp"

namespace dds {

// Overlapping box decomposition of a structured grid.
// nonoverlap_sets partition the unknowns; overlap_sets extend each block by
// overlap_layers mesh layers per direction, clipped at the physical boundary,
// so adjacent subdomains share 2*overlap_layers layers. owner[k] is the unique
// subdomain whose nonoverlapping block contains k (ties cannot arise).
// Treated as immutable once built.
struct Decomposition {
    const CartesianGrid* grid = nullptr;
    int overlap_layers = 0;
    std::array<index_t, 3> counts{1, 1, 1};
    int subdomain_count = 0;
    std::vector<std::vector<index_t>> nonoverlap_sets; // sorted global indices
    std::vector<std::vector<index_t>> overlap_sets;    // sorted global indices
    std::vector<index_t> owner;                        // size grid->size()

    // Raw constructor for irregular set layouts; validates the partition
    // axioms (disjoint cover, nonoverlap inside overlap, owner consistent).
    static Decomposition from_sets(const CartesianGrid& grid,
                                   std::vector<std::vector<index_t>> nonoverlap,
                                   std::vector<std::vector<index_t>> overlap,
                                   int overlap_layers);
};

// Splits each axis into counts[a] blocks; remainder cells are assigned one
// per block starting from the last block and moving backwards.
Decomposition partition_overlapping(const CartesianGrid& grid, std::span<const index_t> counts,
                                    int overlap_layers);

// Restriction, prolongation and owned injection for the subdomains of a
// decomposition. The owned injections of all subdomains form a Boolean
// partition of unity.
class TransferOps {
public:
    TransferOps() = default;
    explicit TransferOps(const Decomposition& d);

    const Decomposition& decomposition() const { return *decomp_; }
    index_t local_size(int j) const { return static_cast<index_t>(decomp_->overlap_sets[j].size()); }

    // R_j u
    Vector restrict_to(int j, std::span<const double> volume) const;
    // P_j w, zero outside the subdomain
    Vector prolongate(int j, std::span<const double> local) const;
    // Overwrites the owned entries of volume with the matching entries of local.
    void inject_owned(int j, std::span<const double> local, std::span<double> volume) const;
    // (I - P_j R_j) u: copy of u with the subdomain entries zeroed.
    Vector mask_exterior(int j, std::span<const double> u) const;
    // Local positions whose global unknown is owned by j.
    std::span<const index_t> owned_local(int j) const { return owned_local_[j]; }

private:
    const Decomposition* decomp_ = nullptr;
    std::vector<std::vector<index_t>> owned_local_;
};

// Skeleton unknowns: the indices k for which some subdomain's local residual
// depends on the value at k while k lies outside that subdomain. Computed
// structurally from a sparsity pattern.
struct Skeleton {
    std::vector<index_t> indices;        // sorted
    std::vector<index_t> volume_to_skel; // size N_v, -1 off the skeleton

    index_t size() const { return static_cast<index_t>(indices.size()); }

    Vector restrict_to(std::span<const double> volume) const;
    Vector prolongate(std::span<const double> sub) const; // zero extension
};

Skeleton compute_skeleton(const Decomposition& d, const Pattern& pattern);

// {N_v, N, overlap_layers, subdomain sizes, N_bar, K} as a JSON object.
std::string decomposition_summary_json(const Decomposition& d, const Skeleton& s);

} // namespace dds
