#include "core/decomposition.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "core/errors.hpp"

namespace dds {

namespace {

struct AxisBlock {
    index_t lo, hi; // inclusive
};

// Remainder cells go one per block from the last block backwards.
std::vector<AxisBlock> split_axis(index_t n, index_t blocks) {
    const index_t base = n / blocks;
    const index_t rem = n % blocks;
    if (base == 0) throw InvalidArgument("partition: more blocks than points on an axis");
    std::vector<AxisBlock> out(blocks);
    index_t pos = 0;
    for (index_t b = 0; b < blocks; ++b) {
        const index_t size = base + (b >= blocks - rem ? 1 : 0);
        out[b] = {pos, pos + size - 1};
        pos += size;
    }
    return out;
}

std::vector<index_t> box_indices(const CartesianGrid& g, const std::array<index_t, 3>& lo,
                                 const std::array<index_t, 3>& hi) {
    std::vector<index_t> out;
    out.reserve(std::size_t(hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1));
    for (index_t z = lo[2]; z <= hi[2]; ++z)
        for (index_t y = lo[1]; y <= hi[1]; ++y)
            for (index_t x = lo[0]; x <= hi[0]; ++x) out.push_back(g.index({x, y, z}));
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

Decomposition partition_overlapping(const CartesianGrid& grid, std::span<const index_t> counts,
                                    int overlap_layers) {
    if (static_cast<int>(counts.size()) != grid.dim())
        throw InvalidArgument("partition: need one block count per axis");
    if (overlap_layers < 0) throw InvalidArgument("partition: negative overlap");

    std::array<std::vector<AxisBlock>, 3> axis_blocks;
    std::array<index_t, 3> c{1, 1, 1};
    for (int a = 0; a < grid.dim(); ++a) {
        if (counts[a] < 1) throw InvalidArgument("partition: block counts must be positive");
        c[a] = counts[a];
        axis_blocks[a] = split_axis(grid.extent(a), counts[a]);
        // An extension that covers a whole neighbouring block makes the
        // decomposition degenerate.
        for (const AxisBlock& b : axis_blocks[a])
            if (counts[a] > 1 && overlap_layers >= b.hi - b.lo + 1)
                throw InvalidArgument("partition: overlap swallows a neighbouring subdomain");
    }
    for (int a = grid.dim(); a < 3; ++a) axis_blocks[a] = {{0, 0}};

    Decomposition d;
    d.grid = &grid;
    d.overlap_layers = overlap_layers;
    d.counts = c;
    d.subdomain_count = static_cast<int>(c[0] * c[1] * c[2]);
    d.owner.assign(grid.size(), -1);

    for (index_t bz = 0; bz < c[2]; ++bz)
        for (index_t by = 0; by < c[1]; ++by)
            for (index_t bx = 0; bx < c[0]; ++bx) {
                const AxisBlock& X = axis_blocks[0][bx];
                const AxisBlock& Y = axis_blocks[1][by];
                const AxisBlock& Z = axis_blocks[2][bz];
                auto own = box_indices(grid, {X.lo, Y.lo, Z.lo}, {X.hi, Y.hi, Z.hi});
                const int j = static_cast<int>(d.nonoverlap_sets.size());
                for (index_t k : own) d.owner[k] = j;
                d.nonoverlap_sets.push_back(std::move(own));

                std::array<index_t, 3> lo{X.lo, Y.lo, Z.lo}, hi{X.hi, Y.hi, Z.hi};
                for (int a = 0; a < grid.dim(); ++a) {
                    lo[a] = std::max<index_t>(0, lo[a] - overlap_layers);
                    hi[a] = std::min<index_t>(grid.extent(a) - 1, hi[a] + overlap_layers);
                }
                d.overlap_sets.push_back(box_indices(grid, lo, hi));
            }
    return d;
}

Decomposition Decomposition::from_sets(const CartesianGrid& grid,
                                       std::vector<std::vector<index_t>> nonoverlap,
                                       std::vector<std::vector<index_t>> overlap,
                                       int overlap_layers) {
    if (nonoverlap.size() != overlap.size() || nonoverlap.empty())
        throw InvalidArgument("decomposition: set counts mismatch");
    Decomposition d;
    d.grid = &grid;
    d.overlap_layers = overlap_layers;
    d.counts = {static_cast<index_t>(nonoverlap.size()), 1, 1};
    d.subdomain_count = static_cast<int>(nonoverlap.size());
    d.owner.assign(grid.size(), -1);
    for (std::size_t j = 0; j < nonoverlap.size(); ++j) {
        if (!std::is_sorted(nonoverlap[j].begin(), nonoverlap[j].end()) ||
            !std::is_sorted(overlap[j].begin(), overlap[j].end()))
            throw InvalidArgument("decomposition: index sets must be sorted");
        for (index_t k : nonoverlap[j]) {
            if (k < 0 || k >= grid.size()) throw InvalidArgument("decomposition: index out of range");
            if (d.owner[k] != -1) throw InvalidArgument("decomposition: nonoverlap sets overlap");
            d.owner[k] = static_cast<int>(j);
            if (!std::binary_search(overlap[j].begin(), overlap[j].end(), k))
                throw InvalidArgument("decomposition: nonoverlap set escapes overlap set");
        }
    }
    for (index_t k = 0; k < grid.size(); ++k)
        if (d.owner[k] == -1) throw InvalidArgument("decomposition: unknown without owner");
    d.nonoverlap_sets = std::move(nonoverlap);
    d.overlap_sets = std::move(overlap);
    return d;
}

TransferOps::TransferOps(const Decomposition& d) : decomp_(&d) {
    owned_local_.resize(d.subdomain_count);
    for (int j = 0; j < d.subdomain_count; ++j) {
        const auto& ov = d.overlap_sets[j];
        for (std::size_t i = 0; i < ov.size(); ++i)
            if (d.owner[ov[i]] == j) owned_local_[j].push_back(static_cast<index_t>(i));
    }
}

Vector TransferOps::restrict_to(int j, std::span<const double> volume) const {
    if (static_cast<index_t>(volume.size()) != decomp_->grid->size())
        throw InvalidArgument("transfer: volume size mismatch");
    const auto& ov = decomp_->overlap_sets[j];
    Vector out(ov.size());
    for (std::size_t i = 0; i < ov.size(); ++i) out[i] = volume[ov[i]];
    return out;
}

Vector TransferOps::prolongate(int j, std::span<const double> local) const {
    const auto& ov = decomp_->overlap_sets[j];
    if (local.size() != ov.size()) throw InvalidArgument("transfer: local size mismatch");
    Vector out(decomp_->grid->size(), 0.0);
    for (std::size_t i = 0; i < ov.size(); ++i) out[ov[i]] = local[i];
    return out;
}

void TransferOps::inject_owned(int j, std::span<const double> local, std::span<double> volume) const {
    const auto& ov = decomp_->overlap_sets[j];
    if (local.size() != ov.size() || static_cast<index_t>(volume.size()) != decomp_->grid->size())
        throw InvalidArgument("transfer: size mismatch");
    for (index_t i : owned_local_[j]) volume[ov[i]] = local[i];
}

Vector TransferOps::mask_exterior(int j, std::span<const double> u) const {
    if (static_cast<index_t>(u.size()) != decomp_->grid->size())
        throw InvalidArgument("transfer: volume size mismatch");
    Vector out(u.begin(), u.end());
    for (index_t k : decomp_->overlap_sets[j]) out[k] = 0.0;
    return out;
}

Skeleton compute_skeleton(const Decomposition& d, const Pattern& pattern) {
    const index_t n = d.grid->size();
    if (pattern.rows != n || pattern.cols != n)
        throw InvalidArgument("skeleton: pattern dimension mismatch");
    if (pattern.nnz() == 0) throw InvalidArgument("skeleton: empty sparsity pattern");

    std::vector<char> in_sub(n, 0);
    std::vector<char> in_k(n, 0);
    for (int j = 0; j < d.subdomain_count; ++j) {
        for (index_t k : d.overlap_sets[j]) in_sub[k] = 1;
        for (index_t i : d.overlap_sets[j])
            for (index_t p = pattern.row_ptr[i]; p < pattern.row_ptr[i + 1]; ++p) {
                const index_t col = pattern.col_idx[p];
                if (!in_sub[col]) in_k[col] = 1;
            }
        for (index_t k : d.overlap_sets[j]) in_sub[k] = 0;
    }

    Skeleton s;
    s.volume_to_skel.assign(n, -1);
    for (index_t k = 0; k < n; ++k)
        if (in_k[k]) {
            s.volume_to_skel[k] = static_cast<index_t>(s.indices.size());
            s.indices.push_back(k);
        }
    return s;
}

Vector Skeleton::restrict_to(std::span<const double> volume) const {
    if (volume.size() != volume_to_skel.size()) throw InvalidArgument("skeleton: size mismatch");
    Vector out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = volume[indices[i]];
    return out;
}

Vector Skeleton::prolongate(std::span<const double> sub) const {
    if (sub.size() != indices.size()) throw InvalidArgument("skeleton: size mismatch");
    Vector out(volume_to_skel.size(), 0.0);
    for (std::size_t i = 0; i < indices.size(); ++i) out[indices[i]] = sub[i];
    return out;
}

std::string decomposition_summary_json(const Decomposition& d, const Skeleton& s) {
    nlohmann::json j;
    j["N_v"] = d.grid->size();
    j["N"] = d.subdomain_count;
    j["overlap_layers"] = d.overlap_layers;
    std::vector<index_t> sizes, owned_sizes;
    for (const auto& ov : d.overlap_sets) sizes.push_back(static_cast<index_t>(ov.size()));
    for (const auto& no : d.nonoverlap_sets) owned_sizes.push_back(static_cast<index_t>(no.size()));
    j["subdomain_sizes"] = sizes;
    j["owned_sizes"] = owned_sizes;
    j["N_bar"] = s.size();
    j["K"] = s.indices;
    return j.dump(2);
}

} // namespace dds
