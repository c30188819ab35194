#pragma once

#include "seedbank/random.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace seedbank {

using Site = std::uint32_t;

enum class GeographyFamily { Torus, Hierarchical };

// A finite group (Z_m)^k. The torus of radius n in dimension d is (Z_{2n})^d with
// row-major labels; the hierarchical ball of radius n and order N is (Z_N)^n, labelled
// by base-N digit strings with digit 0 the least significant. Both are abelian and all
// group operations are digitwise.
class Geography {
public:
    static Geography torus(int dimension, int radius);
    static Geography hierarchical(int order, int radius);
    // Convenience for tests and custom kernels: the cyclic group Z_m, viewed as a
    // one-dimensional torus with an odd or even side.
    static Geography cycle(int sites);

    GeographyFamily family() const { return family_; }
    int dimension() const { return digits_; } // number of coordinates / digits
    int radius() const { return radius_; }
    int modulus() const { return modulus_; } // 2n for the torus, N for the hierarchy
    std::size_t size() const { return size_; }

    // Torus: coordinates (c_0, ..., c_{d-1}) with c_0 most significant.
    // Hierarchical: digits (i_0, ..., i_{n-1}) with i_0 least significant.
    std::vector<int> decode(Site s) const;
    Site encode(std::span<const int> coords) const;

    Site add(Site a, Site b) const;
    Site neg(Site a) const;
    Site sub(Site a, Site b) const { return add(a, neg(b)); }

    // 1 + index of the highest differing digit, 0 for equal sites. Hierarchical only.
    int hierarchical_distance(Site a, Site b) const;
    // Signed representative of each coordinate in (-n, n]. Torus only.
    std::vector<int> centred_coordinates(Site s) const;

    std::string describe() const;
    bool operator==(const Geography& o) const {
        return family_ == o.family_ && digits_ == o.digits_ && modulus_ == o.modulus_;
    }

private:
    Geography(GeographyFamily f, int digits, int modulus, int radius);
    int digit(Site s, int k) const; // k-th least significant base-modulus digit

    GeographyFamily family_;
    int digits_;
    int modulus_;
    int radius_;
    std::size_t size_;
    std::vector<Site> stride_; // modulus^k
};

struct NearestNeighbour {
    double rate = 0.5; // per direction
};
struct HeavyTail {
    double Q = 1.0; // amplitude: a(0,k) = Q |k|^{-1-q}
    double q = 1.0; // tail exponent in (0, 2)
};
struct HierarchicalRates {
    double c = 1.0; // c_k = c^k, level-k jump rate c_{k-1} / N^{k-1}
};
using KernelSpec = std::variant<NearestNeighbour, HeavyTail, HierarchicalRates>;

std::string kernel_name(const KernelSpec& spec);

struct KernelOptions {
    bool symmetrize = false;
    bool fold = true;          // fold the infinite-lattice kernel onto the quotient
    double fold_epsilon = 1e-9; // declared relative-mass error of the fold
    std::size_t shell_cap = 4096;
};

struct KernelEntry {
    Site offset;
    double rate;
};

// Translation-invariant rates a(i,j) = a(0, j-i) stored as the row j -> a(0,j).
// Entry 0 of the row is kept: for migration kernels it holds folded self-jump mass
// (which cancels in every drift and generator), for displacement kernels it is the
// probability of staying put.
class MigrationKernel {
public:
    MigrationKernel(Geography geo, std::vector<double> row, bool truncated = false);

    static MigrationKernel from_row(Geography geo, std::vector<double> row) {
        return MigrationKernel(std::move(geo), std::move(row));
    }
    // All mass on the origin: the displacement kernel that does not move anything.
    static MigrationKernel identity(const Geography& geo);
    static MigrationKernel zero(const Geography& geo);
    // Rate `rate` to a uniformly chosen site (the origin included).
    static MigrationKernel uniform_jump(const Geography& geo, double rate = 1.0);

    const Geography& geography() const { return geo_; }
    double rate(Site i, Site j) const { return row_[geo_.sub(j, i)]; }
    double from_origin(Site j) const { return row_[j]; }
    std::span<const double> row() const { return row_; }
    // Off-diagonal non-zero entries of the row.
    const std::vector<KernelEntry>& support() const { return support_; }
    // Off-diagonal total rate: the rate at which a walker actually moves.
    double total_rate() const { return total_rate_; }
    // Row sum including the diagonal entry.
    double total_mass() const { return total_mass_; }
    bool symmetric() const { return symmetric_; }
    bool truncated() const { return truncated_; }

    // Fold diagnostics: certified bound on the relative error of the folded row, and
    // the off-diagonal total rate of the kernel on the infinite lattice.
    double fold_error() const { return fold_error_; }
    std::optional<double> infinite_total_rate() const { return infinite_total_; }
    std::size_t fold_shells() const { return fold_shells_; }

    MigrationKernel symmetrized() const;

private:
    friend MigrationKernel build_kernel(const Geography&, const KernelSpec&, const KernelOptions&);
    void finalize();

    Geography geo_;
    std::vector<double> row_;
    std::vector<KernelEntry> support_;
    double total_rate_ = 0.0;
    double total_mass_ = 0.0;
    bool symmetric_ = false;
    bool truncated_ = false;
    double fold_error_ = 0.0;
    std::optional<double> infinite_total_;
    std::size_t fold_shells_ = 0;
};

MigrationKernel build_kernel(const Geography& geo, const KernelSpec& spec, const KernelOptions& options = {});

// Sum of a(0,k) over the infinite lattice k != 0, when that lattice is known.
std::optional<double> infinite_lattice_total_rate(const Geography& geo, const KernelSpec& spec);

enum class TransitionMethod { Exact, MonteCarlo };

struct TransitionEstimate {
    double value = 0.0;
    double error = 0.0; // certified truncation bound (exact) or standard error (MC)
    TransitionMethod method = TransitionMethod::Exact;
};

inline constexpr std::size_t kExactSizeCap = 4096;

// Whole row t -> a_t(0, .) by uniformisation, squared up for long times. The returned
// bound covers Poisson truncation of every stage.
struct TransitionRow {
    std::vector<double> p;
    double error_bound = 0.0;
};
TransitionRow transition_row(const MigrationKernel& kernel, double t, std::size_t size_cap = kExactSizeCap);

TransitionEstimate transition_probability(const MigrationKernel& kernel, double t, Site i, Site j,
                                          TransitionMethod method = TransitionMethod::Exact,
                                          std::size_t replicas = 10000, std::uint64_t seed = 1,
                                          std::size_t size_cap = kExactSizeCap);

// Group convolution (p * q)(j) = sum_i p(i) q(j - i).
std::vector<double> convolve(const Geography& geo, std::span<const double> p, std::span<const double> q);

// sup_i | |G| p(i) - 1 |
double uniform_deviation(std::span<const double> p);

struct MixingOptions {
    double horizon = 1e7;
    double relative_resolution = 1e-4;
    std::size_t size_cap = kExactSizeCap;
};

struct MixingResult {
    double time = 0.0;
    double deviation = 0.0; // achieved sup deviation at `time`
    std::size_t grid_cells = 0;
};

MixingResult estimate_mixing_time(const MigrationKernel& kernel, double epsilon, const MixingOptions& options = {});

// Smallest non-zero eigenvalue gap of the (symmetrised) generator, from the characters
// of the group. Used for relaxation-time estimates.
double spectral_gap(const MigrationKernel& kernel);

// Eigenvalue lambda(xi) = sum_j a(0,j) (chi_xi(j) - 1) for every character, indexed like
// the sites (xi has the same digit structure). Real part only is returned for symmetric
// kernels; in general the full complex value is reduced to its real part, which is what
// return probabilities need.
std::vector<double> character_eigenvalues(const MigrationKernel& kernel);

} // namespace seedbank
