#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "bcsr/mesh.hpp"

namespace bcsr {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Unweighted node adjacency: W(i, j) = 1 iff i and j share an element edge.
SparseMatrix build_adjacency(const Mesh& mesh);

/// Low-frequency eigenbasis of the graph Laplacian L = D - W.
struct GraphBasis {
  SparseMatrix adjacency;
  Eigen::VectorXd degree;
  SparseMatrix laplacian;
  Eigen::VectorXd eigenvalues;  ///< ascending, length N_b
  Eigen::MatrixXd vectors;      ///< B, N x N_b, orthonormal columns

  Index num_nodes() const noexcept { return vectors.rows(); }
  Index size() const noexcept { return vectors.cols(); }

  /// First `n_b` modes of this basis (a prefix; same sign convention).
  GraphBasis truncated(Index n_b) const;
};

/// Smallest `n_b` eigenpairs of D - W. Each eigenvector is normalised and
/// signed so that its largest-magnitude entry is positive (lowest index on
/// ties). Throws InputError for n_b outside [1, N], ValidationError for a
/// disconnected graph, SolverError if the eigensolver fails or the computed
/// pairs miss the orthonormality / residual tolerances.
GraphBasis build_basis(const SparseMatrix& adjacency, Index n_b);

enum class TruncationRegime { tank, simulation };

/// round(f * N) clamped to [1, N], with f = 0.05 (tank) or 0.1 (simulation).
Index default_truncation(Index num_nodes, TruncationRegime regime);

/// Binary cache: "BCSRBAS1" magic, u32 version, u64 mesh fingerprint,
/// u64 N, u64 N_b, then B column-major and the eigenvalues as little-endian
/// doubles.
void save_basis_cache(const std::filesystem::path& path, std::uint64_t fingerprint, const GraphBasis& basis);

/// Returns the cached eigenpairs when the header matches `fingerprint`, N and
/// N_b; nullopt when the file is absent or was written for something else.
/// Throws FormatError for a truncated or corrupt file.
std::optional<GraphBasis> load_basis_cache(const std::filesystem::path& path, std::uint64_t fingerprint,
                                           const Mesh& mesh, Index n_b);

/// build_basis(build_adjacency(mesh), n_b), going through the cache directory
/// `cache_dir` when given, else $BCSR_CACHE_DIR when set.
GraphBasis basis_for_mesh(const Mesh& mesh, Index n_b,
                          std::optional<std::filesystem::path> cache_dir = std::nullopt);

}  // namespace bcsr
