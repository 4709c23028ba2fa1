#include "bcsr/basis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <queue>
#include <sstream>
#include <thread>

#include <lapacke.h>

#include "bcsr/errors.hpp"

namespace bcsr {
namespace {

constexpr char kMagic[8] = {'B', 'C', 'S', 'R', 'B', 'A', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "basis cache assumes a little-endian host");

bool connected(const SparseMatrix& W) {
  const Index n = W.rows();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<Index> todo;
  todo.push(0);
  seen[0] = 1;
  Index count = 1;
  while (!todo.empty()) {
    const Index i = todo.front();
    todo.pop();
    for (SparseMatrix::InnerIterator it(W, i); it; ++it) {
      if (!seen[static_cast<std::size_t>(it.index())]) {
        seen[static_cast<std::size_t>(it.index())] = 1;
        ++count;
        todo.push(it.index());
      }
    }
  }
  return count == n;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  if (v(best) < 0) v = -v;
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw FormatError("basis cache " + path.string() + " is truncated");
  }
  return value;
}

GraphBasis graph_parts(const SparseMatrix& W) {
  GraphBasis out;
  out.adjacency = W;
  out.degree = Eigen::VectorXd::Zero(W.rows());
  for (Index j = 0; j < W.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(W, j); it; ++it) out.degree(j) += it.value();
  }
  SparseMatrix D(W.rows(), W.cols());
  D.reserve(Eigen::VectorXi::Constant(W.cols(), 1));
  for (Index i = 0; i < W.rows(); ++i) D.insert(i, i) = out.degree(i);
  out.laplacian = D - W;
  return out;
}

void check_pairs(const GraphBasis& basis) {
  const Index nb = basis.size();
  const double ortho =
      (basis.vectors.transpose() * basis.vectors - Eigen::MatrixXd::Identity(nb, nb)).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-10)) {
    std::ostringstream msg;
    msg << "eigenbasis not orthonormal: max |B^T B - I| = " << ortho;
    throw SolverError(msg.str());
  }
  const Eigen::MatrixXd R = basis.laplacian * basis.vectors - basis.vectors * basis.eigenvalues.asDiagonal();
  const double worst = R.colwise().norm().maxCoeff();
  if (!(worst < 1e-8)) {
    std::ostringstream msg;
    msg << "eigenpair residual " << worst << " exceeds 1e-8";
    throw SolverError(msg.str());
  }
}

}  // namespace

SparseMatrix build_adjacency(const Mesh& mesh) {
  const int k = mesh.dimension() + 1;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_elements() * k * (k - 1)));
  for (Index e = 0; e < mesh.num_elements(); ++e) {
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        if (a != b) triplets.emplace_back(mesh.elements()(e, a), mesh.elements()(e, b), 1.0);
      }
    }
  }
  SparseMatrix W(mesh.num_nodes(), mesh.num_nodes());
  // Duplicate edges from neighbouring elements collapse to a single 1.
  W.setFromTriplets(triplets.begin(), triplets.end(), [](double, double) { return 1.0; });
  return W;
}

GraphBasis GraphBasis::truncated(Index n_b) const {
  if (n_b < 1 || n_b > size()) {
    throw InputError("cannot truncate a basis of " + std::to_string(size()) + " modes to " + std::to_string(n_b));
  }
  GraphBasis out = *this;
  out.eigenvalues = eigenvalues.head(n_b);
  out.vectors = vectors.leftCols(n_b);
  return out;
}

GraphBasis build_basis(const SparseMatrix& adjacency, Index n_b) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n || n < 1) throw InputError("adjacency must be a non-empty square matrix");
  if (n_b < 1 || n_b > n) {
    throw InputError("N_b = " + std::to_string(n_b) + " outside [1, " + std::to_string(n) + "]");
  }
  if (!connected(adjacency)) {
    throw ValidationError("node connectivity graph is disconnected; the Laplacian has a repeated zero eigenvalue");
  }
  GraphBasis out = graph_parts(adjacency);

  Eigen::MatrixXd dense = Eigen::MatrixXd(out.laplacian);
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, n_b);
  std::vector<lapack_int> support(static_cast<std::size_t>(2 * n_b));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', static_cast<lapack_int>(n), dense.data(),
                                         static_cast<lapack_int>(n), 0.0, 0.0, 1, static_cast<lapack_int>(n_b), 0.0,
                                         &found, w.data(), z.data(), static_cast<lapack_int>(n), support.data());
  if (info != 0 || found != n_b) {
    throw SolverError("dsyevr failed (info = " + std::to_string(info) + ", found " + std::to_string(found) + " of " +
                      std::to_string(n_b) + " eigenpairs)");
  }
  out.eigenvalues = w.head(n_b);
  out.vectors = std::move(z);
  for (Index j = 0; j < n_b; ++j) fix_sign(out.vectors.col(j));
  check_pairs(out);
  return out;
}

Index default_truncation(Index num_nodes, TruncationRegime regime) {
  const double fraction = regime == TruncationRegime::tank ? 0.05 : 0.1;
  const auto n_b = static_cast<Index>(std::llround(fraction * static_cast<double>(num_nodes)));
  return std::clamp<Index>(n_b, 1, std::max<Index>(num_nodes, 1));
}

void save_basis_cache(const std::filesystem::path& path, std::uint64_t fingerprint, const GraphBasis& basis) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling and rename so concurrent readers never see a partial file.
  std::ostringstream suffix;
  suffix << ".tmp" << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const std::filesystem::path tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write basis cache " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, fingerprint);
    write_pod(out, static_cast<std::uint64_t>(basis.num_nodes()));
    write_pod(out, static_cast<std::uint64_t>(basis.size()));
    out.write(reinterpret_cast<const char*>(basis.vectors.data()),
              static_cast<std::streamsize>(basis.vectors.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(basis.eigenvalues.data()),
              static_cast<std::streamsize>(basis.eigenvalues.size() * sizeof(double)));
    if (!out) throw InputError("failed writing basis cache " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<GraphBasis> load_basis_cache(const std::filesystem::path& path, std::uint64_t fingerprint,
                                           const Mesh& mesh, Index n_b) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw FormatError("basis cache " + path.string() + " has a bad magic number");
  }
  if (read_pod<std::uint32_t>(in, path) != kVersion) return std::nullopt;
  const auto fp = read_pod<std::uint64_t>(in, path);
  const auto n = read_pod<std::uint64_t>(in, path);
  const auto nb = read_pod<std::uint64_t>(in, path);
  if (fp != fingerprint || n != static_cast<std::uint64_t>(mesh.num_nodes()) ||
      nb != static_cast<std::uint64_t>(n_b)) {
    return std::nullopt;
  }
  GraphBasis out = graph_parts(build_adjacency(mesh));
  out.vectors.resize(static_cast<Index>(n), static_cast<Index>(nb));
  out.eigenvalues.resize(static_cast<Index>(nb));
  in.read(reinterpret_cast<char*>(out.vectors.data()), static_cast<std::streamsize>(out.vectors.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(out.eigenvalues.data()),
          static_cast<std::streamsize>(out.eigenvalues.size() * sizeof(double)));
  if (!in) throw FormatError("basis cache " + path.string() + " is truncated");
  return out;
}

GraphBasis basis_for_mesh(const Mesh& mesh, Index n_b, std::optional<std::filesystem::path> cache_dir) {
  if (!cache_dir) {
    if (const char* env = std::getenv("BCSR_CACHE_DIR"); env != nullptr && *env != '\0') cache_dir = env;
  }
  std::filesystem::path file;
  if (cache_dir) {
    std::ostringstream name;
    name << "basis_" << std::hex << mesh.fingerprint() << std::dec << "_" << n_b << ".bin";
    file = *cache_dir / name.str();
    if (auto cached = load_basis_cache(file, mesh.fingerprint(), mesh, n_b)) return *std::move(cached);
  }
  GraphBasis basis = build_basis(build_adjacency(mesh), n_b);
  if (cache_dir) save_basis_cache(file, mesh.fingerprint(), basis);
  return basis;
}

}  // namespace bcsr
