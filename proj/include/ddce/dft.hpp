#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace ddce {

/// Unitary DFT pair (1/sqrt(N) scaling both ways), matrix based.
/// Sizes in this project are small (K = 64), so a cached matrix multiply is
/// both fast enough and bit-reproducible across runs.
class UnitaryDft {
  public:
    explicit UnitaryDft(int n) : n_(n), fwd_(n, n), inv_(n, n) {
        const double s = 1.0 / std::sqrt(static_cast<double>(n));
        for (int k = 0; k < n; ++k)
            for (int m = 0; m < n; ++m) {
                const double ph = -2.0 * std::numbers::pi * k * m / n;
                fwd_(k, m) = s * std::complex<double>(std::cos(ph), std::sin(ph));
                inv_(m, k) = s * std::complex<double>(std::cos(ph), -std::sin(ph));
            }
    }

    /// X[k] = (1/sqrt(N)) sum_m x[m] e^{-j 2 pi m k / N}
    Eigen::VectorXcd forward(const Eigen::VectorXcd& x) const { return fwd_ * x; }
    /// x[m] = (1/sqrt(N)) sum_k X[k] e^{+j 2 pi m k / N}
    Eigen::VectorXcd inverse(const Eigen::VectorXcd& x) const { return inv_ * x; }

    const Eigen::MatrixXcd& forward_matrix() const { return fwd_; }
    const Eigen::MatrixXcd& inverse_matrix() const { return inv_; }
    int size() const { return n_; }

  private:
    int n_;
    Eigen::MatrixXcd fwd_, inv_;
};

/// splitmix64 step; used to derive independent substream seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
    return mix_seed(mix_seed(base ^ 0x5851f42d4c957f2dULL * stream) + index);
}

}  // namespace ddce
