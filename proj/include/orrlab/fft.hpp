#ifndef ORRLAB_FFT_HPP
#define ORRLAB_FFT_HPP

// FFTW-backed transforms between SpectralField and physical sample arrays,
// plus dealiased (2/3-rule) pointwise products. Physical arrays are complex,
// size N_z x N_v, in wrapped (FFT) ordering; see grid.hpp for conventions.

#include <fftw3.h>

#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "orrlab/grid.hpp"

namespace orrlab {

inline int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace detail {

// 1D FFT helpers on the v lattice (slot ordering), unnormalized; plans are
// cached per (size, sign) and created FFTW_UNALIGNED so they can run in place
// on any buffer
inline std::vector<cplx> fft1d(std::vector<cplx> a, int sign) {
    static std::map<std::pair<int, int>, fftw_plan> cache;
    auto key = std::make_pair((int)a.size(), sign);
    auto it = cache.find(key);
    if (it == cache.end()) {
        std::vector<cplx> probe(a.size());
        fftw_plan pl = fftw_plan_dft_1d((int)a.size(),
                                        reinterpret_cast<fftw_complex*>(probe.data()),
                                        reinterpret_cast<fftw_complex*>(probe.data()), sign,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
        it = cache.emplace(key, pl).first;
    }
    fftw_execute_dft(it->second, reinterpret_cast<fftw_complex*>(a.data()),
                     reinterpret_cast<fftw_complex*>(a.data()));
    return a;
}

// physical samples of a single spectral row (wrapped v ordering)
inline std::vector<cplx> row_to_physical(const Grid& g, const cplx* row) {
    std::vector<cplx> a(row, row + g.N_v);
    for (auto& z : a) z *= g.dxi();
    return fft1d(std::move(a), FFTW_BACKWARD);
}

// inverse of row_to_physical: spectral coefficients of one row from samples
inline std::vector<cplx> row_to_spectral(const Grid& g, const std::vector<cplx>& phys) {
    std::vector<cplx> a = fft1d(phys, FFTW_FORWARD);
    const double scale = 1.0 / ((double)g.N_v * g.dxi());
    for (auto& z : a) z *= scale;
    return a;
}

}  // namespace detail

class FftWorkspace {
  public:
    Grid grid;
    int N_z;

    explicit FftWorkspace(const Grid& g)
        : grid(g), N_z(next_pow2(std::max(8, 3 * g.K_z + 1))), buf_(N_z * (size_t)g.N_v) {
        fwd_ = fftw_plan_dft_2d(N_z, g.N_v, reinterpret_cast<fftw_complex*>(buf_.data()),
                                reinterpret_cast<fftw_complex*>(buf_.data()), FFTW_FORWARD,
                                FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(N_z, g.N_v, reinterpret_cast<fftw_complex*>(buf_.data()),
                                reinterpret_cast<fftw_complex*>(buf_.data()), FFTW_BACKWARD,
                                FFTW_ESTIMATE);
    }
    ~FftWorkspace() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
    }
    FftWorkspace(const FftWorkspace&) = delete;
    FftWorkspace& operator=(const FftWorkspace&) = delete;

    double z_coord(int i) const { return (i <= N_z / 2 ? i : i - N_z) * (2 * M_PI / N_z); }

    // physical samples P[i*N_v + j] = F(z_i, v_j)
    std::vector<cplx> to_physical(const SpectralField& F) {
        std::fill(buf_.begin(), buf_.end(), cplx(0, 0));
        const double dxi = grid.dxi();
        for (int k = -grid.K_z; k <= grid.K_z; ++k) {
            int kr = k >= 0 ? k : k + N_z;
            const cplx* src = F.row(k);
            cplx* dst = buf_.data() + (size_t)kr * grid.N_v;
            for (int j = 0; j < grid.N_v; ++j) dst[j] = src[j] * dxi;
        }
        fftw_execute(bwd_);
        return buf_;
    }

    SpectralField to_spectral(const std::vector<cplx>& P, bool real_sym = true,
                              bool apply_dealias = true) {
        buf_ = P;
        fftw_execute(fwd_);
        SpectralField F(grid, real_sym);
        const double scale = 1.0 / ((double)N_z * grid.N_v * grid.dxi());
        const int jcut = apply_dealias ? (int)(grid.dealias * (grid.N_v / 2)) : grid.N_v / 2;
        for (int k = -grid.K_z; k <= grid.K_z; ++k) {
            int kr = k >= 0 ? k : k + N_z;
            const cplx* src = buf_.data() + (size_t)kr * grid.N_v;
            cplx* dst = F.row(k);
            for (int j = 0; j < grid.N_v; ++j)
                if (std::abs(grid.xi_index(j)) <= jcut) dst[j] = src[j] * scale;
        }
        return F;
    }

    // dealiased pointwise product
    SpectralField multiply(const SpectralField& A, const SpectralField& B) {
        std::vector<cplx> Pa = to_physical(A);
        std::vector<cplx> Pb = to_physical(B);
        for (size_t i = 0; i < Pa.size(); ++i) Pa[i] *= Pb[i];
        return to_spectral(Pa, A.real_symmetric && B.real_symmetric);
    }

    // iint F dz dv by quadrature of physical samples
    cplx integral(const std::vector<cplx>& P) const {
        cplx s = 0;
        for (const auto& z : P) s += z;
        return s * (2 * M_PI / N_z) * (grid.L_v / grid.N_v);
    }

  private:
    std::vector<cplx> buf_;
    fftw_plan fwd_, bwd_;
};

}  // namespace orrlab

#endif
