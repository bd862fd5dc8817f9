#pragma once

// Thin FFTW wrapper: 64-byte aligned buffers and a process-wide cache of
// real-to-complex plans keyed by (dim, n). Plans are created with
// FFTW_ESTIMATE so that the transform (and therefore every downstream
// number) is bitwise reproducible from run to run.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <utility>
#include <vector>

namespace vdlab {

template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), alignment));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Complex = std::complex<double>;
using RealBuffer = std::vector<double, AlignedAllocator<double>>;
using ComplexBuffer = std::vector<Complex, AlignedAllocator<Complex>>;

namespace detail {

class FftPlan {
 public:
  FftPlan(int dim, int n) : dim_(dim), n_(n) {
    real_size_ = 1;
    for (int a = 0; a < dim; ++a) real_size_ *= static_cast<std::size_t>(n);
    spec_size_ = real_size_ / static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1);
    RealBuffer r(real_size_);
    ComplexBuffer c(spec_size_);
    int dims[3] = {n, n, n};
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    forward_ = fftw_plan_dft_r2c(dim, dims, r.data(), cp, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r(dim, dims, cp, r.data(), FFTW_ESTIMATE);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::size_t real_size() const { return real_size_; }
  std::size_t spectral_size() const { return spec_size_; }

  // out[k] = (1/n^dim) sum_x in[x] exp(-i k.x)
  void forward(const double* in, Complex* out) const {
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
    const double scale = 1.0 / static_cast<double>(real_size_);
    for (std::size_t s = 0; s < spec_size_; ++s) out[s] *= scale;
  }

  // out[x] = sum_k in[k] exp(+i k.x); `in` is left untouched.
  void inverse(const Complex* in, double* out) const {
    thread_local ComplexBuffer scratch;
    scratch.assign(in, in + spec_size_);
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(scratch.data()), out);
  }

 private:
  int dim_;
  int n_;
  std::size_t real_size_;
  std::size_t spec_size_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

inline const FftPlan& plan_for(int dim, int n) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<FftPlan>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{dim, n}];
  if (!slot) slot = std::make_unique<FftPlan>(dim, n);
  return *slot;
}

}  // namespace detail
}  // namespace vdlab
